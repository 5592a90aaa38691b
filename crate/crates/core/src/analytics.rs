//! Closed-form variances, Fisher information, crossover points and copy
//! overheads of the overlap estimation strategies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::stats::{compensated_sum, LnFactorials};
use crate::strategies::{OstPhysics, Strategy};
use crate::streams::{stream, TAG_FISHER};
use crate::tomography::KAPPA_MUB;

/// Default Monte Carlo sample count of the TP Fisher information.
pub const TP_FISHER_SAMPLES: usize = 100_000;
/// Default master seed of the TP Fisher information.
pub const TP_FISHER_SEED: u64 = 0x7470_6669;
/// Width of the bisection bracket at which [`crossover`] stops.
pub const CROSSOVER_TOLERANCE: f64 = 1e-12;

const CROSSOVER_SCAN: usize = 1000;
const FISHER_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    /// Scaled average infidelity κ of the tomography scheme.
    pub kappa: f64,
    pub gamma: f64,
    pub eta: f64,
    pub dim: usize,
}

impl Default for TheoryParams {
    fn default() -> Self {
        TheoryParams {
            kappa: KAPPA_MUB,
            gamma: 1.0,
            eta: 0.5,
            dim: 2,
        }
    }
}

impl TheoryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::domain(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::domain(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::domain(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if self.dim < 2 {
            return Err(Error::domain(format!("dimension must be >= 2, got {}", self.dim)));
        }
        Ok(())
    }

    /// Swap-test physics implied by these parameters (PPNRD at a balanced splitter).
    pub fn ost_physics(&self) -> OstPhysics {
        let balanced = OstPhysics {
            gamma: self.gamma,
            eta: self.eta,
            ppnrd: false,
        }
        .is_balanced();
        OstPhysics {
            gamma: self.gamma,
            eta: self.eta,
            ppnrd: balanced,
        }
    }
}

fn check_overlap(c: f64) -> Result<()> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(Error::domain(format!("overlap must lie in [0, 1], got {c}")))
    }
}

fn check_copies(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("copy number must be >= 1"));
    }
    Ok(())
}

/// Variance of a single estimate on `n` pairs.
///
/// TT `4κc(1-c)/n`, TP `(2κ+1)c(1-c)/n`, SCM (and qudit SCM) `(1-c²)/n`,
/// OST `(3-Γc)(1-Γ²c²)/(2nΓ²)`. The adaptive protocol has no closed form.
pub fn theory_variance(strategy: Strategy, c: f64, n: usize, params: &TheoryParams) -> Result<f64> {
    check_overlap(c)?;
    check_copies(n)?;
    params.validate()?;
    let n = n as f64;
    let (k, g) = (params.kappa, params.gamma);
    match strategy {
        Strategy::Tt => Ok(4.0 * k * c * (1.0 - c) / n),
        Strategy::Tp => Ok((2.0 * k + 1.0) * c * (1.0 - c) / n),
        Strategy::Scm | Strategy::ScmQudit => Ok((1.0 - c * c) / n),
        Strategy::Ost => Ok((3.0 - g * c) * (1.0 - g * g * c * c) / (2.0 * n * g * g)),
        Strategy::Adaptive => Err(Error::domain("no closed-form variance for ADAPTIVE")),
    }
}

/// Variance of the corrected swap-test estimator with binomial fail counts
/// (no PPNRD), `p_f(1-p_f) / (n (2η(1-η)Γ)²)`.
pub fn ost_binomial_variance(c: f64, n: usize, physics: &OstPhysics) -> Result<f64> {
    check_overlap(c)?;
    check_copies(n)?;
    let p = homi_fail_probability(c, physics);
    let scale = 2.0 * physics.eta * (1.0 - physics.eta) * physics.gamma;
    Ok(p * (1.0 - p) / (n as f64 * scale * scale))
}

/// Variance matching the swap-test model actually simulated for `physics`.
pub fn ost_variance(c: f64, n: usize, physics: &OstPhysics) -> Result<f64> {
    if physics.ppnrd {
        let params = TheoryParams {
            gamma: physics.gamma,
            eta: physics.eta,
            ..TheoryParams::default()
        };
        theory_variance(Strategy::Ost, c, n, &params)
    } else {
        ost_binomial_variance(c, n, physics)
    }
}

/// Tomography and projection contributions `(v_tomo, v_proj)` of the separable strategies.
pub fn decompose_separable(c: f64, n: usize, params: &TheoryParams) -> Result<(f64, f64)> {
    check_overlap(c)?;
    check_copies(n)?;
    params.validate()?;
    let n = n as f64;
    let spread = c * (1.0 - c);
    Ok((
        2.0 * params.kappa * spread / ((params.dim - 1) as f64 * n),
        spread / n,
    ))
}

/// Per-pair Fisher information of `strategy` at overlap `c`.
///
/// TP has no closed form; it is evaluated by [`tp_fisher_information`] with
/// [`TP_FISHER_SAMPLES`] samples and the fixed seed [`TP_FISHER_SEED`].
pub fn fisher_information(strategy: Strategy, c: f64, n: usize, params: &TheoryParams) -> Result<f64> {
    check_overlap(c)?;
    check_copies(n)?;
    params.validate()?;
    let interior = c > 0.0 && c < 1.0;
    match strategy {
        Strategy::Scm | Strategy::ScmQudit if c < 1.0 => Ok(1.0 / (1.0 - c * c)),
        Strategy::Ost if c < 1.0 => {
            let g = params.gamma;
            Ok(2.0 * g * g / ((3.0 - g * c) * (1.0 - g * g * c * c)))
        }
        Strategy::Tt if interior => Ok(1.0 / (4.0 * params.kappa * c * (1.0 - c))),
        Strategy::Tp if interior => tp_fisher_information(
            c,
            n,
            params.kappa,
            TP_FISHER_SAMPLES,
            TP_FISHER_SEED,
            Execution::default(),
        ),
        Strategy::Adaptive => Err(Error::domain("no Fisher information model for ADAPTIVE")),
        _ => Err(Error::domain(format!("Fisher information of {strategy} is singular at c = {c}"))),
    }
}

/// Per-pair Fisher information of TP under a Gaussian tomography-error model.
///
/// The projection count is `k ~ Bin(n, p)` with `p = c + √(c(1-c))·t` and
/// `t ~ Normal(0, 2κ/n)`. The mixture likelihood `P(k|c)` and its derivative
/// are averaged over `samples` draws of `t`; the result is
/// `Σ_k (∂P/∂c)² / P / n`.
pub fn tp_fisher_information(
    c: f64,
    n: usize,
    kappa: f64,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::domain(format!("TP Fisher information needs c in (0, 1), got {c}")));
    }
    check_copies(n)?;
    if kappa.is_nan() || kappa <= 0.0 {
        return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
    }
    if samples == 0 {
        return Err(Error::domain("TP Fisher information needs at least one sample"));
    }
    let lnf = LnFactorials::new(n);
    let sd = (2.0 * kappa / n as f64).sqrt();
    let root = (c * (1.0 - c)).sqrt();
    let slope = (1.0 - 2.0 * c) / (2.0 * root);
    let nf = n as f64;
    let chunks = samples.div_ceil(FISHER_CHUNK);

    let partial = exec.map(chunks, |chunk| {
        let mut rng = stream(seed, &[TAG_FISHER, chunk as u64]);
        let (mut like, mut deriv) = (vec![0.0; n + 1], vec![0.0; n + 1]);
        let count = FISHER_CHUNK.min(samples - chunk * FISHER_CHUNK);
        for _ in 0..count {
            let t = sd * standard_normal(&mut rng);
            let p = (c + root * t).clamp(1e-12, 1.0 - 1e-12);
            let dp = 1.0 + slope * t;
            let spread = (nf * p * (1.0 - p)).sqrt();
            let lo = (nf * p - 12.0 * spread - 1.0).floor().max(0.0) as usize;
            let hi = ((nf * p + 12.0 * spread + 1.0).ceil() as usize).min(n);
            for k in lo..=hi {
                let pmf = lnf.binomial_pmf(n, k, p);
                let kf = k as f64;
                like[k] += pmf;
                deriv[k] += pmf * (kf / p - (nf - kf) / (1.0 - p)) * dp;
            }
        }
        (like, deriv)
    });

    let total = samples as f64;
    let terms = (0..=n).filter_map(|k| {
        let p = compensated_sum(partial.iter().map(|(l, _)| l[k])) / total;
        let d = compensated_sum(partial.iter().map(|(_, d)| d[k])) / total;
        (p > 0.0).then(|| d * d / p)
    });
    Ok(compensated_sum(terms) / nf)
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}

/// Fail probability `1 - 2η + 2η² - 2η(1-η)Γc` of two-photon interference.
pub fn homi_fail_probability(c: f64, physics: &OstPhysics) -> f64 {
    let eta = physics.eta;
    1.0 - 2.0 * eta + 2.0 * eta * eta - 2.0 * eta * (1.0 - eta) * physics.gamma * c
}

/// Unbiased overlap estimate from `k_f` fails in `n` binomial rounds.
pub fn corrected_ost_estimator(k_f: u64, n: u64, physics: &OstPhysics) -> f64 {
    let eta = physics.eta;
    let scale = 2.0 * eta * (1.0 - eta) * physics.gamma;
    (1.0 - 2.0 * eta + 2.0 * eta * eta) / scale - k_f as f64 / (scale * n as f64)
}

fn check_dimension(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::domain(format!("dimension must be >= 2, got {d}")));
    }
    Ok(())
}

/// Variance of TT and TP for qudits with tomography infidelity scale `κ_d`.
pub fn highdim_variance(strategy: Strategy, c: f64, n: usize, d: usize, kappa_d: f64) -> Result<f64> {
    check_overlap(c)?;
    check_copies(n)?;
    check_dimension(d)?;
    if kappa_d.is_nan() || kappa_d <= 0.0 {
        return Err(Error::domain(format!("kappa_d must be positive, got {kappa_d}")));
    }
    let (nf, dm1, spread) = (n as f64, (d - 1) as f64, c * (1.0 - c));
    match strategy {
        Strategy::Tt => Ok(4.0 * kappa_d * spread / (dm1 * nf)),
        Strategy::Tp => Ok((2.0 * kappa_d / dm1 + 1.0) * spread / nf),
        other => Err(Error::domain(format!("high-dimensional variance is defined for TT and TP, not {other}"))),
    }
}

/// Exact mean squared error of TT and TP with optimal joint tomography on `n` copies.
pub fn limited_copy_mse(strategy: Strategy, c: f64, n: usize, d: usize) -> Result<f64> {
    check_overlap(c)?;
    check_copies(n)?;
    check_dimension(d)?;
    let (n, d) = (n as f64, d as f64);
    match strategy {
        Strategy::Tt => {
            let bracket = (c * (c * d - 2.0) * (d + 1.0) + 2.0) * (2.0 * n + d + 1.0)
                + 2.0 * c * (1.0 - c) * n * n;
            let denom = (n + d).powi(2) * (n + d + 1.0).powi(2);
            Ok((2.0 * n + d) * bracket / denom)
        }
        Strategy::Tp => {
            let num = c * c * (d * d * n + d * n - 3.0 * n * n + n)
                + c * (3.0 * n * n - d * n - 5.0 * n)
                + 3.0 * n
                + d
                - 1.0;
            Ok(num / (n * (n + d) * (n + d + 1.0)))
        }
        other => Err(Error::domain(format!("limited-copy MSE is defined for TT and TP, not {other}"))),
    }
}

/// Scaled variance `n·v(c)`, which does not depend on `n`.
pub fn scaled_variance(strategy: Strategy, c: f64, params: &TheoryParams) -> Result<f64> {
    theory_variance(strategy, c, 1, params)
}

/// Interior overlap at which the scaled variances of two strategies cross.
///
/// The curves are scanned on a uniform interior grid; exactly one sign change
/// is required and then refined by bisection.
pub fn crossover(a: Strategy, b: Strategy, params: &TheoryParams) -> Result<f64> {
    let g = |c: f64| -> Result<f64> { Ok(scaled_variance(a, c, params)? - scaled_variance(b, c, params)?) };
    let none = || Error::NoCrossover {
        a: a.to_string(),
        b: b.to_string(),
    };
    let mut brackets = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for i in 1..CROSSOVER_SCAN {
        let c = i as f64 / CROSSOVER_SCAN as f64;
        let v = g(c)?;
        if v == 0.0 {
            continue;
        }
        if let Some((lc, lv)) = last {
            if (lv > 0.0) != (v > 0.0) {
                brackets.push((lc, c));
            }
        }
        last = Some((c, v));
    }
    match brackets.as_slice() {
        [] => Err(none()),
        [(lo, hi)] => {
            let (mut lo, mut hi) = (*lo, *hi);
            let g_lo = g(lo)?;
            while hi - lo > CROSSOVER_TOLERANCE {
                let mid = 0.5 * (lo + hi);
                let v = g(mid)?;
                if v == 0.0 {
                    return Ok(mid);
                }
                if (v > 0.0) == (g_lo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        }
        _ => Err(Error::domain(format!(
            "{a} and {b} cross {} times on (0, 1)",
            brackets.len()
        ))),
    }
}

/// Pairs needed so that `P(|ĉ - c| ≥ ε) ≤ η` by Chebyshev: `⌈f(c) / (η ε²)⌉`.
pub fn copy_overhead(
    strategy: Strategy,
    c: f64,
    epsilon: f64,
    eta_prob: f64,
    params: &TheoryParams,
) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(eta_prob > 0.0 && eta_prob < 1.0) {
        return Err(Error::domain(format!("failure probability must lie in (0, 1), got {eta_prob}")));
    }
    let x = scaled_variance(strategy, c, params)? / (eta_prob * epsilon * epsilon);
    // rounding noise must not push an exact integer to the next one
    let r = x.round();
    let n = if (x - r).abs() <= 1e-9 * r.max(1.0) { r } else { x.ceil() };
    Ok(n as u64)
}
