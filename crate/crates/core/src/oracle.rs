//! Exact moments of the strategy estimators by brute-force enumeration on
//! small instances, and Haar-ensemble averaging of pair-level quantities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::quantum::{overlap, sample_pair, FixedOverlapPair, PureState};
use crate::stats::{compensated_sum, sample_std, LnFactorials};
use crate::strategies::{run_strategy, OstPhysics, Strategy, StrategyParams};
use crate::streams::{stream, TAG_ENSEMBLE, TAG_ESTIMATE, TAG_PAIR};
use crate::tomography::{copies_per_basis, mub_probabilities, reconstruct, MubCounts};
use crate::analytics::corrected_ost_estimator;

/// Largest copies-per-basis enumerated for TT (`(N'+1)⁶` outcomes).
pub const TT_MAX_PER_BASIS: u64 = 4;
/// Largest copies-per-basis enumerated for TP.
pub const TP_MAX_PER_BASIS: u64 = 10;
/// Largest swap-test budget whose PMF is enumerated.
pub const OST_MAX_PAIRS: usize = 10_000;
/// Smallest ensemble accepted by [`average_over_ensemble`].
pub const MIN_ENSEMBLE: usize = 100;

/// Exact moments of an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub mean: f64,
    /// Central variance `E[(ĉ - E ĉ)²]`.
    pub variance: f64,
    /// Mean squared error about the true overlap, `E[(ĉ - c)²]`.
    pub mse: f64,
    /// Number of enumerated outcomes.
    pub support_size: u64,
    /// Total enumerated probability.
    pub probability_mass: f64,
}

impl ExactResult {
    fn from_weighted(values: &[(f64, f64)], c: f64, support_size: u64) -> Self {
        let mass = compensated_sum(values.iter().map(|&(_, p)| p));
        let mean = compensated_sum(values.iter().map(|&(x, p)| p * x)) / mass;
        let variance = compensated_sum(values.iter().map(|&(x, p)| p * (x - mean) * (x - mean))) / mass;
        let mse = compensated_sum(values.iter().map(|&(x, p)| p * (x - c) * (x - c))) / mass;
        ExactResult {
            mean,
            variance,
            mse,
            support_size,
            probability_mass: mass,
        }
    }
}

/// Every MUB outcome of `n_total/3` copies per basis with its probability.
fn tomography_outcomes(psi: &PureState, per_basis: u64) -> Result<Vec<(PureState, f64)>> {
    let [px, py, pz] = mub_probabilities(psi)?;
    let n = per_basis as usize;
    let lnf = LnFactorials::new(n);
    let mut out = Vec::with_capacity((n + 1).pow(3));
    for nx in 0..=n {
        let wx = lnf.binomial_pmf(n, nx, px);
        for ny in 0..=n {
            let wy = lnf.binomial_pmf(n, ny, py);
            for nz in 0..=n {
                let w = wx * wy * lnf.binomial_pmf(n, nz, pz);
                let counts = MubCounts {
                    n_x: nx as u64,
                    n_y: ny as u64,
                    n_z: nz as u64,
                    n_per_basis: per_basis,
                };
                out.push((reconstruct(&counts), w));
            }
        }
    }
    Ok(out)
}

fn check_per_basis(what: &'static str, n: usize, limit: u64, power: u32) -> Result<u64> {
    let per_basis = copies_per_basis(n)?;
    if per_basis > limit {
        return Err(Error::EnumerationBound {
            what,
            required: (per_basis + 1).pow(power),
            limit: (limit + 1).pow(power),
        });
    }
    Ok(per_basis)
}

/// Exact moments of the TT estimator for one pair, enumerating both tomography records.
pub fn exact_tt_variance(pair: &FixedOverlapPair, n: usize) -> Result<ExactResult> {
    let per_basis = check_per_basis("TT tomography outcomes", n, TT_MAX_PER_BASIS, 6)?;
    let psi = tomography_outcomes(&pair.psi, per_basis)?;
    let phi = tomography_outcomes(&pair.phi, per_basis)?;
    let mut values = Vec::with_capacity(psi.len() * phi.len());
    for (a, wa) in &psi {
        for (b, wb) in &phi {
            values.push((overlap(a, b)?, wa * wb));
        }
    }
    Ok(ExactResult::from_weighted(&values, pair.exact_overlap(), values.len() as u64))
}

/// Exact moments of the TP estimator for one pair.
///
/// Tomography records of `φ` are enumerated; the projection count is summed
/// in closed form, `E[k/n] = p` and `E[(k/n - x)²] = p(1-p)/n + (p - x)²`.
pub fn exact_tp_variance(pair: &FixedOverlapPair, n: usize) -> Result<ExactResult> {
    let per_basis = check_per_basis("TP tomography outcomes", n, TP_MAX_PER_BASIS, 3)?;
    let c = pair.exact_overlap();
    let records = tomography_outcomes(&pair.phi, per_basis)?;
    let nf = n as f64;
    let mut projections = Vec::with_capacity(records.len());
    for (est, w) in &records {
        projections.push((overlap(&pair.psi, est)?, *w));
    }
    let mass = compensated_sum(projections.iter().map(|&(_, w)| w));
    let mean = compensated_sum(projections.iter().map(|&(p, w)| w * p)) / mass;
    let spread = |x: f64| {
        compensated_sum(projections.iter().map(|&(p, w)| w * (p * (1.0 - p) / nf + (p - x) * (p - x)))) / mass
    };
    Ok(ExactResult {
        mean,
        variance: spread(mean),
        mse: spread(c),
        support_size: records.len() as u64 * (n as u64 + 1),
        probability_mass: mass,
    })
}

/// PMF of the fail count of the PPNRD swap test on `n` pairs, as `(k_f, probability)`.
///
/// Even `k_f` ends exactly at `n` pairs, `C((n+k_f)/2, k_f) p_F^{k_f} p_P^{(n-k_f)/2}`;
/// odd `k_f` ends at `n+1` with a final pass,
/// `C((n+k_f-1)/2, k_f) p_F^{k_f} p_P^{(n-k_f+1)/2}`.
pub fn exact_ost_pmf(c: f64, gamma: f64, n: usize) -> Result<Vec<(u64, f64)>> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::domain(format!("overlap must lie in [0, 1], got {c}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::domain(format!("swap-test budget must be even and >= 2, got {n}")));
    }
    if n > OST_MAX_PAIRS {
        return Err(Error::EnumerationBound {
            what: "swap-test fail counts",
            required: n as u64 + 1,
            limit: OST_MAX_PAIRS as u64 + 1,
        });
    }
    let gc = gamma * c;
    let p_fail = (2.0 - 2.0 * gc) / (3.0 - gc);
    let ln_pass = ((1.0 + gc) / (3.0 - gc)).ln();
    let lnf = LnFactorials::new(n);
    let pmf = (0..=n)
        .map(|k| {
            let (draws, passes) = if k % 2 == 0 {
                ((n + k) / 2, (n - k) / 2)
            } else {
                ((n + k - 1) / 2, (n - k).div_ceil(2))
            };
            let fails = if k == 0 {
                0.0
            } else if p_fail == 0.0 {
                f64::NEG_INFINITY
            } else {
                k as f64 * p_fail.ln()
            };
            let ln_p = lnf.ln_choose(draws, k) + fails + passes as f64 * ln_pass;
            (k as u64, ln_p.exp())
        })
        .collect();
    Ok(pmf)
}

/// Exact moments of the PPNRD estimator `(1 - 2k_f/n)/Γ`.
pub fn exact_ost_moments(c: f64, gamma: f64, n: usize) -> Result<ExactResult> {
    let pmf = exact_ost_pmf(c, gamma, n)?;
    let values: Vec<(f64, f64)> = pmf
        .iter()
        .map(|&(k, p)| ((1.0 - 2.0 * k as f64 / n as f64) / gamma, p))
        .collect();
    Ok(ExactResult::from_weighted(&values, c, values.len() as u64))
}

/// Exact moments of the corrected estimator with binomial fail counts (no PPNRD).
pub fn exact_binomial_ost_moments(c: f64, n: usize, physics: &OstPhysics) -> Result<ExactResult> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::domain(format!("overlap must lie in [0, 1], got {c}")));
    }
    if n == 0 {
        return Err(Error::domain("binomial swap test needs n >= 1"));
    }
    let p = crate::analytics::homi_fail_probability(c, physics);
    let lnf = LnFactorials::new(n);
    let values: Vec<(f64, f64)> = (0..=n)
        .map(|k| {
            (
                corrected_ost_estimator(k as u64, n as u64, physics),
                lnf.binomial_pmf(n, k, p),
            )
        })
        .collect();
    Ok(ExactResult::from_weighted(&values, c, values.len() as u64))
}

/// Exact moments of the SCM estimator: mean `c`, variance `(1-c²)/n`.
pub fn exact_scm_moments(c: f64, n: usize) -> Result<ExactResult> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::domain(format!("overlap must lie in [0, 1], got {c}")));
    }
    if n == 0 {
        return Err(Error::domain("SCM needs n >= 1"));
    }
    let variance = (1.0 - c * c) / n as f64;
    Ok(ExactResult {
        mean: c,
        variance,
        mse: variance,
        support_size: n as u64 + 1,
        probability_mass: 1.0,
    })
}

/// Haar average of `point_fn` over pairs with overlap `c`, as `(mean, standard error)`.
pub fn average_over_ensemble<R, F>(point_fn: F, c: f64, samples: usize, rng: &mut R) -> Result<(f64, f64)>
where
    R: Rng + ?Sized,
    F: Fn(&FixedOverlapPair) -> f64 + Sync + Send,
{
    let seed = rng.random::<u64>();
    average_over_ensemble_seeded(|p| Ok(point_fn(p)), c, samples, seed, Execution::default())
}

/// [`average_over_ensemble`] for fallible point functions with an explicit seed.
///
/// Pair `i` is drawn from its own stream, and the values are reduced in index
/// order, so the result does not depend on the execution mode.
pub fn average_over_ensemble_seeded<F>(
    point_fn: F,
    c: f64,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<(f64, f64)>
where
    F: Fn(&FixedOverlapPair) -> Result<f64> + Sync + Send,
{
    if samples < MIN_ENSEMBLE {
        return Err(Error::config(format!(
            "ensemble averages need >= {MIN_ENSEMBLE} samples, got {samples}"
        )));
    }
    let values = exec.try_map(samples, |i| {
        let mut rng = stream(seed, &[TAG_ENSEMBLE, i as u64]);
        point_fn(&sample_pair(c, &mut rng)?)
    })?;
    let mean = compensated_sum(values.iter().copied()) / samples as f64;
    Ok((mean, sample_std(&values) / (samples as f64).sqrt()))
}

/// One oracle-versus-Monte-Carlo comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub label: String,
    pub exact_mse: f64,
    pub monte_carlo_mse: f64,
    /// Standard error of the mean per-pair difference.
    pub stderr: f64,
    pub passed: bool,
}

/// Settings of [`oracle_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckSettings {
    pub pairs: usize,
    pub repeats: usize,
    pub overlaps: Vec<f64>,
    pub seed: u64,
    /// Multiple of the standard error tolerated.
    pub sigmas: f64,
}

impl Default for OracleCheckSettings {
    fn default() -> Self {
        OracleCheckSettings {
            pairs: 1000,
            repeats: 20,
            overlaps: vec![0.25, 0.5, 0.75],
            seed: 0,
            sigmas: 3.0,
        }
    }
}

/// Compares the mean squared error from exact enumeration with Monte Carlo
/// runs on the same sampled pairs.
///
/// For each pair, the exact MSE and the Monte Carlo mean of `(ĉ - c)²` over
/// `repeats` runs are differenced; the comparison passes when the mean
/// difference lies within `sigmas` standard errors of zero.
pub fn compare_with_monte_carlo(
    strategy: Strategy,
    n: usize,
    c: f64,
    settings: &OracleCheckSettings,
    params: &StrategyParams,
    exec: Execution,
) -> Result<OracleComparison> {
    let exact_fn = |pair: &FixedOverlapPair| -> Result<f64> {
        Ok(match strategy {
            Strategy::Tt => exact_tt_variance(pair, n)?.mse,
            Strategy::Tp => exact_tp_variance(pair, n)?.mse,
            Strategy::Scm => exact_scm_moments(pair.exact_overlap(), n)?.mse,
            Strategy::Ost if params.physics.ppnrd => {
                exact_ost_moments(pair.exact_overlap(), params.physics.gamma, n)?.mse
            }
            Strategy::Ost => exact_binomial_ost_moments(pair.exact_overlap(), n, &params.physics)?.mse,
            other => return Err(Error::domain(format!("no exact oracle for {other}"))),
        })
    };
    let c_key = c.to_bits();
    let rows = exec.try_map(settings.pairs, |m| -> Result<(f64, f64)> {
        let pair = sample_pair(c, &mut stream(settings.seed, &[TAG_PAIR, c_key, m as u64]))?;
        let exact = exact_fn(&pair)?;
        let mut sq = Vec::with_capacity(settings.repeats);
        for j in 0..settings.repeats {
            let mut rng = stream(settings.seed, &[TAG_ESTIMATE, c_key, m as u64, j as u64]);
            let run = run_strategy(strategy, &pair, n, params, &mut rng)?;
            sq.push((run.estimate - pair.exact_overlap()).powi(2));
        }
        Ok((exact, compensated_sum(sq) / settings.repeats as f64))
    })?;
    let m = rows.len() as f64;
    let exact_mse = compensated_sum(rows.iter().map(|r| r.0)) / m;
    let monte_carlo_mse = compensated_sum(rows.iter().map(|r| r.1)) / m;
    let diffs: Vec<f64> = rows.iter().map(|r| r.1 - r.0).collect();
    let stderr = sample_std(&diffs) / m.sqrt();
    let gap = (monte_carlo_mse - exact_mse).abs();
    Ok(OracleComparison {
        label: format!("{strategy} n={n} c={c}"),
        exact_mse,
        monte_carlo_mse,
        stderr,
        passed: gap <= settings.sigmas * stderr + 1e-12,
    })
}

/// Small-instance oracle checks: TT and TP with 2 and 3 copies per basis,
/// SCM, and the swap test.
pub fn oracle_check(
    settings: &OracleCheckSettings,
    params: &StrategyParams,
    exec: Execution,
) -> Result<Vec<OracleComparison>> {
    let mut out = Vec::new();
    for &c in &settings.overlaps {
        for (strategy, n) in [
            (Strategy::Tt, 6),
            (Strategy::Tt, 9),
            (Strategy::Tp, 6),
            (Strategy::Tp, 9),
            (Strategy::Scm, 10),
            (Strategy::Ost, 20),
        ] {
            out.push(compare_with_monte_carlo(strategy, n, c, settings, params, exec)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{pair_from_parameters, Su2Params};
    use crate::streams::stream;

    fn pole_pair(same: bool) -> FixedOverlapPair {
        let a = PureState::basis(2, 0).unwrap();
        let b = PureState::basis(2, if same { 0 } else { 1 }).unwrap();
        FixedOverlapPair::from_states(a, b).unwrap()
    }

    #[test]
    fn pole_pairs_have_zero_variance() {
        for same in [true, false] {
            let tt = exact_tt_variance(&pole_pair(same), 12).unwrap();
            assert!(tt.mse < 1e-24 && tt.variance < 1e-24);
            assert!((tt.probability_mass - 1.0).abs() < 1e-10);
            assert_eq!(tt.support_size, 5u64.pow(6));
            let tp = exact_tp_variance(&pole_pair(same), 30).unwrap();
            assert!(tp.mse < 1e-24);
        }
    }

    #[test]
    fn enumeration_bounds() {
        let pair = pole_pair(true);
        assert!(matches!(exact_tt_variance(&pair, 15), Err(Error::EnumerationBound { .. })));
        assert!(matches!(exact_tp_variance(&pair, 33), Err(Error::EnumerationBound { .. })));
        assert!(matches!(exact_tt_variance(&pair, 7), Err(Error::Config(_))));
        assert!(matches!(exact_ost_pmf(0.5, 1.0, 10_002), Err(Error::EnumerationBound { .. })));
        assert!(exact_ost_pmf(0.5, 1.0, 9).is_err());
    }

    #[test]
    fn ost_pmf_properties() {
        let pmf = exact_ost_pmf(1.0, 1.0, 100).unwrap();
        assert_eq!(pmf[0].1, 1.0);
        assert!(pmf[1..].iter().all(|&(_, p)| p == 0.0));
        for (c, g, n) in [(0.5, 0.965, 900), (0.0, 0.965, 20), (0.9, 1.0, 2), (0.3, 0.5, 1000)] {
            let pmf = exact_ost_pmf(c, g, n).unwrap();
            let total: f64 = compensated_sum(pmf.iter().map(|p| p.1));
            assert!((total - 1.0).abs() < 1e-10, "{c} {g} {n}: {total}");
        }
        let m = exact_ost_moments(0.5, 0.965, 900).unwrap();
        assert!((m.mean - 0.5).abs() < 5.0 / 900.0);
        let m = exact_ost_moments(0.5, 1.0, 900).unwrap();
        assert!((900.0 * m.variance - 0.9375).abs() < 0.01);
    }

    #[test]
    fn scm_moments() {
        let m = exact_scm_moments(0.0, 4).unwrap();
        assert_eq!(m.variance, 0.25);
        assert_eq!(exact_scm_moments(1.0, 9).unwrap().variance, 0.0);
        assert!((exact_scm_moments(0.5, 900).unwrap().variance - 8.333_333e-4).abs() < 1e-9);
    }

    #[test]
    fn binomial_ost_is_unbiased() {
        let physics = OstPhysics::new(0.965, 0.53, false).unwrap();
        for n in 1..=20 {
            for c in [0.0, 0.2, 0.5, 0.8, 1.0] {
                let m = exact_binomial_ost_moments(c, n, &physics).unwrap();
                assert!((m.mean - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tp_closed_inner_sum_matches_enumeration() {
        let pair = pair_from_parameters(0.4, Su2Params::from_uniforms(0.3, 0.6, 0.1), 1.0).unwrap();
        let exact = exact_tp_variance(&pair, 6).unwrap();
        // brute force over k as well
        let lnf = LnFactorials::new(6);
        let mut values = Vec::new();
        for (est, w) in tomography_outcomes(&pair.phi, 2).unwrap() {
            let p = overlap(&pair.psi, &est).unwrap();
            for k in 0..=6 {
                values.push((k as f64 / 6.0, w * lnf.binomial_pmf(6, k, p)));
            }
        }
        let brute = ExactResult::from_weighted(&values, pair.c, values.len() as u64);
        assert!((brute.mse - exact.mse).abs() < 1e-14);
        assert!((brute.mean - exact.mean).abs() < 1e-14);
        assert!((brute.variance - exact.variance).abs() < 1e-14);
    }

    #[test]
    fn ensemble_averages() {
        let mut rng = stream(41, &[]);
        let (m, se) = average_over_ensemble(|_| 2.5, 0.3, 200, &mut rng).unwrap();
        assert_eq!((m, se), (2.5, 0.0));
        let (m, se) = average_over_ensemble(|p| overlap(&p.psi, &p.phi).unwrap(), 0.3, 200, &mut rng).unwrap();
        assert!((m - 0.3).abs() < 1e-12 && se < 1e-12);
        assert!(average_over_ensemble(|_| 0.0, 0.3, 99, &mut rng).is_err());
        let a = average_over_ensemble_seeded(|p| Ok(p.psi.amplitudes()[0].re), 0.3, 500, 3, Execution::Sequential).unwrap();
        let b = average_over_ensemble_seeded(|p| Ok(p.psi.amplitudes()[0].re), 0.3, 500, 3, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
