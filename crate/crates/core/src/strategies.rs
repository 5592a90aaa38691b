//! Single estimation runs of every overlap estimation strategy on `N`
//! copies of a fixed pair.
//!
//! Every runner returns the *raw* estimate; [`EstimationRun::clamped`] is the
//! separate post-processor that maps it into `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::analytics::{corrected_ost_estimator, homi_fail_probability};
use crate::error::{Error, Result};
use crate::quantum::{overlap, FixedOverlapPair, PureState};
use crate::tomography::{copies_per_basis, reconstruct, simulate_mub_counts, MubCounts};

/// Tolerance used to decide that a beam splitter is balanced.
pub const BALANCED_TOLERANCE: f64 = 1e-12;
/// Convergence tolerance of the adaptive maximum-likelihood combination.
pub const MLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Tomography of both states.
    Tt,
    /// Tomography of `φ`, projection of `ψ` onto the estimate.
    Tp,
    /// Two-copy Schur collective measurement (singlet projection).
    Scm,
    /// Optical swap test (two-photon interference).
    Ost,
    /// SCM pilot followed by TP or SCM.
    Adaptive,
    /// Antisymmetric-subspace projection for qudits.
    ScmQudit,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Tt,
        Strategy::Tp,
        Strategy::Scm,
        Strategy::Ost,
        Strategy::Adaptive,
        Strategy::ScmQudit,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Strategy::Tt => "TT",
            Strategy::Tp => "TP",
            Strategy::Scm => "SCM",
            Strategy::Ost => "OST",
            Strategy::Adaptive => "ADAPTIVE",
            Strategy::ScmQudit => "SCM_QUDIT",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase().replace('-', "_");
        Strategy::ALL
            .into_iter()
            .find(|st| st.tag() == upper)
            .ok_or_else(|| Error::domain(format!("unknown strategy tag `{s}`")))
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Physical parameters of the optical swap test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OstPhysics {
    /// Internal-mode indistinguishability Γ ∈ (0, 1].
    pub gamma: f64,
    /// Beam-splitter reflectivity η ∈ (0, 1).
    pub eta: f64,
    /// Pseudo photon-number-resolving detection.
    pub ppnrd: bool,
}

impl Default for OstPhysics {
    fn default() -> Self {
        OstPhysics {
            gamma: 1.0,
            eta: 0.5,
            ppnrd: true,
        }
    }
}

impl OstPhysics {
    pub fn new(gamma: f64, eta: f64, ppnrd: bool) -> Result<Self> {
        let p = OstPhysics { gamma, eta, ppnrd };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::config(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if self.ppnrd && !self.is_balanced() {
            return Err(Error::config(format!(
                "pseudo number-resolving detection is only modelled at eta = 0.5, got {}",
                self.eta
            )));
        }
        Ok(())
    }

    pub fn is_balanced(&self) -> bool {
        (self.eta - 0.5).abs() <= BALANCED_TOLERANCE
    }
}

/// Which strategy the adaptive protocol used for its second step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Tp,
    Scm,
}

/// Raw outcome record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Counts {
    Tomography {
        psi: MubCounts,
        phi: MubCounts,
    },
    TomographyProjection {
        phi: MubCounts,
        /// Successful projections out of `trials`.
        k: u64,
        trials: u64,
    },
    Singlet {
        k: u64,
        trials: u64,
    },
    /// Detected fail / pass outcomes. Without PPNRD every round is detected.
    Ost {
        k_fail: u64,
        k_pass: u64,
    },
    Adaptive {
        pilot: Box<Counts>,
        branch: Branch,
        second: Box<Counts>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRun {
    pub strategy: Strategy,
    /// Raw estimate; may leave `[0, 1]`.
    pub estimate: f64,
    /// Pairs consumed. The PPNRD swap test may report `N + 1`.
    pub copies_used: u64,
    pub counts: Counts,
}

impl EstimationRun {
    /// Estimate clamped into `[0, 1]`.
    pub fn clamped(&self) -> f64 {
        clamp_estimate(self.estimate)
    }

    pub fn branch(&self) -> Option<Branch> {
        match &self.counts {
            Counts::Adaptive { branch, .. } => Some(*branch),
            _ => None,
        }
    }
}

pub fn clamp_estimate(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    Binomial::new(n, p.clamp(0.0, 1.0))
        .expect("probability clamped into [0, 1]")
        .sample(rng)
}

fn require_qubits(pair: &FixedOverlapPair) -> Result<()> {
    if pair.psi.is_qubit() && pair.phi.is_qubit() {
        Ok(())
    } else {
        Err(Error::domain(format!("strategy needs a qubit pair, got dimension {}", pair.dim())))
    }
}

/// Outcome probabilities `(p₁, p₂, p₊, p₋)` of the projectors onto
/// `|00⟩, |11⟩, |Ψ₊⟩, |Ψ₋⟩` for the product state `|ψ⟩|φ⟩`.
pub fn scm_projector_probabilities(psi: &PureState, phi: &PureState) -> Result<[f64; 4]> {
    if !(psi.is_qubit() && phi.is_qubit()) {
        return Err(Error::domain("Schur projectors are defined for two qubits"));
    }
    let (a, b) = (psi.amplitudes(), phi.amplitudes());
    let h = 0.5;
    let p1 = (a[0] * b[0]).norm_sqr();
    let p2 = (a[1] * b[1]).norm_sqr();
    let pp = h * (a[0] * b[1] + a[1] * b[0]).norm_sqr();
    let pm = h * (a[0] * b[1] - a[1] * b[0]).norm_sqr();
    Ok([p1, p2, pp, pm])
}

/// Probability `½ Σ_{i<j} |αᵢβⱼ - αⱼβᵢ|²` of projecting `|ψ⟩|φ⟩` onto the antisymmetric subspace.
pub fn antisymmetric_probability(psi: &PureState, phi: &PureState) -> Result<f64> {
    if psi.dim() != phi.dim() {
        return Err(Error::domain("antisymmetric projection needs equal dimensions"));
    }
    let (a, b) = (psi.amplitudes(), phi.amplitudes());
    let d = a.len();
    let mut acc = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            acc += (a[i] * b[j] - a[j] * b[i]).norm_sqr();
        }
    }
    Ok((0.5 * acc).clamp(0.0, 0.5))
}

fn require_copies(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::config("a run needs at least one pair"));
    }
    Ok(())
}

/// Tomography-tomography: reconstruct both states from `n` copies each.
pub fn run_tt<R: Rng + ?Sized>(pair: &FixedOverlapPair, n: usize, rng: &mut R) -> Result<EstimationRun> {
    require_qubits(pair)?;
    copies_per_basis(n)?;
    let psi_counts = simulate_mub_counts(&pair.psi, n, rng)?;
    let phi_counts = simulate_mub_counts(&pair.phi, n, rng)?;
    let estimate = overlap(&reconstruct(&psi_counts), &reconstruct(&phi_counts))?;
    Ok(EstimationRun {
        strategy: Strategy::Tt,
        estimate,
        copies_used: n as u64,
        counts: Counts::Tomography {
            psi: psi_counts,
            phi: phi_counts,
        },
    })
}

/// Tomography of `φ` on `tomography_copies`, then `projections` projections of `ψ` onto `φ̃`.
fn tomography_projection<R: Rng + ?Sized>(
    pair: &FixedOverlapPair,
    tomography_copies: usize,
    projections: usize,
    rng: &mut R,
) -> Result<(f64, Counts)> {
    let phi_counts = simulate_mub_counts(&pair.phi, tomography_copies, rng)?;
    let p = overlap(&pair.psi, &reconstruct(&phi_counts))?;
    let k = binomial(projections as u64, p, rng);
    Ok((
        k as f64 / projections as f64,
        Counts::TomographyProjection {
            phi: phi_counts,
            k,
            trials: projections as u64,
        },
    ))
}

/// Tomography-projection: `φ̃` from `n` copies of `φ`, then `k ~ Bin(n, |⟨ψ|φ̃⟩|²)`.
pub fn run_tp<R: Rng + ?Sized>(pair: &FixedOverlapPair, n: usize, rng: &mut R) -> Result<EstimationRun> {
    require_qubits(pair)?;
    copies_per_basis(n)?;
    let (estimate, counts) = tomography_projection(pair, n, n, rng)?;
    Ok(EstimationRun {
        strategy: Strategy::Tp,
        estimate,
        copies_used: n as u64,
        counts,
    })
}

fn singlet_counts<R: Rng + ?Sized>(p_minus: f64, n: usize, rng: &mut R) -> (f64, Counts) {
    let k = binomial(n as u64, p_minus, rng);
    (
        1.0 - 2.0 * k as f64 / n as f64,
        Counts::Singlet {
            k,
            trials: n as u64,
        },
    )
}

/// Schur collective measurement: `k ~ Bin(n, (1-c)/2)`, estimate `1 - 2k/n`.
pub fn run_scm<R: Rng + ?Sized>(pair: &FixedOverlapPair, n: usize, rng: &mut R) -> Result<EstimationRun> {
    require_qubits(pair)?;
    require_copies(n)?;
    let [_, _, _, p_minus] = scm_projector_probabilities(&pair.psi, &pair.phi)?;
    let (estimate, counts) = singlet_counts(p_minus, n, rng);
    Ok(EstimationRun {
        strategy: Strategy::Scm,
        estimate,
        copies_used: n as u64,
        counts,
    })
}

/// Qudit SCM: antisymmetric-subspace projection in any dimension.
pub fn run_scm_qudit<R: Rng + ?Sized>(
    pair: &FixedOverlapPair,
    n: usize,
    rng: &mut R,
) -> Result<EstimationRun> {
    require_copies(n)?;
    let p_ans = antisymmetric_probability(&pair.psi, &pair.phi)?;
    let (estimate, counts) = singlet_counts(p_ans, n, rng);
    Ok(EstimationRun {
        strategy: Strategy::ScmQudit,
        estimate,
        copies_used: n as u64,
        counts,
    })
}

/// Detected fail / pass probabilities `((2-2Γc)/(3-Γc), (1+Γc)/(3-Γc))` under PPNRD.
pub fn ppnrd_outcome_probabilities(c: f64, gamma: f64) -> (f64, f64) {
    let gc = gamma * c;
    ((2.0 - 2.0 * gc) / (3.0 - gc), (1.0 + gc) / (3.0 - gc))
}

/// Optical swap test on `n` pairs (`n` even).
///
/// With PPNRD, detected outcomes are drawn one at a time: a fail consumes one
/// pair, a pass two; a pass drawn with a single pair left ends the run at
/// `n + 1`. The estimate is `(1 - 2k_f/n)/Γ`. Without PPNRD the fail count is
/// binomial with the unbalanced-splitter probability and the corrected
/// estimator is applied.
pub fn run_ost<R: Rng + ?Sized>(
    pair: &FixedOverlapPair,
    n: usize,
    physics: &OstPhysics,
    rng: &mut R,
) -> Result<EstimationRun> {
    physics.validate()?;
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::config(format!("swap test needs an even number of pairs >= 2, got {n}")));
    }
    let c = pair.exact_overlap();
    if physics.ppnrd {
        let (p_fail, _) = ppnrd_outcome_probabilities(c, physics.gamma);
        let (mut k_fail, mut k_pass, mut remaining) = (0u64, 0u64, n as u64);
        while remaining > 0 {
            if rng.random::<f64>() < p_fail {
                k_fail += 1;
                remaining -= 1;
            } else {
                k_pass += 1;
                remaining = remaining.saturating_sub(2);
            }
        }
        Ok(EstimationRun {
            strategy: Strategy::Ost,
            estimate: (1.0 - 2.0 * k_fail as f64 / n as f64) / physics.gamma,
            copies_used: k_fail + 2 * k_pass,
            counts: Counts::Ost { k_fail, k_pass },
        })
    } else {
        let k_fail = binomial(n as u64, homi_fail_probability(c, physics), rng);
        Ok(EstimationRun {
            strategy: Strategy::Ost,
            estimate: corrected_ost_estimator(k_fail, n as u64, physics),
            copies_used: n as u64,
            counts: Counts::Ost {
                k_fail,
                k_pass: n as u64 - k_fail,
            },
        })
    }
}

/// Second-step data entering the adaptive likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SecondStep {
    /// `k` successful projections in `trials`, modelled as `Bin(trials, c)`.
    Projection { k: u64, trials: u64 },
    /// `k` singlet outcomes in `trials`, modelled as `Bin(trials, (1-c)/2)`.
    Singlet { k: u64, trials: u64 },
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Log-likelihood (up to constants) of the pilot singlet counts and a projection step.
fn adaptive_log_likelihood(c: f64, pilot_k: u64, pilot_n: u64, k: u64, trials: u64) -> f64 {
    let (k1, m1, k2, m2) = (pilot_k as f64, pilot_n as f64, k as f64, trials as f64);
    xlogy(k1, 1.0 - c) + xlogy(m1 - k1, 1.0 + c) + xlogy(k2, c) + xlogy(m2 - k2, 1.0 - c)
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Combined estimate of the two adaptive steps.
///
/// Two SCM steps pool their counts (`1 - 2(k₁+k₂)/(m₁+m₂)`). A projection
/// step is combined with the pilot by maximizing the product likelihood over
/// `c ∈ [0, 1]`.
pub fn adaptive_mle(pilot_k: u64, pilot_n: u64, second: SecondStep) -> f64 {
    match second {
        SecondStep::Singlet { k, trials } => 1.0 - 2.0 * (pilot_k + k) as f64 / (pilot_n + trials) as f64,
        SecondStep::Projection { k, trials } => {
            let ll = |c: f64| adaptive_log_likelihood(c, pilot_k, pilot_n, k, trials);
            let interior = golden_section_max(ll, 0.0, 1.0, MLE_TOLERANCE);
            // the maximum may sit on the boundary
            [0.0, interior, 1.0]
                .into_iter()
                .fold((f64::NAN, f64::NEG_INFINITY), |(bx, bf), x| {
                    let fx = ll(x);
                    if fx > bf {
                        (x, fx)
                    } else {
                        (bx, bf)
                    }
                })
                .0
        }
    }
}

/// Budget split of the adaptive protocol for `n` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdaptiveBudget {
    pub pilot: usize,
    pub remaining: usize,
    /// Copies of `φ` used for tomography in the TP branch (multiple of 3).
    pub tomography: usize,
}

impl AdaptiveBudget {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        // the small offset keeps α·n = 30 from flooring to 29 for α = 1/30
        let pilot = (alpha * n as f64 + 1e-9).floor() as usize;
        if pilot < 1 {
            return Err(Error::config(format!("alpha * n = {} leaves no pilot pairs", alpha * n as f64)));
        }
        let remaining = n - pilot.min(n);
        let tomography = remaining / 3 * 3;
        if tomography < 3 {
            return Err(Error::config(format!(
                "only {remaining} pairs remain after the pilot; need at least 3"
            )));
        }
        Ok(AdaptiveBudget {
            pilot,
            remaining,
            tomography,
        })
    }
}

/// Two-step adaptive protocol: SCM pilot on `⌊αn⌋` pairs; TP on the rest if the
/// pilot estimate is below `c_t`, otherwise SCM.
pub fn run_adaptive<R: Rng + ?Sized>(
    pair: &FixedOverlapPair,
    n: usize,
    alpha: f64,
    c_t: f64,
    rng: &mut R,
) -> Result<EstimationRun> {
    require_qubits(pair)?;
    let budget = AdaptiveBudget::new(n, alpha)?;
    let [_, _, _, p_minus] = scm_projector_probabilities(&pair.psi, &pair.phi)?;
    let (pilot_estimate, pilot) = singlet_counts(p_minus, budget.pilot, rng);
    let Counts::Singlet { k: pilot_k, .. } = pilot else {
        unreachable!()
    };
    let (branch, second, step) = if pilot_estimate < c_t {
        let (_, counts) = tomography_projection(pair, budget.tomography, budget.remaining, rng)?;
        let Counts::TomographyProjection { k, trials, .. } = counts else {
            unreachable!()
        };
        (Branch::Tp, counts, SecondStep::Projection { k, trials })
    } else {
        let (_, counts) = singlet_counts(p_minus, budget.remaining, rng);
        let Counts::Singlet { k, trials } = counts else {
            unreachable!()
        };
        (Branch::Scm, counts, SecondStep::Singlet { k, trials })
    };
    Ok(EstimationRun {
        strategy: Strategy::Adaptive,
        estimate: adaptive_mle(pilot_k, budget.pilot as u64, step),
        copies_used: n as u64,
        counts: Counts::Adaptive {
            pilot: Box::new(pilot),
            branch,
            second: Box::new(second),
        },
    })
}

/// Per-strategy parameters needed to dispatch a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    pub physics: OstPhysics,
    pub alpha: f64,
    pub c_t: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams {
            physics: OstPhysics::default(),
            alpha: 1.0 / 30.0,
            c_t: 4.0 / 11.0,
        }
    }
}

/// Runs `strategy` on `n` copies of `pair`.
pub fn run_strategy<R: Rng + ?Sized>(
    strategy: Strategy,
    pair: &FixedOverlapPair,
    n: usize,
    params: &StrategyParams,
    rng: &mut R,
) -> Result<EstimationRun> {
    match strategy {
        Strategy::Tt => run_tt(pair, n, rng),
        Strategy::Tp => run_tp(pair, n, rng),
        Strategy::Scm => run_scm(pair, n, rng),
        Strategy::Ost => run_ost(pair, n, &params.physics, rng),
        Strategy::Adaptive => run_adaptive(pair, n, params.alpha, params.c_t, rng),
        Strategy::ScmQudit => run_scm_qudit(pair, n, rng),
    }
}
