//! Pauli (mutually unbiased basis) measurement statistics for pure qubits
//! and closed-form approximate maximum-likelihood reconstruction.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::quantum::{haar_su2, overlap, PureState};
use crate::stats::{mean, mean_and_stderr};
use crate::streams::{stream, TAG_KAPPA};

/// Analytic scaled average infidelity of MUB tomography.
pub const KAPPA_MUB: f64 = 11.0 / 8.0;

/// Smallest tomography budget accepted by [`estimate_kappa`].
pub const KAPPA_MIN_COPIES: usize = 30;
/// Fewest Haar states per grid point accepted by [`estimate_kappa`].
pub const KAPPA_MIN_SAMPLES: usize = 100;

/// Counts of the `+1` outcome for σx, σy, σz, each measured on `n_per_basis` copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MubCounts {
    pub n_x: u64,
    pub n_y: u64,
    pub n_z: u64,
    pub n_per_basis: u64,
}

impl MubCounts {
    pub fn new(n_x: u64, n_y: u64, n_z: u64, n_per_basis: u64) -> Result<Self> {
        if n_per_basis == 0 {
            return Err(Error::domain("tomography needs at least one copy per basis"));
        }
        if n_x > n_per_basis || n_y > n_per_basis || n_z > n_per_basis {
            return Err(Error::domain(format!(
                "counts ({n_x}, {n_y}, {n_z}) exceed copies per basis {n_per_basis}"
            )));
        }
        Ok(MubCounts {
            n_x,
            n_y,
            n_z,
            n_per_basis,
        })
    }

    /// Total copies consumed (three bases).
    pub fn copies(&self) -> u64 {
        3 * self.n_per_basis
    }
}

/// `(p_x, p_y, p_z) = (|⟨+|ψ⟩|², |⟨L|ψ⟩|², |⟨0|ψ⟩|²)`.
pub fn mub_probabilities(psi: &PureState) -> Result<[f64; 3]> {
    if !psi.is_qubit() {
        return Err(Error::domain(format!(
            "MUB tomography is defined for qubits, got dimension {}",
            psi.dim()
        )));
    }
    let a = psi.amplitudes()[0];
    let b = psi.amplitudes()[1];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let px = ((a + b) * h).norm_sqr();
    let py = ((a - Complex64::i() * b) * h).norm_sqr();
    let pz = a.norm_sqr();
    Ok([px.clamp(0.0, 1.0), py.clamp(0.0, 1.0), pz.clamp(0.0, 1.0)])
}

/// Copies per basis for a tomography budget of `n_total`, which must be a positive multiple of 3.
pub fn copies_per_basis(n_total: usize) -> Result<u64> {
    if n_total == 0 || !n_total.is_multiple_of(3) {
        return Err(Error::config(format!(
            "tomography budget must be a positive multiple of 3, got {n_total}"
        )));
    }
    Ok((n_total / 3) as u64)
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    Binomial::new(n, p.clamp(0.0, 1.0))
        .expect("probability clamped into [0, 1]")
        .sample(rng)
}

/// Draws the three independent binomial counts for `n_total / 3` copies per basis.
pub fn simulate_mub_counts<R: Rng + ?Sized>(
    psi: &PureState,
    n_total: usize,
    rng: &mut R,
) -> Result<MubCounts> {
    let n = copies_per_basis(n_total)?;
    let [px, py, pz] = mub_probabilities(psi)?;
    Ok(MubCounts {
        n_x: binomial(n, px, rng),
        n_y: binomial(n, py, rng),
        n_z: binomial(n, pz, rng),
        n_per_basis: n,
    })
}

/// `√Z|0⟩ + √(1-Z) (X+iY)/√(X²+Y²) |1⟩` with `X = 2n_x/N'-1`, `Y = 2n_y/N'-1`, `Z = n_z/N'`.
///
/// When `X = Y = 0` the phase factor is taken as `+1`.
pub fn reconstruct(counts: &MubCounts) -> PureState {
    let n = counts.n_per_basis as f64;
    let x = 2.0 * counts.n_x as f64 / n - 1.0;
    let y = 2.0 * counts.n_y as f64 / n - 1.0;
    let z = counts.n_z as f64 / n;
    let r = x.hypot(y);
    let phase = if r == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(x / r, y / r)
    };
    PureState::normalized(vec![
        Complex64::new(z.sqrt(), 0.0),
        phase * (1.0 - z).max(0.0).sqrt(),
    ])
    .expect("reconstruction has unit norm up to rounding")
}

/// Result of fitting `1 - F̄ = κ / n` over a grid of tomography budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaFit {
    pub kappa: f64,
    pub stderr: f64,
    pub n_grid: Vec<usize>,
    /// Mean infidelity and its standard error for each grid point.
    pub infidelity: Vec<(f64, f64)>,
}

/// Fits `1 - F̄ = κ/n` by weighted least squares over Haar-random qubits.
pub fn estimate_kappa<R: Rng + ?Sized>(
    n_grid: &[usize],
    samples_per_point: usize,
    repeats: usize,
    rng: &mut R,
) -> Result<KappaFit> {
    let seed = rng.random::<u64>();
    estimate_kappa_seeded(n_grid, samples_per_point, repeats, seed, Execution::default())
}

/// [`estimate_kappa`] with an explicit master seed and execution mode.
pub fn estimate_kappa_seeded(
    n_grid: &[usize],
    samples_per_point: usize,
    repeats: usize,
    seed: u64,
    exec: Execution,
) -> Result<KappaFit> {
    if n_grid.is_empty() {
        return Err(Error::config("kappa fit needs at least one copy count"));
    }
    if samples_per_point < KAPPA_MIN_SAMPLES {
        return Err(Error::config(format!(
            "kappa fit needs >= {KAPPA_MIN_SAMPLES} states per point, got {samples_per_point}"
        )));
    }
    if repeats == 0 {
        return Err(Error::config("kappa fit needs at least one repetition"));
    }
    for &n in n_grid {
        copies_per_basis(n)?;
        if n < KAPPA_MIN_COPIES {
            return Err(Error::config(format!(
                "kappa fit copy counts must be >= {KAPPA_MIN_COPIES}, got {n}"
            )));
        }
    }

    let mut infidelity = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let per_state = exec.try_map(samples_per_point, |s| -> Result<f64> {
            let mut rng = stream(seed, &[TAG_KAPPA, n as u64, s as u64]);
            let u = haar_su2(&mut rng);
            let psi = PureState::normalized(
                u.apply([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])
                    .to_vec(),
            )?;
            let mut losses = Vec::with_capacity(repeats);
            for _ in 0..repeats {
                let est = reconstruct(&simulate_mub_counts(&psi, n, &mut rng)?);
                losses.push(1.0 - overlap(&psi, &est)?);
            }
            Ok(mean(&losses))
        })?;
        infidelity.push(mean_and_stderr(&per_state));
    }

    // no-intercept least squares on x = 1/n, weighted by the per-point
    // standard errors when all are positive
    let xs: Vec<f64> = n_grid.iter().map(|&n| 1.0 / n as f64).collect();
    let weights: Vec<f64> = if infidelity.iter().all(|(_, se)| *se > 0.0) {
        infidelity.iter().map(|(_, se)| 1.0 / (se * se)).collect()
    } else {
        vec![1.0; xs.len()]
    };
    let sxx: f64 = xs.iter().zip(&weights).map(|(x, w)| w * x * x).sum();
    let kappa = xs
        .iter()
        .zip(&weights)
        .zip(&infidelity)
        .map(|((x, w), (y, _))| w * x * y)
        .sum::<f64>()
        / sxx;
    let stderr = xs
        .iter()
        .zip(&weights)
        .zip(&infidelity)
        .map(|((x, w), (_, se))| (w * x * se).powi(2))
        .sum::<f64>()
        .sqrt()
        / sxx;
    Ok(KappaFit {
        kappa,
        stderr,
        n_grid: n_grid.to_vec(),
        infidelity,
    })
}
