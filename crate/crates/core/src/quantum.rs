//! Pure-state representation, Haar sampling on SU(2) and construction of
//! state pairs with a prescribed overlap.
//!
//! Global phases are never fixed: consumers only ever look at
//! phase-invariant quantities such as `|⟨a|b⟩|²`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum deviation of `Σ|aᵢ|²` from one accepted for a pure state, and
/// the precision to which sampled pairs realize their target overlap.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Normalized complex amplitude vector of dimension `d ≥ 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Wraps already-normalized amplitudes.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::domain(format!(
                "a pure state needs dimension >= 2, got {}",
                amplitudes.len()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::domain(format!("state norm is {norm}, expected 1")));
        }
        Ok(PureState { amplitudes })
    }

    /// Normalizes arbitrary non-zero amplitudes.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::domain("cannot normalize a zero vector"));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        PureState::new(amplitudes)
    }

    /// Computational basis state `|k⟩` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::domain(format!("basis index {k} out of range for dim {dim}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[k] = Complex64::new(1.0, 0.0);
        PureState::new(amps)
    }

    /// Qubit `a|0⟩ + b|1⟩`, normalized on construction.
    pub fn qubit(a: Complex64, b: Complex64) -> Result<Self> {
        PureState::normalized(vec![a, b])
    }

    /// Haar-random pure state in dimension `dim`.
    pub fn haar<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        PureState::normalized(gaussian_vector(dim, rng))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn is_qubit(&self) -> bool {
        self.dim() == 2
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::domain(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// The same ray multiplied by `e^{iγ}`.
    pub fn with_global_phase(&self, gamma: f64) -> PureState {
        let f = Complex64::from_polar(1.0, gamma);
        PureState {
            amplitudes: self.amplitudes.iter().map(|a| a * f).collect(),
        }
    }
}

/// Squared overlap `|⟨a|b⟩|²`, clamped into `[0, 1]` against rounding.
pub fn overlap(a: &PureState, b: &PureState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().clamp(0.0, 1.0))
}

fn gaussian_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Complex64> {
    (0..dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// Euler parameters of an SU(2) element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Su2Params {
    /// Polar angle in `[0, π]`.
    pub theta: f64,
    /// In `[0, 2π)`.
    pub beta: f64,
    /// In `[0, 2π)`.
    pub omega: f64,
}

impl Su2Params {
    pub const IDENTITY: Su2Params = Su2Params {
        theta: 0.0,
        beta: 0.0,
        omega: 0.0,
    };

    /// Row-major 2×2 matrix
    /// `[[e^{i(β-ω)/2} cos(θ/2), -e^{-i(β+ω)/2} sin(θ/2)],
    ///   [e^{i(β+ω)/2} sin(θ/2),  e^{-i(β-ω)/2} cos(θ/2)]]`.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let (s, c) = (self.theta / 2.0).sin_cos();
        let diff = (self.beta - self.omega) / 2.0;
        let sum = (self.beta + self.omega) / 2.0;
        [
            [Complex64::from_polar(c, diff), -Complex64::from_polar(s, -sum)],
            [Complex64::from_polar(s, sum), Complex64::from_polar(c, -diff)],
        ]
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let m = self.matrix();
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    /// Builds parameters from three uniforms in `[0, 1)`, using the inverse
    /// CDF `θ = arccos(1 - 2u)` for the `sin(θ)/2` density.
    pub fn from_uniforms(u_theta: f64, u_beta: f64, u_omega: f64) -> Self {
        Su2Params {
            theta: (1.0 - 2.0 * u_theta).clamp(-1.0, 1.0).acos(),
            beta: 2.0 * PI * u_beta,
            omega: 2.0 * PI * u_omega,
        }
    }
}

/// Haar-distributed element of SU(2).
pub fn haar_su2<R: Rng + ?Sized>(rng: &mut R) -> Su2Params {
    let (a, b, c) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
    Su2Params::from_uniforms(a, b, c)
}

/// A `(ψ, φ)` pair together with the overlap it was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedOverlapPair {
    pub psi: PureState,
    pub phi: PureState,
    /// Target squared overlap.
    pub c: f64,
    /// Relative phase `φ` of the `|1⟩` component (0 for qudit pairs).
    pub phase: f64,
    /// Reference-frame unitary; `None` for pairs built by [`sample_qudit_pair`].
    pub u: Option<Su2Params>,
}

impl FixedOverlapPair {
    pub fn dim(&self) -> usize {
        self.psi.dim()
    }

    /// Overlap recomputed from the amplitudes.
    pub fn exact_overlap(&self) -> f64 {
        overlap(&self.psi, &self.phi).expect("pair states share a dimension")
    }

    /// Pair built directly from two states; `c` is taken from the amplitudes.
    pub fn from_states(psi: PureState, phi: PureState) -> Result<Self> {
        let c = overlap(&psi, &phi)?;
        Ok(FixedOverlapPair {
            psi,
            phi,
            c,
            phase: 0.0,
            u: None,
        })
    }
}

fn check_overlap(c: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::domain(format!("overlap must lie in [0, 1], got {c}")));
    }
    Ok(())
}

/// `ψ = U|0⟩`, `φ = U(√c|0⟩ + e^{iφ}√(1-c)|1⟩)` for explicit `U` and `φ`.
pub fn pair_from_parameters(c: f64, u: Su2Params, phase: f64) -> Result<FixedOverlapPair> {
    check_overlap(c)?;
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let psi = u.apply([one, zero]);
    let phi = u.apply([
        Complex64::new(c.sqrt(), 0.0),
        Complex64::from_polar((1.0 - c).sqrt(), phase),
    ]);
    Ok(FixedOverlapPair {
        psi: PureState::normalized(psi.to_vec())?,
        phi: PureState::normalized(phi.to_vec())?,
        c,
        phase,
        u: Some(u),
    })
}

/// Qubit pair with overlap exactly `c`, Haar-random reference frame and uniform relative phase.
pub fn sample_pair<R: Rng + ?Sized>(c: f64, rng: &mut R) -> Result<FixedOverlapPair> {
    check_overlap(c)?;
    let u = haar_su2(rng);
    let phase = 2.0 * PI * rng.random::<f64>();
    pair_from_parameters(c, u, phase)
}

/// Qudit pair `φ = √c ψ + √(1-c) ψ⊥` with `ψ` Haar-random and `ψ⊥` Haar-random
/// in the complement of `ψ` (Gram–Schmidt of a Gaussian vector).
pub fn sample_qudit_pair<R: Rng + ?Sized>(c: f64, d: usize, rng: &mut R) -> Result<FixedOverlapPair> {
    check_overlap(c)?;
    if d < 2 {
        return Err(Error::domain(format!("dimension must be >= 2, got {d}")));
    }
    let psi = PureState::haar(d, rng)?;
    let perp = loop {
        let mut g = gaussian_vector(d, rng);
        // two Gram–Schmidt passes keep the residual overlap at rounding level
        for _ in 0..2 {
            let proj: Complex64 = psi
                .amplitudes()
                .iter()
                .zip(&g)
                .map(|(a, b)| a.conj() * b)
                .sum();
            g.iter_mut()
                .zip(psi.amplitudes())
                .for_each(|(gi, a)| *gi -= proj * a);
        }
        if g.iter().map(|x| x.norm_sqr()).sum::<f64>() > 1e-20 {
            break PureState::normalized(g)?;
        }
    };
    let (sc, sp) = (c.sqrt(), (1.0 - c).sqrt());
    let phi: Vec<Complex64> = psi
        .amplitudes()
        .iter()
        .zip(perp.amplitudes())
        .map(|(a, b)| a * sc + b * sp)
        .collect();
    Ok(FixedOverlapPair {
        phi: PureState::normalized(phi)?,
        psi,
        c,
        phase: 0.0,
        u: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::stream;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn overlap_basic_values() {
        let zero = PureState::basis(2, 0).unwrap();
        let one = PureState::basis(2, 1).unwrap();
        let plus = PureState::qubit(c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        assert_eq!(overlap(&zero, &zero).unwrap(), 1.0);
        assert_eq!(overlap(&zero, &one).unwrap(), 0.0);
        assert!((overlap(&zero, &plus).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn overlap_rejects_dimension_mismatch() {
        let a = PureState::basis(2, 0).unwrap();
        let b = PureState::basis(3, 0).unwrap();
        assert!(matches!(overlap(&a, &b), Err(Error::Domain(_))));
    }

    #[test]
    fn state_validation() {
        assert!(PureState::new(vec![c(1.0, 0.0)]).is_err());
        assert!(PureState::new(vec![c(1.0, 0.0), c(0.1, 0.0)]).is_err());
        assert!(PureState::normalized(vec![c(0.0, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn identity_parameters_give_identity_matrix() {
        let m = Su2Params::from_uniforms(0.0, 0.0, 0.0).matrix();
        assert_eq!(m[0][0], c(1.0, 0.0));
        assert_eq!(m[1][1], c(1.0, 0.0));
        assert!(m[0][1].norm() < 1e-15 && m[1][0].norm() < 1e-15);
    }

    #[test]
    fn haar_matrices_are_special_unitary() {
        let mut rng = stream(1, &[0]);
        for _ in 0..1000 {
            let m = haar_su2(&mut rng).matrix();
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            assert!((det - c(1.0, 0.0)).norm() < 1e-12);
            // U U† = I
            for i in 0..2 {
                for j in 0..2 {
                    let e: Complex64 = (0..2).map(|k| m[i][k] * m[j][k].conj()).sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((e - c(expect, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn identity_pair_construction() {
        let p = pair_from_parameters(0.25, Su2Params::IDENTITY, 0.0).unwrap();
        assert_eq!(p.psi, PureState::basis(2, 0).unwrap());
        let phi = p.phi.amplitudes();
        assert!((phi[0] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((phi[1] - c(0.75f64.sqrt(), 0.0)).norm() < 1e-15);
        assert!((p.exact_overlap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sampled_pairs_hit_target_overlap() {
        let mut rng = stream(2, &[0]);
        for i in 0..=10 {
            let target = i as f64 / 10.0;
            for _ in 0..200 {
                let p = sample_pair(target, &mut rng).unwrap();
                assert!((p.exact_overlap() - target).abs() < NORM_TOLERANCE);
            }
        }
        let p = sample_pair(0.0, &mut rng).unwrap();
        assert!(p.psi.inner(&p.phi).unwrap().norm() < 1e-12);
    }

    #[test]
    fn unit_overlap_pair_is_same_ray() {
        let mut rng = stream(3, &[0]);
        let p = sample_pair(1.0, &mut rng).unwrap();
        assert!((p.exact_overlap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_overlap_is_a_domain_error() {
        let mut rng = stream(4, &[0]);
        assert!(matches!(sample_pair(1.5, &mut rng), Err(Error::Domain(_))));
        assert!(matches!(sample_pair(-0.1, &mut rng), Err(Error::Domain(_))));
        assert!(matches!(sample_qudit_pair(0.5, 1, &mut rng), Err(Error::Domain(_))));
        assert!(matches!(sample_qudit_pair(f64::NAN, 3, &mut rng), Err(Error::Domain(_))));
    }

    #[test]
    fn qudit_pairs_hit_target_overlap() {
        let mut rng = stream(5, &[0]);
        let p = sample_qudit_pair(0.3, 4, &mut rng).unwrap();
        assert_eq!(p.dim(), 4);
        assert!((p.exact_overlap() - 0.3).abs() < NORM_TOLERANCE);
        let p = sample_qudit_pair(1.0, 6, &mut rng).unwrap();
        assert!((p.exact_overlap() - 1.0).abs() < NORM_TOLERANCE);
    }
}
