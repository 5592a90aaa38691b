//! Simulation and closed-form analysis of quantum state overlap estimation.
//!
//! Pairs of pure states with a prescribed overlap `c = |⟨ψ|φ⟩|²` are sampled
//! from the Haar ensemble and fed to the estimation strategies: tomography of
//! both states (TT), tomography followed by projection (TP), the two-copy
//! Schur collective measurement (SCM), the optical swap test (OST), and an
//! adaptive SCM-then-TP/SCM protocol. The [`harness`] turns repeated runs into
//! scaled average variances; [`analytics`] holds the closed-form theory and
//! [`oracle`] the exact small-instance enumerations used to cross-check both.

pub mod analytics;
pub mod error;
pub mod harness;
pub mod io;
pub mod oracle;
pub mod par;
pub mod quantum;
pub mod stats;
pub mod strategies;
pub mod streams;
pub mod tomography;

pub use error::{Error, Result};
pub use harness::{run_benchmark, ExperimentConfig, VarianceReport};
pub use par::Execution;
pub use quantum::{sample_pair, FixedOverlapPair, PureState};
pub use strategies::{EstimationRun, OstPhysics, Strategy};
