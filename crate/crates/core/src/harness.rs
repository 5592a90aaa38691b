//! Benchmark campaigns: sampled pairs, repeated runs and the average-variance
//! data processing over a grid of overlaps and strategies.
//!
//! For a target overlap the data set is `ĉ[r][m][j]` (run `r`, pair `m`,
//! repeat `j`). Each run yields `ṽʳ`, the mean over pairs of the unbiased
//! sample variance over repeats; `ṽ` and `δṽ` are the mean and standard
//! deviation of `ṽʳ` over runs. The per-pair mean `c̄_m` over all repeats and
//! runs gives `c̄` and `δc̄`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::{ost_variance, theory_variance, TheoryParams};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::quantum::{sample_pair, FixedOverlapPair};
use crate::stats::{compensated_sum, linear_fit, mean, sample_std, sample_variance};
use crate::strategies::{run_strategy, AdaptiveBudget, Branch, OstPhysics, Strategy, StrategyParams};
use crate::streams::{stream, StreamRng, TAG_BOOTSTRAP, TAG_ESTIMATE, TAG_PAIR};
use crate::tomography::KAPPA_MUB;

/// Fewest grid points accepted by [`fit_scaled_variance`].
pub const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub strategies: Vec<Strategy>,
    pub c_grid: Vec<f64>,
    /// Sampled pairs per overlap, `M`.
    pub m_pairs: usize,
    /// Copies per estimate, `N`.
    pub n_copies: usize,
    /// Estimates per pair per run, `n`.
    pub n_repeats: usize,
    /// Independent runs, `R`.
    pub r_runs: usize,
    pub seed: u64,
    pub kappa: f64,
    pub gamma: f64,
    pub eta: f64,
    pub alpha: f64,
    pub c_t: f64,
    /// Synthesize the `R` runs by resampling a single run.
    pub bootstrap: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            strategies: vec![Strategy::Tt, Strategy::Tp, Strategy::Scm, Strategy::Ost],
            c_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            m_pairs: 100,
            n_copies: 900,
            n_repeats: 20,
            r_runs: 10,
            seed: 0,
            kappa: KAPPA_MUB,
            gamma: 0.965,
            eta: 0.5,
            alpha: 1.0 / 30.0,
            c_t: 4.0 / 11.0,
            bootstrap: false,
        }
    }
}

impl ExperimentConfig {
    /// First violated constraint as `(key, message)`.
    pub fn issue(&self) -> Option<(&'static str, String)> {
        if self.strategies.is_empty() {
            return Some(("strategies", "at least one strategy is required".into()));
        }
        if self.c_grid.is_empty() {
            return Some(("c_grid", "at least one overlap is required".into()));
        }
        if let Some(c) = self.c_grid.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Some(("c_grid", format!("overlap {c} outside [0, 1]")));
        }
        if self.m_pairs < 2 {
            return Some(("m_pairs", format!("must be >= 2, got {}", self.m_pairs)));
        }
        if self.n_copies < 1 {
            return Some(("n_copies", "must be >= 1".into()));
        }
        if self.n_repeats < 2 {
            return Some(("n_repeats", format!("must be >= 2, got {}", self.n_repeats)));
        }
        if self.r_runs < 1 {
            return Some(("r_runs", "must be >= 1".into()));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Some(("kappa", format!("must be positive, got {}", self.kappa)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Some(("gamma", format!("must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Some(("eta", format!("must lie in (0, 1), got {}", self.eta)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Some(("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if !self.c_t.is_finite() {
            return Some(("c_t", "must be finite".into()));
        }
        let n = self.n_copies;
        for s in &self.strategies {
            let problem = match s {
                Strategy::Tt | Strategy::Tp if !n.is_multiple_of(3) => Some(format!("{s} needs a multiple of 3, got {n}")),
                Strategy::Ost if n < 2 || !n.is_multiple_of(2) => Some(format!("OST needs an even number >= 2, got {n}")),
                Strategy::Adaptive => AdaptiveBudget::new(n, self.alpha).err().map(|e| e.to_string()),
                _ => None,
            };
            if let Some(message) = problem {
                return Some(("n_copies", message));
            }
        }
        None
    }

    pub fn validate(&self) -> Result<()> {
        match self.issue() {
            Some((key, message)) => Err(Error::config(format!("{key}: {message}"))),
            None => Ok(()),
        }
    }

    /// Swap-test physics: PPNRD at a balanced splitter, binomial counts otherwise.
    pub fn physics(&self) -> OstPhysics {
        let mut p = OstPhysics {
            gamma: self.gamma,
            eta: self.eta,
            ppnrd: false,
        };
        p.ppnrd = p.is_balanced();
        p
    }

    pub fn strategy_params(&self) -> StrategyParams {
        StrategyParams {
            physics: self.physics(),
            alpha: self.alpha,
            c_t: self.c_t,
        }
    }

    pub fn theory_params(&self) -> TheoryParams {
        TheoryParams {
            kappa: self.kappa,
            gamma: self.gamma,
            eta: self.eta,
            dim: 2,
        }
    }

    /// Scaled theoretical variance `N·v` used as the reference for `strategy`.
    ///
    /// The adaptive protocol is referenced to the better of TP and SCM.
    pub fn theory_nv(&self, strategy: Strategy, c: f64) -> Result<f64> {
        let n = self.n_copies;
        let params = self.theory_params();
        let v = match strategy {
            Strategy::Ost => ost_variance(c, n, &self.physics())?,
            Strategy::Adaptive => theory_variance(Strategy::Tp, c, n, &params)?
                .min(theory_variance(Strategy::Scm, c, n, &params)?),
            s => theory_variance(s, c, n, &params)?,
        };
        Ok(n as f64 * v)
    }
}

/// Statistics of one `(strategy, target overlap)` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub strategy: Strategy,
    pub c_target: f64,
    /// Mean of the per-pair estimate means, clamped into `[0, 1]`.
    pub c_bar: f64,
    pub c_bar_std: f64,
    pub v_tilde: f64,
    pub v_tilde_std: f64,
    pub nv: f64,
    pub nv_std: f64,
    pub theory_nv: f64,
    /// `ṽʳ` for every run.
    pub run_variances: Vec<f64>,
    /// Per-pair estimate means `c̄_m` (raw estimates).
    pub pair_means: Vec<f64>,
    /// True overlaps of the sampled pairs.
    pub exact_overlaps: Vec<f64>,
    /// Fraction of adaptive runs that took the TP branch.
    pub tp_branch_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub seed: u64,
    pub n_copies: usize,
    pub points: Vec<VariancePoint>,
}

impl VarianceReport {
    pub fn for_strategy(&self, strategy: Strategy) -> impl Iterator<Item = &VariancePoint> {
        self.points.iter().filter(move |p| p.strategy == strategy)
    }
}

/// Estimates indexed `[run][pair][repeat]`.
pub type RunSet = Vec<Vec<Vec<f64>>>;

/// Average-variance statistics of a run set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_variances: Vec<f64>,
    pub v_tilde: f64,
    /// Standard deviation of the run variances (0 for a single run).
    pub v_tilde_std: f64,
    pub pair_means: Vec<f64>,
    pub c_bar: f64,
    pub c_bar_std: f64,
}

/// Applies the average-variance processing to `runs`.
pub fn summarize(runs: &RunSet) -> Result<RunSummary> {
    let pairs = runs.first().map_or(0, Vec::len);
    if runs.is_empty() || pairs < 2 {
        return Err(Error::config("need at least one run of at least two pairs"));
    }
    if runs.iter().any(|r| r.len() != pairs || r.iter().any(|e| e.len() < 2)) {
        return Err(Error::config("every run needs the same pairs, each with >= 2 repeats"));
    }
    let run_variances: Vec<f64> = runs
        .iter()
        .map(|run| mean(&run.iter().map(|e| sample_variance(e)).collect::<Vec<_>>()))
        .collect();
    let pair_means: Vec<f64> = (0..pairs)
        .map(|m| {
            let values = runs.iter().flat_map(|run| run[m].iter().copied());
            let count = runs.iter().map(|run| run[m].len()).sum::<usize>();
            compensated_sum(values) / count as f64
        })
        .collect();
    Ok(RunSummary {
        v_tilde: mean(&run_variances),
        v_tilde_std: sample_std(&run_variances),
        run_variances,
        c_bar: mean(&pair_means),
        c_bar_std: sample_std(&pair_means),
        pair_means,
    })
}

/// Builds `r_runs` synthetic runs from one run by resampling, per pair, its
/// repeats with replacement.
pub fn bootstrap_runs<R: Rng + ?Sized>(single_run: &[Vec<f64>], r_runs: usize, rng: &mut R) -> Result<RunSet> {
    if single_run.iter().any(|e| e.len() < 2) {
        return Err(Error::config("bootstrap needs >= 2 repeats per pair"));
    }
    Ok((0..r_runs)
        .map(|_| {
            single_run
                .iter()
                .map(|e| (0..e.len()).map(|_| e[rng.random_range(0..e.len())]).collect())
                .collect()
        })
        .collect())
}

struct Sample {
    estimate: f64,
    branch: Option<Branch>,
}

fn point_error(strategy: Strategy, c: f64) -> impl Fn(Error) -> Error {
    move |e| Error::Point {
        strategy: strategy.to_string(),
        c,
        source: Box::new(e),
    }
}

fn strategy_key(strategy: Strategy) -> u64 {
    Strategy::ALL.iter().position(|s| *s == strategy).unwrap_or(0) as u64
}

fn simulate_point<F>(
    config: &ExperimentConfig,
    strategy: Strategy,
    grid_index: usize,
    estimator: &F,
    exec: Execution,
) -> Result<VariancePoint>
where
    F: Fn(&FixedOverlapPair, &mut StreamRng) -> Result<Sample> + Sync,
{
    let c = config.c_grid[grid_index];
    let (m_pairs, repeats) = (config.m_pairs, config.n_repeats);
    let runs = if config.bootstrap { 1 } else { config.r_runs };
    let (seed, gi, sk) = (config.seed, grid_index as u64, strategy_key(strategy));

    let pairs = exec.try_map(m_pairs, |m| sample_pair(c, &mut stream(seed, &[TAG_PAIR, gi, m as u64])))?;
    let tasks = runs * m_pairs * repeats;
    let samples = exec.try_map(tasks, |t| {
        let (r, rest) = (t / (m_pairs * repeats), t % (m_pairs * repeats));
        let (m, j) = (rest / repeats, rest % repeats);
        let mut rng = stream(seed, &[TAG_ESTIMATE, sk, gi, m as u64, j as u64, r as u64]);
        estimator(&pairs[m], &mut rng)
    })?;

    let mut data: RunSet = vec![vec![Vec::with_capacity(repeats); m_pairs]; runs];
    for (t, s) in samples.iter().enumerate() {
        let (r, rest) = (t / (m_pairs * repeats), t % (m_pairs * repeats));
        data[r][rest / repeats].push(s.estimate);
    }
    if config.bootstrap {
        let mut rng = stream(seed, &[TAG_BOOTSTRAP, sk, gi]);
        data = bootstrap_runs(&data[0], config.r_runs, &mut rng)?;
    }
    let summary = summarize(&data)?;
    let branches: Vec<Branch> = samples.iter().filter_map(|s| s.branch).collect();
    let tp_branch_fraction = (!branches.is_empty())
        .then(|| branches.iter().filter(|b| **b == Branch::Tp).count() as f64 / branches.len() as f64);
    let n = config.n_copies as f64;
    Ok(VariancePoint {
        strategy,
        c_target: c,
        c_bar: summary.c_bar.clamp(0.0, 1.0),
        c_bar_std: summary.c_bar_std,
        v_tilde: summary.v_tilde,
        v_tilde_std: summary.v_tilde_std,
        nv: n * summary.v_tilde,
        nv_std: n * summary.v_tilde_std,
        theory_nv: config.theory_nv(strategy, c)?,
        run_variances: summary.run_variances,
        pair_means: summary.pair_means,
        exact_overlaps: pairs.iter().map(FixedOverlapPair::exact_overlap).collect(),
        tp_branch_fraction,
    })
}

/// Runs every configured strategy over the overlap grid.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<VarianceReport> {
    run_benchmark_with(config, Execution::default())
}

pub fn run_benchmark_with(config: &ExperimentConfig, exec: Execution) -> Result<VarianceReport> {
    config.validate()?;
    let params = config.strategy_params();
    let mut points = Vec::with_capacity(config.strategies.len() * config.c_grid.len());
    for &strategy in &config.strategies {
        let estimator = |pair: &FixedOverlapPair, rng: &mut StreamRng| {
            let run = run_strategy(strategy, pair, config.n_copies, &params, rng)?;
            Ok(Sample {
                estimate: run.estimate,
                branch: run.branch(),
            })
        };
        for gi in 0..config.c_grid.len() {
            let point = simulate_point(config, strategy, gi, &estimator, exec)
                .map_err(point_error(strategy, config.c_grid[gi]))?;
            points.push(point);
        }
    }
    Ok(VarianceReport {
        seed: config.seed,
        n_copies: config.n_copies,
        points,
    })
}

/// Runs the processing pipeline with a caller-supplied estimator, reported under `tag`.
///
/// `config.strategies` is ignored; divisibility rules of `tag` are not enforced.
pub fn run_with_estimator<F>(
    config: &ExperimentConfig,
    tag: Strategy,
    estimator: F,
    exec: Execution,
) -> Result<Vec<VariancePoint>>
where
    F: Fn(&FixedOverlapPair, &mut StreamRng) -> Result<f64> + Sync,
{
    let unrestricted = ExperimentConfig {
        strategies: vec![Strategy::Scm],
        ..config.clone()
    };
    unrestricted.validate()?;
    let wrapped = |pair: &FixedOverlapPair, rng: &mut StreamRng| {
        Ok(Sample {
            estimate: estimator(pair, rng)?,
            branch: None,
        })
    };
    (0..config.c_grid.len())
        .map(|gi| simulate_point(config, tag, gi, &wrapped, exec).map_err(point_error(tag, config.c_grid[gi])))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledVarianceFit {
    pub alpha: f64,
    pub beta: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `N·ṽ(c) = α·c(1-c) + β` over the points of `strategy`.
pub fn fit_scaled_variance(report: &VarianceReport, strategy: Strategy) -> Result<ScaledVarianceFit> {
    fit_points(report.for_strategy(strategy))
}

/// [`fit_scaled_variance`] over an explicit set of points.
pub fn fit_points<'a>(points: impl IntoIterator<Item = &'a VariancePoint>) -> Result<ScaledVarianceFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .into_iter()
        .map(|p| (p.c_target * (1.0 - p.c_target), p.nv))
        .unzip();
    if x.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!("need >= {MIN_FIT_POINTS} points, got {}", x.len())));
    }
    let (alpha, beta, r_squared) =
        linear_fit(&x, &y).ok_or_else(|| Error::Fit("singular design: all c(1-c) equal".into()))?;
    Ok(ScaledVarianceFit { alpha, beta, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn small(strategies: Vec<Strategy>) -> ExperimentConfig {
        ExperimentConfig {
            strategies,
            c_grid: vec![0.2, 0.5, 0.8],
            m_pairs: 10,
            n_copies: 300,
            n_repeats: 5,
            r_runs: 3,
            seed: 99,
            ..Default::default()
        }
    }

    #[test]
    fn defaults_mirror_campaign() {
        let c = ExperimentConfig::default();
        assert_eq!((c.m_pairs, c.n_copies, c.n_repeats, c.r_runs), (100, 900, 20, 10));
        assert_eq!(c.c_grid.len(), 11);
        assert!(c.validate().is_ok());
        assert!(c.physics().ppnrd);
    }

    #[test]
    fn invalid_configs() {
        let bad = |f: fn(&mut ExperimentConfig)| {
            let mut c = ExperimentConfig::default();
            f(&mut c);
            c.issue().map(|i| i.0)
        };
        assert_eq!(bad(|c| c.m_pairs = 1), Some("m_pairs"));
        assert_eq!(bad(|c| c.n_repeats = 1), Some("n_repeats"));
        assert_eq!(bad(|c| c.r_runs = 0), Some("r_runs"));
        assert_eq!(bad(|c| c.gamma = 1.5), Some("gamma"));
        assert_eq!(bad(|c| c.n_copies = 901), Some("n_copies"));
        assert_eq!(bad(|c| c.c_grid = vec![1.2]), Some("c_grid"));
    }

    #[test]
    fn constant_stub_gives_zero_variance() {
        let config = ExperimentConfig {
            m_pairs: 2,
            n_repeats: 2,
            r_runs: 1,
            c_grid: vec![0.5],
            ..Default::default()
        };
        let pts = run_with_estimator(&config, Strategy::Scm, |_, _| Ok(0.5), Execution::default()).unwrap();
        assert_eq!(pts[0].v_tilde, 0.0);
        assert_eq!(pts[0].v_tilde_std, 0.0);
        assert_eq!(pts[0].c_bar, 0.5);
    }

    #[test]
    fn gaussian_stub_recovers_variance() {
        let v0: f64 = 2e-3;
        let config = ExperimentConfig {
            c_grid: vec![0.3, 0.6],
            m_pairs: 50,
            n_repeats: 20,
            r_runs: 10,
            seed: 5,
            ..Default::default()
        };
        let pts = run_with_estimator(
            &config,
            Strategy::Scm,
            |pair, rng| Ok(Normal::new(pair.c, v0.sqrt()).unwrap().sample(rng)),
            Execution::default(),
        )
        .unwrap();
        let bound = 3.0 / ((50 * 20 * 10) as f64).sqrt();
        for p in pts {
            assert!((p.v_tilde / v0 - 1.0).abs() < bound, "{}", p.v_tilde);
        }
    }

    #[test]
    fn reproducible_across_execution_modes() {
        let config = small(vec![Strategy::Tt, Strategy::Ost, Strategy::Adaptive]);
        let a = run_benchmark_with(&config, Execution::Sequential).unwrap();
        let b = run_benchmark_with(&config, Execution::Parallel).unwrap();
        let c = crate::par::with_threads(3, || run_benchmark_with(&config, Execution::Parallel).unwrap());
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn bootstrap_of_constant_is_zero() {
        let single = vec![vec![0.4; 5], vec![0.7; 5]];
        let runs = bootstrap_runs(&single, 4, &mut stream(1, &[])).unwrap();
        let s = summarize(&runs).unwrap();
        assert!(s.run_variances.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn fit_exact_input() {
        let points: Vec<VariancePoint> = (0..=10)
            .map(|i| {
                let c = i as f64 / 10.0;
                VariancePoint {
                    strategy: Strategy::Tt,
                    c_target: c,
                    c_bar: c,
                    c_bar_std: 0.0,
                    v_tilde: 0.0,
                    v_tilde_std: 0.0,
                    nv: 2.0 * c * (1.0 - c),
                    nv_std: 0.0,
                    theory_nv: 0.0,
                    run_variances: vec![],
                    pair_means: vec![],
                    exact_overlaps: vec![],
                    tp_branch_fraction: None,
                }
            })
            .collect();
        let fit = fit_points(&points).unwrap();
        assert!((fit.alpha - 2.0).abs() < 1e-12 && fit.beta.abs() < 1e-12 && (fit.r_squared - 1.0).abs() < 1e-12);
        assert!(matches!(fit_points(&points[..4]), Err(Error::Fit(_))));
        let flat: Vec<VariancePoint> = points.iter().map(|p| VariancePoint { c_target: 0.5, ..p.clone() }).collect();
        assert!(matches!(fit_points(&flat), Err(Error::Fit(_))));
    }

    #[test]
    fn strategy_failure_names_point() {
        let config = small(vec![Strategy::Scm]);
        let err = run_with_estimator(&config, Strategy::Scm, |_, _| Err(Error::domain("boom")), Execution::default())
            .unwrap_err();
        assert!(matches!(err, Error::Point { .. }));
        assert!(err.to_string().contains("boom"));
    }
}
