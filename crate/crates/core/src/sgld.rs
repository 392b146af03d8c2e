//! Stochastic gradient Langevin dynamics on a Gaussian-mixture objective.
//!
//! Iterates `x_{k+1} = x_k + α ∇L(x_k) + ξ_k` with
//! `ξ_k ~ N(0, T (1+k)^{-1/2})` independently per coordinate (the value is a
//! variance). This is gradient ascent on `L`, i.e. descent on `f = -L`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::landscape::GaussianMixtureLandscape;
use crate::output::{Cell, CsvTable};
use crate::sde::{derive_seed, euler_maruyama_step_in_place, DriftField, RngStream};

pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
pub const DEFAULT_MAX_ITERATIONS: usize = 2000;
pub const DEFAULT_PATIENCE: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgldConfig {
    pub learning_rate: f64,
    pub temperature: f64,
    pub max_iterations: usize,
    /// Consecutive in-vicinity iterates required to declare capture.
    pub patience: usize,
    pub x0: Vec<f64>,
    /// Keep every n-th iterate in the result; `None` keeps nothing.
    pub record_every: Option<usize>,
}

impl SgldConfig {
    pub fn new(x0: Vec<f64>) -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            temperature: 0.0,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            patience: DEFAULT_PATIENCE,
            x0,
            record_every: None,
        }
    }

    pub fn with_temperature(&self, temperature: f64) -> Self {
        Self { temperature, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning_rate", "must be positive"));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::param("temperature", "must be nonnegative"));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be at least 1"));
        }
        if self.patience == 0 {
            return Err(Error::param("patience", "must be at least 1"));
        }
        if self.record_every == Some(0) {
            return Err(Error::param("record_every", "must be at least 1"));
        }
        Ok(())
    }

    /// Per-coordinate noise variance at iteration `k`.
    pub fn noise_variance(&self, k: usize) -> f64 {
        self.temperature / (1.0 + k as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgldRunResult {
    pub trajectory: Option<Vec<Vec<f64>>>,
    pub captured_well: Option<usize>,
    pub capture_iteration: Option<usize>,
    pub diverged: bool,
    /// Number of updates actually performed.
    pub iterations: usize,
    pub final_point: Vec<f64>,
}

/// Runs SGLD until capture, divergence or `max_iterations`.
///
/// The start point counts as iterate 0; capture is declared at the iterate
/// that completes `patience` consecutive iterates in the same σ-vicinity.
pub fn sgld_run(
    landscape: &GaussianMixtureLandscape,
    config: &SgldConfig,
    rng: &mut RngStream,
) -> Result<SgldRunResult> {
    config.validate()?;
    check_dim(landscape.dimension(), config.x0.len())?;
    let alpha = config.learning_rate;
    let drift = DriftField::ascent(landscape);
    let mut x = config.x0.clone();
    let mut scratch = vec![0.0; x.len()];
    let mut trajectory = config.record_every.map(|_| vec![x.clone()]);

    let mut streak: Option<(usize, usize)> = None;
    let mut update_streak = |x: &[f64]| -> Option<usize> {
        match (landscape.well_membership(x), streak) {
            (Some(j), Some((i, n))) if i == j => streak = Some((j, n + 1)),
            (Some(j), _) => streak = Some((j, 1)),
            (None, _) => streak = None,
        }
        streak.filter(|&(_, n)| n >= config.patience).map(|(j, _)| j)
    };

    if let Some(j) = update_streak(&x) {
        return Ok(SgldRunResult {
            trajectory,
            captured_well: Some(j),
            capture_iteration: Some(0),
            diverged: false,
            iterations: 0,
            final_point: x,
        });
    }

    for k in 0..config.max_iterations {
        // Euler-Maruyama with dt = α and θ_k chosen so that 2θ_k·α equals the
        // requested noise variance.
        let theta_k = config.noise_variance(k) / (2.0 * alpha);
        let step = euler_maruyama_step_in_place(&mut x, &drift, theta_k, alpha, k as f64, rng, &mut scratch);
        let iter = k + 1;
        if step.is_err() || x.iter().any(|v| !v.is_finite()) {
            return Ok(SgldRunResult {
                trajectory,
                captured_well: None,
                capture_iteration: None,
                diverged: true,
                iterations: iter,
                final_point: x,
            });
        }
        if let (Some(tr), Some(every)) = (trajectory.as_mut(), config.record_every) {
            if iter % every == 0 {
                tr.push(x.clone());
            }
        }
        if let Some(j) = update_streak(&x) {
            return Ok(SgldRunResult {
                trajectory,
                captured_well: Some(j),
                capture_iteration: Some(iter),
                diverged: false,
                iterations: iter,
                final_point: x,
            });
        }
    }
    Ok(SgldRunResult {
        trajectory,
        captured_well: None,
        capture_iteration: None,
        diverged: false,
        iterations: config.max_iterations,
        final_point: x,
    })
}

/// Runs `runs` independent replicas at one temperature. Replica `r` uses
/// stream `r` of `seed`; results come back in replica order.
pub fn sgld_batch(
    landscape: &GaussianMixtureLandscape,
    config: &SgldConfig,
    runs: usize,
    seed: u64,
) -> Result<Vec<SgldRunResult>> {
    (0..runs).into_par_iter().map(|r| sgld_run(landscape, config, &mut RngStream::new(seed, r as u64))).collect()
}

/// Tally of one temperature in the wide-well experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionPoint {
    pub temperature: f64,
    /// `None` when no run was captured at all.
    pub fraction: Option<f64>,
    pub wide_captures: usize,
    pub captured_runs: usize,
    pub total_runs: usize,
    pub diverged_runs: usize,
}

impl FractionPoint {
    pub fn from_results(temperature: f64, wide: usize, results: &[SgldRunResult]) -> Self {
        let captured_runs = results.iter().filter(|r| r.captured_well.is_some()).count();
        let wide_captures = results.iter().filter(|r| r.captured_well == Some(wide)).count();
        let diverged_runs = results.iter().filter(|r| r.diverged).count();
        let fraction = (captured_runs > 0).then(|| wide_captures as f64 / captured_runs as f64);
        Self { temperature, fraction, wide_captures, captured_runs, total_runs: results.len(), diverged_runs }
    }
}

/// Temperatures `k · t_max / (n - 1)`, `k = 0..n`.
pub fn uniform_temperatures(t_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Fraction of captured runs that end in the widest well, per temperature.
/// Runs never captured within the budget are left out of the denominator.
pub fn wide_well_fraction(
    landscape: &GaussianMixtureLandscape,
    base: &SgldConfig,
    temperatures: &[f64],
    runs: usize,
    seed: u64,
) -> Result<Vec<FractionPoint>> {
    if runs == 0 {
        return Err(Error::param("runs", "must be at least 1"));
    }
    let wide = landscape.widest_well();
    temperatures
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let cfg = base.with_temperature(t);
            let results = sgld_batch(landscape, &cfg, runs, derive_seed(seed, i as u64))?;
            Ok(FractionPoint::from_results(t, wide, &results))
        })
        .collect()
}

pub fn fraction_csv(points: &[FractionPoint]) -> CsvTable {
    let mut t = CsvTable::new(&["temperature", "fraction", "captured_runs", "total_runs"]);
    for p in points {
        let frac = p.fraction.map_or(Cell::Text("undefined".into()), Cell::Float);
        t.push(vec![p.temperature.into(), frac, p.captured_runs.into(), p.total_runs.into()]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureCurve {
    pub beta: f64,
    pub temperature: f64,
    /// `fractions[k]`: share of runs captured (any well) at or before iterate `k`.
    pub fractions: Vec<f64>,
}

/// Cumulative capture fraction against iteration for each inverse
/// temperature; `T = 1/β`, so every β must be positive.
pub fn capture_fraction_vs_iteration(
    landscape: &GaussianMixtureLandscape,
    base: &SgldConfig,
    betas: &[f64],
    runs: usize,
    seed: u64,
) -> Result<Vec<CaptureCurve>> {
    if runs == 0 {
        return Err(Error::param("runs", "must be at least 1"));
    }
    betas
        .iter()
        .enumerate()
        .map(|(i, &beta)| {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::param(
                    format!("betas[{i}]"),
                    format!("inverse temperature must be positive, got {beta}"),
                ));
            }
            let cfg = base.with_temperature(1.0 / beta);
            let results = sgld_batch(landscape, &cfg, runs, derive_seed(seed, i as u64))?;
            Ok(CaptureCurve {
                beta,
                temperature: cfg.temperature,
                fractions: cumulative_capture(&results, cfg.max_iterations),
            })
        })
        .collect()
}

pub fn cumulative_capture(results: &[SgldRunResult], max_iterations: usize) -> Vec<f64> {
    let mut counts = vec![0usize; max_iterations + 1];
    for it in results.iter().filter_map(|r| r.capture_iteration) {
        counts[it] += 1;
    }
    let n = results.len() as f64;
    let mut acc = 0;
    counts
        .into_iter()
        .map(|c| {
            acc += c;
            acc as f64 / n
        })
        .collect()
}

pub fn capture_curve_csv(curves: &[CaptureCurve]) -> CsvTable {
    let mut t = CsvTable::new(&["beta", "iteration", "fraction"]);
    for c in curves {
        for (k, f) in c.fractions.iter().enumerate() {
            t.push(vec![c.beta.into(), k.into(), (*f).into()]);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_well() -> GaussianMixtureLandscape {
        GaussianMixtureLandscape::from_triples(&[(&[1.0, 1.0], 1.0, 1.0)]).unwrap()
    }

    fn two_wells() -> GaussianMixtureLandscape {
        GaussianMixtureLandscape::from_triples(&[(&[-4.0, 0.0], 2.0, 4.0), (&[3.0, 0.0], 1.0, 1.0)]).unwrap()
    }

    #[test]
    fn start_inside_single_well_is_captured_at_once() {
        let mut cfg = SgldConfig::new(vec![1.2, 0.9]);
        cfg.patience = 5;
        let r = sgld_run(&single_well(), &cfg, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(r.captured_well, Some(0));
        assert_eq!(r.capture_iteration, Some(4));
    }

    #[test]
    fn zero_temperature_is_deterministic() {
        let cfg = SgldConfig::new(vec![1.0, 0.5]);
        let a = sgld_run(&two_wells(), &cfg, &mut RngStream::new(1, 0)).unwrap();
        let b = sgld_run(&two_wells(), &cfg, &mut RngStream::new(99, 3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.captured_well, Some(1));
        assert!(a.capture_iteration.unwrap() <= cfg.max_iterations);
    }

    #[test]
    fn noise_variance_schedule() {
        let cfg = SgldConfig::new(vec![0.0]).with_temperature(0.8);
        assert_eq!(cfg.noise_variance(0), 0.8);
        assert!((cfg.noise_variance(3) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn empirical_noise_matches_schedule() {
        // Flat landscape region: increments are pure noise.
        let far = GaussianMixtureLandscape::from_triples(&[(&[1e6], 1.0, 1.0)]).unwrap();
        let mut cfg = SgldConfig::new(vec![0.0]).with_temperature(0.5);
        cfg.max_iterations = 1;
        let mut samples = Vec::new();
        for r in 0..20_000u64 {
            let res = sgld_run(&far, &cfg, &mut RngStream::new(5, r)).unwrap();
            samples.push(res.final_point[0]);
        }
        let var = crate::stats::variance(&samples);
        let se = 0.5 * (2.0 / 19_999.0f64).sqrt();
        assert!((var - 0.5).abs() < 3.0 * se, "var={var}");
    }

    #[test]
    fn divergence_is_not_capture() {
        let l = GaussianMixtureLandscape::from_triples(&[(&[0.0], 1.0, 1.0)]).unwrap();
        let mut cfg = SgldConfig::new(vec![f64::MAX]);
        cfg.temperature = 1.0;
        let r = sgld_run(&l, &cfg, &mut RngStream::new(0, 0)).unwrap();
        assert!(r.diverged || r.captured_well.is_none());
        assert!(r.captured_well.is_none());
    }

    #[test]
    fn invalid_configs_rejected() {
        let l = single_well();
        let mut cfg = SgldConfig::new(vec![0.0, 0.0]);
        cfg.patience = 0;
        assert!(sgld_run(&l, &cfg, &mut RngStream::new(0, 0)).is_err());
        let cfg = SgldConfig::new(vec![0.0]);
        assert!(matches!(sgld_run(&l, &cfg, &mut RngStream::new(0, 0)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn fraction_excludes_uncaptured_runs() {
        let mk = |w: Option<usize>| SgldRunResult {
            trajectory: None,
            captured_well: w,
            capture_iteration: w.map(|_| 10),
            diverged: false,
            iterations: 10,
            final_point: vec![],
        };
        let results = vec![mk(Some(0)), mk(Some(1)), mk(None), mk(None), mk(Some(0))];
        let p = FractionPoint::from_results(0.3, 0, &results);
        assert_eq!(p.captured_runs, 3);
        assert_eq!(p.total_runs, 5);
        assert!((p.fraction.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let none = FractionPoint::from_results(0.3, 0, &[mk(None)]);
        assert_eq!(none.fraction, None);
        assert!(fraction_csv(&[none]).to_string_lossy().contains("undefined"));
    }

    #[test]
    fn single_temperature_single_run() {
        let cfg = SgldConfig::new(vec![1.0, 0.5]);
        let pts = wide_well_fraction(&two_wells(), &cfg, &[0.0], 1, 7).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].captured_runs, 1);
        assert_eq!(pts[0].fraction, Some(0.0));
    }

    #[test]
    fn deterministic_capture_curve_is_a_step() {
        let cfg = SgldConfig::new(vec![1.0, 0.5]);
        let r = sgld_run(&two_wells(), &cfg, &mut RngStream::new(0, 0)).unwrap();
        let k = r.capture_iteration.unwrap();
        let curve = cumulative_capture(&[r], cfg.max_iterations);
        assert!(curve[..k].iter().all(|&f| f == 0.0));
        assert!(curve[k..].iter().all(|&f| f == 1.0));
    }

    #[test]
    fn capture_curves_nondecreasing_and_beta_validated() {
        let mut cfg = SgldConfig::new(vec![0.0, 0.0]);
        cfg.max_iterations = 300;
        let curves = capture_fraction_vs_iteration(&two_wells(), &cfg, &[1.0, 4.0], 40, 3).unwrap();
        for c in &curves {
            assert!(c.fractions.windows(2).all(|w| w[1] >= w[0]));
        }
        assert!(capture_fraction_vs_iteration(&two_wells(), &cfg, &[0.0], 4, 3).is_err());
    }

    #[test]
    fn batch_reproducible() {
        let cfg = SgldConfig::new(vec![0.0, 0.0]).with_temperature(0.4);
        let a = wide_well_fraction(&two_wells(), &cfg, &[0.2, 0.4], 30, 11).unwrap();
        let b = wide_well_fraction(&two_wells(), &cfg, &[0.2, 0.4], 30, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(fraction_csv(&a).to_string_lossy(), fraction_csv(&b).to_string_lossy());
    }

    #[test]
    fn uniform_grid_of_temperatures() {
        let ts = uniform_temperatures(0.8, 15);
        assert_eq!(ts.len(), 15);
        assert_eq!(ts[0], 0.0);
        assert!((ts[14] - 0.8).abs() < 1e-15);
    }
}
