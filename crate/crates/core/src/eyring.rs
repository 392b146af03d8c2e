//! Free energy of regions, the Eyring rate factor and a Monte-Carlo
//! first-passage estimator for well-to-well transitions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::landscape::GaussianMixtureLandscape;
use crate::output::CsvTable;
use crate::quadrature::trapezoid_weights;
use crate::sde::{euler_maruyama_step_in_place, DriftField, RngStream};
use crate::stats;

/// Share of censored runs above which an escape estimate is flagged.
pub const CENSORED_FRACTION_LIMIT: f64 = 0.1;

/// Axis-aligned box in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    bounds: Vec<(f64, f64)>,
}

impl Region {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::param("region", "needs at least one axis"));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::param(format!("region[{i}]"), format!("need finite lo < hi, got [{lo}, {hi}]")));
            }
        }
        Ok(Self { bounds })
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    /// The same box with axis `axis` narrowed to `[center - half, center + half]`.
    pub fn slab(&self, axis: usize, center: f64, half: f64) -> Result<Self> {
        let mut b = self.bounds.clone();
        let slot = b.get_mut(axis).ok_or(Error::DimensionMismatch { expected: self.dim(), got: axis + 1 })?;
        *slot = (center - half, center + half);
        Self::new(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyValue {
    pub value: f64,
    pub beta: f64,
    /// Quadrature nodes per axis.
    pub resolution: usize,
    /// `|F(2n-1 nodes) - F(n nodes)|`.
    pub refinement_change: f64,
}

impl FreeEnergyValue {
    pub fn converged(&self, tol: f64) -> bool {
        self.refinement_change < tol
    }
}

/// `-β⁻¹ log ∫_U e^{-βE}` by tensor trapezoid quadrature with
/// `resolution` nodes per axis, accumulated in log space.
pub fn free_energy(
    region: &Region,
    energy: impl Fn(&[f64]) -> f64,
    beta: f64,
    resolution: usize,
) -> Result<FreeEnergyValue> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", "must be positive"));
    }
    if region.dim() > 2 {
        return Err(Error::param("region", "quadrature supports at most two axes"));
    }
    if resolution < 2 {
        return Err(Error::param("resolution", "need at least two nodes per axis"));
    }
    let coarse = log_partition(region, &energy, beta, resolution)?;
    let fine = log_partition(region, &energy, beta, 2 * resolution - 1)?;
    Ok(FreeEnergyValue { value: -coarse / beta, beta, resolution, refinement_change: ((fine - coarse) / beta).abs() })
}

fn log_partition(region: &Region, energy: &impl Fn(&[f64]) -> f64, beta: f64, n: usize) -> Result<f64> {
    let axes: Vec<(Vec<f64>, Vec<f64>)> = region
        .bounds()
        .iter()
        .map(|&(lo, hi)| {
            let h = (hi - lo) / (n - 1) as f64;
            ((0..n).map(|i| lo + i as f64 * h).collect(), trapezoid_weights(n, h))
        })
        .collect();
    let total = n.pow(region.dim() as u32);
    let mut terms = Vec::with_capacity(total);
    let mut x = vec![0.0; region.dim()];
    for flat in 0..total {
        let mut rem = flat;
        let mut logw = 0.0;
        for (a, (nodes, weights)) in axes.iter().enumerate().rev() {
            let i = rem % n;
            rem /= n;
            x[a] = nodes[i];
            logw += weights[i].ln();
        }
        let e = energy(&x);
        if !e.is_finite() {
            return Err(Error::param("energy", format!("non-finite value {e} at {x:?}")));
        }
        terms.push(logw - beta * e);
    }
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = terms.iter().map(|t| (t - m).exp()).sum();
    let log_z = m + s.ln();
    if !log_z.is_finite() {
        return Err(Error::Underflow(format!("log partition is {log_z}; rescale beta or the energy")));
    }
    Ok(log_z)
}

/// `e^{-β(F_saddle - F_well)}`, with the exponent clamped to the finite
/// range of `f64`.
pub fn eyring_rate_factor(f_saddle: f64, f_well: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", "must be positive"));
    }
    let exponent = -beta * (f_saddle - f_well);
    const LO: f64 = -745.0;
    const HI: f64 = 709.0;
    if !(LO..=HI).contains(&exponent) {
        log::warn!("rate exponent {exponent} clamped to [{LO}, {HI}]");
    }
    Ok(exponent.clamp(LO, HI).exp())
}

/// Free energy of the thin slab `|x_axis - saddle| ≤ h` inside `region`.
pub fn saddle_free_energy(
    region: &Region,
    energy: impl Fn(&[f64]) -> f64,
    beta: f64,
    axis: usize,
    saddle: f64,
    h: f64,
    resolution: usize,
) -> Result<FreeEnergyValue> {
    free_energy(&region.slab(axis, saddle, h)?, energy, beta, resolution)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeEstimate {
    pub theta: f64,
    pub mfpt_mean: f64,
    pub mfpt_se: f64,
    pub runs: usize,
    pub censored_runs: usize,
    /// Set when more than 10% of runs hit the step budget.
    pub censored: bool,
    /// First-passage times of the completed runs, in run order.
    pub passage_times: Vec<f64>,
}

impl EscapeEstimate {
    pub fn rate(&self) -> f64 {
        1.0 / self.mfpt_mean
    }
}

/// Mean first-passage time out of `well`: runs start at its center and
/// follow `dx = ∇L dt + √(2θ) dW` until they first enter another well's
/// σ-vicinity. Run `r` uses stream `r` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_escape_rate(
    landscape: &GaussianMixtureLandscape,
    well: usize,
    theta: f64,
    runs: usize,
    max_steps: usize,
    dt: f64,
    seed: u64,
) -> Result<EscapeEstimate> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::param("theta", "must be positive"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "must be positive"));
    }
    if runs == 0 || max_steps == 0 {
        return Err(Error::param("runs", "runs and max_steps must be at least 1"));
    }
    let start = landscape
        .wells()
        .get(well)
        .ok_or_else(|| Error::param("well", format!("index {well} out of range")))?
        .center
        .clone();
    check_dim(landscape.dimension(), start.len())?;
    let drift = DriftField::ascent(landscape);

    let outcomes: Vec<Result<Option<f64>>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(seed, r as u64);
            let mut x = start.clone();
            let mut scratch = vec![0.0; x.len()];
            for k in 0..max_steps {
                euler_maruyama_step_in_place(&mut x, &drift, theta, dt, k as f64 * dt, &mut rng, &mut scratch)
                    .map_err(|e| match e {
                        Error::SimulationFault { reason, .. } => Error::SimulationFault { step: k, reason },
                        e => e,
                    })?;
                if matches!(landscape.well_membership(&x), Some(j) if j != well) {
                    return Ok(Some((k + 1) as f64 * dt));
                }
            }
            Ok(None)
        })
        .collect();

    let mut passage_times = Vec::with_capacity(runs);
    let mut censored_runs = 0;
    for o in outcomes {
        match o? {
            Some(t) => passage_times.push(t),
            None => censored_runs += 1,
        }
    }
    let censored = censored_runs as f64 > CENSORED_FRACTION_LIMIT * runs as f64;
    if censored {
        log::warn!("{censored_runs} of {runs} runs censored at {max_steps} steps; estimate flagged");
    }
    Ok(EscapeEstimate {
        theta,
        mfpt_mean: stats::mean(&passage_times),
        mfpt_se: stats::std_error(&passage_times),
        runs,
        censored_runs,
        censored,
        passage_times,
    })
}

pub fn escape_csv(estimates: &[EscapeEstimate]) -> CsvTable {
    let mut t = CsvTable::new(&["theta", "mfpt_mean", "mfpt_se", "runs", "censored"]);
    for e in estimates {
        t.push(vec![e.theta.into(), e.mfpt_mean.into(), e.mfpt_se.into(), e.runs.into(), e.censored.into()]);
    }
    t
}

/// One-dimensional two-well landscape with a narrow well at 0 and a wide
/// well at `separation`, the wide amplitude tuned by bisection so both
/// local maxima of `L` have the same height.
pub fn equal_depth_pair(narrow_width: f64, wide_width: f64, separation: f64) -> Result<GaussianMixtureLandscape> {
    let build = |qw: f64| {
        GaussianMixtureLandscape::from_triples(&[(&[0.0], narrow_width, 1.0), (&[separation], wide_width, qw)])
    };
    let gap = |qw: f64| -> Result<f64> {
        let l = build(qw)?;
        Ok(local_max_1d(&l, 1)?.1 - local_max_1d(&l, 0)?.1)
    };
    let (mut lo, mut hi) = (0.5, 2.0);
    if gap(lo)? > 0.0 || gap(hi)? < 0.0 {
        return Err(Error::param("separation", "wells overlap too much to equalize depths"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    build(0.5 * (lo + hi))
}

/// Location and value of the local maximum of a 1D landscape within one
/// width of well `j`'s center.
pub fn local_max_1d(landscape: &GaussianMixtureLandscape, j: usize) -> Result<(f64, f64)> {
    check_dim(1, landscape.dimension())?;
    let w = &landscape.wells()[j];
    golden_max(|x| landscape.eval_unchecked(&[x]), w.center[0] - w.width, w.center[0] + w.width)
}

/// Saddle between wells `a` and `b` of a 1D landscape: the minimum of `L`
/// between their local maxima. Returns `(position, L(position))`.
pub fn saddle_1d(landscape: &GaussianMixtureLandscape, a: usize, b: usize) -> Result<(f64, f64)> {
    let (xa, _) = local_max_1d(landscape, a)?;
    let (xb, _) = local_max_1d(landscape, b)?;
    let (lo, hi) = if xa < xb { (xa, xb) } else { (xb, xa) };
    let (x, neg) = golden_max(|x| -landscape.eval_unchecked(&[x]), lo, hi)?;
    Ok((x, -neg))
}

/// Barrier `f(saddle) - f(well)` for `f = -L` in one dimension.
pub fn barrier_1d(landscape: &GaussianMixtureLandscape, well: usize, other: usize) -> Result<f64> {
    let (_, top) = local_max_1d(landscape, well)?;
    let (_, s) = saddle_1d(landscape, well, other)?;
    Ok(top - s)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    // Coarse scan first so a non-unimodal bracket still lands near the global max.
    let n = 2000;
    let h = (b - a) / n as f64;
    let best = (0..=n).map(|i| a + i as f64 * h).max_by(|x, y| f(*x).total_cmp(&f(*y))).unwrap();
    a = (best - h).max(a);
    b = (best + h).min(b);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..200 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let x = 0.5 * (a + b);
    let v = f(x);
    if !v.is_finite() {
        return Err(Error::param("landscape", "non-finite value during extremum search"));
    }
    Ok((x, v))
}

/// Eyring prediction of the escape-rate ratio `rate(a) / rate(b)` for two
/// wells sharing a saddle: `e^{β (F_a - F_b)}` with each well's free energy
/// taken over its basin (split at the saddle).
pub fn predicted_rate_ratio_1d(landscape: &GaussianMixtureLandscape, a: usize, b: usize, beta: f64) -> Result<f64> {
    let (s, _) = saddle_1d(landscape, a, b)?;
    let energy = |x: &[f64]| -landscape.eval_unchecked(x);
    let basin = |j: usize| -> Result<Region> {
        let w = &landscape.wells()[j];
        let c = w.center[0];
        if c < s {
            Region::new(vec![(c - 10.0 * w.width, s)])
        } else {
            Region::new(vec![(s, c + 10.0 * w.width)])
        }
    };
    let fa = free_energy(&basin(a)?, energy, beta, 4001)?.value;
    let fb = free_energy(&basin(b)?, energy, beta, 4001)?.value;
    // rate_a / rate_b = e^{-β(F1 - F_a)} / e^{-β(F1 - F_b)}
    Ok(eyring_rate_factor(0.0, fa, beta)? / eyring_rate_factor(0.0, fb, beta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn flat_energy_gives_log_volume() {
        let r = Region::new(vec![(0.0, 2.0), (-1.0, 2.0)]).unwrap();
        let f = free_energy(&r, |_| 0.0, 2.0, 51).unwrap();
        assert!((f.value + 6f64.ln() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_free_energy() {
        for sigma in [0.5, 1.0, 2.0] {
            let r = Region::new(vec![(-8.0 * sigma, 8.0 * sigma)]).unwrap();
            let f = free_energy(&r, |x| x[0] * x[0] / (2.0 * sigma * sigma), 1.0, 2001).unwrap();
            assert!((f.value + (sigma * (2.0 * PI).sqrt()).ln()).abs() < 1e-4);
            assert!(f.converged(1e-4));
        }
    }

    #[test]
    fn doubling_width_lowers_free_energy_by_log2() {
        let beta = 1.7;
        let g = |sigma: f64| {
            let r = Region::new(vec![(-8.0 * sigma, 8.0 * sigma)]).unwrap();
            free_energy(&r, |x| x[0] * x[0] / (2.0 * sigma * sigma) / beta, beta, 4001).unwrap().value
        };
        assert!((g(1.0) - g(2.0) - 2f64.ln() / beta).abs() < 1e-4);
    }

    #[test]
    fn monotone_in_energy_and_region() {
        let r = Region::new(vec![(-1.0, 1.0)]).unwrap();
        let lo = free_energy(&r, |x| x[0] * x[0], 1.0, 201).unwrap().value;
        let hi = free_energy(&r, |x| x[0] * x[0] + 0.1, 1.0, 201).unwrap().value;
        assert!(hi > lo);
        let big = Region::new(vec![(-2.0, 2.0)]).unwrap();
        assert!(free_energy(&big, |x| x[0] * x[0], 1.0, 401).unwrap().value < lo);
    }

    #[test]
    fn rate_factor_values() {
        assert_eq!(eyring_rate_factor(1.5, 1.5, 3.0).unwrap(), 1.0);
        assert!((eyring_rate_factor(2f64.ln(), 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((eyring_rate_factor(1.0, 0.0, 2.0).unwrap() - (-2f64).exp()).abs() < 1e-15);
        assert!(eyring_rate_factor(1e6, 0.0, 1.0).unwrap() > 0.0);
        assert!(eyring_rate_factor(-1e6, 0.0, 1.0).unwrap().is_finite());
        assert!(eyring_rate_factor(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn rate_factor_reciprocal() {
        for (f1, f0, b) in [(0.3, -0.2, 1.0), (2.0, 1.0, 4.0), (-1.0, 3.0, 0.25)] {
            let p = eyring_rate_factor(f1, f0, b).unwrap() * eyring_rate_factor(f0, f1, b).unwrap();
            assert!((p - 1.0).abs() <= 4.0 * f64::EPSILON, "{p}");
        }
    }

    #[test]
    fn underflow_is_reported() {
        let r = Region::new(vec![(0.0, 1.0)]).unwrap();
        assert!(free_energy(&r, |_| f64::INFINITY, 1.0, 11).is_err());
    }

    #[test]
    fn equal_depth_pair_is_balanced() {
        let l = equal_depth_pair(1.0, 2.0, 5.0).unwrap();
        let (_, a) = local_max_1d(&l, 0).unwrap();
        let (_, b) = local_max_1d(&l, 1).unwrap();
        assert!((a - b).abs() < 1e-12);
        let bar = barrier_1d(&l, 0, 1).unwrap();
        assert!((bar - barrier_1d(&l, 1, 0).unwrap()).abs() < 1e-12);
        assert!(bar > 0.5 && bar < 0.65, "{bar}");
        let ratio = predicted_rate_ratio_1d(&l, 0, 1, 4.0 / bar).unwrap();
        assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
    }

    #[test]
    fn hot_escape_is_quick() {
        let l = equal_depth_pair(1.0, 2.0, 5.0).unwrap();
        let bar = barrier_1d(&l, 0, 1).unwrap();
        let e = empirical_escape_rate(&l, 0, 4.0 * bar, 200, 100_000, 0.01, 3).unwrap();
        assert!(!e.censored);
        // Free diffusion over three length units at θ ≈ 2.3 takes O(1) time;
        // the mean carries a tail from excursions away from the target, and
        // is still an order of magnitude below the β·barrier = 4 value (~550).
        let mut t = e.passage_times.clone();
        t.sort_by(f64::total_cmp);
        assert!(t[t.len() / 2] < 5.0, "median {}", t[t.len() / 2]);
        assert!(e.mfpt_mean < 55.0, "{}", e.mfpt_mean);
    }

    #[test]
    fn censoring_is_flagged() {
        let l = equal_depth_pair(1.0, 2.0, 5.0).unwrap();
        let e = empirical_escape_rate(&l, 0, 0.05, 20, 10, 0.01, 0).unwrap();
        assert!(e.censored);
        assert_eq!(e.censored_runs, 20);
        assert!(e.passage_times.is_empty());
    }
}
