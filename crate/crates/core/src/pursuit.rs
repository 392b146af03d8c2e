//! Deterministic predator-prey pursuit on a landscape.
//!
//! The prey follows `dx/dt = ∇L(x) + V(x - y)` and the predator moves toward
//! it at constant speed, `dy/dt = α_y (x - y)/‖x - y‖`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::landscape::GaussianMixtureLandscape;
use crate::output::CsvTable;

/// Distance at which the forces are evaluated when prey and predator coincide.
pub const D_MIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionParams {
    /// Mid-range magnitude.
    pub a: f64,
    /// Characteristic intermediate distance.
    pub l: f64,
    /// Sigmoid sharpness.
    pub c: f64,
    /// Yukawa strength.
    pub yukawa_strength: f64,
    /// Yukawa decay rate.
    pub yukawa_decay: f64,
    /// Predator speed.
    pub alpha_y: f64,
}

impl InteractionParams {
    /// Strictly positive parameters with `A > α_y`.
    pub fn new(a: f64, l: f64, c: f64, yukawa_strength: f64, yukawa_decay: f64, alpha_y: f64) -> Result<Self> {
        let p = Self { a, l, c, yukawa_strength, yukawa_decay, alpha_y };
        for (name, v) in p.named() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if a <= alpha_y {
            return Err(Error::param("alpha_y", format!("need A > alpha_y, got A = {a}, alpha_y = {alpha_y}")));
        }
        Ok(p)
    }

    /// No interaction and a motionless predator.
    pub fn inert() -> Self {
        Self { a: 0.0, l: 1.0, c: 1.0, yukawa_strength: 0.0, yukawa_decay: 1.0, alpha_y: 0.0 }
    }

    pub fn with_l(self, l: f64) -> Self {
        Self { l, ..self }
    }

    fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("A", self.a),
            ("l", self.l),
            ("c", self.c),
            ("C", self.yukawa_strength),
            ("sigma_int", self.yukawa_decay),
            ("alpha_y", self.alpha_y),
        ]
    }

    /// Nonnegative finite values; zeros allowed so the pursuit can be
    /// switched off.
    pub fn check(&self) -> Result<()> {
        for (name, v) in self.named() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be nonnegative and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// `‖V‖` at distance `d > 0`.
    pub fn magnitude(&self, d: f64) -> f64 {
        let z = self.c * (d - self.l);
        // 1/(1+e^z) underflows cleanly for large z.
        let sigmoid = if z > 700.0 { 0.0 } else { 1.0 / (1.0 + z.exp()) };
        self.a * sigmoid + self.yukawa_strength * (-self.yukawa_decay * d).exp() / d
    }

    /// Estimated narrowest width that gets pushed out, `~1/σ_int`.
    pub fn sigma_min(&self) -> f64 {
        1.0 / self.yukawa_decay
    }

    /// Estimated widest well with oscillations, `~l`.
    pub fn sigma_max(&self) -> f64 {
        self.l
    }
}

/// Unit direction and length of `delta`, with the coincidence fallback.
pub(crate) fn direction(delta: &[f64]) -> (Vec<f64>, f64) {
    let d = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
    if d < D_MIN || !d.is_finite() {
        log::warn!("prey and predator coincide (d = {d:e}); using d_min along the first axis");
        let mut u = vec![0.0; delta.len()];
        if let Some(first) = u.first_mut() {
            *first = 1.0;
        }
        return (u, D_MIN);
    }
    (delta.iter().map(|v| v / d).collect(), d)
}

/// Repulsion of the prey from the predator, `delta = x - y`.
pub fn interaction_force(delta: &[f64], params: &InteractionParams) -> Vec<f64> {
    let (u, d) = direction(delta);
    let m = params.magnitude(d);
    u.into_iter().map(|v| m * v).collect()
}

/// Pursuit vector `α_y (x - y)/‖x - y‖`; the predator moves along it.
pub fn pursuit_force(delta: &[f64], alpha_y: f64) -> Vec<f64> {
    let (u, _) = direction(delta);
    u.into_iter().map(|v| alpha_y * v).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PursuitState {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Recorded pursuit run, states stored flat (`dim` values per state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PursuitTrajectory {
    pub dim: usize,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Step at which a non-finite state stopped the run.
    pub truncated_at: Option<usize>,
    /// Largest single-step prey displacement.
    pub max_prey_step: f64,
}

impl PursuitTrajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn prey(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn predator(&self, i: usize) -> &[f64] {
        &self.y[i * self.dim..(i + 1) * self.dim]
    }

    pub fn state(&self, i: usize) -> PursuitState {
        PursuitState { t: self.t[i], x: self.prey(i).to_vec(), y: self.predator(i).to_vec() }
    }

    pub fn separation(&self, i: usize) -> f64 {
        dist(self.prey(i), self.predator(i))
    }

    /// Trajectory CSV for a 2D run, every `stride`-th recorded state.
    pub fn to_csv(&self, landscape: &GaussianMixtureLandscape, stride: usize) -> Result<CsvTable> {
        check_dim(2, self.dim)?;
        let mut t = CsvTable::new(&["t", "x1", "x2", "y1", "y2", "d", "L(x)"]);
        for i in (0..self.len()).step_by(stride.max(1)) {
            let (x, y) = (self.prey(i), self.predator(i));
            t.push(vec![
                self.t[i].into(),
                x[0].into(),
                x[1].into(),
                y[0].into(),
                y[1].into(),
                self.separation(i).into(),
                landscape.eval(x)?.into(),
            ]);
        }
        Ok(t)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

/// Explicit Euler integration of the pursuit system. The initial state and
/// every `record_every`-th state are kept.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    landscape: &GaussianMixtureLandscape,
    x0: &[f64],
    y0: &[f64],
    params: &InteractionParams,
    dt: f64,
    steps: usize,
    record_every: usize,
) -> Result<PursuitTrajectory> {
    let dim = landscape.dimension();
    check_dim(dim, x0.len())?;
    check_dim(dim, y0.len())?;
    params.check()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "must be positive"));
    }
    if record_every == 0 {
        return Err(Error::param("record_every", "must be at least 1"));
    }
    let sigma_min = landscape.wells().iter().map(|w| w.width).fold(f64::INFINITY, f64::min);
    let n_rec = steps / record_every + 1;
    let mut tr = PursuitTrajectory {
        dim,
        t: Vec::with_capacity(n_rec),
        x: Vec::with_capacity(n_rec * dim),
        y: Vec::with_capacity(n_rec * dim),
        truncated_at: None,
        max_prey_step: 0.0,
    };
    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut grad = vec![0.0; dim];
    let mut delta = vec![0.0; dim];
    let mut warned = false;
    tr.t.push(0.0);
    tr.x.extend_from_slice(&x);
    tr.y.extend_from_slice(&y);

    for k in 0..steps {
        landscape.grad_into(&x, &mut grad);
        for i in 0..dim {
            delta[i] = x[i] - y[i];
        }
        let (u, d) = direction(&delta);
        let v = params.magnitude(d);
        let mut step2 = 0.0;
        for i in 0..dim {
            let dx = dt * (grad[i] + v * u[i]);
            step2 += dx * dx;
            x[i] += dx;
            y[i] += dt * params.alpha_y * u[i];
        }
        let step = step2.sqrt();
        tr.max_prey_step = tr.max_prey_step.max(step);
        if step > 0.5 * sigma_min && !warned {
            log::warn!("prey moved {step} in one step at k = {k}, more than half the narrowest width");
            warned = true;
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            log::warn!("non-finite pursuit state at step {k}; trajectory truncated");
            tr.truncated_at = Some(k);
            break;
        }
        if (k + 1) % record_every == 0 {
            tr.t.push((k + 1) as f64 * dt);
            tr.x.extend_from_slice(&x);
            tr.y.extend_from_slice(&y);
        }
    }
    Ok(tr)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegimeLabel {
    Pushout {
        from: usize,
        to: usize,
    },
    Oscillation {
        well: usize,
    },
    Escape,
    /// Final window inside a well's 3σ-vicinity without detectable
    /// oscillation.
    Unresolved {
        well: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSettings {
    /// Share of the trajectory forming the final window.
    pub window_fraction: f64,
    /// Vicinity radius, in widths, for the terminal window.
    pub radius_factor: f64,
    /// Minimum time inside a σ-vicinity to count as a visit.
    pub residence_time: f64,
    pub min_sign_changes: usize,
    /// Below this range of the distance series the sign-change test is waived.
    pub amplitude_floor: f64,
    pub min_states: usize,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        Self {
            window_fraction: 0.2,
            radius_factor: 3.0,
            residence_time: 1.0,
            min_sign_changes: 2,
            amplitude_floor: 1e-6,
            min_states: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub label: RegimeLabel,
    /// Label of the final window alone.
    pub terminal: RegimeLabel,
    /// Wells whose σ-vicinity held the prey for at least the residence
    /// time, in order of visit (consecutive repeats merged).
    pub wells_visited: Vec<usize>,
    pub window_start_time: f64,
    pub window_states: usize,
    /// Range of the prey's distance to the terminal well center.
    pub window_min_radius: Option<f64>,
    pub window_max_radius: Option<f64>,
    pub window_sign_changes: Option<usize>,
    /// 5% and 95% quantiles of prey-predator distance in the window.
    pub separation_q05: f64,
    pub separation_q95: f64,
}

pub fn classify_regime(trajectory: &PursuitTrajectory, landscape: &GaussianMixtureLandscape) -> Result<RegimeReport> {
    classify_regime_with(trajectory, landscape, &ClassifierSettings::default())
}

pub fn classify_regime_with(
    tr: &PursuitTrajectory,
    landscape: &GaussianMixtureLandscape,
    s: &ClassifierSettings,
) -> Result<RegimeReport> {
    check_dim(landscape.dimension(), tr.dim)?;
    let n = tr.len();
    let window = ((n as f64 * s.window_fraction).ceil() as usize).max(2);
    if n < s.min_states || window > n {
        return Err(Error::param(
            "trajectory",
            format!("{n} states is too short to classify (need at least {})", s.min_states),
        ));
    }
    let start = n - window;

    let wells_visited = visits(tr, landscape, s.residence_time);

    let mut terminal_well = None;
    for (k, w) in landscape.wells().iter().enumerate() {
        let reach = s.radius_factor * w.width;
        let inside = (start..n).all(|i| dist(tr.prey(i), &w.center) <= reach);
        if inside {
            let worst = (start..n).map(|i| dist(tr.prey(i), &w.center) / w.width).fold(0.0, f64::max);
            if terminal_well.is_none_or(|(_, best)| worst < best) {
                terminal_well = Some((k, worst));
            }
        }
    }

    let mut seps: Vec<f64> = (start..n).map(|i| tr.separation(i)).collect();
    seps.sort_by(f64::total_cmp);
    let q = |p: f64| seps[((seps.len() - 1) as f64 * p).round() as usize];

    let mut report = RegimeReport {
        label: RegimeLabel::Escape,
        terminal: RegimeLabel::Escape,
        wells_visited,
        window_start_time: tr.t[start],
        window_states: window,
        window_min_radius: None,
        window_max_radius: None,
        window_sign_changes: None,
        separation_q05: q(0.05),
        separation_q95: q(0.95),
    };
    let Some((k, _)) = terminal_well else {
        return Ok(report);
    };

    let center = &landscape.wells()[k].center;
    let times = &tr.t[start..n];
    let radii: Vec<f64> = (start..n).map(|i| dist(tr.prey(i), center)).collect();
    let (lo, hi) = radii.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    let changes = detrended_sign_changes(times, &radii);
    report.window_min_radius = Some(lo);
    report.window_max_radius = Some(hi);
    report.window_sign_changes = Some(changes);

    let oscillating = hi - lo < s.amplitude_floor || changes >= s.min_sign_changes;
    report.terminal =
        if oscillating { RegimeLabel::Oscillation { well: k } } else { RegimeLabel::Unresolved { well: k } };
    report.label = report.terminal;
    if oscillating {
        // Last visit to a different well before the terminal one.
        let before_terminal = report.wells_visited.iter().rev().find(|&&j| j != k);
        if let Some(&j) = before_terminal {
            report.label = RegimeLabel::Pushout { from: j, to: k };
        }
    }
    Ok(report)
}

fn visits(tr: &PursuitTrajectory, landscape: &GaussianMixtureLandscape, residence_time: f64) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut run: Option<(usize, f64)> = None;
    let push = |j: usize, out: &mut Vec<usize>| {
        if out.last() != Some(&j) {
            out.push(j);
        }
    };
    for i in 0..tr.len() {
        let m = landscape.well_membership(tr.prey(i));
        run = match (m, run) {
            (Some(j), Some((r, t0))) if r == j => Some((j, t0)),
            (Some(j), _) => Some((j, tr.t[i])),
            (None, _) => None,
        };
        if let Some((j, t0)) = run {
            if tr.t[i] - t0 >= residence_time {
                push(j, &mut out);
            }
        }
    }
    out
}

/// Sign changes of `ys` after removing its least-squares line in `ts`.
pub fn detrended_sign_changes(ts: &[f64], ys: &[f64]) -> usize {
    let n = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = ts.iter().zip(ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mut prev = 0.0f64;
    let mut changes = 0;
    for (t, y) in ts.iter().zip(ys) {
        let r = y - my - slope * (t - mt);
        if r != 0.0 {
            if prev != 0.0 && r.signum() != prev.signum() {
                changes += 1;
            }
            prev = r;
        }
    }
    changes
}

/// Radially symmetric well `q·exp(-r²/(2σ²))` used by the limiting
/// oscillation relations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialWell {
    pub amplitude: f64,
    pub width: f64,
}

impl RadialWell {
    pub fn grad_norm(&self, r: f64) -> f64 {
        let s2 = self.width * self.width;
        self.amplitude * r / s2 * (-r * r / (2.0 * s2)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationRoot {
    pub r_x: f64,
    pub r_y: f64,
    pub d: f64,
    /// `R_x/R_y - ‖∇L + V‖/α_y`.
    pub speed_residual: f64,
    /// `‖∇L‖(R_x) - ‖V‖(d)`.
    pub force_residual: f64,
    /// `R_y² - (R_x² + d² - 2 R_x d cos θ)`.
    pub geometry_residual: f64,
}

impl OscillationRoot {
    pub fn max_residual(&self) -> f64 {
        self.speed_residual.abs().max(self.force_residual.abs()).max(self.geometry_residual.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OscillationOutcome {
    Feasible(OscillationRoot),
    /// No root in the scan box; `best` is the smallest residual reached.
    Infeasible {
        best: Option<OscillationRoot>,
    },
}

impl OscillationOutcome {
    pub fn root(&self) -> Option<&OscillationRoot> {
        match self {
            OscillationOutcome::Feasible(r) => Some(r),
            OscillationOutcome::Infeasible { .. } => None,
        }
    }
}

pub const OSCILLATION_TOL: f64 = 1e-8;

/// Evaluates the three relations at `(R_x, d)` for angle `theta`, placing
/// the well center at the origin, the prey at `(R_x, 0)` and the predator
/// at distance `d` from the prey, `theta` away from the prey-to-center line.
pub fn oscillation_residuals(
    well: &RadialWell,
    params: &InteractionParams,
    theta: f64,
    r_x: f64,
    d: f64,
) -> OscillationRoot {
    let x = [r_x, 0.0];
    let y = [r_x - d * theta.cos(), d * theta.sin()];
    let r_y = y[0].hypot(y[1]);
    let g = well.grad_norm(r_x);
    let v = params.magnitude(d);
    // ∇L points from x to the center; V points from y to x.
    let fx = -g + v * (x[0] - y[0]) / d;
    let fy = v * (x[1] - y[1]) / d;
    OscillationRoot {
        r_x,
        r_y,
        d,
        speed_residual: r_x / r_y - fx.hypot(fy) / params.alpha_y,
        force_residual: g - v,
        geometry_residual: r_y * r_y - (r_x * r_x + d * d - 2.0 * r_x * d * theta.cos()),
    }
}

/// Solves the limiting-oscillation relations by damped Newton iteration on
/// `(R_x, d)` started from the best points of a grid scan over
/// `R_x ∈ (0, 6σ_w]`, `d ∈ (0, 3l]`. Among converged roots the one with
/// the largest `R_x` is returned.
pub fn limiting_oscillation_solve(
    well: &RadialWell,
    params: &InteractionParams,
    theta: f64,
) -> Result<OscillationOutcome> {
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::param("theta", format!("must lie in (0, π/2), got {theta}")));
    }
    if !(well.amplitude > 0.0 && well.width > 0.0) {
        return Err(Error::param("well", "amplitude and width must be positive"));
    }
    if !(params.alpha_y > 0.0) {
        return Err(Error::param("alpha_y", "must be positive"));
    }
    params.check()?;

    let r_max = 6.0 * well.width;
    let d_max = 3.0 * params.l;
    let system = |p: [f64; 2]| -> Option<[f64; 2]> {
        let [r, d] = p;
        if !(r > 0.0 && d > 0.0 && r <= 2.0 * r_max && d <= 2.0 * d_max) {
            return None;
        }
        let res = oscillation_residuals(well, params, theta, r, d);
        let out = [res.speed_residual, res.force_residual];
        out.iter().all(|v| v.is_finite()).then_some(out)
    };
    let norm = |f: [f64; 2]| f[0].hypot(f[1]);

    const N: usize = 80;
    let mut seeds: Vec<(f64, [f64; 2])> = Vec::with_capacity(N * N);
    for i in 1..=N {
        for j in 1..=N {
            let p = [r_max * i as f64 / N as f64, d_max * j as f64 / N as f64];
            if let Some(f) = system(p) {
                seeds.push((norm(f), p));
            }
        }
    }
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best: Option<OscillationRoot> = None;
    let mut found: Option<OscillationRoot> = None;
    for &(_, p0) in seeds.iter().take(60) {
        let Some(p) = newton(&system, p0) else { continue };
        let root = oscillation_residuals(well, params, theta, p[0], p[1]);
        if root.r_x > r_max || root.d > d_max {
            continue;
        }
        if root.max_residual() < OSCILLATION_TOL {
            if found.is_none_or(|f| root.r_x > f.r_x) {
                found = Some(root);
            }
        } else if best.is_none_or(|b| root.max_residual() < b.max_residual()) {
            best = Some(root);
        }
    }
    Ok(match found {
        Some(r) => OscillationOutcome::Feasible(r),
        None => OscillationOutcome::Infeasible { best },
    })
}

fn newton(system: &impl Fn([f64; 2]) -> Option<[f64; 2]>, mut p: [f64; 2]) -> Option<[f64; 2]> {
    let norm = |f: [f64; 2]| f[0].hypot(f[1]);
    let mut f = system(p)?;
    for _ in 0..200 {
        if norm(f) < 1e-13 {
            return Some(p);
        }
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let h = 1e-7 * p[k].abs().max(1e-3);
            let mut pp = p;
            let mut pm = p;
            pp[k] += h;
            pm[k] -= h;
            let (fp, fm) = (system(pp)?, system(pm)?);
            for i in 0..2 {
                jac[i][k] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let step = [(jac[1][1] * f[0] - jac[0][1] * f[1]) / det, (-jac[1][0] * f[0] + jac[0][0] * f[1]) / det];
        let mut lambda = 1.0;
        loop {
            let cand = [p[0] - lambda * step[0], p[1] - lambda * step[1]];
            if let Some(fc) = system(cand) {
                if norm(fc) < norm(f) {
                    p = cand;
                    f = fc;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                return (norm(f) < 1e-10).then_some(p);
            }
        }
    }
    (norm(f) < 1e-10).then_some(p)
}
