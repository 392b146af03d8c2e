//! Branching populations of discriminators and generators.
//!
//! Particles diffuse under the multi-particle analogue of the GAN system and
//! replicate or die by discrete-time thinning: an event with rate `r` fires
//! with probability `r·dt` per step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gan::{
    generator_term_with_gradient, likelihood_gradient, likelihood_term, DiscriminatorModel, GenQuadrature,
    GeneratorModel, Sample, DISC_PARAMS, GEN_PARAMS,
};
use crate::output::CsvTable;
use crate::sde::{derive_seed, RngStream};
use crate::stats::{self, PairedTest};

/// Warn when a single-step event probability exceeds this.
pub const THINNING_WARN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticleKind {
    Discriminator,
    Generator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub kind: ParticleKind,
    pub position: Vec<f64>,
    pub id: u64,
    pub birth_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Replicate,
    Die,
    /// A replication suppressed by the population cap.
    Refused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub event: EventKind,
    pub kind: ParticleKind,
    pub id: u64,
    pub child: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    pub discriminators: Vec<Particle>,
    pub generators: Vec<Particle>,
    pub time: f64,
    next_id: u64,
    pub events: Vec<Event>,
    /// Keep events in `events`; off for long Monte-Carlo runs.
    pub log_events: bool,
}

impl PopulationState {
    pub fn new(discriminators: Vec<DiscriminatorModel>, generators: Vec<GeneratorModel>) -> Self {
        let mut s = Self {
            discriminators: Vec::new(),
            generators: Vec::new(),
            time: 0.0,
            next_id: 0,
            events: Vec::new(),
            log_events: true,
        };
        for d in discriminators {
            let p = s.spawn(ParticleKind::Discriminator, d.params.to_vec());
            s.discriminators.push(p);
        }
        for g in generators {
            let p = s.spawn(ParticleKind::Generator, g.params.to_vec());
            s.generators.push(p);
        }
        s
    }

    fn spawn(&mut self, kind: ParticleKind, position: Vec<f64>) -> Particle {
        let id = self.next_id;
        self.next_id += 1;
        Particle { kind, position, id, birth_time: self.time }
    }

    pub fn len(&self) -> usize {
        self.discriminators.len() + self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn disc_models(&self) -> Vec<DiscriminatorModel> {
        self.discriminators.iter().map(|p| disc_of(&p.position)).collect()
    }

    pub fn gen_models(&self) -> Vec<GeneratorModel> {
        self.generators.iter().map(|p| gen_of(&p.position)).collect()
    }

    /// Event log as JSON lines.
    pub fn events_jsonl(&self) -> String {
        self.events.iter().map(|e| serde_json::to_string(e).expect("event serializes") + "\n").collect()
    }
}

fn disc_of(p: &[f64]) -> DiscriminatorModel {
    DiscriminatorModel { params: [p[0], p[1], p[2], p[3]] }
}

fn gen_of(p: &[f64]) -> GeneratorModel {
    GeneratorModel { params: [p[0], p[1]] }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateParams {
    /// Fixed generator death rate `δ_g`.
    pub generator_death: f64,
    /// Discriminator replication rate per unit `exp(V1)`.
    pub disc_replication: f64,
    /// Discriminator death rate per unit `-V2`.
    pub disc_death: f64,
    /// Generator replication rate per unit `-W`.
    pub gen_replication: f64,
    /// Replications beyond this many particles of a kind are refused.
    pub cap: usize,
}

impl RateParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("generator_death", self.generator_death),
            ("disc_replication", self.disc_replication),
            ("disc_death", self.disc_death),
            ("gen_replication", self.gen_replication),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be nonnegative, got {v}")));
            }
        }
        if self.cap == 0 {
            return Err(Error::param("cap", "must be at least 1"));
        }
        Ok(())
    }

    pub fn zero() -> Self {
        Self { generator_death: 0.0, disc_replication: 0.0, disc_death: 0.0, gen_replication: 0.0, cap: 10_000 }
    }
}

/// Which coordinates of each parameter vector diffuse and drift; frozen
/// coordinates keep their initial value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveCoordinates {
    pub disc: [bool; DISC_PARAMS],
    pub gen: [bool; GEN_PARAMS],
}

impl ActiveCoordinates {
    pub fn all() -> Self {
        Self { disc: [true; DISC_PARAMS], gen: [true; GEN_PARAMS] }
    }

    /// Only discriminator centers and generator means move.
    pub fn locations_only() -> Self {
        Self { disc: [true, false, false, false], gen: [true, false] }
    }
}

/// Everything a step needs besides the state itself.
#[derive(Debug, Clone)]
pub struct BranchingModel {
    pub sample: Sample,
    pub quad: GenQuadrature,
    pub active: ActiveCoordinates,
}

/// Per-particle values of the population functionals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleFunctionals {
    /// `V1(x_a)` for each discriminator.
    pub v1: Vec<f64>,
    /// `V2(x_a, ȳ)` for each discriminator.
    pub v2: Vec<f64>,
    /// `W(x̄, y_b)` for each generator.
    pub w: Vec<f64>,
}

struct Forces {
    f: ParticleFunctionals,
    disc_grad: Vec<[f64; DISC_PARAMS]>,
    gen_grad: Vec<[f64; GEN_PARAMS]>,
}

/// One discriminator's `V1`, `V2`, its gradient, and each generator's term
/// with its generator gradient.
type DiscRow = (f64, f64, [f64; DISC_PARAMS], Vec<(f64, [f64; GEN_PARAMS])>);

fn forces(state: &PopulationState, model: &BranchingModel) -> Forces {
    let discs = state.disc_models();
    let gens = state.gen_models();
    let (m, n) = (discs.len(), gens.len());
    let rows: Vec<DiscRow> = discs
        .par_iter()
        .map(|d| {
            let v1 = likelihood_term(&model.sample, d);
            let mut grad = likelihood_gradient(&model.sample, d);
            let mut v2 = 0.0;
            let mut per_gen = Vec::with_capacity(n);
            for g in &gens {
                let pair = generator_term_with_gradient(d, g, &model.quad);
                v2 += pair.value;
                for (a, b) in grad.iter_mut().zip(pair.dx) {
                    *a += b;
                }
                per_gen.push((pair.value, pair.dy));
            }
            (v1, v2, grad, per_gen)
        })
        .collect();
    let mut out = Forces {
        f: ParticleFunctionals { v1: Vec::with_capacity(m), v2: Vec::with_capacity(m), w: vec![0.0; n] },
        disc_grad: Vec::with_capacity(m),
        gen_grad: vec![[0.0; GEN_PARAMS]; n],
    };
    for (v1, v2, grad, per_gen) in rows {
        out.f.v1.push(v1);
        out.f.v2.push(v2);
        out.disc_grad.push(grad);
        for (b, (val, dy)) in per_gen.into_iter().enumerate() {
            out.f.w[b] += val;
            for k in 0..GEN_PARAMS {
                out.gen_grad[b][k] += dy[k];
            }
        }
    }
    out
}

pub fn population_functionals(state: &PopulationState, model: &BranchingModel) -> ParticleFunctionals {
    forces(state, model).f
}

/// Birth and death rates implied by the functionals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleRates {
    pub disc_birth: Vec<f64>,
    pub disc_death: Vec<f64>,
    pub gen_birth: Vec<f64>,
    pub gen_death: Vec<f64>,
}

impl ParticleRates {
    pub fn from_functionals(f: &ParticleFunctionals, rates: &RateParams) -> Self {
        Self {
            disc_birth: f.v1.iter().map(|v| rates.disc_replication * v.exp()).collect(),
            disc_death: f.v2.iter().map(|v| rates.disc_death * (-v).max(0.0)).collect(),
            gen_birth: f.w.iter().map(|w| rates.gen_replication * (-w).max(0.0)).collect(),
            gen_death: vec![rates.generator_death; f.w.len()],
        }
    }

    pub fn max(&self) -> f64 {
        [&self.disc_birth, &self.disc_death, &self.gen_birth, &self.gen_death]
            .iter()
            .flat_map(|v| v.iter().copied())
            .fold(0.0, f64::max)
    }
}

/// Advances the population by one step: every particle takes an
/// Euler–Maruyama step (discriminators ascend `V`, generators descend `W`),
/// then each birth and death fires with probability `rate·dt`, using rates
/// from the pre-step state. A particle that dies does not also replicate.
pub fn branching_step(
    state: &mut PopulationState,
    model: &BranchingModel,
    rates: &RateParams,
    theta: f64,
    dt: f64,
    rng: &mut RngStream,
) -> Result<()> {
    rates.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "must be positive"));
    }
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::param("theta", "must be nonnegative"));
    }
    if state.is_empty() {
        state.time += dt;
        return Ok(());
    }
    let fr = forces(state, model);
    let pr = ParticleRates::from_functionals(&fr.f, rates);
    let max_p = pr.max() * dt;
    if max_p >= 1.0 {
        return Err(Error::param("dt", format!("event probability {max_p} >= 1; dt too coarse")));
    }
    if max_p > THINNING_WARN {
        log::warn!("event probability {max_p} exceeds {THINNING_WARN}; thinning is inaccurate");
    }

    let amp = (2.0 * theta * dt).sqrt();
    let draw = |rng: &mut RngStream| if theta > 0.0 { amp * rng.standard_normal() } else { 0.0 };
    for (p, g) in state.discriminators.iter_mut().zip(&fr.disc_grad) {
        for k in 0..DISC_PARAMS {
            if model.active.disc[k] {
                p.position[k] += dt * g[k] + draw(rng);
            }
        }
    }
    for (p, g) in state.generators.iter_mut().zip(&fr.gen_grad) {
        for k in 0..GEN_PARAMS {
            if model.active.gen[k] {
                p.position[k] += -dt * g[k] + draw(rng);
            }
        }
    }
    let bad = state.discriminators.iter().chain(&state.generators).any(|p| p.position.iter().any(|v| !v.is_finite()));
    if bad {
        return Err(Error::SimulationFault { step: 0, reason: "non-finite particle position".into() });
    }

    let t = state.time + dt;
    let discs = std::mem::take(&mut state.discriminators);
    state.discriminators = apply_events(state, discs, &pr.disc_birth, &pr.disc_death, dt, t, rates.cap, rng);
    let gens = std::mem::take(&mut state.generators);
    state.generators = apply_events(state, gens, &pr.gen_birth, &pr.gen_death, dt, t, rates.cap, rng);
    state.time = t;
    Ok(())
}

/// Draws one uniform only when the event is possible, so zero rates leave
/// the random stream untouched.
fn fires(p: f64, rng: &mut RngStream) -> bool {
    p > 0.0 && rng.uniform() < p
}

#[allow(clippy::too_many_arguments)]
fn apply_events(
    state: &mut PopulationState,
    particles: Vec<Particle>,
    birth: &[f64],
    death: &[f64],
    dt: f64,
    t: f64,
    cap: usize,
    rng: &mut RngStream,
) -> Vec<Particle> {
    let mut out = Vec::with_capacity(particles.len());
    let mut children = Vec::new();
    let mut count = particles.len();
    for (i, p) in particles.into_iter().enumerate() {
        let dies = fires(death[i] * dt, rng);
        let splits = fires(birth[i] * dt, rng);
        if dies {
            if state.log_events {
                state.events.push(Event { t, event: EventKind::Die, kind: p.kind, id: p.id, child: None });
            }
            count -= 1;
            continue;
        }
        if splits {
            if count >= cap {
                if state.log_events {
                    state.events.push(Event { t, event: EventKind::Refused, kind: p.kind, id: p.id, child: None });
                }
            } else {
                state.time = t;
                let child = state.spawn(p.kind, p.position.clone());
                if state.log_events {
                    state.events.push(Event {
                        t,
                        event: EventKind::Replicate,
                        kind: p.kind,
                        id: p.id,
                        child: Some(child.id),
                    });
                }
                count += 1;
                children.push(child);
            }
        }
        out.push(p);
    }
    out.extend(children);
    out
}

/// A data sample with two clusters: a point-like cluster and a spread one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPeakSample {
    pub narrow_center: f64,
    pub narrow_points: usize,
    pub narrow_spread: f64,
    pub wide_center: f64,
    pub wide_points: usize,
    pub wide_spread: f64,
}

impl TwoPeakSample {
    /// Points placed at Gaussian quantiles around each center.
    pub fn sample(&self) -> Result<Sample> {
        let mut z = cluster(self.narrow_center, self.narrow_spread, self.narrow_points);
        z.extend(cluster(self.wide_center, self.wide_spread, self.wide_points));
        Sample::new(z)
    }

    /// Mirror image around the midpoint with the narrow cluster copied onto
    /// both sides.
    pub fn symmetric(&self) -> Self {
        Self { wide_points: self.narrow_points, wide_spread: self.narrow_spread, ..*self }
    }
}

fn cluster(center: f64, spread: f64, n: usize) -> Vec<f64> {
    use statrs::distribution::{ContinuousCDF, Normal};
    let std_normal = Normal::standard();
    (0..n).map(|i| center + spread * std_normal.inverse_cdf((i as f64 + 0.5) / n as f64)).collect()
}

/// Spread of the wide cluster that gives both likelihood peaks the same
/// height for discriminators shaped like `template`.
pub fn equalize_peaks(peaks: &TwoPeakSample, template: &DiscriminatorModel) -> Result<TwoPeakSample> {
    let height = |p: &TwoPeakSample, at: f64| -> Result<f64> {
        let mut d = *template;
        d.params[0] = at;
        Ok(likelihood_term(&p.sample()?, &d))
    };
    let gap = |w: f64| -> Result<f64> {
        let p = TwoPeakSample { wide_spread: w, ..*peaks };
        Ok(height(&p, p.wide_center)? - height(&p, p.narrow_center)?)
    };
    let (mut lo, mut hi) = (peaks.narrow_spread, 10.0 * template.width() + peaks.narrow_spread);
    if gap(lo)? < 0.0 || gap(hi)? > 0.0 {
        return Err(Error::param(
            "wide_points",
            "cannot equalize peak heights: the wide cluster needs more points than the narrow one",
        ));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TwoPeakSample { wide_spread: 0.5 * (lo + hi), ..*peaks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuppressionConfig {
    pub peaks: TwoPeakSample,
    /// Solve for the wide spread that equalizes the peak heights.
    pub equalize: bool,
    /// Discriminator shape `(width, gain, bias)`; centers start uniformly
    /// over the span of both clusters.
    pub disc_width: f64,
    pub disc_gain: f64,
    pub disc_bias: f64,
    pub generator_std: f64,
    pub initial_discriminators: usize,
    pub initial_generators: usize,
    /// Extra margin around the clusters for initial positions.
    pub init_margin: f64,
    pub rates: RateParams,
    pub theta: f64,
    pub dt: f64,
    pub steps: usize,
    /// Share of steps, at the end, over which masses are averaged.
    pub window_fraction: f64,
    /// A discriminator counts toward a peak within this distance of it.
    pub peak_radius: f64,
    pub quad_nodes: usize,
    pub quad_half_width: f64,
    pub runs: usize,
    pub seed: u64,
}

/// Census at one step, for the CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Census {
    pub t: f64,
    pub n_disc: usize,
    pub n_gen: usize,
    pub mass_narrow: usize,
    pub mass_wide: usize,
}

pub fn census_csv(rows: &[Census]) -> CsvTable {
    let mut t = CsvTable::new(&["t", "n_disc", "n_gen", "mass_peak1", "mass_peak2"]);
    for c in rows {
        t.push(vec![c.t.into(), c.n_disc.into(), c.n_gen.into(), c.mass_narrow.into(), c.mass_wide.into()]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    /// Time-averaged mass near each peak over the window.
    pub mass_narrow: f64,
    pub mass_wide: f64,
    /// `None` when no discriminator was near either peak in the window.
    pub narrow_fraction: Option<f64>,
    pub final_discriminators: usize,
    pub final_generators: usize,
}

struct Prepared {
    model: BranchingModel,
    peaks: TwoPeakSample,
}

fn prepare(cfg: &SuppressionConfig, symmetric: bool) -> Result<Prepared> {
    let template = DiscriminatorModel::new(0.0, cfg.disc_width, cfg.disc_gain, cfg.disc_bias)?;
    let mut peaks = if cfg.equalize { equalize_peaks(&cfg.peaks, &template)? } else { cfg.peaks };
    if symmetric {
        peaks = peaks.symmetric();
    }
    Ok(Prepared {
        model: BranchingModel {
            sample: peaks.sample()?,
            quad: GenQuadrature::new(cfg.quad_nodes, cfg.quad_half_width)?,
            active: ActiveCoordinates::locations_only(),
        },
        peaks,
    })
}

/// One seeded run; `with_generators = false` starts with none.
pub fn suppression_run(
    cfg: &SuppressionConfig,
    symmetric: bool,
    with_generators: bool,
    stream: u64,
    census: Option<&mut Vec<Census>>,
) -> Result<RunOutcome> {
    let prep = prepare(cfg, symmetric)?;
    run_prepared(cfg, &prep, with_generators, stream, census)
}

fn run_prepared(
    cfg: &SuppressionConfig,
    prep: &Prepared,
    with_generators: bool,
    stream: u64,
    mut census: Option<&mut Vec<Census>>,
) -> Result<RunOutcome> {
    let (a, b) = (prep.peaks.narrow_center, prep.peaks.wide_center);
    let (lo, hi) = (a.min(b) - cfg.init_margin, a.max(b) + cfg.init_margin);
    // Initial positions use their own stream so runs with and without
    // generators start from the same discriminators.
    let mut init = RngStream::new(derive_seed(cfg.seed, 1), stream);
    let discs: Result<Vec<_>> = (0..cfg.initial_discriminators)
        .map(|_| DiscriminatorModel::new(lo + (hi - lo) * init.uniform(), cfg.disc_width, cfg.disc_gain, cfg.disc_bias))
        .collect();
    let gens: Result<Vec<_>> = (0..cfg.initial_generators)
        .map(|_| GeneratorModel::new(lo + (hi - lo) * init.uniform(), cfg.generator_std))
        .collect();
    let mut state = PopulationState::new(discs?, if with_generators { gens? } else { Vec::new() });
    state.log_events = false;
    let mut rng = RngStream::new(derive_seed(cfg.seed, 2), stream);

    let near = |state: &PopulationState| -> (usize, usize) {
        let mut n = (0, 0);
        for p in &state.discriminators {
            let m = p.position[0];
            let (da, db) = ((m - a).abs(), (m - b).abs());
            if da <= cfg.peak_radius && da <= db {
                n.0 += 1;
            } else if db <= cfg.peak_radius {
                n.1 += 1;
            }
        }
        n
    };
    let window_start = cfg.steps - ((cfg.steps as f64 * cfg.window_fraction).round() as usize).min(cfg.steps);
    let (mut sum_a, mut sum_b, mut samples) = (0.0, 0.0, 0usize);
    for k in 0..cfg.steps {
        branching_step(&mut state, &prep.model, &cfg.rates, cfg.theta, cfg.dt, &mut rng).map_err(|e| match e {
            Error::SimulationFault { reason, .. } => Error::SimulationFault { step: k, reason },
            e => e,
        })?;
        let (na, nb) = near(&state);
        if let Some(c) = census.as_deref_mut() {
            c.push(Census {
                t: state.time,
                n_disc: state.discriminators.len(),
                n_gen: state.generators.len(),
                mass_narrow: na,
                mass_wide: nb,
            });
        }
        if k + 1 > window_start {
            sum_a += na as f64;
            sum_b += nb as f64;
            samples += 1;
        }
    }
    let (mass_narrow, mass_wide) =
        if samples > 0 { (sum_a / samples as f64, sum_b / samples as f64) } else { (0.0, 0.0) };
    Ok(RunOutcome {
        mass_narrow,
        mass_wide,
        narrow_fraction: (mass_narrow + mass_wide > 0.0).then(|| mass_narrow / (mass_narrow + mass_wide)),
        final_discriminators: state.discriminators.len(),
        final_generators: state.generators.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub label: String,
    pub runs: usize,
    /// Runs whose discriminators left both peaks empty over the window.
    pub excluded: usize,
    pub mean_narrow_fraction: f64,
    pub se_narrow_fraction: f64,
    pub mean_mass_narrow: f64,
    pub mean_mass_wide: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppressionSummary {
    pub baseline: ArmSummary,
    pub with_generators: ArmSummary,
    pub symmetric_control: ArmSummary,
    /// Paired test of `with - baseline` on runs valid in both arms.
    pub paired: PairedSummary,
    /// Two-sided p-value of the control's mean narrow fraction against 1/2.
    pub control_p_two_sided: f64,
    /// Spread of the wide cluster actually used.
    pub wide_spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedSummary {
    pub mean_diff: f64,
    pub se: f64,
    pub t: f64,
    pub p_less: f64,
    pub n: usize,
}

impl From<PairedTest> for PairedSummary {
    fn from(p: PairedTest) -> Self {
        Self { mean_diff: p.mean_diff, se: p.se, t: p.t, p_less: p.p_less, n: p.n }
    }
}

fn summarize(label: &str, outs: &[RunOutcome]) -> ArmSummary {
    let fr: Vec<f64> = outs.iter().filter_map(|o| o.narrow_fraction).collect();
    ArmSummary {
        label: label.to_string(),
        runs: outs.len(),
        excluded: outs.len() - fr.len(),
        mean_narrow_fraction: stats::mean(&fr),
        se_narrow_fraction: stats::std_error(&fr),
        mean_mass_narrow: stats::mean(&outs.iter().map(|o| o.mass_narrow).collect::<Vec<_>>()),
        mean_mass_wide: stats::mean(&outs.iter().map(|o| o.mass_wide).collect::<Vec<_>>()),
    }
}

/// Paired Monte-Carlo comparison of the narrow-peak mass fraction with and
/// without generators, plus a symmetric-peak control with generators.
pub fn narrow_peak_suppression_experiment(cfg: &SuppressionConfig) -> Result<SuppressionSummary> {
    if cfg.runs < 2 {
        return Err(Error::param("runs", "need at least two runs"));
    }
    if cfg.steps == 0 {
        return Err(Error::param("steps", "must be at least 1"));
    }
    if !(cfg.window_fraction > 0.0 && cfg.window_fraction <= 1.0) {
        return Err(Error::param("window_fraction", "must lie in (0, 1]"));
    }
    let prep = prepare(cfg, false)?;
    let sym = prepare(cfg, true)?;
    let arm = |p: &Prepared, gens: bool| -> Result<Vec<RunOutcome>> {
        (0..cfg.runs as u64).into_par_iter().map(|r| run_prepared(cfg, p, gens, r, None)).collect()
    };
    let base = arm(&prep, false)?;
    let with = arm(&prep, true)?;
    let control = arm(&sym, true)?;

    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (w, o) in with.iter().zip(&base) {
        if let (Some(x), Some(y)) = (w.narrow_fraction, o.narrow_fraction) {
            a.push(x);
            b.push(y);
        }
    }
    let cf: Vec<f64> = control.iter().filter_map(|o| o.narrow_fraction).collect();
    let half = vec![0.5; cf.len()];
    let ct = stats::paired_t(&cf, &half);
    let control_p_two_sided = 2.0 * ct.p_less.min(1.0 - ct.p_less);

    Ok(SuppressionSummary {
        baseline: summarize("baseline", &base),
        with_generators: summarize("with_generators", &with),
        symmetric_control: summarize("symmetric_control", &control),
        paired: stats::paired_t(&a, &b).into(),
        control_p_two_sided,
        wide_spread: prep.peaks.wide_spread,
    })
}

pub fn summary_csv(s: &SuppressionSummary) -> CsvTable {
    let mut t = CsvTable::new(&[
        "arm",
        "runs",
        "excluded",
        "mean_narrow_fraction",
        "se_narrow_fraction",
        "mean_mass_narrow",
        "mean_mass_wide",
    ]);
    for a in [&s.baseline, &s.with_generators, &s.symmetric_control] {
        t.push(vec![
            a.label.as_str().into(),
            a.runs.into(),
            a.excluded.into(),
            a.mean_narrow_fraction.into(),
            a.se_narrow_fraction.into(),
            a.mean_mass_narrow.into(),
            a.mean_mass_wide.into(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(sample: Vec<f64>, active: ActiveCoordinates) -> BranchingModel {
        BranchingModel { sample: Sample::new(sample).unwrap(), quad: GenQuadrature::default(), active }
    }

    fn disc(m: f64) -> DiscriminatorModel {
        DiscriminatorModel::new(m, 1.0, 3.0, -1.0).unwrap()
    }

    #[test]
    fn empty_population_stays_empty() {
        let mut s = PopulationState::new(vec![], vec![]);
        let m = model(vec![0.0], ActiveCoordinates::all());
        let rates =
            RateParams { generator_death: 1.0, disc_replication: 1.0, disc_death: 1.0, gen_replication: 1.0, cap: 10 };
        branching_step(&mut s, &m, &rates, 0.1, 0.01, &mut RngStream::new(0, 0)).unwrap();
        assert!(s.is_empty() && s.events.is_empty());
    }

    #[test]
    fn empty_sums_vanish() {
        let m = model(vec![0.0, 1.0], ActiveCoordinates::all());
        let f = population_functionals(&PopulationState::new(vec![disc(0.0)], vec![]), &m);
        assert_eq!(f.v2, vec![0.0]);
        let f = population_functionals(&PopulationState::new(vec![], vec![GeneratorModel::new(0.0, 1.0).unwrap()]), &m);
        assert_eq!(f.w, vec![0.0]);
    }

    #[test]
    fn single_pair_matches_value_function() {
        let m = model(vec![0.3, -0.2], ActiveCoordinates::all());
        let d = disc(0.1);
        let g = GeneratorModel::new(0.5, 0.8).unwrap();
        let f = population_functionals(&PopulationState::new(vec![d], vec![g]), &m);
        let v = crate::gan::value_function(&m.sample, &d, &g, &m.quad).unwrap();
        assert!((f.v2[0] - v.v2).abs() < 1e-14);
        assert!((f.w[0] - v.v2).abs() < 1e-14);
        assert!((f.v1[0] - v.v1).abs() < 1e-15);
    }

    #[test]
    fn duplicated_generator_doubles_v2() {
        let m = model(vec![0.0], ActiveCoordinates::all());
        let g = GeneratorModel::new(0.5, 0.8).unwrap();
        let one = population_functionals(&PopulationState::new(vec![disc(0.0), disc(2.0)], vec![g]), &m);
        let two = population_functionals(&PopulationState::new(vec![disc(0.0), disc(2.0)], vec![g, g]), &m);
        for (a, b) in one.v2.iter().zip(&two.v2) {
            assert!((2.0 * a - b).abs() < 1e-14);
            assert!(*a < 0.0);
        }
        assert!(one.w[0] < 0.0);
    }

    #[test]
    fn replication_copies_position_and_logs() {
        let m = model(vec![0.0], ActiveCoordinates::locations_only());
        let mut s = PopulationState::new(vec![disc(0.0)], vec![]);
        let rates = RateParams { disc_replication: 90.0, ..RateParams::zero() };
        let mut rng = RngStream::new(1, 0);
        while s.discriminators.len() == 1 {
            branching_step(&mut s, &m, &rates, 0.0, 0.01, &mut rng).unwrap();
        }
        assert_eq!(s.discriminators[0].position, s.discriminators[1].position);
        assert_eq!(s.events.len(), 1);
        assert_eq!(s.events[0].event, EventKind::Replicate);
        assert_eq!(s.events[0].child, Some(s.discriminators[1].id));
        assert!(s.events_jsonl().contains("\"replicate\""));
    }

    #[test]
    fn event_log_accounts_for_population() {
        let m = model(vec![0.0, 2.0], ActiveCoordinates::locations_only());
        let g = GeneratorModel::new(0.5, 0.8).unwrap();
        let mut s = PopulationState::new(vec![disc(0.0), disc(1.0), disc(2.0)], vec![g, g]);
        let rates =
            RateParams { generator_death: 2.0, disc_replication: 5.0, disc_death: 2.0, gen_replication: 2.0, cap: 8 };
        let mut rng = RngStream::new(2, 0);
        for _ in 0..300 {
            branching_step(&mut s, &m, &rates, 0.05, 0.01, &mut rng).unwrap();
        }
        let births = s.events.iter().filter(|e| e.event == EventKind::Replicate).count();
        let deaths = s.events.iter().filter(|e| e.event == EventKind::Die).count();
        assert_eq!(5 + births - deaths, s.len());
        let mut ids: Vec<u64> = s.discriminators.iter().chain(&s.generators).map(|p| p.id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), s.len());
        assert!(s.discriminators.len() <= 8 && s.generators.len() <= 8);
    }

    #[test]
    fn coarse_dt_rejected() {
        let m = model(vec![0.0], ActiveCoordinates::all());
        let mut s = PopulationState::new(vec![disc(0.0)], vec![]);
        let rates = RateParams { disc_replication: 1e4, ..RateParams::zero() };
        assert!(branching_step(&mut s, &m, &rates, 0.0, 0.1, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn zero_rates_reduce_to_langevin_walkers() {
        let m = model(vec![0.0, 0.5], ActiveCoordinates::all());
        let d0 = disc(0.7);
        let mut s = PopulationState::new(vec![d0], vec![]);
        let (theta, dt) = (0.2, 0.01);
        let mut rng = RngStream::new(4, 1);
        let mut reference = RngStream::new(4, 1);
        let mut x = d0.params;
        for _ in 0..50 {
            branching_step(&mut s, &m, &RateParams::zero(), theta, dt, &mut rng).unwrap();
            let g = likelihood_gradient(&m.sample, &DiscriminatorModel { params: x });
            for k in 0..DISC_PARAMS {
                x[k] += dt * g[k] + (2.0 * theta * dt).sqrt() * reference.standard_normal();
            }
        }
        assert_eq!(s.discriminators[0].position, x.to_vec());
    }

    #[test]
    fn equalized_peaks_have_equal_height() {
        let peaks = TwoPeakSample {
            narrow_center: -4.0,
            narrow_points: 10,
            narrow_spread: 0.0,
            wide_center: 4.0,
            wide_points: 20,
            wide_spread: 0.0,
        };
        let t = DiscriminatorModel::new(0.0, 0.5, 4.0, -2.0).unwrap();
        let eq = equalize_peaks(&peaks, &t).unwrap();
        assert!(eq.wide_spread > 0.0);
        let s = eq.sample().unwrap();
        let at = |m: f64| likelihood_term(&s, &DiscriminatorModel::new(m, 0.5, 4.0, -2.0).unwrap());
        assert!((at(-4.0) - at(4.0)).abs() < 1e-9);
    }
}
