//! Every constant the harness fills in when a config omits it, with where
//! the value comes from.

use serde::Serialize;

use super::ExperimentKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Stated by the method's original description.
    Published,
    /// Chosen for this implementation where the source is silent.
    Artifact,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::Published => "published value",
            Provenance::Artifact => "artifact default",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DefaultEntry {
    /// `None` applies to every kind.
    pub kind: Option<ExperimentKind>,
    /// Dotted key path in the config document.
    pub key: &'static str,
    /// TOML literal.
    pub value: &'static str,
    pub provenance: Provenance,
    pub note: &'static str,
}

use ExperimentKind::*;
use Provenance::*;

const fn entry(
    kind: Option<ExperimentKind>,
    key: &'static str,
    value: &'static str,
    provenance: Provenance,
    note: &'static str,
) -> DefaultEntry {
    DefaultEntry { kind, key, value, provenance, note }
}

const TWO_WELLS: &str = "[{ center = [-5.5, -5.5], width = 3.0, amplitude = 9.0 }, \
                         { center = [3.0, 3.0], width = 1.5, amplitude = 2.25 }]";
const PURSUIT_WELLS: &str = "[{ center = [0.0, 0.0], width = 0.5, amplitude = 0.25 }, \
                             { center = [-7.0, -7.0], width = 2.0, amplitude = 8.0 }]";

pub const DEFAULTS: &[DefaultEntry] = &[
    entry(None, "seed", "0", Artifact, "master seed"),
    // Langevin capture fractions.
    entry(Some(SgldFraction), "landscape.wells", TWO_WELLS, Published, "wide well c1, narrow well c2, q = σ²"),
    entry(Some(SgldFraction), "params.x0", "[0.0, 0.0]", Published, "common start point"),
    entry(Some(SgldFraction), "params.t_max", "0.8", Published, "temperatures span [0, t_max]"),
    entry(Some(SgldFraction), "params.temperature_count", "15", Published, "uniform temperature grid size"),
    entry(Some(SgldFraction), "params.runs", "200", Artifact, "runs per temperature"),
    entry(Some(SgldFraction), "params.learning_rate", "0.05", Artifact, "step size α"),
    entry(Some(SgldFraction), "params.max_iterations", "2000", Published, "iteration budget K"),
    entry(Some(SgldFraction), "params.patience", "50", Artifact, "consecutive in-vicinity iterates for capture"),
    entry(Some(SgldCaptureCurve), "landscape.wells", TWO_WELLS, Published, "same landscape as the fraction study"),
    entry(Some(SgldCaptureCurve), "params.x0", "[0.0, 0.0]", Published, "common start point"),
    entry(Some(SgldCaptureCurve), "params.betas", "[0.75, 1.5, 2.25, 3.0]", Published, "β = 0 dropped: T = 1/β"),
    entry(Some(SgldCaptureCurve), "params.runs", "200", Artifact, "runs per β"),
    entry(Some(SgldCaptureCurve), "params.learning_rate", "0.05", Artifact, "step size α"),
    entry(Some(SgldCaptureCurve), "params.max_iterations", "2000", Published, "iteration budget K"),
    entry(Some(SgldCaptureCurve), "params.patience", "50", Artifact, "consecutive in-vicinity iterates for capture"),
    // Fokker-Planck stationarity check.
    entry(
        Some(FpVerify),
        "landscape.wells",
        "[{ center = [-2.0], width = 1.0, amplitude = 1.0 }, { center = [2.0], width = 1.0, amplitude = 1.0 }]",
        Artifact,
        "symmetric 1D double well, f = -L",
    ),
    entry(Some(FpVerify), "params.beta", "2.0", Artifact, "inverse temperature"),
    entry(Some(FpVerify), "params.lower", "-8.0", Artifact, "grid lower bound"),
    entry(Some(FpVerify), "params.upper", "8.0", Artifact, "grid upper bound"),
    entry(Some(FpVerify), "params.spacing", "0.05", Artifact, "grid spacing h"),
    entry(Some(FpVerify), "params.dt", "0.0005", Artifact, "below h²/(4θ)"),
    entry(Some(FpVerify), "params.steps", "10000", Artifact, "evolution steps"),
    // Escape rates.
    entry(Some(EyringMfpt), "params.narrow_width", "1.0", Artifact, "narrow well width"),
    entry(Some(EyringMfpt), "params.wide_width", "2.0", Artifact, "width ratio 2"),
    entry(Some(EyringMfpt), "params.separation", "5.0", Artifact, "distance between centers"),
    entry(Some(EyringMfpt), "params.beta_barrier", "4.0", Artifact, "θ = barrier / beta_barrier"),
    entry(Some(EyringMfpt), "params.runs", "500", Artifact, "first-passage runs per well"),
    entry(Some(EyringMfpt), "params.dt", "0.01", Artifact, "Euler-Maruyama step"),
    entry(Some(EyringMfpt), "params.max_steps", "2000000", Artifact, "censoring budget per run"),
    // Minimax dynamics.
    entry(Some(GanTrajectory), "params.sample", "[-1.2, -0.6, -0.2, 0.1, 0.4, 0.9, 1.5]", Artifact, "data sample"),
    entry(Some(GanTrajectory), "params.disc_center", "0.0", Artifact, "discriminator m"),
    entry(Some(GanTrajectory), "params.disc_width", "1.0", Artifact, "discriminator s"),
    entry(Some(GanTrajectory), "params.disc_gain", "2.0", Artifact, "discriminator a"),
    entry(Some(GanTrajectory), "params.disc_bias", "-1.0", Artifact, "discriminator b"),
    entry(Some(GanTrajectory), "params.gen_mean", "2.0", Artifact, "generator μ"),
    entry(Some(GanTrajectory), "params.gen_std", "1.0", Artifact, "generator e^τ"),
    entry(Some(GanTrajectory), "params.theta", "0.001", Artifact, "temperature"),
    entry(Some(GanTrajectory), "params.dt", "0.01", Artifact, "Euler-Maruyama step"),
    entry(Some(GanTrajectory), "params.steps", "5000", Artifact, "steps"),
    entry(Some(GanTrajectory), "params.record_every", "10", Artifact, "output decimation"),
    entry(Some(GanTrajectory), "params.quad_nodes", "64", Artifact, "Gauss-Legendre nodes"),
    entry(Some(GanTrajectory), "params.quad_half_width", "8.0", Artifact, "quadrature span in generator stds"),
    entry(Some(BilinearCheck), "params.omega", "1.0", Artifact, "coupling ω"),
    entry(Some(BilinearCheck), "params.x0", "0.0", Artifact, "initial x"),
    entry(Some(BilinearCheck), "params.y0", "1.0", Artifact, "initial y"),
    entry(Some(BilinearCheck), "params.dt", "0.0001", Artifact, "Euler step"),
    entry(Some(BilinearCheck), "params.periods", "1.0", Artifact, "integration span in periods 2π/ω"),
    entry(Some(BilinearCheck), "params.record_every", "100", Artifact, "output decimation"),
    // Pursuit.
    entry(Some(PredatorPrey), "landscape.wells", PURSUIT_WELLS, Published, "narrow well at the origin, wide well"),
    entry(Some(PredatorPrey), "params.x0", "[0.5, 0.0]", Published, "prey start"),
    entry(Some(PredatorPrey), "params.y0", "[0.0, 2.0]", Published, "predator start"),
    entry(Some(PredatorPrey), "params.interaction.a", "0.3", Published, "A"),
    entry(Some(PredatorPrey), "params.interaction.l", "1.0", Published, "l"),
    entry(Some(PredatorPrey), "params.interaction.c", "1000.0", Published, "c"),
    entry(Some(PredatorPrey), "params.interaction.yukawa_strength", "10.0", Published, "C"),
    entry(Some(PredatorPrey), "params.interaction.yukawa_decay", "10.0", Published, "σ_int"),
    entry(Some(PredatorPrey), "params.interaction.alpha_y", "0.15", Artifact, "predator speed, A > α_y"),
    entry(Some(PredatorPrey), "params.dt", "0.001", Artifact, "Euler step"),
    entry(Some(PredatorPrey), "params.steps", "200000", Artifact, "steps"),
    entry(Some(PredatorPrey), "params.record_every", "100", Artifact, "trajectory decimation"),
    entry(Some(PredatorPrey), "params.classifier.window_fraction", "0.2", Artifact, "final window share"),
    entry(Some(PredatorPrey), "params.classifier.radius_factor", "3.0", Artifact, "terminal vicinity in widths"),
    entry(
        Some(PredatorPrey),
        "params.classifier.residence_time",
        "1.0",
        Artifact,
        "time in a σ-vicinity to count a visit",
    ),
    entry(Some(PredatorPrey), "params.classifier.min_sign_changes", "2", Artifact, "oscillation evidence"),
    entry(Some(PredatorPrey), "params.classifier.amplitude_floor", "1e-6", Artifact, "sign-change test waived below"),
    entry(Some(PredatorPrey), "params.classifier.min_states", "50", Artifact, "minimum recorded states"),
    entry(Some(OscillationSolve), "params.well_amplitude", "8.0", Published, "wide pursuit well q"),
    entry(Some(OscillationSolve), "params.well_width", "2.0", Published, "wide pursuit well σ"),
    entry(Some(OscillationSolve), "params.angles", "[0.17453292519943295]", Published, "critical angle π/18"),
    entry(Some(OscillationSolve), "params.interaction.a", "0.3", Published, "A"),
    entry(Some(OscillationSolve), "params.interaction.l", "1.0", Published, "l"),
    entry(Some(OscillationSolve), "params.interaction.c", "1000.0", Published, "c"),
    entry(Some(OscillationSolve), "params.interaction.yukawa_strength", "10.0", Published, "C"),
    entry(Some(OscillationSolve), "params.interaction.yukawa_decay", "10.0", Published, "σ_int"),
    entry(Some(OscillationSolve), "params.interaction.alpha_y", "0.15", Artifact, "predator speed, A > α_y"),
    entry(Some(OscillationSolve), "params.critical_search", "true", Artifact, "bisect for the smallest feasible angle"),
    // Branching populations.
    entry(Some(Branching), "params.peaks.narrow_center", "-3.0", Artifact, "narrow cluster location"),
    entry(Some(Branching), "params.peaks.narrow_points", "10", Artifact, "narrow cluster size"),
    entry(Some(Branching), "params.peaks.narrow_spread", "0.0", Artifact, "point-like narrow cluster"),
    entry(Some(Branching), "params.peaks.wide_center", "3.0", Artifact, "wide cluster location"),
    entry(Some(Branching), "params.peaks.wide_points", "20", Artifact, "wide cluster size"),
    entry(Some(Branching), "params.peaks.wide_spread", "1.0", Artifact, "starting spread, re-solved when equalize"),
    entry(Some(Branching), "params.equalize", "true", Artifact, "equal likelihood peak heights"),
    entry(Some(Branching), "params.disc_width", "0.5", Artifact, "discriminator s"),
    entry(Some(Branching), "params.disc_gain", "4.0", Artifact, "discriminator a"),
    entry(Some(Branching), "params.disc_bias", "-2.0", Artifact, "discriminator b"),
    entry(Some(Branching), "params.generator_std", "0.5", Artifact, "generator e^τ"),
    entry(Some(Branching), "params.initial_discriminators", "20", Artifact, "initial discriminators"),
    entry(Some(Branching), "params.initial_generators", "4", Artifact, "initial generators"),
    entry(Some(Branching), "params.init_margin", "1.0", Artifact, "initial spread beyond the clusters"),
    entry(Some(Branching), "params.rates.generator_death", "0.2", Artifact, "δ_g"),
    entry(Some(Branching), "params.rates.disc_replication", "0.5", Artifact, "κ for exp(V1)"),
    entry(Some(Branching), "params.rates.disc_death", "0.1", Artifact, "κ for -V2"),
    entry(Some(Branching), "params.rates.gen_replication", "0.05", Artifact, "κ for -W"),
    entry(Some(Branching), "params.rates.cap", "200", Artifact, "population cap per kind"),
    entry(Some(Branching), "params.theta", "0.01", Artifact, "temperature"),
    entry(Some(Branching), "params.dt", "0.05", Artifact, "step"),
    entry(Some(Branching), "params.steps", "1000", Artifact, "steps per run"),
    entry(Some(Branching), "params.window_fraction", "0.5", Artifact, "averaging window share"),
    entry(Some(Branching), "params.peak_radius", "1.5", Artifact, "distance counted toward a peak"),
    entry(Some(Branching), "params.quad_nodes", "16", Artifact, "Gauss-Legendre nodes"),
    entry(Some(Branching), "params.quad_half_width", "6.0", Artifact, "quadrature span in generator stds"),
    entry(Some(Branching), "params.runs", "200", Artifact, "paired runs per arm"),
    // Regression benchmark.
    entry(Some(Regression), "params.train_fraction", "0.8", Published, "train share of the split"),
    entry(Some(Regression), "params.learning_rate", "0.01", Artifact, "gradient descent step"),
    entry(Some(Regression), "params.iterations", "3000", Artifact, "iterations for every method"),
    entry(Some(Regression), "params.splits", "20", Artifact, "extra seeded splits for the stability study"),
    entry(Some(Regression), "params.interaction.a", "0.3", Published, "A"),
    entry(Some(Regression), "params.interaction.l", "1.0", Published, "l"),
    entry(Some(Regression), "params.interaction.c", "1000.0", Published, "c"),
    entry(Some(Regression), "params.interaction.yukawa_strength", "10.0", Published, "C"),
    entry(Some(Regression), "params.interaction.yukawa_decay", "10.0", Published, "σ_int"),
    entry(Some(Regression), "params.interaction.alpha_y", "0.15", Artifact, "predator speed, A > α_y"),
    entry(Some(Regression), "params.pp.dt", "0.01", Artifact, "prey step, equal to the GD rate"),
    entry(Some(Regression), "params.pp.predator_offset", "0.5", Artifact, "predator start along the first coefficient"),
    entry(Some(Regression), "params.pp.window_fraction", "0.2", Artifact, "final window for prey selection"),
];

/// Ledger entries relevant to `kind`, in table order.
pub fn defaults_for(kind: ExperimentKind) -> impl Iterator<Item = &'static DefaultEntry> {
    DEFAULTS.iter().filter(move |e| e.kind.is_none_or(|k| k == kind))
}
