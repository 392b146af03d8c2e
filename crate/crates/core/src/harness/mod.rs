//! Declarative experiment runs: a TOML config names one experiment kind,
//! omitted parameters are filled from the [`defaults`] ledger, and the run
//! writes CSV/JSON artifacts plus a run record into its own directory.
//!
//! Config layout:
//!
//! ```toml
//! kind = "sgld_fraction"
//! name = "wide_fraction"        # optional, defaults to the kind
//! seed = 7
//! output_dir = "wide_fraction"  # optional, relative to the output root
//!
//! [landscape]                   # only for kinds that use one
//! wells = [{ center = [0.0, 0.0], width = 1.0, amplitude = 1.0 }]
//!
//! [params]
//! runs = 50
//! ```

pub mod defaults;
mod experiments;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::branching::SuppressionConfig;
use crate::error::{Error, Result};
use crate::landscape::{GaussianMixtureLandscape, GaussianWell};
use crate::pursuit::{ClassifierSettings, InteractionParams};
use crate::regression::PpSettings;

pub use defaults::{DefaultEntry, Provenance, DEFAULTS};

/// Environment variable overriding the output root directory.
pub const OUTPUT_ROOT_ENV: &str = "OVERFIT_SIM_OUT";
pub const DEFAULT_OUTPUT_ROOT: &str = "out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SgldFraction,
    SgldCaptureCurve,
    FpVerify,
    EyringMfpt,
    GanTrajectory,
    BilinearCheck,
    PredatorPrey,
    OscillationSolve,
    Branching,
    Regression,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::SgldFraction,
        ExperimentKind::SgldCaptureCurve,
        ExperimentKind::FpVerify,
        ExperimentKind::EyringMfpt,
        ExperimentKind::GanTrajectory,
        ExperimentKind::BilinearCheck,
        ExperimentKind::PredatorPrey,
        ExperimentKind::OscillationSolve,
        ExperimentKind::Branching,
        ExperimentKind::Regression,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SgldFraction => "sgld_fraction",
            ExperimentKind::SgldCaptureCurve => "sgld_capture_curve",
            ExperimentKind::FpVerify => "fp_verify",
            ExperimentKind::EyringMfpt => "eyring_mfpt",
            ExperimentKind::GanTrajectory => "gan_trajectory",
            ExperimentKind::BilinearCheck => "bilinear_check",
            ExperimentKind::PredatorPrey => "predator_prey",
            ExperimentKind::OscillationSolve => "oscillation_solve",
            ExperimentKind::Branching => "branching",
            ExperimentKind::Regression => "regression",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::SgldFraction => "share of Langevin runs captured by the wide well, per temperature",
            ExperimentKind::SgldCaptureCurve => "cumulative capture fraction versus iteration, per inverse temperature",
            ExperimentKind::FpVerify => "Fokker-Planck drift of the Gibbs density on a 1D double well",
            ExperimentKind::EyringMfpt => "first-passage escape rates from equal-depth wells of different width",
            ExperimentKind::GanTrajectory => "noisy minimax gradient play between a discriminator and a generator",
            ExperimentKind::BilinearCheck => "bilinear minimax rotation against its closed-form solution",
            ExperimentKind::PredatorPrey => "pursuit trajectory on a landscape with regime classification",
            ExperimentKind::OscillationSolve => {
                "limiting-oscillation roots around a radial well and the critical angle"
            }
            ExperimentKind::Branching => "narrow-peak suppression in a branching discriminator/generator population",
            ExperimentKind::Regression => "linear and quadratic regression by gradient descent and pursuit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    fn uses_landscape(self) -> bool {
        matches!(
            self,
            ExperimentKind::SgldFraction
                | ExperimentKind::SgldCaptureCurve
                | ExperimentKind::FpVerify
                | ExperimentKind::PredatorPrey
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WellSpec {
    pub center: Vec<f64>,
    pub width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSpec {
    pub wells: Vec<WellSpec>,
}

impl LandscapeSpec {
    pub fn build(&self) -> Result<GaussianMixtureLandscape> {
        let wells = self
            .wells
            .iter()
            .map(|w| GaussianWell::new(w.center.clone(), w.width, w.amplitude))
            .collect::<Result<Vec<_>>>()?;
        GaussianMixtureLandscape::new(wells)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgldFractionParams {
    pub x0: Vec<f64>,
    pub t_max: f64,
    pub temperature_count: usize,
    pub runs: usize,
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureCurveParams {
    pub x0: Vec<f64>,
    pub betas: Vec<f64>,
    pub runs: usize,
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpVerifyParams {
    pub beta: f64,
    pub lower: f64,
    pub upper: f64,
    pub spacing: f64,
    pub dt: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EyringParams {
    pub narrow_width: f64,
    pub wide_width: f64,
    pub separation: f64,
    /// Barrier over temperature; sets `θ = barrier / beta_barrier`.
    pub beta_barrier: f64,
    pub runs: usize,
    pub dt: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanParams {
    pub sample: Vec<f64>,
    pub disc_center: f64,
    pub disc_width: f64,
    pub disc_gain: f64,
    pub disc_bias: f64,
    pub gen_mean: f64,
    pub gen_std: f64,
    pub theta: f64,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
    pub quad_nodes: usize,
    pub quad_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BilinearParams {
    pub omega: f64,
    pub x0: f64,
    pub y0: f64,
    pub dt: f64,
    pub periods: f64,
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredatorPreyParams {
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub interaction: InteractionParams,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
    pub classifier: ClassifierSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillationParams {
    pub well_amplitude: f64,
    pub well_width: f64,
    pub angles: Vec<f64>,
    pub interaction: InteractionParams,
    pub critical_search: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionParams {
    /// Dataset CSV, relative paths resolved against the config's directory.
    pub data: String,
    pub train_fraction: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub splits: usize,
    pub interaction: InteractionParams,
    pub pp: PpSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentParams {
    SgldFraction(GaussianMixtureLandscape, SgldFractionParams),
    SgldCaptureCurve(GaussianMixtureLandscape, CaptureCurveParams),
    FpVerify(GaussianMixtureLandscape, FpVerifyParams),
    EyringMfpt(EyringParams),
    GanTrajectory(GanParams),
    BilinearCheck(BilinearParams),
    PredatorPrey(GaussianMixtureLandscape, PredatorPreyParams),
    OscillationSolve(OscillationParams),
    Branching(SuppressionConfig),
    Regression(RegressionParams),
}

/// A parameter the config omitted and the ledger supplied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppliedDefault {
    pub key: String,
    pub value: String,
    pub provenance: Provenance,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub name: String,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Directory relative data paths are resolved against.
    pub base_dir: PathBuf,
    pub params: ExperimentParams,
    pub defaults_applied: Vec<AppliedDefault>,
    /// The full document after defaults, as canonical JSON (sorted keys).
    pub resolved: serde_json::Value,
}

impl ExperimentConfig {
    /// SHA-256 of the canonical resolved config.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.resolved).expect("JSON values always serialize");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn output_subdir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from(&self.name))
    }
}

fn config_err(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config { path: path.into(), reason: reason.into() }
}

const TOP_LEVEL_KEYS: [&str; 6] = ["kind", "name", "seed", "output_dir", "landscape", "params"];

/// Reads, default-fills and validates a config file without running it.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base_dir)
}

pub fn parse_config(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| config_err("<document>", e.message()))?;
    for key in doc.keys() {
        if !TOP_LEVEL_KEYS.contains(&key.as_str()) {
            return Err(config_err(key.as_str(), "unknown key"));
        }
    }
    let kind_name = doc
        .get("kind")
        .ok_or_else(|| config_err("kind", "missing"))?
        .as_str()
        .ok_or_else(|| config_err("kind", "must be a string"))?;
    let kind = ExperimentKind::parse(kind_name).ok_or_else(|| {
        let known: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
        config_err("kind", format!("unknown experiment `{kind_name}`; expected one of {}", known.join(", ")))
    })?;
    if !kind.uses_landscape() && doc.contains_key("landscape") {
        return Err(config_err("landscape", format!("not used by `{kind}`")));
    }
    if !doc.contains_key("params") {
        doc.insert("params".into(), toml::Value::Table(toml::Table::new()));
    }
    if kind == ExperimentKind::Branching && get_path(&doc, "params.seed").is_some() {
        return Err(config_err("params.seed", "set the top-level `seed` instead"));
    }

    let mut defaults_applied = Vec::new();
    for e in defaults::defaults_for(kind) {
        if get_path(&doc, e.key).is_none() {
            let value = parse_literal(e.value);
            insert_path(&mut doc, e.key, value)?;
            defaults_applied.push(AppliedDefault {
                key: e.key.to_string(),
                value: e.value.to_string(),
                provenance: e.provenance,
                note: e.note.to_string(),
            });
        }
    }

    let seed = match doc.get("seed") {
        Some(toml::Value::Integer(s)) if *s >= 0 => *s as u64,
        _ => return Err(config_err("seed", "must be a nonnegative integer")),
    };
    if kind == ExperimentKind::Branching {
        insert_path(&mut doc, "params.seed", toml::Value::Integer(seed as i64))?;
    }
    let name = match doc.get("name") {
        None => kind.name().to_string(),
        Some(toml::Value::String(s)) if !s.is_empty() => s.clone(),
        Some(_) => return Err(config_err("name", "must be a nonempty string")),
    };
    let output_dir = match doc.get("output_dir") {
        None => None,
        Some(toml::Value::String(s)) if is_safe_relative(s) => Some(PathBuf::from(s)),
        Some(_) => return Err(config_err("output_dir", "must be a relative path without `..`")),
    };

    let landscape = || -> Result<GaussianMixtureLandscape> {
        let spec: LandscapeSpec = section(&doc, "landscape")?;
        if spec.wells.is_empty() {
            return Err(config_err("landscape.wells", "need at least one well"));
        }
        spec.build().map_err(|e| config_err("landscape.wells", e.to_string()))
    };
    let params = match kind {
        ExperimentKind::SgldFraction => {
            let l = landscape()?;
            let p: SgldFractionParams = section(&doc, "params")?;
            checks::sgld_fraction(&l, &p)?;
            ExperimentParams::SgldFraction(l, p)
        }
        ExperimentKind::SgldCaptureCurve => {
            let l = landscape()?;
            let p: CaptureCurveParams = section(&doc, "params")?;
            checks::capture_curve(&l, &p)?;
            ExperimentParams::SgldCaptureCurve(l, p)
        }
        ExperimentKind::FpVerify => {
            let l = landscape()?;
            let p: FpVerifyParams = section(&doc, "params")?;
            checks::fp_verify(&l, &p)?;
            ExperimentParams::FpVerify(l, p)
        }
        ExperimentKind::EyringMfpt => {
            let p: EyringParams = section(&doc, "params")?;
            checks::eyring(&p)?;
            ExperimentParams::EyringMfpt(p)
        }
        ExperimentKind::GanTrajectory => {
            let p: GanParams = section(&doc, "params")?;
            checks::gan(&p)?;
            ExperimentParams::GanTrajectory(p)
        }
        ExperimentKind::BilinearCheck => {
            let p: BilinearParams = section(&doc, "params")?;
            checks::bilinear(&p)?;
            ExperimentParams::BilinearCheck(p)
        }
        ExperimentKind::PredatorPrey => {
            let l = landscape()?;
            let p: PredatorPreyParams = section(&doc, "params")?;
            checks::predator_prey(&l, &p)?;
            ExperimentParams::PredatorPrey(l, p)
        }
        ExperimentKind::OscillationSolve => {
            let p: OscillationParams = section(&doc, "params")?;
            checks::oscillation(&p)?;
            ExperimentParams::OscillationSolve(p)
        }
        ExperimentKind::Branching => {
            let p: SuppressionConfig = section(&doc, "params")?;
            checks::branching(&p)?;
            ExperimentParams::Branching(p)
        }
        ExperimentKind::Regression => {
            let p: RegressionParams = section(&doc, "params")?;
            checks::regression(&p)?;
            ExperimentParams::Regression(p)
        }
    };

    let resolved = serde_json::to_value(&doc).map_err(|e| config_err("<document>", e.to_string()))?;
    Ok(ExperimentConfig {
        kind,
        name,
        seed,
        output_dir,
        base_dir: base_dir.to_path_buf(),
        params,
        defaults_applied,
        resolved,
    })
}

fn is_safe_relative(s: &str) -> bool {
    let p = Path::new(s);
    !s.is_empty() && p.is_relative() && p.components().all(|c| matches!(c, std::path::Component::Normal(_)))
}

fn parse_literal(literal: &str) -> toml::Value {
    let doc: toml::Table = format!("v = {literal}").parse().expect("ledger literals are valid TOML");
    doc["v"].clone()
}

fn get_path<'a>(doc: &'a toml::Table, key: &str) -> Option<&'a toml::Value> {
    let mut parts = key.split('.');
    let mut cur = doc.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}

fn insert_path(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut table = doc;
    for (i, p) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| config_err(parts[..=i].join("."), "must be a table"))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn section<T: DeserializeOwned>(doc: &toml::Table, key: &str) -> Result<T> {
    let v = doc.get(key).cloned().ok_or_else(|| config_err(key, "missing"))?;
    v.clone().try_into().map_err(|e: toml::de::Error| {
        let msg = e.message().trim();
        let path = unknown_field(msg).and_then(|f| find_key(&v, f, key)).unwrap_or_else(|| key.to_string());
        config_err(path, msg)
    })
}

/// The field name in a serde "unknown field `x`" message.
fn unknown_field(msg: &str) -> Option<&str> {
    msg.strip_prefix("unknown field `")?.split('`').next()
}

/// Dotted path of the first table entry named `field` under `v`.
fn find_key(v: &toml::Value, field: &str, prefix: &str) -> Option<String> {
    let t = v.as_table()?;
    if t.contains_key(field) {
        return Some(format!("{prefix}.{field}"));
    }
    t.iter().find_map(|(k, sub)| find_key(sub, field, &format!("{prefix}.{k}")))
}

mod checks {
    use super::*;
    use crate::pursuit::InteractionParams;

    fn finite(path: &str, v: f64) -> Result<()> {
        if v.is_finite() {
            Ok(())
        } else {
            Err(config_err(path, format!("must be finite, got {v}")))
        }
    }

    fn positive(path: &str, v: f64) -> Result<()> {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(config_err(path, format!("must be positive, got {v}")))
        }
    }

    fn at_least(path: &str, v: usize, min: usize) -> Result<()> {
        if v >= min {
            Ok(())
        } else {
            Err(config_err(path, format!("must be at least {min}, got {v}")))
        }
    }

    fn fraction(path: &str, v: f64) -> Result<()> {
        if v > 0.0 && v <= 1.0 {
            Ok(())
        } else {
            Err(config_err(path, format!("must lie in (0, 1], got {v}")))
        }
    }

    fn point(path: &str, x: &[f64], dim: usize) -> Result<()> {
        if x.len() != dim {
            return Err(config_err(path, format!("expected {dim} coordinates, got {}", x.len())));
        }
        for (i, v) in x.iter().enumerate() {
            finite(&format!("{path}[{i}]"), *v)?;
        }
        Ok(())
    }

    fn sgld_common(lr: f64, max_iterations: usize, patience: usize, runs: usize) -> Result<()> {
        positive("params.learning_rate", lr)?;
        at_least("params.max_iterations", max_iterations, 1)?;
        at_least("params.patience", patience, 1)?;
        at_least("params.runs", runs, 1)
    }

    pub(super) fn sgld_fraction(l: &GaussianMixtureLandscape, p: &SgldFractionParams) -> Result<()> {
        point("params.x0", &p.x0, l.dimension())?;
        if !(p.t_max >= 0.0 && p.t_max.is_finite()) {
            return Err(config_err("params.t_max", format!("temperature must be nonnegative, got {}", p.t_max)));
        }
        at_least("params.temperature_count", p.temperature_count, 1)?;
        sgld_common(p.learning_rate, p.max_iterations, p.patience, p.runs)
    }

    pub(super) fn capture_curve(l: &GaussianMixtureLandscape, p: &CaptureCurveParams) -> Result<()> {
        point("params.x0", &p.x0, l.dimension())?;
        if p.betas.is_empty() {
            return Err(config_err("params.betas", "need at least one inverse temperature"));
        }
        for (i, b) in p.betas.iter().enumerate() {
            positive(&format!("params.betas[{i}]"), *b)?;
        }
        sgld_common(p.learning_rate, p.max_iterations, p.patience, p.runs)
    }

    pub(super) fn fp_verify(l: &GaussianMixtureLandscape, p: &FpVerifyParams) -> Result<()> {
        if l.dimension() != 1 {
            return Err(config_err("landscape.wells", "the stationarity check runs on a 1D landscape"));
        }
        positive("params.beta", p.beta)?;
        finite("params.lower", p.lower)?;
        finite("params.upper", p.upper)?;
        if p.lower >= p.upper {
            return Err(config_err("params.upper", "must exceed params.lower"));
        }
        positive("params.spacing", p.spacing)?;
        positive("params.dt", p.dt)?;
        let bound = p.spacing * p.spacing * p.beta / 4.0;
        if p.dt > bound {
            return Err(config_err("params.dt", format!("{} exceeds the stability bound h²/(4θ) = {bound}", p.dt)));
        }
        at_least("params.steps", p.steps, 1)
    }

    pub(super) fn eyring(p: &EyringParams) -> Result<()> {
        positive("params.narrow_width", p.narrow_width)?;
        positive("params.wide_width", p.wide_width)?;
        if p.wide_width <= p.narrow_width {
            return Err(config_err("params.wide_width", "must exceed params.narrow_width"));
        }
        positive("params.separation", p.separation)?;
        positive("params.beta_barrier", p.beta_barrier)?;
        at_least("params.runs", p.runs, 2)?;
        positive("params.dt", p.dt)?;
        at_least("params.max_steps", p.max_steps, 1)
    }

    pub(super) fn gan(p: &GanParams) -> Result<()> {
        if p.sample.is_empty() {
            return Err(config_err("params.sample", "need at least one point"));
        }
        for (i, z) in p.sample.iter().enumerate() {
            finite(&format!("params.sample[{i}]"), *z)?;
        }
        finite("params.disc_center", p.disc_center)?;
        positive("params.disc_width", p.disc_width)?;
        finite("params.disc_gain", p.disc_gain)?;
        finite("params.disc_bias", p.disc_bias)?;
        finite("params.gen_mean", p.gen_mean)?;
        positive("params.gen_std", p.gen_std)?;
        if !(p.theta >= 0.0 && p.theta.is_finite()) {
            return Err(config_err("params.theta", format!("temperature must be nonnegative, got {}", p.theta)));
        }
        positive("params.dt", p.dt)?;
        at_least("params.record_every", p.record_every, 1)?;
        at_least("params.quad_nodes", p.quad_nodes, 2)?;
        positive("params.quad_half_width", p.quad_half_width)
    }

    pub(super) fn bilinear(p: &BilinearParams) -> Result<()> {
        positive("params.omega", p.omega)?;
        finite("params.x0", p.x0)?;
        finite("params.y0", p.y0)?;
        positive("params.dt", p.dt)?;
        positive("params.periods", p.periods)?;
        at_least("params.record_every", p.record_every, 1)
    }

    fn interaction(p: &InteractionParams) -> Result<()> {
        InteractionParams::new(p.a, p.l, p.c, p.yukawa_strength, p.yukawa_decay, p.alpha_y).map(|_| ()).map_err(|e| {
            match e {
                Error::InvalidParameter { name, reason } => {
                    config_err(format!("params.interaction.{}", field(&name)), reason)
                }
                e => config_err("params.interaction", e.to_string()),
            }
        })
    }

    fn field(symbol: &str) -> &str {
        match symbol {
            "A" => "a",
            "C" => "yukawa_strength",
            "sigma_int" => "yukawa_decay",
            s => s,
        }
    }

    pub(super) fn predator_prey(l: &GaussianMixtureLandscape, p: &PredatorPreyParams) -> Result<()> {
        point("params.x0", &p.x0, l.dimension())?;
        point("params.y0", &p.y0, l.dimension())?;
        interaction(&p.interaction)?;
        positive("params.dt", p.dt)?;
        at_least("params.steps", p.steps, 1)?;
        at_least("params.record_every", p.record_every, 1)?;
        let c = &p.classifier;
        fraction("params.classifier.window_fraction", c.window_fraction)?;
        positive("params.classifier.radius_factor", c.radius_factor)?;
        if !(c.residence_time >= 0.0 && c.residence_time.is_finite()) {
            return Err(config_err("params.classifier.residence_time", "must be nonnegative"));
        }
        if !(c.amplitude_floor >= 0.0 && c.amplitude_floor.is_finite()) {
            return Err(config_err("params.classifier.amplitude_floor", "must be nonnegative"));
        }
        at_least("params.classifier.min_states", c.min_states, 2)
    }

    pub(super) fn oscillation(p: &OscillationParams) -> Result<()> {
        positive("params.well_amplitude", p.well_amplitude)?;
        positive("params.well_width", p.well_width)?;
        if p.angles.is_empty() {
            return Err(config_err("params.angles", "need at least one angle"));
        }
        for (i, a) in p.angles.iter().enumerate() {
            if !(*a > 0.0 && *a < std::f64::consts::FRAC_PI_2) {
                return Err(config_err(format!("params.angles[{i}]"), format!("must lie in (0, π/2), got {a}")));
            }
        }
        interaction(&p.interaction)
    }

    pub(super) fn branching(p: &SuppressionConfig) -> Result<()> {
        p.rates.validate().map_err(|e| config_err("params.rates", e.to_string()))?;
        positive("params.disc_width", p.disc_width)?;
        finite("params.disc_gain", p.disc_gain)?;
        finite("params.disc_bias", p.disc_bias)?;
        positive("params.generator_std", p.generator_std)?;
        at_least("params.initial_discriminators", p.initial_discriminators, 1)?;
        at_least("params.peaks.narrow_points", p.peaks.narrow_points, 1)?;
        at_least("params.peaks.wide_points", p.peaks.wide_points, 1)?;
        if !(p.peaks.narrow_spread >= 0.0 && p.peaks.wide_spread >= 0.0) {
            return Err(config_err("params.peaks", "spreads must be nonnegative"));
        }
        if !(p.theta >= 0.0 && p.theta.is_finite()) {
            return Err(config_err("params.theta", format!("temperature must be nonnegative, got {}", p.theta)));
        }
        positive("params.dt", p.dt)?;
        at_least("params.steps", p.steps, 1)?;
        fraction("params.window_fraction", p.window_fraction)?;
        positive("params.peak_radius", p.peak_radius)?;
        at_least("params.quad_nodes", p.quad_nodes, 2)?;
        positive("params.quad_half_width", p.quad_half_width)?;
        at_least("params.runs", p.runs, 2)?;
        if !(p.init_margin >= 0.0 && p.init_margin.is_finite()) {
            return Err(config_err("params.init_margin", "must be nonnegative"));
        }
        Ok(())
    }

    pub(super) fn regression(p: &RegressionParams) -> Result<()> {
        if p.data.is_empty() {
            return Err(config_err("params.data", "missing dataset path"));
        }
        if !(p.train_fraction > 0.0 && p.train_fraction < 1.0) {
            return Err(config_err("params.train_fraction", format!("must lie in (0, 1), got {}", p.train_fraction)));
        }
        positive("params.learning_rate", p.learning_rate)?;
        interaction(&p.interaction)?;
        positive("params.pp.dt", p.pp.dt)?;
        finite("params.pp.predator_offset", p.pp.predator_offset)?;
        fraction("params.pp.window_fraction", p.pp.window_fraction)
    }
}

/// Outcome of [`validate`]: the resolved config on success, the first
/// schema error otherwise.
#[derive(Debug)]
pub struct ValidationReport {
    pub path: PathBuf,
    pub outcome: Result<ExperimentConfig>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.outcome.is_ok()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            Ok(cfg) => {
                writeln!(
                    f,
                    "valid: {} ({}); {} default{} applied",
                    self.path.display(),
                    cfg.kind,
                    cfg.defaults_applied.len(),
                    if cfg.defaults_applied.len() == 1 { "" } else { "s" }
                )?;
                for d in &cfg.defaults_applied {
                    writeln!(f, "  {} = {}  [{}] {}", d.key, d.value, d.provenance.label(), d.note)?;
                }
                write!(f, "config hash {}", cfg.hash())
            }
            Err(e) => write!(f, "invalid: {}: {e}", self.path.display()),
        }
    }
}

pub fn validate(path: impl AsRef<Path>) -> ValidationReport {
    let path = path.as_ref().to_path_buf();
    let outcome = load_config(&path);
    ValidationReport { path, outcome }
}

/// One emitted file, relative to the run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Run bookkeeping, written as `run_record.json` next to the artifacts.
/// Unlike the artifacts it carries wall-clock time, so it differs between
/// otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub name: String,
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub output_dir: PathBuf,
    pub artifacts: Vec<String>,
    pub defaults_applied: Vec<AppliedDefault>,
    pub summary: serde_json::Value,
}

pub const RUN_RECORD_FILE: &str = "run_record.json";

/// Computes every artifact in memory without touching the file system
/// (besides reading input data).
pub fn execute(cfg: &ExperimentConfig) -> Result<(Vec<Artifact>, serde_json::Value)> {
    experiments::execute(cfg)
}

/// Output root: `$OVERFIT_SIM_OUT` when set, else `out`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

/// Executes the experiment and writes its artifacts and run record under
/// `root`. Nothing is written if execution fails.
pub fn run(cfg: &ExperimentConfig, root: &Path) -> Result<RunRecord> {
    let start = Instant::now();
    let (artifacts, summary) = execute(cfg)?;
    let dir = root.join(cfg.output_subdir());
    std::fs::create_dir_all(&dir)?;
    for a in &artifacts {
        std::fs::write(dir.join(&a.name), &a.bytes)?;
    }
    let record = RunRecord {
        name: cfg.name.clone(),
        kind: cfg.kind,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        output_dir: dir.clone(),
        artifacts: artifacts.iter().map(|a| a.name.clone()).collect(),
        defaults_applied: cfg.defaults_applied.clone(),
        summary,
    };
    let mut json = serde_json::to_string_pretty(&record).map_err(|e| config_err("run_record", e.to_string()))?;
    json.push('\n');
    std::fs::write(dir.join(RUN_RECORD_FILE), json)?;
    Ok(record)
}
