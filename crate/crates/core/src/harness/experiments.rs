use std::f64::consts::PI;

use serde::Serialize;
use serde_json::{json, Value};

use super::{Artifact, ExperimentConfig, ExperimentParams};
use super::{BilinearParams, CaptureCurveParams, EyringParams, FpVerifyParams, GanParams};
use super::{OscillationParams, PredatorPreyParams, RegressionParams, SgldFractionParams};
use crate::branching::{
    census_csv, narrow_peak_suppression_experiment, summary_csv, suppression_run, SuppressionConfig,
};
use crate::error::{Error, Result};
use crate::eyring::{barrier_1d, empirical_escape_rate, equal_depth_pair, escape_csv, predicted_rate_ratio_1d};
use crate::gan::{
    bilinear_csv, bilinear_example_run, gan_trajectory, gan_trajectory_csv, DiscriminatorModel, GenQuadrature,
    GeneratorModel, Sample,
};
use crate::landscape::GaussianMixtureLandscape;
use crate::output::CsvTable;
use crate::pursuit::{classify_regime_with, limiting_oscillation_solve, simulate, OscillationOutcome, RadialWell};
use crate::regression::{self, load_dataset, terminal_band, QUADRATIC_GD, QUADRATIC_PP};
use crate::sde::{derive_seed, fokker_planck_evolve, gibbs_density, GridSpec, RngStream};
use crate::sgld::{
    capture_curve_csv, capture_fraction_vs_iteration, fraction_csv, uniform_temperatures, wide_well_fraction,
    SgldConfig,
};
use crate::stats;

struct Emitter<'a> {
    cfg: &'a ExperimentConfig,
    artifacts: Vec<Artifact>,
}

impl<'a> Emitter<'a> {
    fn csv(&mut self, name: &str, mut table: CsvTable) {
        let mut comments = vec![
            format!("experiment: {} ({})", self.cfg.name, self.cfg.kind),
            format!("config_hash: {}", self.cfg.hash()),
            format!("seed: {}", self.cfg.seed),
        ];
        comments.append(&mut table.comments);
        table.comments = comments;
        self.artifacts.push(Artifact { name: name.to_string(), bytes: table.to_string_lossy().into_bytes() });
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::param(name, e.to_string()))?;
        text.push('\n');
        self.artifacts.push(Artifact { name: name.to_string(), bytes: text.into_bytes() });
        Ok(())
    }
}

pub(super) fn execute(cfg: &ExperimentConfig) -> Result<(Vec<Artifact>, Value)> {
    let mut out = Emitter { cfg, artifacts: Vec::new() };
    out.json("config.json", &cfg.resolved)?;
    let seed = cfg.seed;
    let summary = match &cfg.params {
        ExperimentParams::SgldFraction(l, p) => sgld_fraction(&mut out, l, p, seed)?,
        ExperimentParams::SgldCaptureCurve(l, p) => capture_curve(&mut out, l, p, seed)?,
        ExperimentParams::FpVerify(l, p) => fp_verify(&mut out, l, p)?,
        ExperimentParams::EyringMfpt(p) => eyring(&mut out, p, seed)?,
        ExperimentParams::GanTrajectory(p) => gan(&mut out, p, seed)?,
        ExperimentParams::BilinearCheck(p) => bilinear(&mut out, p)?,
        ExperimentParams::PredatorPrey(l, p) => predator_prey(&mut out, l, p)?,
        ExperimentParams::OscillationSolve(p) => oscillation(&mut out, p)?,
        ExperimentParams::Branching(p) => branching(&mut out, p)?,
        ExperimentParams::Regression(p) => regression_benchmark(&mut out, p, seed)?,
    };
    out.json("summary.json", &summary)?;
    Ok((out.artifacts, summary))
}

fn sgld_config(x0: &[f64], learning_rate: f64, max_iterations: usize, patience: usize) -> SgldConfig {
    SgldConfig { learning_rate, max_iterations, patience, ..SgldConfig::new(x0.to_vec()) }
}

fn sgld_fraction(out: &mut Emitter, l: &GaussianMixtureLandscape, p: &SgldFractionParams, seed: u64) -> Result<Value> {
    let base = sgld_config(&p.x0, p.learning_rate, p.max_iterations, p.patience);
    let temps = uniform_temperatures(p.t_max, p.temperature_count);
    let points = wide_well_fraction(l, &base, &temps, p.runs, seed)?;
    out.csv("fraction.csv", fraction_csv(&points));
    let (ts, fs): (Vec<f64>, Vec<f64>) = points.iter().filter_map(|q| q.fraction.map(|f| (q.temperature, f))).unzip();
    let trend = (ts.len() >= 3).then(|| stats::spearman(&ts, &fs));
    Ok(json!({ "points": points, "spearman": trend, "wide_well": l.widest_well() }))
}

fn capture_curve(out: &mut Emitter, l: &GaussianMixtureLandscape, p: &CaptureCurveParams, seed: u64) -> Result<Value> {
    let base = sgld_config(&p.x0, p.learning_rate, p.max_iterations, p.patience);
    let curves = capture_fraction_vs_iteration(l, &base, &p.betas, p.runs, seed)?;
    out.csv("capture_curve.csv", capture_curve_csv(&curves));
    let finals: Vec<Value> = curves
        .iter()
        .map(|c| json!({ "beta": c.beta, "temperature": c.temperature, "final_fraction": c.fractions.last() }))
        .collect();
    Ok(json!({ "curves": finals }))
}

fn fp_verify(out: &mut Emitter, l: &GaussianMixtureLandscape, p: &FpVerifyParams) -> Result<Value> {
    let spec = GridSpec::uniform_1d(p.lower, p.upper, p.spacing)?;
    let f = |x: &[f64]| -l.eval_unchecked(x);
    let g0 = gibbs_density(f, p.beta, spec)?;
    let g1 = fokker_planck_evolve(&g0, f, 1.0 / p.beta, p.dt, p.steps)?;
    let l1 = g1.l1_distance(&g0)?;
    out.csv("density_initial.csv", g0.to_csv());
    out.csv("density_final.csv", g1.to_csv());
    Ok(json!({
        "l1_drift": l1,
        "mass_initial": g0.mass(),
        "mass_final": g1.mass(),
        "mass_error": (g1.mass() - g0.mass()).abs(),
        "temperature": 1.0 / p.beta,
        "dt_bound": p.spacing * p.spacing * p.beta / 4.0,
        "elapsed_time": p.dt * p.steps as f64,
    }))
}

fn eyring(out: &mut Emitter, p: &EyringParams, seed: u64) -> Result<Value> {
    let l = equal_depth_pair(p.narrow_width, p.wide_width, p.separation)?;
    let barrier_narrow = barrier_1d(&l, 0, 1)?;
    let barrier_wide = barrier_1d(&l, 1, 0)?;
    let barrier = 0.5 * (barrier_narrow + barrier_wide);
    let theta = barrier / p.beta_barrier;
    let beta = 1.0 / theta;
    let predicted = predicted_rate_ratio_1d(&l, 0, 1, beta)?;
    let narrow = empirical_escape_rate(&l, 0, theta, p.runs, p.max_steps, p.dt, derive_seed(seed, 0))?;
    let wide = empirical_escape_rate(&l, 1, theta, p.runs, p.max_steps, p.dt, derive_seed(seed, 1))?;
    out.csv("escape.csv", escape_csv(&[narrow.clone(), wide.clone()]));
    let mut times = CsvTable::new(&["well", "run", "passage_time"]);
    for (label, e) in [("narrow", &narrow), ("wide", &wide)] {
        for (i, t) in e.passage_times.iter().enumerate() {
            times.push(vec![label.into(), i.into(), (*t).into()]);
        }
    }
    out.csv("passage_times.csv", times);

    // Rate ratio narrow/wide = MFPT(wide)/MFPT(narrow), delta-method error.
    let ratio = wide.mfpt_mean / narrow.mfpt_mean;
    let ratio_se =
        ratio * ((narrow.mfpt_se / narrow.mfpt_mean).powi(2) + (wide.mfpt_se / wide.mfpt_mean).powi(2)).sqrt();
    let z = (wide.mfpt_mean - narrow.mfpt_mean) / (narrow.mfpt_se.powi(2) + wide.mfpt_se.powi(2)).sqrt();
    let well = |e: &crate::eyring::EscapeEstimate| {
        json!({ "mfpt_mean": e.mfpt_mean, "mfpt_se": e.mfpt_se, "runs": e.runs,
                "censored_runs": e.censored_runs, "censored": e.censored })
    };
    Ok(json!({
        "wide_amplitude": l.wells()[1].amplitude,
        "barrier_narrow": barrier_narrow,
        "barrier_wide": barrier_wide,
        "theta": theta,
        "beta_barrier": barrier / theta,
        "predicted_rate_ratio": predicted,
        "empirical_rate_ratio": ratio,
        "empirical_rate_ratio_se": ratio_se,
        "narrow_faster_z": z,
        "narrow_faster_p": stats::normal_upper_tail(z),
        "narrow": well(&narrow),
        "wide": well(&wide),
    }))
}

fn gan(out: &mut Emitter, p: &GanParams, seed: u64) -> Result<Value> {
    let disc = DiscriminatorModel::new(p.disc_center, p.disc_width, p.disc_gain, p.disc_bias)?;
    let gen = GeneratorModel::new(p.gen_mean, p.gen_std)?;
    let sample = Sample::new(p.sample.clone())?;
    let quad = GenQuadrature::new(p.quad_nodes, p.quad_half_width)?;
    let mut rng = RngStream::new(seed, 0);
    let records = gan_trajectory(disc, gen, &sample, p.theta, p.dt, p.steps, p.record_every, &mut rng, &quad)?;
    out.csv("trajectory.csv", gan_trajectory_csv(&records));
    let first = records.first().expect("trajectory starts with the initial state");
    let last = records.last().expect("trajectory is nonempty");
    Ok(json!({ "initial": first, "final": last, "records": records.len() }))
}

fn bilinear(out: &mut Emitter, p: &BilinearParams) -> Result<Value> {
    let steps = (p.periods * 2.0 * PI / (p.omega * p.dt)).round() as usize;
    let tr = bilinear_example_run(p.omega, p.x0, p.y0, p.dt, steps)?;
    out.csv("trajectory.csv", bilinear_csv(&tr, p.record_every));
    let (mut ex, mut ey) = (0.0f64, 0.0f64);
    for i in 0..tr.t.len() {
        let (s, c) = (p.omega * tr.t[i]).sin_cos();
        ex = ex.max((tr.x[i] - (p.x0 * c + p.y0 * s)).abs());
        ey = ey.max((tr.y[i] - (p.y0 * c - p.x0 * s)).abs());
    }
    Ok(json!({
        "steps": steps,
        "max_error_x": ex,
        "max_error_y": ey,
        "max_radius_drift": tr.max_radius_drift(),
    }))
}

fn predator_prey(out: &mut Emitter, l: &GaussianMixtureLandscape, p: &PredatorPreyParams) -> Result<Value> {
    let tr = simulate(l, &p.x0, &p.y0, &p.interaction, p.dt, p.steps, p.record_every)?;
    out.csv("trajectory.csv", tr.to_csv(l, 1)?);
    let report = classify_regime_with(&tr, l, &p.classifier)?;
    out.json("regime.json", &report)?;
    Ok(json!({
        "regime": report.label,
        "terminal": report.terminal,
        "wells_visited": report.wells_visited,
        "truncated_at": tr.truncated_at,
        "max_prey_step": tr.max_prey_step,
    }))
}

/// Smallest feasible angle, bisected between an infeasible and a feasible
/// angle until the bracket is below `tol`.
pub(crate) fn critical_angle(
    well: &RadialWell,
    params: &crate::pursuit::InteractionParams,
    feasible: f64,
    tol: f64,
) -> Result<Option<(f64, f64)>> {
    let ok = |a: f64| -> Result<bool> { Ok(limiting_oscillation_solve(well, params, a)?.root().is_some()) };
    let mut lo = 1e-4;
    if ok(lo)? || !ok(feasible)? {
        return Ok(None);
    }
    let mut hi = feasible;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some((lo, hi)))
}

fn oscillation(out: &mut Emitter, p: &OscillationParams) -> Result<Value> {
    let well = RadialWell { amplitude: p.well_amplitude, width: p.well_width };
    let mut table = CsvTable::new(&[
        "angle",
        "feasible",
        "r_x",
        "r_y",
        "d",
        "speed_residual",
        "force_residual",
        "geometry_residual",
    ]);
    let mut outcomes = Vec::new();
    for &a in &p.angles {
        let o = limiting_oscillation_solve(&well, &p.interaction, a)?;
        let (feasible, r) = match &o {
            OscillationOutcome::Feasible(r) => (true, Some(*r)),
            OscillationOutcome::Infeasible { best } => (false, *best),
        };
        let cells = |f: fn(&crate::pursuit::OscillationRoot) -> f64| r.as_ref().map(f).into();
        table.push(vec![
            a.into(),
            feasible.into(),
            cells(|r| r.r_x),
            cells(|r| r.r_y),
            cells(|r| r.d),
            cells(|r| r.speed_residual),
            cells(|r| r.force_residual),
            cells(|r| r.geometry_residual),
        ]);
        outcomes.push(json!({ "angle": a, "outcome": o }));
    }
    out.csv("roots.csv", table);
    let largest_feasible = p
        .angles
        .iter()
        .zip(&outcomes)
        .filter(|(_, o)| o["outcome"]["status"] == "feasible")
        .map(|(a, _)| *a)
        .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.max(a))));
    let critical = match (p.critical_search, largest_feasible) {
        (true, Some(a)) => critical_angle(&well, &p.interaction, a, 1e-4)?,
        _ => None,
    };
    Ok(json!({
        "outcomes": outcomes,
        "critical_angle_bracket": critical.map(|(lo, hi)| [lo, hi]),
    }))
}

fn branching(out: &mut Emitter, cfg: &SuppressionConfig) -> Result<Value> {
    let summary = narrow_peak_suppression_experiment(cfg)?;
    out.csv("summary.csv", summary_csv(&summary));
    let mut census = Vec::new();
    suppression_run(cfg, false, true, 0, Some(&mut census))?;
    out.csv("census_run0.csv", census_csv(&census));
    serde_json::to_value(&summary).map_err(|e| Error::param("summary", e.to_string()))
}

fn regression_benchmark(out: &mut Emitter, p: &RegressionParams, seed: u64) -> Result<Value> {
    let path = out.cfg.base_dir.join(&p.data);
    let data = load_dataset(&path)?;
    let settings = regression::RegressionSettings {
        train_fraction: p.train_fraction,
        learning_rate: p.learning_rate,
        iterations: p.iterations,
        interaction: p.interaction,
        pp: p.pp,
    };
    let primary = regression::compare_methods(&data, &settings, seed)?;
    let study = regression::split_study(&data, &settings, p.splits, derive_seed(seed, 1))?;
    let mut all = vec![primary.clone()];
    all.extend(study.iter().cloned());
    out.csv("reports.csv", regression::reports_csv(&all));
    out.csv("curves.csv", regression::curves_csv(&primary));

    let pp_band = terminal_band(&primary.curves[2].train, p.pp.window_fraction)?;
    let pp_mse: Vec<f64> = study.iter().filter_map(|c| c.report(QUADRATIC_PP)).map(|r| r.test_mse).collect();
    let wins = study
        .iter()
        .filter(|c| match (c.report(QUADRATIC_PP), c.report(QUADRATIC_GD)) {
            (Some(pp), Some(gd)) => pp.test_mse <= gd.test_mse,
            _ => false,
        })
        .count();
    let brief = |r: &regression::FitReport| {
        json!({ "method": r.method, "train_mse": r.train_mse, "test_mse": r.test_mse,
                "test_accuracy": r.test_accuracy, "selected_iteration": r.selected_iteration })
    };
    Ok(json!({
        "rows": data.len(),
        "primary_split_seed": seed,
        "primary": primary.reports.iter().map(brief).collect::<Vec<_>>(),
        "pp_terminal_train_band": pp_band,
        "study_splits": study.len(),
        "study_pp_test_mse_min": pp_mse.iter().copied().fold(f64::INFINITY, f64::min),
        "study_pp_test_mse_max": pp_mse.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "study_pp_test_mse_mean": stats::mean(&pp_mse),
        "study_pp_not_worse_than_gd": wins,
    }))
}
