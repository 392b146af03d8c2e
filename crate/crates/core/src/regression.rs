//! Regression benchmark: a 13-feature, 3-class tabular dataset read as a
//! regression problem, fitted with linear or quadratic models by full-batch
//! gradient descent or by the predator-prey optimizer in coefficient space.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::output::{Cell, CsvTable};
use crate::pursuit::{direction, InteractionParams};
use crate::sde::{derive_seed, RngStream};

pub const N_FEATURES: usize = 13;
pub const N_CLASSES: u8 = 3;

/// Rows of 13 features with integer class targets in `{0, 1, 2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    features: Vec<f64>,
    targets: Vec<u8>,
    row_ids: Vec<usize>,
}

impl TabularDataset {
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<u8>) -> Result<Self> {
        check_dim(features.len(), targets.len())?;
        if features.len() < 2 {
            return Err(Error::param("rows", format!("need at least 2 rows, got {}", features.len())));
        }
        let mut flat = Vec::with_capacity(features.len() * N_FEATURES);
        for row in &features {
            check_dim(N_FEATURES, row.len())?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("features", "non-finite value"));
            }
            flat.extend_from_slice(row);
        }
        if let Some(t) = targets.iter().find(|&&t| t >= N_CLASSES) {
            return Err(Error::param("class", format!("target {t} outside {{0, 1, 2}}")));
        }
        let row_ids = (0..targets.len()).collect();
        Ok(Self { features: flat, targets, row_ids })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * N_FEATURES..(i + 1) * N_FEATURES]
    }

    pub fn targets(&self) -> &[u8] {
        &self.targets
    }

    /// Zero-based positions of the rows in the originally loaded dataset.
    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    fn subset(&self, idx: &[usize]) -> Self {
        let mut features = Vec::with_capacity(idx.len() * N_FEATURES);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        Self {
            features,
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            row_ids: idx.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }
}

fn header_fields() -> Vec<String> {
    (1..=N_FEATURES).map(|i| format!("f{i}")).chain(std::iter::once("class".to_string())).collect()
}

/// Reads the dataset CSV. See [`parse_dataset`] for the format.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<TabularDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text, path)
}

/// Parses `f1,...,f13,class` rows. The header line is optional but must
/// match exactly when present; errors carry the 1-based line number.
pub fn parse_dataset(text: &str, path: &Path) -> Result<TabularDataset> {
    let fail = |line: usize, reason: String| Error::Parse { path: path.to_path_buf(), line, reason };
    let header = header_fields();
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if k == 0 && fields.first().is_some_and(|f| f.parse::<f64>().is_err()) {
            if fields != header {
                return Err(fail(line_no, format!("header must be `{}`", header.join(","))));
            }
            continue;
        }
        if fields.len() != N_FEATURES + 1 {
            return Err(fail(line_no, format!("expected {} fields, got {}", N_FEATURES + 1, fields.len())));
        }
        let mut row = Vec::with_capacity(N_FEATURES);
        for (j, f) in fields[..N_FEATURES].iter().enumerate() {
            match f.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => return Err(fail(line_no, format!("f{}: `{f}` is not a finite number", j + 1))),
            }
        }
        let class = fields[N_FEATURES];
        match class.parse::<u8>() {
            Ok(t) if t < N_CLASSES => targets.push(t),
            _ => return Err(fail(line_no, format!("class `{class}` is not one of 0, 1, 2"))),
        }
        features.push(row);
    }
    if features.len() < 2 {
        return Err(fail(text.lines().count().max(1), format!("need at least 2 data rows, got {}", features.len())));
    }
    TabularDataset::new(features, targets)
}

/// Seeded random split into `⌊f·N⌋` training rows and the remainder. Both
/// parts keep the original row order.
pub fn split(data: &TabularDataset, train_fraction: f64, seed: u64) -> Result<(TabularDataset, TabularDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::param("train_fraction", format!("must lie in (0, 1), got {train_fraction}")));
    }
    let n = data.len();
    let n_train = (train_fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::param("train_fraction", format!("{train_fraction} of {n} rows leaves one side empty")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    RngStream::new(seed, 0).shuffle(&mut perm);
    let (mut train, mut test) = (perm[..n_train].to_vec(), perm[n_train..].to_vec());
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

/// Number of model columns: intercept, linear terms and, for degree 2, all
/// products `x_i x_j` with `i ≤ j`.
pub fn expansion_size(degree: u8, n_features: usize) -> usize {
    match degree {
        1 => 1 + n_features,
        _ => 1 + n_features + n_features * (n_features + 1) / 2,
    }
}

fn check_degree(degree: u8) -> Result<()> {
    if degree == 1 || degree == 2 {
        Ok(())
    } else {
        Err(Error::param("degree", format!("must be 1 or 2, got {degree}")))
    }
}

fn population_moments(cols: usize, rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; cols];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; cols];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    // Constant columns are centred but left unscaled.
    let sd = var.into_iter().map(|s| (s / n).sqrt()).map(|s| if s > 0.0 { s } else { 1.0 }).collect();
    (mean, sd)
}

/// Standardized polynomial feature map. Raw features are standardized, the
/// monomials formed, and each non-intercept column standardized again; all
/// statistics come from the training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub degree: u8,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub column_mean: Vec<f64>,
    pub column_std: Vec<f64>,
}

impl FeatureMap {
    pub fn fit(train: &TabularDataset, degree: u8) -> Result<Self> {
        check_degree(degree)?;
        let raw: Vec<Vec<f64>> = (0..train.len()).map(|i| train.row(i).to_vec()).collect();
        let (feature_mean, feature_std) = population_moments(N_FEATURES, &raw);
        let mut map = Self { degree, feature_mean, feature_std, column_mean: Vec::new(), column_std: Vec::new() };
        let monomials: Vec<Vec<f64>> = raw.iter().map(|r| map.monomials(r)).collect();
        let (column_mean, column_std) = population_moments(map.n_columns() - 1, &monomials);
        map.column_mean = column_mean;
        map.column_std = column_std;
        Ok(map)
    }

    pub fn n_columns(&self) -> usize {
        expansion_size(self.degree, N_FEATURES)
    }

    fn monomials(&self, row: &[f64]) -> Vec<f64> {
        let z: Vec<f64> =
            row.iter().zip(&self.feature_mean).zip(&self.feature_std).map(|((v, m), s)| (v - m) / s).collect();
        let mut out = z.clone();
        if self.degree == 2 {
            for i in 0..N_FEATURES {
                for j in i..N_FEATURES {
                    out.push(z[i] * z[j]);
                }
            }
        }
        out
    }

    pub fn design(&self, data: &TabularDataset) -> DesignMatrix {
        let cols = self.n_columns();
        let mut values = Vec::with_capacity(data.len() * cols);
        for i in 0..data.len() {
            values.push(1.0);
            let m = self.monomials(data.row(i));
            values.extend(m.iter().zip(&self.column_mean).zip(&self.column_std).map(|((v, mu), s)| (v - mu) / s));
        }
        DesignMatrix {
            rows: data.len(),
            cols,
            values,
            targets: data.targets().iter().map(|&t| f64::from(t)).collect(),
            classes: data.targets().to_vec(),
        }
    }
}

/// Row-major design matrix with its regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub targets: Vec<f64>,
    pub classes: Vec<u8>,
}

impl DesignMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn predict(&self, coef: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), coef)).collect()
    }

    pub fn mse(&self, coef: &[f64]) -> f64 {
        let n = self.rows as f64;
        (0..self.rows).map(|i| (dot(self.row(i), coef) - self.targets[i]).powi(2)).sum::<f64>() / n
    }

    /// Gradient of the MSE, `(2/n) Xᵀ(Xw - t)`.
    pub fn mse_gradient_into(&self, coef: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        let scale = 2.0 / self.rows as f64;
        for i in 0..self.rows {
            let row = self.row(i);
            let r = scale * (dot(row, coef) - self.targets[i]);
            for (g, x) in out.iter_mut().zip(row) {
                *g += r * x;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub degree: u8,
    pub coefficients: Vec<f64>,
}

impl RegressionModel {
    pub fn zeros(degree: u8) -> Result<Self> {
        check_degree(degree)?;
        Ok(Self { degree, coefficients: vec![0.0; expansion_size(degree, N_FEATURES)] })
    }

    fn check(&self, design: &DesignMatrix) -> Result<()> {
        check_degree(self.degree)?;
        check_dim(expansion_size(self.degree, N_FEATURES), self.coefficients.len())?;
        check_dim(design.cols, self.coefficients.len())
    }
}

/// Losses after `k = 0..=iterations` updates; `test` is empty when no test
/// set was supplied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub train: Vec<f64>,
    pub test: Vec<f64>,
}

impl LossCurve {
    fn record(&mut self, step: usize, coef: &[f64], train: &DesignMatrix, test: Option<&DesignMatrix>) -> Result<f64> {
        let loss = train.mse(coef);
        if !loss.is_finite() || loss > 1e150 {
            return Err(Error::SimulationFault { step, reason: format!("training loss diverged ({loss:e})") });
        }
        self.train.push(loss);
        if let Some(t) = test {
            self.test.push(t.mse(coef));
        }
        Ok(loss)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub model: RegressionModel,
    pub curve: LossCurve,
    pub iterations: usize,
    /// Iterate index the returned model comes from.
    pub selected_iteration: usize,
}

/// Full-batch gradient descent on the training MSE.
pub fn fit_gd(
    init: &RegressionModel,
    train: &DesignMatrix,
    test: Option<&DesignMatrix>,
    learning_rate: f64,
    iterations: usize,
) -> Result<Fit> {
    init.check(train)?;
    if let Some(t) = test {
        check_dim(train.cols, t.cols)?;
    }
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::param("learning_rate", format!("must be positive, got {learning_rate}")));
    }
    let mut w = init.coefficients.clone();
    let mut g = vec![0.0; w.len()];
    let mut curve = LossCurve::default();
    curve.record(0, &w, train, test)?;
    for k in 1..=iterations {
        train.mse_gradient_into(&w, &mut g);
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= learning_rate * gi;
        }
        curve.record(k, &w, train, test)?;
    }
    Ok(Fit {
        model: RegressionModel { degree: init.degree, coefficients: w },
        curve,
        iterations,
        selected_iteration: iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpSettings {
    pub dt: f64,
    /// Predator start: the prey plus this offset along the first coefficient.
    pub predator_offset: f64,
    /// Trailing share of the iterates the returned prey is chosen from.
    pub window_fraction: f64,
}

impl Default for PpSettings {
    fn default() -> Self {
        Self { dt: 0.01, predator_offset: 0.5, window_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpFit {
    /// Lowest-training-MSE prey within the final window.
    pub fit: Fit,
    /// Prey after the last update.
    pub final_prey: Vec<f64>,
    /// Prey-predator distance after each update, starting at `k = 0`.
    pub separation: Vec<f64>,
}

/// Predator-prey optimizer on `L = -MSE`: the prey ascends `L` while being
/// repelled by a predator that moves toward it at constant speed.
pub fn fit_pp(
    init: &RegressionModel,
    train: &DesignMatrix,
    test: Option<&DesignMatrix>,
    params: &InteractionParams,
    settings: &PpSettings,
    iterations: usize,
) -> Result<PpFit> {
    init.check(train)?;
    if let Some(t) = test {
        check_dim(train.cols, t.cols)?;
    }
    params.check()?;
    let PpSettings { dt, predator_offset, window_fraction } = *settings;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::param("window_fraction", format!("must lie in (0, 1], got {window_fraction}")));
    }
    if !predator_offset.is_finite() {
        return Err(Error::param("predator_offset", "must be finite"));
    }
    let mut x = init.coefficients.clone();
    let mut y = x.clone();
    y[0] += predator_offset;
    let mut g = vec![0.0; x.len()];
    let mut delta = vec![0.0; x.len()];
    let mut curve = LossCurve::default();
    let mut separation = vec![predator_offset.abs()];
    let mut best = (curve.record(0, &x, train, test)?, 0, x.clone());
    let window = ((window_fraction * iterations as f64).ceil() as usize).min(iterations);
    let window_start = iterations - window + 1;

    for k in 1..=iterations {
        train.mse_gradient_into(&x, &mut g);
        for i in 0..x.len() {
            delta[i] = x[i] - y[i];
        }
        let (u, d) = direction(&delta);
        let v = params.magnitude(d);
        for i in 0..x.len() {
            x[i] += dt * (-g[i] + v * u[i]);
            y[i] += dt * params.alpha_y * u[i];
        }
        let loss = curve.record(k, &x, train, test)?;
        separation.push(x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
        if k >= window_start && (best.1 < window_start || loss < best.0) {
            best = (loss, k, x.clone());
        }
    }
    Ok(PpFit {
        fit: Fit {
            model: RegressionModel { degree: init.degree, coefficients: best.2 },
            curve,
            iterations,
            selected_iteration: best.1,
        },
        final_prey: x,
        separation,
    })
}

/// Spread and drift of the trailing part of a loss curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalBand {
    pub min: f64,
    pub max: f64,
    pub width: f64,
    /// Least-squares slope per iteration.
    pub slope: f64,
}

pub fn terminal_band(curve: &[f64], window_fraction: f64) -> Result<TerminalBand> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::param("window_fraction", format!("must lie in (0, 1], got {window_fraction}")));
    }
    let n = ((window_fraction * curve.len() as f64).ceil() as usize).min(curve.len());
    if n < 2 {
        return Err(Error::param("curve", "window holds fewer than 2 points"));
    }
    let tail = &curve[curve.len() - n..];
    let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ts: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let (tm, ym) = (crate::stats::mean(&ts), crate::stats::mean(tail));
    let sxy: f64 = ts.iter().zip(tail).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
    Ok(TerminalBand { min, max, width: max - min, slope: sxy / sxx })
}

/// Class read off a real prediction: rounded half away from zero, then
/// clamped to `{0, 1, 2}`.
pub fn predicted_class(prediction: f64) -> u8 {
    prediction.round().clamp(0.0, f64::from(N_CLASSES - 1)) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mse: f64,
    pub accuracy: f64,
}

pub fn evaluate(model: &RegressionModel, data: &DesignMatrix) -> Result<Evaluation> {
    model.check(data)?;
    Ok(evaluate_predictions(&data.predict(&model.coefficients), &data.targets, &data.classes))
}

pub fn evaluate_predictions(predictions: &[f64], targets: &[f64], classes: &[u8]) -> Evaluation {
    let n = predictions.len() as f64;
    let mse = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let hits = predictions.iter().zip(classes).filter(|(p, c)| predicted_class(**p) == **c).count();
    Evaluation { mse, accuracy: hits as f64 / n }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub degree: u8,
    pub train_mse: f64,
    pub test_mse: f64,
    pub test_accuracy: f64,
    pub iterations: usize,
    pub selected_iteration: usize,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSettings {
    pub train_fraction: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub interaction: InteractionParams,
    pub pp: PpSettings,
}

/// The three benchmark fits on one split: linear GD, quadratic GD and the
/// quadratic predator-prey model, plus their loss curves.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub split_seed: u64,
    pub reports: Vec<FitReport>,
    pub curves: Vec<LossCurve>,
    pub separation: Vec<f64>,
}

impl Comparison {
    pub fn report(&self, method: &str) -> Option<&FitReport> {
        self.reports.iter().find(|r| r.method == method)
    }
}

pub const LINEAR_GD: &str = "linear_gd";
pub const QUADRATIC_GD: &str = "quadratic_gd";
pub const QUADRATIC_PP: &str = "quadratic_pp";

pub fn compare_methods(data: &TabularDataset, settings: &RegressionSettings, split_seed: u64) -> Result<Comparison> {
    let (train, test) = split(data, settings.train_fraction, split_seed)?;
    let config = serde_json::to_value(settings).map_err(|e| Error::param("settings", e.to_string()))?;
    let report = |method: &str, fit: &Fit, tr: &DesignMatrix, te: &DesignMatrix| -> Result<FitReport> {
        let test_eval = evaluate(&fit.model, te)?;
        Ok(FitReport {
            method: method.to_string(),
            degree: fit.model.degree,
            train_mse: tr.mse(&fit.model.coefficients),
            test_mse: test_eval.mse,
            test_accuracy: test_eval.accuracy,
            iterations: fit.iterations,
            selected_iteration: fit.selected_iteration,
            config: config.clone(),
        })
    };

    let mut reports = Vec::new();
    let mut curves = Vec::new();
    let lin = FeatureMap::fit(&train, 1)?;
    let (tr1, te1) = (lin.design(&train), lin.design(&test));
    let gd1 = fit_gd(&RegressionModel::zeros(1)?, &tr1, Some(&te1), settings.learning_rate, settings.iterations)?;
    reports.push(report(LINEAR_GD, &gd1, &tr1, &te1)?);
    curves.push(gd1.curve);

    let quad = FeatureMap::fit(&train, 2)?;
    let (tr2, te2) = (quad.design(&train), quad.design(&test));
    let gd2 = fit_gd(&RegressionModel::zeros(2)?, &tr2, Some(&te2), settings.learning_rate, settings.iterations)?;
    reports.push(report(QUADRATIC_GD, &gd2, &tr2, &te2)?);
    curves.push(gd2.curve);

    let pp = fit_pp(
        &RegressionModel::zeros(2)?,
        &tr2,
        Some(&te2),
        &settings.interaction,
        &settings.pp,
        settings.iterations,
    )?;
    reports.push(report(QUADRATIC_PP, &pp.fit, &tr2, &te2)?);
    curves.push(pp.fit.curve);
    Ok(Comparison { split_seed, reports, curves, separation: pp.separation })
}

/// Repeats [`compare_methods`] over `n_splits` splits with seeds derived from
/// `master_seed`, in parallel.
pub fn split_study(
    data: &TabularDataset,
    settings: &RegressionSettings,
    n_splits: usize,
    master_seed: u64,
) -> Result<Vec<Comparison>> {
    (0..n_splits as u64).into_par_iter().map(|i| compare_methods(data, settings, derive_seed(master_seed, i))).collect()
}

pub fn reports_csv(comparisons: &[Comparison]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "split_seed",
        "method",
        "degree",
        "train_mse",
        "test_mse",
        "test_accuracy",
        "iterations",
        "selected_iteration",
    ]);
    for c in comparisons {
        for r in &c.reports {
            t.push(vec![
                Cell::Text(c.split_seed.to_string()),
                r.method.as_str().into(),
                usize::from(r.degree).into(),
                r.train_mse.into(),
                r.test_mse.into(),
                r.test_accuracy.into(),
                r.iterations.into(),
                r.selected_iteration.into(),
            ]);
        }
    }
    t
}

/// Per-iteration train/test losses of every method, plus the PP separation.
pub fn curves_csv(c: &Comparison) -> CsvTable {
    let mut header = vec!["iteration".to_string()];
    for r in &c.reports {
        header.push(format!("{}_train", r.method));
        header.push(format!("{}_test", r.method));
    }
    header.push("pp_separation".to_string());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = CsvTable::new(&header);
    let n = c.curves.iter().map(|cv| cv.train.len()).max().unwrap_or(0);
    for k in 0..n {
        let mut row = vec![Cell::from(k)];
        for cv in &c.curves {
            row.push(cv.train.get(k).copied().into());
            row.push(cv.test.get(k).copied().into());
        }
        row.push(c.separation.get(k).copied().into());
        t.push(row);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, seed: u64) -> TabularDataset {
        let mut rng = RngStream::new(seed, 0);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..N_FEATURES).map(|_| rng.standard_normal()).collect()).collect();
        let targets = (0..n).map(|i| (i % 3) as u8).collect();
        TabularDataset::new(rows, targets).unwrap()
    }

    #[test]
    fn expansion_sizes() {
        assert_eq!(expansion_size(1, 13), 14);
        assert_eq!(expansion_size(2, 13), 105);
    }

    #[test]
    fn parse_rejects_bad_rows() {
        let p = Path::new("x.csv");
        let good = "1,2,3,4,5,6,7,8,9,10,11,12,13,0\n1,2,3,4,5,6,7,8,9,10,11,12,13,2\n";
        assert_eq!(parse_dataset(good, p).unwrap().len(), 2);
        let bad_class = "1,2,3,4,5,6,7,8,9,10,11,12,13,0\n1,2,3,4,5,6,7,8,9,10,11,12,13,3\n";
        assert!(matches!(parse_dataset(bad_class, p), Err(Error::Parse { line: 2, .. })));
        let short = "1,2,3\n";
        assert!(matches!(parse_dataset(short, p), Err(Error::Parse { line: 1, .. })));
        assert!(parse_dataset("", p).is_err());
        let wrong_header = "a,b\n1,2,3,4,5,6,7,8,9,10,11,12,13,0\n";
        assert!(matches!(parse_dataset(wrong_header, p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = toy(178, 1);
        let (a, b) = split(&d, 0.8, 5).unwrap();
        assert_eq!((a.len(), b.len()), (142, 36));
        assert_eq!(split(&d, 0.8, 5).unwrap(), (a.clone(), b));
        assert_ne!(split(&d, 0.8, 6).unwrap().0, a);
        assert!(split(&d, 0.001, 5).is_err());
        assert!(split(&d, 1.0, 5).is_err());
    }

    #[test]
    fn design_columns_are_standardized_on_train() {
        let d = toy(60, 2);
        let map = FeatureMap::fit(&d, 2).unwrap();
        let x = map.design(&d);
        assert_eq!(x.cols, 105);
        for j in 1..x.cols {
            let col: Vec<f64> = (0..x.rows).map(|i| x.row(i)[j]).collect();
            assert!(crate::stats::mean(&col).abs() < 1e-12);
            let var = col.iter().map(|v| v * v).sum::<f64>() / x.rows as f64;
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_iterations_return_initial_model() {
        let d = toy(30, 3);
        let x = FeatureMap::fit(&d, 1).unwrap().design(&d);
        let init = RegressionModel { degree: 1, coefficients: (0..14).map(f64::from).collect() };
        let fit = fit_gd(&init, &x, None, 0.1, 0).unwrap();
        assert_eq!(fit.model, init);
        assert_eq!(fit.curve.train.len(), 1);
        let pp = fit_pp(&init, &x, None, &InteractionParams::inert(), &PpSettings::default(), 0).unwrap();
        assert_eq!(pp.fit.model, init);
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let d = toy(30, 4);
        let x = FeatureMap::fit(&d, 2).unwrap().design(&d);
        let err = fit_gd(&RegressionModel::zeros(2).unwrap(), &x, None, 50.0, 10_000).unwrap_err();
        assert!(matches!(err, Error::SimulationFault { step, .. } if step > 0));
    }

    #[test]
    fn rounding_boundary() {
        assert_eq!(predicted_class(0.49), 0);
        assert_eq!(predicted_class(0.51), 1);
        assert_eq!(predicted_class(0.5), 1);
        assert_eq!(predicted_class(-3.0), 0);
        assert_eq!(predicted_class(7.2), 2);
    }

    #[test]
    fn terminal_band_of_line() {
        let c: Vec<f64> = (0..100).map(|i| 2.0 * i as f64).collect();
        let b = terminal_band(&c, 0.2).unwrap();
        assert!((b.slope - 2.0).abs() < 1e-12);
        assert_eq!(b.width, 38.0);
    }
}
