//! Small sample statistics used by the Monte-Carlo experiments.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn std_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Sample excess kurtosis (biased moment estimator).
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

/// Average ranks (ties share the mean rank), 1-based.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub rho: f64,
    /// One-sided p-value for `rho > 0`.
    pub p_greater: f64,
    pub n: usize,
}

/// Spearman rank correlation with the Student-t approximation for the
/// one-sided p-value.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Correlation {
    let n = xs.len();
    let rho = pearson(&ranks(xs), &ranks(ys));
    let p_greater = if n < 3 || !rho.is_finite() {
        f64::NAN
    } else if rho >= 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        1.0 - dist.cdf(t)
    };
    Correlation { rho, p_greater, n }
}

/// One-sided p-value of a z statistic, `P(Z > z)`.
pub fn normal_upper_tail(z: f64) -> f64 {
    1.0 - Normal::standard().cdf(z)
}

/// Paired comparison `a_i - b_i`: mean difference, its standard error and
/// one-sided p-value for `mean < 0` (t distribution).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTest {
    pub mean_diff: f64,
    pub se: f64,
    pub t: f64,
    pub p_less: f64,
    pub n: usize,
}

pub fn paired_t(a: &[f64], b: &[f64]) -> PairedTest {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let mean_diff = mean(&d);
    let se = std_error(&d);
    let t = mean_diff / se;
    let p_less =
        if n >= 2 && se > 0.0 { StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("df > 0").cdf(t) } else { f64::NAN };
    PairedTest { mean_diff, se, t, p_less, n }
}
