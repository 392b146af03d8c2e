//! Gaussian-mixture objective `L(x) = Σ_j q_j exp(-|x - c_j|² / (2 σ_j²))`.
//!
//! The objective is maximized by the learners in this crate; callers that
//! want a potential energy use `f = -L`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// One non-normalized Gaussian bump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianWell {
    pub center: Vec<f64>,
    pub width: f64,
    pub amplitude: f64,
}

impl GaussianWell {
    pub fn new(center: Vec<f64>, width: f64, amplitude: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::param("width", format!("must be positive and finite, got {width}")));
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::param("amplitude", format!("must be positive and finite, got {amplitude}")));
        }
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("center", "must be a non-empty finite vector"));
        }
        Ok(Self { center, width, amplitude })
    }

    fn sq_dist(&self, x: &[f64]) -> f64 {
        self.center.iter().zip(x).map(|(c, xi)| (xi - c) * (xi - c)).sum()
    }

    /// `|x - c| / σ`.
    pub fn normalized_distance(&self, x: &[f64]) -> f64 {
        self.sq_dist(x).sqrt() / self.width
    }

    fn bump(&self, x: &[f64]) -> f64 {
        self.amplitude * (-self.sq_dist(x) / (2.0 * self.width * self.width)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureLandscape {
    wells: Vec<GaussianWell>,
    dimension: usize,
}

/// Result of the well-separation check: the closest pair of centers compared
/// against the widest well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationReport {
    pub min_center_distance: f64,
    pub max_width: f64,
    pub well_separated: bool,
}

/// Centers closer than this many widths trigger the separation warning.
pub const SEPARATION_FACTOR: f64 = 5.0;

impl GaussianMixtureLandscape {
    pub fn new(wells: Vec<GaussianWell>) -> Result<Self> {
        let dimension = wells
            .first()
            .map(|w| w.center.len())
            .ok_or_else(|| Error::param("wells", "at least one well is required"))?;
        for w in &wells {
            check_dim(dimension, w.center.len())?;
        }
        let landscape = Self { wells, dimension };
        let sep = landscape.separation();
        if !sep.well_separated {
            log::warn!(
                "wells are not well separated: min center distance {:.3} < {} x max width {:.3}",
                sep.min_center_distance,
                SEPARATION_FACTOR,
                sep.max_width
            );
        }
        Ok(landscape)
    }

    /// Convenience constructor from `(center, width, amplitude)` triples.
    pub fn from_triples(spec: &[(&[f64], f64, f64)]) -> Result<Self> {
        let wells = spec.iter().map(|(c, w, a)| GaussianWell::new(c.to_vec(), *w, *a)).collect::<Result<Vec<_>>>()?;
        Self::new(wells)
    }

    pub fn wells(&self) -> &[GaussianWell] {
        &self.wells
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dimension, x.len())?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.wells.iter().map(|w| w.bump(x)).sum()
    }

    /// Analytic gradient of the objective.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dimension, x.len())?;
        let mut out = vec![0.0; self.dimension];
        self.grad_into(x, &mut out);
        Ok(out)
    }

    /// Gradient written into `out`; dimensions must already agree.
    pub(crate) fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for w in &self.wells {
            let s2 = w.width * w.width;
            let coef = w.bump(x) / s2;
            for ((o, xi), c) in out.iter_mut().zip(x).zip(&w.center) {
                *o -= coef * (xi - c);
            }
        }
    }

    /// Index of the well whose σ-vicinity contains `x`. On overlap the
    /// smallest normalized distance wins, then the smallest index.
    pub fn well_membership(&self, x: &[f64]) -> Option<usize> {
        self.membership_within(x, 1.0)
    }

    /// Like [`well_membership`](Self::well_membership) with vicinities
    /// scaled to `factor · σ_j`.
    pub fn membership_within(&self, x: &[f64], factor: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (j, w) in self.wells.iter().enumerate() {
            let r = w.normalized_distance(x);
            if r <= factor && best.is_none_or(|(_, b)| r < b) {
                best = Some((j, r));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Index of the widest well (first on ties).
    pub fn widest_well(&self) -> usize {
        let mut best = 0;
        for (j, w) in self.wells.iter().enumerate() {
            if w.width > self.wells[best].width {
                best = j;
            }
        }
        best
    }

    pub fn separation(&self) -> SeparationReport {
        let max_width = self.wells.iter().map(|w| w.width).fold(0.0, f64::max);
        let mut min_d = f64::INFINITY;
        for (i, a) in self.wells.iter().enumerate() {
            for b in &self.wells[i + 1..] {
                min_d = min_d.min(a.sq_dist(&b.center).sqrt());
            }
        }
        SeparationReport {
            min_center_distance: min_d,
            max_width,
            well_separated: min_d >= SEPARATION_FACTOR * max_width,
        }
    }

    /// Upper bound on the gradient norm at well `j`'s center caused by the
    /// other wells' tails.
    pub fn cross_term_bound(&self, j: usize) -> f64 {
        let cj = &self.wells[j].center;
        self.wells
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, w)| {
                let d = w.sq_dist(cj).sqrt();
                w.amplitude * (-d * d / (2.0 * w.width * w.width)).exp() * d / (w.width * w.width)
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_sgld() -> GaussianMixtureLandscape {
        GaussianMixtureLandscape::from_triples(&[(&[-5.5, -5.5], 3.0, 9.0), (&[3.0, 3.0], 1.5, 2.25)]).unwrap()
    }

    #[test]
    fn single_well_center_value() {
        let l = GaussianMixtureLandscape::from_triples(&[(&[0.0], 1.0, 1.0)]).unwrap();
        assert_eq!(l.eval(&[0.0]).unwrap(), 1.0);
        assert_eq!(l.grad(&[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn value_at_wide_center() {
        // 9 + 2.25 * exp(-144.5 / 4.5), the second term is ~1e-14.
        let expected = 9.0 + 2.25 * (-144.5f64 / 4.5).exp();
        let v = paper_sgld().eval(&[-5.5, -5.5]).unwrap();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 9.0).abs() < 1e-12);
    }

    #[test]
    fn decays_far_away() {
        let l = paper_sgld();
        assert!(l.eval(&[200.0, -300.0]).unwrap() < 1e-300);
    }

    #[test]
    fn gradient_at_origin_by_hand() {
        // Scalar arithmetic per coordinate: Σ q/σ² (c - x) exp(-|x-c|²/(2σ²)).
        let wide = 1.0 * (-5.5) * (-60.5f64 / 18.0).exp();
        let narrow = 1.0 * 3.0 * (-18.0f64 / 4.5).exp();
        let g = paper_sgld().grad(&[0.0, 0.0]).unwrap();
        for gi in g {
            assert!((gi - (wide + narrow)).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let l = paper_sgld();
        assert!(matches!(l.eval(&[1.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
        assert!(l.grad(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn invalid_wells_rejected() {
        assert!(GaussianWell::new(vec![0.0], 0.0, 1.0).is_err());
        assert!(GaussianWell::new(vec![0.0], 1.0, -1.0).is_err());
        assert!(GaussianWell::new(vec![f64::NAN], 1.0, 1.0).is_err());
        assert!(GaussianMixtureLandscape::new(vec![]).is_err());
        let a = GaussianWell::new(vec![0.0], 1.0, 1.0).unwrap();
        let b = GaussianWell::new(vec![0.0, 1.0], 1.0, 1.0).unwrap();
        assert!(GaussianMixtureLandscape::new(vec![a, b]).is_err());
    }

    #[test]
    fn membership_basic() {
        let l = paper_sgld();
        assert_eq!(l.well_membership(&[3.0, 3.0]), Some(1));
        assert_eq!(l.well_membership(&[-5.5, -5.5]), Some(0));
        // Far from both centers relative to their widths.
        assert_eq!(l.well_membership(&[-1.25, -1.25]), None);
        assert_eq!(l.widest_well(), 0);
    }

    #[test]
    fn membership_overlap_tie_break() {
        // Wells at 0 (σ=2) and 1 (σ=1). At x=0.2: r0 = 0.1, r1 = 0.8.
        let l = GaussianMixtureLandscape::from_triples(&[(&[0.0], 2.0, 1.0), (&[1.0], 1.0, 1.0)]).unwrap();
        assert_eq!(l.well_membership(&[0.2]), Some(0));
        // At x=0.8: r0 = 0.4, r1 = 0.2.
        assert_eq!(l.well_membership(&[0.8]), Some(1));
        // Equal normalized distance: identical wells on both sides of 0.5.
        let l = GaussianMixtureLandscape::from_triples(&[(&[0.0], 1.0, 1.0), (&[1.0], 1.0, 1.0)]).unwrap();
        assert_eq!(l.well_membership(&[0.5]), Some(0));
    }

    #[test]
    fn separation_diagnostic() {
        let s = paper_sgld().separation();
        assert!((s.min_center_distance - 144.5f64.sqrt()).abs() < 1e-12);
        assert!(!s.well_separated);
        let far = GaussianMixtureLandscape::from_triples(&[(&[0.0], 1.0, 1.0), (&[10.0], 1.0, 1.0)]).unwrap();
        assert!(far.separation().well_separated);
    }

    #[test]
    fn center_gradient_within_cross_term_bound() {
        let l = GaussianMixtureLandscape::from_triples(&[(&[0.0, 0.0], 1.0, 1.0), (&[6.0, 0.0], 1.5, 2.0)]).unwrap();
        for j in 0..2 {
            let g = l.grad(&l.wells()[j].center.clone()).unwrap();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= l.cross_term_bound(j) * (1.0 + 1e-12));
        }
    }
}
