//! Shared stochastic machinery: seeded Gaussian streams, Euler–Maruyama
//! stepping, and an explicit finite-volume Fokker–Planck solver used to
//! verify the particle simulations.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::landscape::GaussianMixtureLandscape;
use crate::output::{Cell, CsvTable};
use crate::quadrature::trapezoid_weights;

/// A reproducible random stream identified by `(seed, stream)`.
///
/// Distinct stream ids under one seed give independent sequences, which is
/// how parallel runs stay deterministic regardless of scheduling.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for o in out {
            *o = self.rng.sample(StandardNormal);
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniformly random permutation in place.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        xs.shuffle(&mut self.rng);
    }
}

/// SplitMix64 finalizer, used to derive independent sub-seeds from a master
/// seed and a label.
pub fn derive_seed(master: u64, label: u64) -> u64 {
    let mut z = master ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

type DriftFn<'a> = dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'a;

/// Vector field `b(x, t)` writing its value into an output slice.
pub struct DriftField<'a> {
    dim: usize,
    f: Box<DriftFn<'a>>,
}

impl<'a> DriftField<'a> {
    pub fn new(dim: usize, f: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'a) -> Self {
        Self { dim, f: Box::new(f) }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, |_, _, out| out.iter_mut().for_each(|o| *o = 0.0))
    }

    pub fn constant(b: Vec<f64>) -> Self {
        let dim = b.len();
        Self::new(dim, move |_, _, out| out.copy_from_slice(&b))
    }

    /// `∇L`: uphill on the objective, i.e. downhill on `f = -L`.
    pub fn ascent(landscape: &'a GaussianMixtureLandscape) -> Self {
        Self::new(landscape.dimension(), move |x, _, out| landscape.grad_into(x, out))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        (self.f)(x, t, out)
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, t, &mut out);
        out
    }
}

/// One step `x + b(x,t)·dt + sqrt(2θ·dt)·g`, `g ~ N(0, I)`.
pub fn euler_maruyama_step(
    x: &[f64],
    drift: &DriftField<'_>,
    temperature: f64,
    dt: f64,
    t: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    let mut scratch = vec![0.0; x.len()];
    euler_maruyama_step_in_place(&mut out, drift, temperature, dt, t, rng, &mut scratch)?;
    Ok(out)
}

/// In-place variant of [`euler_maruyama_step`]; `scratch` must have the
/// state's length.
pub fn euler_maruyama_step_in_place(
    x: &mut [f64],
    drift: &DriftField<'_>,
    temperature: f64,
    dt: f64,
    t: f64,
    rng: &mut RngStream,
    scratch: &mut [f64],
) -> Result<()> {
    check_dim(drift.dim(), x.len())?;
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if !(temperature >= 0.0) {
        return Err(Error::param("temperature", format!("must be nonnegative, got {temperature}")));
    }
    drift.eval_into(x, t, scratch);
    if scratch.iter().any(|b| !b.is_finite()) {
        return Err(Error::SimulationFault { step: 0, reason: "non-finite drift".into() });
    }
    let amp = (2.0 * temperature * dt).sqrt();
    for (xi, bi) in x.iter_mut().zip(scratch.iter()) {
        *xi += bi * dt;
        if amp > 0.0 {
            *xi += amp * rng.standard_normal();
        }
    }
    Ok(())
}

/// Axis-aligned node grid (d ≤ 2) with trapezoid control volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub bounds: Vec<(f64, f64)>,
    pub points: Vec<usize>,
}

impl GridSpec {
    pub fn new(bounds: Vec<(f64, f64)>, points: Vec<usize>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 2 {
            return Err(Error::param("bounds", "grids support 1 or 2 dimensions"));
        }
        check_dim(bounds.len(), points.len())?;
        for (k, (&(lo, hi), &n)) in bounds.iter().zip(&points).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::param(format!("bounds[{k}]"), "need finite lo < hi"));
            }
            if n < 3 {
                return Err(Error::param(format!("points[{k}]"), "need at least 3 nodes per axis"));
            }
        }
        Ok(Self { bounds, points })
    }

    /// 1D grid with nodes spaced by `h` over `[lo, hi]`.
    pub fn uniform_1d(lo: f64, hi: f64, h: f64) -> Result<Self> {
        let n = ((hi - lo) / h).round() as usize + 1;
        Self::new(vec![(lo, hi)], vec![n])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        (hi - lo) / (self.points[axis] - 1) as f64
    }

    pub fn coords(&self, axis: usize) -> Vec<f64> {
        let (lo, _) = self.bounds[axis];
        let h = self.spacing(axis);
        (0..self.points[axis]).map(|i| lo + h * i as f64).collect()
    }

    fn strides(&self) -> Vec<usize> {
        // Row-major: last axis fastest.
        let mut s = vec![1; self.dim()];
        for k in (0..self.dim().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.points[k + 1];
        }
        s
    }

    fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let strides = self.strides();
        strides
            .iter()
            .map(|s| {
                let i = flat / s;
                flat %= s;
                i
            })
            .collect()
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat).iter().enumerate().map(|(k, &i)| self.bounds[k].0 + self.spacing(k) * i as f64).collect()
    }

    /// Control volume of every node (product of trapezoid weights).
    pub fn volumes(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> =
            (0..self.dim()).map(|k| trapezoid_weights(self.points[k], self.spacing(k))).collect();
        (0..self.len())
            .map(|flat| self.unravel(flat).iter().enumerate().map(|(k, &i)| per_axis[k][i]).product())
            .collect()
    }
}

/// Nonnegative density values on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    spec: GridSpec,
    values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        check_dim(spec.len(), values.len())?;
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param("values", "densities must be finite and nonnegative"));
        }
        Ok(Self { spec, values })
    }

    /// Samples `f` at the nodes.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..spec.len()).map(|i| f(&spec.node(i))).collect();
        Self::new(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().zip(self.spec.volumes()).map(|(u, v)| u * v).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Underflow(format!("cannot normalize a grid with mass {m}")));
        }
        self.values.iter_mut().for_each(|u| *u /= m);
        Ok(())
    }

    pub fn mean(&self, axis: usize) -> f64 {
        let vols = self.spec.volumes();
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, (u, v)) in self.values.iter().zip(&vols).enumerate() {
            num += u * v * self.spec.node(i)[axis];
            den += u * v;
        }
        num / den
    }

    pub fn variance(&self, axis: usize) -> f64 {
        let m = self.mean(axis);
        let vols = self.spec.volumes();
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, (u, v)) in self.values.iter().zip(&vols).enumerate() {
            let d = self.spec.node(i)[axis] - m;
            num += u * v * d * d;
            den += u * v;
        }
        num / den
    }

    /// `∫ |u - w|` by the same trapezoid volumes.
    pub fn l1_distance(&self, other: &DensityGrid) -> Result<f64> {
        if self.spec != other.spec {
            return Err(Error::param("other", "grids must share the same spec"));
        }
        Ok(self.values.iter().zip(&other.values).zip(self.spec.volumes()).map(|((a, b), v)| (a - b).abs() * v).sum())
    }

    /// CSV with header `x[,y],density`, row-major, 17 significant digits.
    pub fn to_csv(&self) -> CsvTable {
        let header: &[&str] = if self.spec.dim() == 1 { &["x", "density"] } else { &["x", "y", "density"] };
        let mut t = CsvTable::new(header);
        for (i, u) in self.values.iter().enumerate() {
            let mut row: Vec<Cell> = self.spec.node(i).into_iter().map(Cell::from).collect();
            row.push((*u).into());
            t.push(row);
        }
        t
    }
}

/// Normalized `e^{-β f}` on the grid, trapezoid normalization.
pub fn gibbs_density(potential: impl Fn(&[f64]) -> f64, beta: f64, spec: GridSpec) -> Result<DensityGrid> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", format!("must be positive, got {beta}")));
    }
    let f: Vec<f64> = (0..spec.len()).map(|i| potential(&spec.node(i))).collect();
    let fmin = f.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    if !fmin.is_finite() {
        return Err(Error::Underflow("e^{-beta f} vanishes on every node; rescale beta or the potential".into()));
    }
    // Shift by the minimum so the largest weight is exactly 1.
    let values: Vec<f64> = f.iter().map(|v| if v.is_finite() { (-beta * (v - fmin)).exp() } else { 0.0 }).collect();
    let mut g = DensityGrid::new(spec, values)?;
    g.normalize()?;
    Ok(g)
}

/// Precomputed explicit operator for `∂u/∂t = θ div[e^{-βf} grad(u e^{βf})]`,
/// which equals `θΔu + ∇u·∇f + uΔf`.
///
/// Face fluxes use the symmetric exponential weighting
/// `J = (θ/h)(u_i e^{-βΔf/2} - u_{i+1} e^{βΔf/2})`, so the discrete Gibbs
/// state is an exact fixed point and zero-flux walls conserve mass.
struct FpOperator {
    /// Per axis, per node: flux coefficients toward the next node along the
    /// axis (`out`) and from it (`back`). Zero on the upper wall.
    out: Vec<Vec<f64>>,
    back: Vec<Vec<f64>>,
    inv_width: Vec<Vec<f64>>,
    stride: Vec<usize>,
    max_rate: f64,
}

impl FpOperator {
    fn new(spec: &GridSpec, f: &[f64], theta: f64) -> Self {
        let beta = 1.0 / theta;
        let stride = spec.strides();
        let n = spec.len();
        let mut out = Vec::new();
        let mut back = Vec::new();
        let mut inv_width = Vec::new();
        let mut total_out = vec![0.0; n];
        for axis in 0..spec.dim() {
            let h = spec.spacing(axis);
            let w = trapezoid_weights(spec.points[axis], h);
            let mut o = vec![0.0; n];
            let mut b = vec![0.0; n];
            let mut iw = vec![0.0; n];
            for i in 0..n {
                let idx = spec.unravel(i)[axis];
                iw[i] = 1.0 / w[idx];
                if idx + 1 < spec.points[axis] {
                    let j = i + stride[axis];
                    let half = 0.5 * beta * (f[j] - f[i]);
                    o[i] = theta / h * (-half).exp();
                    b[i] = theta / h * half.exp();
                }
            }
            for i in 0..n {
                total_out[i] += o[i] * iw[i];
                let idx = spec.unravel(i)[axis];
                if idx > 0 {
                    total_out[i] += b[i - stride[axis]] * iw[i];
                }
            }
            out.push(o);
            back.push(b);
            inv_width.push(iw);
        }
        let max_rate = total_out.iter().copied().fold(0.0, f64::max);
        Self { out, back, inv_width, stride, max_rate }
    }

    fn step(&self, u: &[f64], du: &mut [f64], dt: f64) {
        du.iter_mut().for_each(|d| *d = 0.0);
        for axis in 0..self.out.len() {
            let s = self.stride[axis];
            let (o, b, iw) = (&self.out[axis], &self.back[axis], &self.inv_width[axis]);
            for i in 0..u.len() {
                if o[i] == 0.0 && b[i] == 0.0 {
                    continue;
                }
                let j = i + s;
                let flux = o[i] * u[i] - b[i] * u[j];
                du[i] -= flux * iw[i];
                du[j] += flux * iw[j];
            }
        }
        for d in du.iter_mut() {
            *d *= dt;
        }
    }
}

/// Explicit evolution of the diffusion in potential `f` at temperature `θ`
/// with zero-flux walls.
///
/// Rejects `dt > h²/(4θ)` (smallest spacing) and any step that would make
/// the explicit update non-positive.
pub fn fokker_planck_evolve(
    grid: &DensityGrid,
    potential: impl Fn(&[f64]) -> f64,
    temperature: f64,
    dt: f64,
    steps: usize,
) -> Result<DensityGrid> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::param("temperature", format!("must be positive, got {temperature}")));
    }
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let spec = grid.spec.clone();
    let h_min = (0..spec.dim()).map(|k| spec.spacing(k)).fold(f64::INFINITY, f64::min);
    let bound = h_min * h_min / (4.0 * temperature);
    if dt > bound {
        return Err(Error::Unstable { dt, bound });
    }
    let f: Vec<f64> = (0..spec.len()).map(|i| potential(&spec.node(i))).collect();
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("potential", "must be finite on every node"));
    }
    let op = FpOperator::new(&spec, &f, temperature);
    if dt * op.max_rate > 1.0 {
        return Err(Error::Unstable { dt, bound: 1.0 / op.max_rate });
    }
    let mut u = grid.values.clone();
    let mut du = vec![0.0; u.len()];
    for _ in 0..steps {
        op.step(&u, &mut du, dt);
        for (ui, di) in u.iter_mut().zip(&du) {
            *ui += di;
        }
    }
    // Roundoff can leave -0-ish values at machine epsilon.
    for ui in u.iter_mut() {
        if *ui < 0.0 {
            *ui = 0.0;
        }
    }
    DensityGrid::new(spec, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    #[test]
    fn zero_temperature_zero_drift_is_identity() {
        let mut rng = RngStream::new(1, 0);
        let x = vec![0.3, -1.2];
        let y = euler_maruyama_step(&x, &DriftField::zero(2), 0.0, 0.1, 0.0, &mut rng).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn zero_temperature_constant_drift_is_euler() {
        let mut rng = RngStream::new(1, 0);
        let b = vec![1.5, -0.25];
        let y = euler_maruyama_step(&[1.0, 2.0], &DriftField::constant(b.clone()), 0.0, 0.01, 0.0, &mut rng).unwrap();
        assert_eq!(y, vec![1.0 + 1.5 * 0.01, 2.0 - 0.25 * 0.01]);
    }

    #[test]
    fn non_finite_drift_is_a_fault() {
        let mut rng = RngStream::new(1, 0);
        let d = DriftField::new(1, |_, _, out| out[0] = f64::NAN);
        assert!(matches!(euler_maruyama_step(&[0.0], &d, 0.0, 0.1, 0.0, &mut rng), Err(Error::SimulationFault { .. })));
    }

    #[test]
    fn increments_have_variance_two_theta_dt() {
        let theta = 0.5;
        let dt = 0.01;
        let mut rng = RngStream::new(42, 7);
        let drift = DriftField::zero(1);
        let n = 100_000;
        let inc: Vec<f64> =
            (0..n).map(|_| euler_maruyama_step(&[0.0], &drift, theta, dt, 0.0, &mut rng).unwrap()[0]).collect();
        let var = stats::variance(&inc);
        // Standard error of a normal sample variance: σ² sqrt(2/(n-1)).
        let se = 0.01 * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - 0.01).abs() < 3.0 * se, "var={var}");
        // Kurtosis SE for normal data ≈ sqrt(24/n).
        let k = stats::excess_kurtosis(&inc);
        assert!(k.abs() < 3.0 * (24.0 / n as f64).sqrt(), "kurtosis={k}");
    }

    #[test]
    fn streams_reproduce_and_differ() {
        let mut a = RngStream::new(9, 3);
        let mut b = RngStream::new(9, 3);
        let mut c = RngStream::new(9, 4);
        let xa: Vec<f64> = (0..8).map(|_| a.standard_normal()).collect();
        let xb: Vec<f64> = (0..8).map(|_| b.standard_normal()).collect();
        let xc: Vec<f64> = (0..8).map(|_| c.standard_normal()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
        assert_ne!(derive_seed(1, 2), derive_seed(1, 3));
    }

    #[test]
    fn gibbs_uniform_for_constant_potential() {
        let spec = GridSpec::new(vec![(0.0, 2.0), (-1.0, 1.0)], vec![21, 11]).unwrap();
        let g = gibbs_density(|_| 3.0, 1.0, spec).unwrap();
        for v in g.values() {
            assert!((v - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn gibbs_quadratic_variance() {
        let spec = GridSpec::uniform_1d(-8.0, 8.0, 0.01).unwrap();
        let g = gibbs_density(|x| 0.5 * x[0] * x[0], 1.0, spec.clone()).unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-12);
        assert!((g.variance(0) - 1.0).abs() < 1e-3);
        let g2 = gibbs_density(|x| 0.5 * x[0] * x[0], 2.0, spec).unwrap();
        assert!((g2.variance(0) - 0.5 * g.variance(0)).abs() < 1e-3);
    }

    #[test]
    fn gibbs_underflow_rejected() {
        let spec = GridSpec::uniform_1d(0.0, 1.0, 0.1).unwrap();
        assert!(matches!(gibbs_density(|_| f64::INFINITY, 1.0, spec), Err(Error::Underflow(_))));
    }

    #[test]
    fn stability_bound_enforced() {
        let spec = GridSpec::uniform_1d(-1.0, 1.0, 0.1).unwrap();
        let g = gibbs_density(|_| 0.0, 1.0, spec).unwrap();
        let bound = 0.01 / 4.0;
        assert!(matches!(fokker_planck_evolve(&g, |_| 0.0, 1.0, bound * 1.01, 1), Err(Error::Unstable { .. })));
        assert!(fokker_planck_evolve(&g, |_| 0.0, 1.0, bound, 1).is_ok());
    }

    #[test]
    fn heat_equation_variance_grows_linearly() {
        // Narrow bump in the middle of a wide box; variance slope must be 2θ.
        let theta = 0.5;
        let spec = GridSpec::uniform_1d(-20.0, 20.0, 0.1).unwrap();
        let mut g = DensityGrid::from_fn(spec, |x| (-x[0] * x[0] / (2.0 * 0.25)).exp()).unwrap();
        g.normalize().unwrap();
        let dt = 0.004;
        let steps = 500;
        let v0 = g.variance(0);
        let g1 = fokker_planck_evolve(&g, |_| 0.0, theta, dt, steps).unwrap();
        let slope = (g1.variance(0) - v0) / (dt * steps as f64);
        assert!((slope - 2.0 * theta).abs() < 0.05 * 2.0 * theta, "slope={slope}");
        assert!((g1.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_mass_conservation() {
        let spec = GridSpec::new(vec![(-3.0, 3.0), (-3.0, 3.0)], vec![31, 41]).unwrap();
        let f = |x: &[f64]| 0.5 * (x[0] * x[0] + 2.0 * x[1] * x[1]);
        let mut g = DensityGrid::from_fn(spec, |x| (-(x[0] - 1.0).powi(2) * 4.0 - x[1].powi(2) * 4.0).exp()).unwrap();
        g.normalize().unwrap();
        let g1 = fokker_planck_evolve(&g, f, 0.5, 0.004, 1000).unwrap();
        assert!((g1.mass() - 1.0).abs() < 1e-8);
        // Moves toward the Gibbs state.
        let gibbs = gibbs_density(f, 2.0, g.spec().clone()).unwrap();
        assert!(g1.l1_distance(&gibbs).unwrap() < g.l1_distance(&gibbs).unwrap());
    }

    #[test]
    fn csv_header_and_rows() {
        let spec = GridSpec::new(vec![(0.0, 1.0), (0.0, 1.0)], vec![3, 3]).unwrap();
        let g = DensityGrid::from_fn(spec, |x| x[0] + 10.0 * x[1]).unwrap();
        let csv = g.to_csv().to_string_lossy();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,y,density");
        assert_eq!(lines.len(), 10);
        // Row-major: y varies fastest.
        assert!(lines[2].starts_with("0.0000000000000000e0,5.0000000000000000e-1,"));
    }
}
