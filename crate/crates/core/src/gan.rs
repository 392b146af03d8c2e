//! One-dimensional GAN value function, KL divergence and the coupled
//! discriminator/generator Langevin dynamics.
//!
//! The discriminator is `D(z, x) = sigmoid(a·exp(-(z-m)²/(2s²)) + b)` with
//! `x = (m, log s, a, b)`; the generator density is `Normal(μ, e^{2τ})` with
//! `y = (μ, τ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::{Cell, CsvTable};
use crate::quadrature::GaussLegendre;
use crate::sde::RngStream;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub const DISC_PARAMS: usize = 4;
pub const GEN_PARAMS: usize = 2;

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorModel {
    pub params: [f64; DISC_PARAMS],
}

/// Logit and its partial derivatives at one sample point.
struct LogitParts {
    h: f64,
    dh_dx: [f64; DISC_PARAMS],
    dh_dz: f64,
}

impl DiscriminatorModel {
    pub fn new(center: f64, width: f64, gain: f64, bias: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::param("width", "must be positive"));
        }
        Ok(Self { params: [center, width.ln(), gain, bias] })
    }

    pub fn center(&self) -> f64 {
        self.params[0]
    }

    pub fn width(&self) -> f64 {
        self.params[1].exp()
    }

    pub fn logit(&self, z: f64) -> f64 {
        let [m, ls, a, b] = self.params;
        let s = ls.exp();
        a * (-(z - m).powi(2) / (2.0 * s * s)).exp() + b
    }

    fn logit_parts(&self, z: f64) -> LogitParts {
        let [m, ls, a, b] = self.params;
        let inv_s2 = (-2.0 * ls).exp();
        let r = z - m;
        let g = (-0.5 * r * r * inv_s2).exp();
        let ag = a * g;
        LogitParts { h: ag + b, dh_dx: [ag * r * inv_s2, ag * r * r * inv_s2, g, 1.0], dh_dz: -ag * r * inv_s2 }
    }

    /// `D(z, x)`; strictly inside `(0, 1)` mathematically, though it can
    /// round to an endpoint. Use the log forms for anything quantitative.
    pub fn eval(&self, z: f64) -> f64 {
        sigmoid(self.logit(z))
    }

    pub fn log_d(&self, z: f64) -> f64 {
        -softplus(-self.logit(z))
    }

    pub fn log_one_minus_d(&self, z: f64) -> f64 {
        -softplus(self.logit(z))
    }

    /// Log-density of the distribution this discriminator stands for in KL
    /// comparisons: `Normal(m, s²)`.
    pub fn log_density(&self, z: f64) -> f64 {
        let s = self.width();
        -0.5 * ((z - self.center()) / s).powi(2) - s.ln() - LN_SQRT_2PI
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorModel {
    pub params: [f64; GEN_PARAMS],
}

impl GeneratorModel {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(Error::param("std", "must be positive"));
        }
        Ok(Self { params: [mean, std.ln()] })
    }

    pub fn mean(&self) -> f64 {
        self.params[0]
    }

    pub fn std(&self) -> f64 {
        self.params[1].exp()
    }

    pub fn log_density(&self, z: f64) -> f64 {
        let s = self.std();
        -0.5 * ((z - self.mean()) / s).powi(2) - s.ln() - LN_SQRT_2PI
    }

    pub fn density(&self, z: f64) -> f64 {
        self.log_density(z).exp()
    }
}

/// Observed data points `z_1..z_L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample(Vec<f64>);

impl Sample {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::param("sample", "needs at least one point"));
        }
        if points.iter().any(|z| !z.is_finite()) {
            return Err(Error::param("sample", "points must be finite"));
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }
}

/// Gauss–Legendre rule over the generator's mean ± `half_width` standard
/// deviations.
#[derive(Debug, Clone)]
pub struct GenQuadrature {
    rule: GaussLegendre,
    pub half_width: f64,
}

impl GenQuadrature {
    pub fn new(nodes: usize, half_width: f64) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::param("nodes", "must be at least 1"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::param("half_width", "must be positive"));
        }
        Ok(Self { rule: GaussLegendre::new(nodes), half_width })
    }

    pub fn nodes(&self) -> usize {
        self.rule.nodes.len()
    }

    /// The same window with twice the nodes.
    pub fn refined(&self) -> Self {
        Self { rule: GaussLegendre::new(2 * self.nodes()), half_width: self.half_width }
    }

    /// Standard-normal weighted nodes: `(u, φ(u)·w)`.
    fn weighted(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.rule.mapped(-self.half_width, self.half_width).map(|(u, w)| (u, w * (-0.5 * u * u - LN_SQRT_2PI).exp()))
    }

    /// `∫ p_gen(z) f(z) dz` over the window.
    pub fn expect(&self, gen: &GeneratorModel, mut f: impl FnMut(f64) -> f64) -> f64 {
        let (mu, s) = (gen.mean(), gen.std());
        self.weighted().map(|(u, w)| w * f(mu + s * u)).sum()
    }
}

impl Default for GenQuadrature {
    fn default() -> Self {
        Self::new(64, 8.0).expect("valid default quadrature")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueTerms {
    pub v: f64,
    pub v1: f64,
    pub v2: f64,
}

/// Log-likelihood term `(1/L) Σ log D(z_l, x)`.
pub fn likelihood_term(sample: &Sample, disc: &DiscriminatorModel) -> f64 {
    let z = sample.points();
    z.iter().map(|&z| disc.log_d(z)).sum::<f64>() / z.len() as f64
}

/// `∫ p_gen(z, y) log(1 - D(z, x)) dz`.
pub fn generator_term(disc: &DiscriminatorModel, gen: &GeneratorModel, quad: &GenQuadrature) -> f64 {
    quad.expect(gen, |z| disc.log_one_minus_d(z))
}

pub fn value_function(
    sample: &Sample,
    disc: &DiscriminatorModel,
    gen: &GeneratorModel,
    quad: &GenQuadrature,
) -> Result<ValueTerms> {
    let v1 = likelihood_term(sample, disc);
    let v2 = generator_term(disc, gen, quad);
    if !(v1.is_finite() && v2.is_finite()) {
        return Err(Error::SimulationFault { step: 0, reason: format!("value function not finite: V1={v1}, V2={v2}") });
    }
    if disc.eval(sample.points()[0]) >= 1.0 || disc.eval(gen.mean()) >= 1.0 {
        log::debug!("discriminator saturated at machine precision; log forms keep V finite");
    }
    Ok(ValueTerms { v: v1 + v2, v1, v2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueGradient {
    pub dx: [f64; DISC_PARAMS],
    pub dy: [f64; GEN_PARAMS],
}

impl ValueGradient {
    pub fn is_finite(&self) -> bool {
        self.dx.iter().chain(&self.dy).all(|v| v.is_finite())
    }
}

/// Gradient of `V1` with respect to the discriminator parameters.
pub fn likelihood_gradient(sample: &Sample, disc: &DiscriminatorModel) -> [f64; DISC_PARAMS] {
    let mut dx = [0.0; DISC_PARAMS];
    let n = sample.points().len() as f64;
    for &z in sample.points() {
        let p = disc.logit_parts(z);
        // d log D / dh = 1 - D
        let w = sigmoid(-p.h) / n;
        for (d, g) in dx.iter_mut().zip(p.dh_dx) {
            *d += w * g;
        }
    }
    dx
}

/// Analytic gradient of `V = V1 + V2`.
pub fn value_gradient(
    sample: &Sample,
    disc: &DiscriminatorModel,
    gen: &GeneratorModel,
    quad: &GenQuadrature,
) -> ValueGradient {
    let mut dx = likelihood_gradient(sample, disc);
    let pair = generator_term_with_gradient(disc, gen, quad);
    for (d, g) in dx.iter_mut().zip(pair.dx) {
        *d += g;
    }
    ValueGradient { dx, dy: pair.dy }
}

/// The generator term and its gradient with respect to both parameter
/// vectors, from one pass over the quadrature nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    pub value: f64,
    pub dx: [f64; DISC_PARAMS],
    pub dy: [f64; GEN_PARAMS],
}

pub fn generator_term_with_gradient(disc: &DiscriminatorModel, gen: &GeneratorModel, quad: &GenQuadrature) -> PairTerm {
    let mut out = PairTerm { value: 0.0, dx: [0.0; DISC_PARAMS], dy: [0.0; GEN_PARAMS] };
    let (mu, s) = (gen.mean(), gen.std());
    for (u, w) in quad.weighted() {
        let p = disc.logit_parts(mu + s * u);
        out.value -= w * softplus(p.h);
        // d log(1 - D) / dh = -D
        let c = -w * sigmoid(p.h);
        for (d, g) in out.dx.iter_mut().zip(p.dh_dx) {
            *d += c * g;
        }
        out.dy[0] += c * p.dh_dz;
        out.dy[1] += c * p.dh_dz * s * u;
    }
    out
}

/// Central finite-difference gradient of `V` with step `h` in every
/// parameter.
pub fn finite_difference_gradient(
    sample: &Sample,
    disc: &DiscriminatorModel,
    gen: &GeneratorModel,
    quad: &GenQuadrature,
    h: f64,
) -> Result<ValueGradient> {
    let v = |d: &DiscriminatorModel, g: &GeneratorModel| value_function(sample, d, g, quad).map(|t| t.v);
    let mut out = ValueGradient { dx: [0.0; DISC_PARAMS], dy: [0.0; GEN_PARAMS] };
    for i in 0..DISC_PARAMS {
        let (mut p, mut m) = (*disc, *disc);
        p.params[i] += h;
        m.params[i] -= h;
        out.dx[i] = (v(&p, gen)? - v(&m, gen)?) / (2.0 * h);
    }
    for i in 0..GEN_PARAMS {
        let (mut p, mut m) = (*gen, *gen);
        p.params[i] += h;
        m.params[i] -= h;
        out.dy[i] = (v(disc, &p)? - v(disc, &m)?) / (2.0 * h);
    }
    Ok(out)
}

/// `∫ p log(p/q)` over `[lo, hi]` by composite Gauss–Legendre quadrature.
/// Fails when `p` puts more than `1e-12` mass where `q` vanishes.
pub fn kl_divergence(p: impl Fn(f64) -> f64, q: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    kl_divergence_log(|z| p(z).ln(), |z| q(z).ln(), lo, hi)
}

/// As [`kl_divergence`], from log-densities (robust in far tails).
pub fn kl_divergence_log(log_p: impl Fn(f64) -> f64, log_q: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::param("support", "need finite lo < hi"));
    }
    const PANELS: usize = 64;
    let rule = GaussLegendre::new(20);
    let h = (hi - lo) / PANELS as f64;
    let mut kl = 0.0;
    let mut stray = 0.0;
    for k in 0..PANELS {
        let a = lo + k as f64 * h;
        for (z, w) in rule.mapped(a, a + h) {
            let lp = log_p(z);
            if lp == f64::NEG_INFINITY {
                continue;
            }
            let lq = log_q(z);
            if lq == f64::NEG_INFINITY {
                stray += w * lp.exp();
                continue;
            }
            kl += w * lp.exp() * (lp - lq);
        }
    }
    if stray > 1e-12 {
        return Err(Error::SupportViolation { mass: stray });
    }
    Ok(kl.max(0.0))
}

/// `KL(p_gen ‖ Normal(m, s²))`, the distance between the generator and the
/// distribution the discriminator is centered on.
pub fn generator_discriminator_kl(disc: &DiscriminatorModel, gen: &GeneratorModel) -> Result<f64> {
    let (mu, s) = (gen.mean(), gen.std());
    kl_divergence_log(|z| gen.log_density(z), |z| disc.log_density(z), mu - 12.0 * s, mu + 12.0 * s)
}

/// One Euler–Maruyama step of the coupled system: the discriminator ascends
/// `V`, the generator descends it, both with noise `√(2θ dt)`.
#[allow(clippy::too_many_arguments)]
pub fn gan_sgld_step(
    disc: &DiscriminatorModel,
    gen: &GeneratorModel,
    sample: &Sample,
    theta: f64,
    dt: f64,
    rng: &mut RngStream,
    quad: &GenQuadrature,
) -> Result<(DiscriminatorModel, GeneratorModel)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "must be positive"));
    }
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::param("theta", "must be nonnegative"));
    }
    let g = value_gradient(sample, disc, gen, quad);
    if !g.is_finite() {
        return Err(Error::SimulationFault { step: 0, reason: "non-finite value gradient".into() });
    }
    let amp = (2.0 * theta * dt).sqrt();
    let mut noise = [0.0; DISC_PARAMS + GEN_PARAMS];
    if theta > 0.0 {
        rng.fill_standard_normal(&mut noise);
    }
    let mut d = *disc;
    let mut y = *gen;
    for i in 0..DISC_PARAMS {
        d.params[i] += dt * g.dx[i] + amp * noise[i];
    }
    for i in 0..GEN_PARAMS {
        y.params[i] += -dt * g.dy[i] + amp * noise[DISC_PARAMS + i];
    }
    Ok((d, y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanRecord {
    pub t: f64,
    pub disc: DiscriminatorModel,
    pub gen: GeneratorModel,
    pub terms: ValueTerms,
    pub kl: f64,
}

/// Integrates the coupled system for `steps` steps, recording the initial
/// state and every `record_every`-th state after it.
#[allow(clippy::too_many_arguments)]
pub fn gan_trajectory(
    disc: DiscriminatorModel,
    gen: GeneratorModel,
    sample: &Sample,
    theta: f64,
    dt: f64,
    steps: usize,
    record_every: usize,
    rng: &mut RngStream,
    quad: &GenQuadrature,
) -> Result<Vec<GanRecord>> {
    if record_every == 0 {
        return Err(Error::param("record_every", "must be at least 1"));
    }
    let record = |t: f64, d: &DiscriminatorModel, g: &GeneratorModel| -> Result<GanRecord> {
        Ok(GanRecord {
            t,
            disc: *d,
            gen: *g,
            terms: value_function(sample, d, g, quad)?,
            kl: generator_discriminator_kl(d, g)?,
        })
    };
    let (mut d, mut g) = (disc, gen);
    let mut out = vec![record(0.0, &d, &g)?];
    for k in 0..steps {
        (d, g) = gan_sgld_step(&d, &g, sample, theta, dt, rng, quad).map_err(|e| match e {
            Error::SimulationFault { reason, .. } => Error::SimulationFault { step: k, reason },
            e => e,
        })?;
        if (k + 1) % record_every == 0 {
            out.push(record((k + 1) as f64 * dt, &d, &g)?);
        }
    }
    Ok(out)
}

pub fn gan_trajectory_csv(records: &[GanRecord]) -> CsvTable {
    let mut t = CsvTable::new(&["t", "x1", "x2", "x3", "x4", "y1", "y2", "V", "V1", "V2", "kl"]);
    for r in records {
        let mut row: Vec<Cell> = vec![r.t.into()];
        row.extend(r.disc.params.iter().map(|&v| Cell::from(v)));
        row.extend(r.gen.params.iter().map(|&v| Cell::from(v)));
        row.extend([r.terms.v, r.terms.v1, r.terms.v2, r.kl].map(Cell::from));
        t.push(row);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearTrajectory {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl BilinearTrajectory {
    /// Largest `|x² + y² - (x0² + y0²)|` along the run.
    pub fn max_radius_drift(&self) -> f64 {
        let r0 = self.x[0].powi(2) + self.y[0].powi(2);
        self.x.iter().zip(&self.y).map(|(x, y)| (x * x + y * y - r0).abs()).fold(0.0, f64::max)
    }
}

/// Noiseless gradient play on `V = ωxy`: `dx/dt = ωy`, `dy/dt = -ωx`,
/// explicit Euler, every state kept.
pub fn bilinear_example_run(omega: f64, x0: f64, y0: f64, dt: f64, steps: usize) -> Result<BilinearTrajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "must be positive"));
    }
    if !(omega.is_finite() && x0.is_finite() && y0.is_finite()) {
        return Err(Error::param("omega", "inputs must be finite"));
    }
    let mut tr = BilinearTrajectory {
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        y: Vec::with_capacity(steps + 1),
    };
    let (mut x, mut y) = (x0, y0);
    tr.t.push(0.0);
    tr.x.push(x);
    tr.y.push(y);
    for k in 0..steps {
        (x, y) = (x + dt * omega * y, y - dt * omega * x);
        tr.t.push((k + 1) as f64 * dt);
        tr.x.push(x);
        tr.y.push(y);
    }
    Ok(tr)
}

pub fn bilinear_csv(tr: &BilinearTrajectory, every: usize) -> CsvTable {
    let mut t = CsvTable::new(&["t", "x", "y"]);
    for i in (0..tr.t.len()).step_by(every.max(1)) {
        t.push(vec![tr.t[i].into(), tr.x[i].into(), tr.y[i].into()]);
    }
    t
}
