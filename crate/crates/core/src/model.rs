//! Overdamped Langevin models on the unit torus.
//!
//! A model bundles the potential `V`, the bias field `u`, the observables `R` and
//! `S` and the inverse temperature `β`. The diffusion coefficient is the constant
//! scalar `σ = √(2/β)`, so the reference dynamics reads
//! `dq = −∇V(q) dt + σ dW` and leaves the Gibbs measure `e^{−βV}/Z` invariant.
//!
//! Positions are plain reals. Every field is evaluated through its periodic
//! closed form, so trajectories never need to be wrapped back onto `[0, 1)^d`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::KahanSum;
use crate::spectral;

/// Largest supported dimension.
pub const MAX_DIM: usize = 2;

/// Default number of quadrature points per axis.
pub const DEFAULT_GRID: usize = 1 << 12;

/// A scalar function of one periodic coordinate.
pub type AxisFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn beta(&self) -> f64;

    fn sigma(&self) -> f64 {
        (2.0 / self.beta()).sqrt()
    }

    fn potential(&self, q: &[f64]) -> f64;

    fn grad_potential(&self, q: &[f64], out: &mut [f64]);

    fn bias(&self, q: &[f64], out: &mut [f64]);

    fn observable_r(&self, q: &[f64]) -> f64;

    fn observable_s(&self, q: &[f64]) -> f64;

    /// Fills `∇V(q)` and `u(q)` and returns `R(q)`.
    ///
    /// This is the only call made per time step; models sharing trigonometric
    /// factors between the three fields should override it.
    #[inline]
    fn evaluate(&self, q: &[f64], grad: &mut [f64], bias: &mut [f64]) -> f64 {
        self.grad_potential(q, grad);
        self.bias(q, bias);
        self.observable_r(q)
    }

    /// Per-axis potentials `V_i` when `V(q) = Σ_i V_i(q_i)`.
    fn axis_potentials(&self) -> Option<Vec<AxisFn>> {
        None
    }

    /// The equivalent one-dimensional problem, when every field except the
    /// potential depends on the first coordinate only and `V` is separable.
    fn line_reduction(&self) -> Option<LineModel> {
        None
    }
}

impl fmt::Debug for dyn Model + '_ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("name", &self.name())
            .field("dim", &self.dim())
            .field("beta", &self.beta())
            .finish()
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidBeta(beta))
    }
}

/// `V(q) = (1 + cos 2πq)/2` with `u = −V'`, `R = V'` and `S = βR`.
#[derive(Debug, Clone, Copy)]
pub struct CosineModel {
    beta: f64,
    sigma: f64,
    bias_scale: f64,
}

pub fn model_1d(beta: f64) -> Result<CosineModel> {
    CosineModel::new(beta, 1.0)
}

impl CosineModel {
    /// `bias_scale` multiplies the bias field; zero gives `u ≡ 0`.
    pub fn new(beta: f64, bias_scale: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self {
            beta,
            sigma: (2.0 / beta).sqrt(),
            bias_scale,
        })
    }

    #[inline]
    fn dv(q: f64) -> f64 {
        -PI * (2.0 * PI * q).sin()
    }
}

impl Model for CosineModel {
    fn name(&self) -> &str {
        "cosine1d"
    }

    fn dim(&self) -> usize {
        1
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn potential(&self, q: &[f64]) -> f64 {
        0.5 * (1.0 + (2.0 * PI * q[0]).cos())
    }

    fn grad_potential(&self, q: &[f64], out: &mut [f64]) {
        out[0] = Self::dv(q[0]);
    }

    fn bias(&self, q: &[f64], out: &mut [f64]) {
        out[0] = -self.bias_scale * Self::dv(q[0]);
    }

    fn observable_r(&self, q: &[f64]) -> f64 {
        Self::dv(q[0])
    }

    fn observable_s(&self, q: &[f64]) -> f64 {
        self.beta * Self::dv(q[0])
    }

    #[inline]
    fn evaluate(&self, q: &[f64], grad: &mut [f64], bias: &mut [f64]) -> f64 {
        let dv = Self::dv(q[0]);
        grad[0] = dv;
        bias[0] = -self.bias_scale * dv;
        dv
    }

    fn axis_potentials(&self) -> Option<Vec<AxisFn>> {
        Some(vec![Arc::new(|q: f64| 0.5 * (1.0 + (2.0 * PI * q).cos()))])
    }

    fn line_reduction(&self) -> Option<LineModel> {
        let beta = self.beta;
        let scale = self.bias_scale;
        Some(LineModel::new(
            beta,
            Arc::new(|q: f64| 0.5 * (1.0 + (2.0 * PI * q).cos())),
            Arc::new(Self::dv),
            Arc::new(Self::dv),
            Arc::new(move |q| beta * Self::dv(q)),
            Arc::new(move |q| -scale * Self::dv(q)),
        ))
    }
}

/// Two-well potential `V(x, y) = A(x) + B(y)` with
/// `A(x) = sin(4π(x+0.15))·(2 + (2/3)·sin(2π(x+0.15)))` and `B(y) = 4 cos 2πy`.
///
/// The bias is the free-energy gradient along `x`, `u = −A'(x) e₁`, and the
/// observable is `R = sin 2πx − E_μ[sin 2πx]` with `S = βR`.
#[derive(Debug, Clone, Copy)]
pub struct DoubleWell2d {
    beta: f64,
    sigma: f64,
    bias_scale: f64,
    mean_sin: f64,
}

pub fn model_2d(beta: f64) -> Result<DoubleWell2d> {
    DoubleWell2d::new(beta, 1.0)
}

impl DoubleWell2d {
    const SHIFT: f64 = 0.15;

    pub fn new(beta: f64, bias_scale: f64) -> Result<Self> {
        check_beta(beta)?;
        let mean_sin = Self::marginal_mean_sin(beta, DEFAULT_GRID);
        Ok(Self {
            beta,
            sigma: (2.0 / beta).sqrt(),
            bias_scale,
            mean_sin,
        })
    }

    /// `E_μ[sin 2πx]`, cached at construction.
    pub fn mean_sin(&self) -> f64 {
        self.mean_sin
    }

    /// `E_μ[sin 2πx]` as a ratio of one-dimensional integrals over `x`; the
    /// `y` factor of the Gibbs density cancels.
    pub fn marginal_mean_sin(beta: f64, grid_size: usize) -> f64 {
        let mut num = KahanSum::default();
        let mut den = KahanSum::default();
        for x in spectral::uniform_grid(grid_size) {
            let w = (-beta * Self::a(x)).exp();
            num.add(w * (2.0 * PI * x).sin());
            den.add(w);
        }
        num.total() / den.total()
    }

    #[inline]
    pub fn a(x: f64) -> f64 {
        let s = x + Self::SHIFT;
        (4.0 * PI * s).sin() * (2.0 + (2.0 / 3.0) * (2.0 * PI * s).sin())
    }

    #[inline]
    pub fn da(x: f64) -> f64 {
        let s = x + Self::SHIFT;
        let (s4, c4) = (4.0 * PI * s).sin_cos();
        let (s2, c2) = (2.0 * PI * s).sin_cos();
        4.0 * PI * c4 * (2.0 + (2.0 / 3.0) * s2) + s4 * (4.0 * PI / 3.0) * c2
    }

    #[inline]
    pub fn b(y: f64) -> f64 {
        4.0 * (2.0 * PI * y).cos()
    }

    #[inline]
    pub fn db(y: f64) -> f64 {
        -8.0 * PI * (2.0 * PI * y).sin()
    }
}

impl Model for DoubleWell2d {
    fn name(&self) -> &str {
        "double-well-2d"
    }

    fn dim(&self) -> usize {
        2
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn potential(&self, q: &[f64]) -> f64 {
        Self::a(q[0]) + Self::b(q[1])
    }

    fn grad_potential(&self, q: &[f64], out: &mut [f64]) {
        out[0] = Self::da(q[0]);
        out[1] = Self::db(q[1]);
    }

    fn bias(&self, q: &[f64], out: &mut [f64]) {
        out[0] = -self.bias_scale * Self::da(q[0]);
        out[1] = 0.0;
    }

    fn observable_r(&self, q: &[f64]) -> f64 {
        (2.0 * PI * q[0]).sin() - self.mean_sin
    }

    fn observable_s(&self, q: &[f64]) -> f64 {
        self.beta * self.observable_r(q)
    }

    #[inline]
    fn evaluate(&self, q: &[f64], grad: &mut [f64], bias: &mut [f64]) -> f64 {
        let da = Self::da(q[0]);
        grad[0] = da;
        grad[1] = Self::db(q[1]);
        bias[0] = -self.bias_scale * da;
        bias[1] = 0.0;
        (2.0 * PI * q[0]).sin() - self.mean_sin
    }

    fn axis_potentials(&self) -> Option<Vec<AxisFn>> {
        Some(vec![Arc::new(Self::a), Arc::new(Self::b)])
    }

    fn line_reduction(&self) -> Option<LineModel> {
        let beta = self.beta;
        let m = self.mean_sin;
        let scale = self.bias_scale;
        Some(LineModel::new(
            beta,
            Arc::new(Self::a),
            Arc::new(Self::da),
            Arc::new(move |x| (2.0 * PI * x).sin() - m),
            Arc::new(move |x| beta * ((2.0 * PI * x).sin() - m)),
            Arc::new(move |x| -scale * Self::da(x)),
        ))
    }
}

/// A one-dimensional model assembled from closures.
///
/// Serves both as a user-defined model for the integrator and as the reduced
/// problem handed to the Poisson solver.
#[derive(Clone)]
pub struct LineModel {
    pub beta: f64,
    pub potential: AxisFn,
    pub dpotential: AxisFn,
    pub r: AxisFn,
    pub s: AxisFn,
    pub u: AxisFn,
    sigma: f64,
}

impl LineModel {
    pub fn new(
        beta: f64,
        potential: AxisFn,
        dpotential: AxisFn,
        r: AxisFn,
        s: AxisFn,
        u: AxisFn,
    ) -> Self {
        Self {
            beta,
            potential,
            dpotential,
            r,
            s,
            u,
            sigma: (2.0 / beta).sqrt(),
        }
    }

    /// Checked constructor for user models.
    pub fn try_new(
        beta: f64,
        potential: AxisFn,
        dpotential: AxisFn,
        r: AxisFn,
        s: AxisFn,
        u: AxisFn,
    ) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self::new(beta, potential, dpotential, r, s, u))
    }

    /// Same model with a different bias field.
    pub fn with_bias(mut self, u: AxisFn) -> Self {
        self.u = u;
        self
    }
}

impl fmt::Debug for LineModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LineModel").field("beta", &self.beta).finish_non_exhaustive()
    }
}

impl Model for LineModel {
    fn name(&self) -> &str {
        "line"
    }

    fn dim(&self) -> usize {
        1
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn potential(&self, q: &[f64]) -> f64 {
        (self.potential)(q[0])
    }

    fn grad_potential(&self, q: &[f64], out: &mut [f64]) {
        out[0] = (self.dpotential)(q[0]);
    }

    fn bias(&self, q: &[f64], out: &mut [f64]) {
        out[0] = (self.u)(q[0]);
    }

    fn observable_r(&self, q: &[f64]) -> f64 {
        (self.r)(q[0])
    }

    fn observable_s(&self, q: &[f64]) -> f64 {
        (self.s)(q[0])
    }

    fn axis_potentials(&self) -> Option<Vec<AxisFn>> {
        Some(vec![self.potential.clone()])
    }

    fn line_reduction(&self) -> Option<LineModel> {
        Some(self.clone())
    }
}

/// Named model as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub beta: f64,
    /// Multiplier on the bias field; `0` turns the bias off.
    #[serde(default = "one")]
    pub bias_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn new(name: &str, beta: f64) -> Self {
        Self {
            name: name.to_string(),
            beta,
            bias_scale: 1.0,
        }
    }

    pub fn build(&self) -> Result<BuiltinModel> {
        match self.name.as_str() {
            "cosine1d" => Ok(BuiltinModel::Cosine1d(CosineModel::new(self.beta, self.bias_scale)?)),
            "double-well-2d" => Ok(BuiltinModel::DoubleWell2d(DoubleWell2d::new(
                self.beta,
                self.bias_scale,
            )?)),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum BuiltinModel {
    Cosine1d(CosineModel),
    DoubleWell2d(DoubleWell2d),
}

macro_rules! delegate {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            BuiltinModel::Cosine1d($m) => $e,
            BuiltinModel::DoubleWell2d($m) => $e,
        }
    };
}

impl Model for BuiltinModel {
    fn name(&self) -> &str {
        delegate!(self, m => m.name())
    }
    fn dim(&self) -> usize {
        delegate!(self, m => m.dim())
    }
    fn beta(&self) -> f64 {
        delegate!(self, m => m.beta())
    }
    fn sigma(&self) -> f64 {
        delegate!(self, m => m.sigma())
    }
    fn potential(&self, q: &[f64]) -> f64 {
        delegate!(self, m => m.potential(q))
    }
    fn grad_potential(&self, q: &[f64], out: &mut [f64]) {
        delegate!(self, m => m.grad_potential(q, out))
    }
    fn bias(&self, q: &[f64], out: &mut [f64]) {
        delegate!(self, m => m.bias(q, out))
    }
    fn observable_r(&self, q: &[f64]) -> f64 {
        delegate!(self, m => m.observable_r(q))
    }
    fn observable_s(&self, q: &[f64]) -> f64 {
        delegate!(self, m => m.observable_s(q))
    }
    #[inline]
    fn evaluate(&self, q: &[f64], grad: &mut [f64], bias: &mut [f64]) -> f64 {
        delegate!(self, m => m.evaluate(q, grad, bias))
    }
    fn axis_potentials(&self) -> Option<Vec<AxisFn>> {
        delegate!(self, m => m.axis_potentials())
    }
    fn line_reduction(&self) -> Option<LineModel> {
        delegate!(self, m => m.line_reduction())
    }
}

enum Density {
    /// Normalized weights of a tensor grid, row-major in `(q_0, q_1)`.
    Tensor(Vec<f64>),
    /// Normalized per-axis weights when `V` is a sum of axis potentials.
    Factored(Vec<Vec<f64>>),
}

/// The Gibbs measure `e^{−βV}/Z` discretized on a uniform grid.
pub struct StationaryMeasure {
    beta: f64,
    dim: usize,
    grid_size: usize,
    z: f64,
    density: Density,
}

impl StationaryMeasure {
    pub fn new(model: &dyn Model, grid_size: usize) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::GridTooSmall {
                got: grid_size,
                min: 2,
            });
        }
        let beta = model.beta();
        let dim = model.dim();
        let grid = spectral::uniform_grid(grid_size);
        let (z, density) = match model.axis_potentials() {
            Some(axes) => {
                let mut z = 1.0;
                let mut factors = Vec::with_capacity(axes.len());
                for v in axes {
                    let w: Vec<f64> = grid.iter().map(|&x| (-beta * v(x)).exp()).collect();
                    let total = KahanSum::sum(w.iter().copied());
                    z *= total / grid_size as f64;
                    factors.push(w.into_iter().map(|wi| wi / total).collect());
                }
                (z, Density::Factored(factors))
            }
            None => {
                let mut w = Vec::with_capacity(grid_size.pow(dim as u32));
                let mut q = [0.0; MAX_DIM];
                for i in 0..grid_size.pow(dim as u32) {
                    let mut rest = i;
                    for axis in (0..dim).rev() {
                        q[axis] = grid[rest % grid_size];
                        rest /= grid_size;
                    }
                    w.push((-beta * model.potential(&q[..dim])).exp());
                }
                let total = KahanSum::sum(w.iter().copied());
                let z = total / (grid_size as f64).powi(dim as i32);
                (z, Density::Tensor(w.into_iter().map(|wi| wi / total).collect()))
            }
        };
        Ok(Self {
            beta,
            dim,
            grid_size,
            z,
            density,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// `Z = ∫ e^{−βV}` over the torus.
    pub fn normalization(&self) -> f64 {
        self.z
    }

    /// Total mass of the discrete density; `1` up to rounding.
    pub fn total_mass(&self) -> f64 {
        match &self.density {
            Density::Tensor(w) => KahanSum::sum(w.iter().copied()),
            Density::Factored(f) => f.iter().map(|w| KahanSum::sum(w.iter().copied())).product(),
        }
    }
}

/// An integrand for [`quadrature_expectation`].
pub enum Field<'a> {
    /// An arbitrary function of the position.
    Point(&'a dyn Fn(&[f64]) -> f64),
    /// A product `Π_i f_i(q_i)` of per-axis factors.
    Product(Vec<&'a dyn Fn(f64) -> f64>),
}

/// `∫ f dμ` by the periodic trapezoid rule on the measure's grid.
///
/// Cost is `O(n)` per axis when both `f` and `V` factor over the axes and
/// `O(n^d)` otherwise.
pub fn quadrature_expectation(f: &Field<'_>, measure: &StationaryMeasure) -> f64 {
    let n = measure.grid_size;
    let grid = spectral::uniform_grid(n);
    let d = measure.dim;
    match (&measure.density, f) {
        (Density::Factored(axes), Field::Product(factors)) => {
            assert_eq!(factors.len(), d, "one factor per axis");
            axes.iter()
                .zip(factors)
                .map(|(w, fi)| KahanSum::sum(w.iter().zip(&grid).map(|(wi, &x)| wi * fi(x))))
                .product()
        }
        (density, field) => {
            let mut acc = KahanSum::default();
            let mut q = [0.0; MAX_DIM];
            for i in 0..n.pow(d as u32) {
                let mut rest = i;
                let mut idx = [0usize; MAX_DIM];
                for axis in (0..d).rev() {
                    idx[axis] = rest % n;
                    q[axis] = grid[idx[axis]];
                    rest /= n;
                }
                let w = match density {
                    Density::Tensor(w) => w[i],
                    Density::Factored(axes) => (0..d).map(|a| axes[a][idx[a]]).product(),
                };
                let value = match field {
                    Field::Point(f) => f(&q[..d]),
                    Field::Product(factors) => (0..d).map(|a| factors[a](q[a])).product(),
                };
                acc.add(w * value);
            }
            acc.total()
        }
    }
}
