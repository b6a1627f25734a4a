//! Deterministic oracle for one-dimensional generators.
//!
//! For `𝓛 = −V'∂ + β⁻¹∂²` on the unit circle and a centered right-hand side
//! `φ`, the solution of `−𝓛Φ = φ` is
//!
//! ```text
//! Φ̃'(x) = e^{βV(x)} (κ − β ∫_0^x e^{−βV} φ),
//! κ     = β ∫_0^1 e^{βV(x)} ∫_0^x e^{−βV} φ dx / ∫_0^1 e^{βV},
//! Φ     = Φ̃ − E_μ[Φ̃],
//! ```
//! where `κ` makes `Φ̃'` mean-free and hence `Φ̃` periodic. Cumulative
//! integrals are taken spectrally on a uniform grid.
//!
//! Finite-horizon quantities use the symmetrized operator
//! `H = −β⁻¹∂² + W` with `W = βV'²/4 − V''/2`, unitarily equivalent to `−𝓛`,
//! discretized in a truncated real Fourier basis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::estimators::KahanSum;
use crate::model::{LineModel, Model};
use crate::spectral;

/// Smallest grid accepted by the solver.
pub const MIN_GRID: usize = 16;

/// Default number of Fourier modes for the spectral route.
pub const DEFAULT_MODES: usize = 64;

/// Relative tolerance on `|E_μ[φ]|` for a right-hand side to count as centered.
const CENTERING_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonSolution {
    pub grid: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub kappa: f64,
}

/// A line model tabulated on a uniform grid, with its Gibbs weights.
#[derive(Debug, Clone)]
pub struct LineGrid {
    pub beta: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
    /// `e^{−βV}` on the grid.
    pub boltzmann: Vec<f64>,
    mass: f64,
}

impl LineGrid {
    pub fn new(model: &LineModel, grid_size: usize) -> Result<Self> {
        if grid_size < MIN_GRID {
            return Err(Error::GridTooSmall {
                got: grid_size,
                min: MIN_GRID,
            });
        }
        let x = spectral::uniform_grid(grid_size);
        let v: Vec<f64> = x.iter().map(|&q| (model.potential)(q)).collect();
        let dv: Vec<f64> = x.iter().map(|&q| (model.dpotential)(q)).collect();
        let boltzmann: Vec<f64> = v.iter().map(|&vi| (-model.beta * vi).exp()).collect();
        let mass = KahanSum::sum(boltzmann.iter().copied());
        Ok(Self {
            beta: model.beta,
            x,
            v,
            dv,
            boltzmann,
            mass,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn sample(&self, f: &dyn Fn(f64) -> f64) -> Vec<f64> {
        self.x.iter().map(|&q| f(q)).collect()
    }

    /// `E_μ[f]` for grid values `f`.
    pub fn expectation(&self, f: &[f64]) -> f64 {
        KahanSum::sum(self.boltzmann.iter().zip(f).map(|(w, fi)| w * fi)) / self.mass
    }

    /// `⟨f, g⟩` in `L²(μ)`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        KahanSum::sum(self.boltzmann.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b)) / self.mass
    }

    /// `Π f = f − E_μ[f]`.
    pub fn center(&self, f: &[f64]) -> Vec<f64> {
        let m = self.expectation(f);
        f.iter().map(|v| v - m).collect()
    }

    /// Solves `−𝓛Φ = φ` for centered grid values `φ`.
    pub fn solve(&self, rhs: &[f64]) -> Result<PoissonSolution> {
        if rhs.len() != self.len() {
            return Err(Error::LengthMismatch(format!(
                "right-hand side has {} values on a grid of {}",
                rhs.len(),
                self.len()
            )));
        }
        let m = self.expectation(rhs);
        let scale = rhs.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if m.abs() > CENTERING_TOL * scale {
            return Err(Error::NotCentered(m));
        }
        let beta = self.beta;
        let weighted: Vec<f64> = self.boltzmann.iter().zip(rhs).map(|(w, f)| w * f).collect();
        let inner = spectral::cumulative_integral(&weighted);
        let inv: Vec<f64> = self.boltzmann.iter().map(|w| 1.0 / w).collect();
        let kappa = beta * KahanSum::sum(inv.iter().zip(&inner).map(|(e, c)| e * c))
            / KahanSum::sum(inv.iter().copied());
        let dphi: Vec<f64> = inv
            .iter()
            .zip(&inner)
            .map(|(e, c)| e * (kappa - beta * c))
            .collect();
        let tilde = spectral::cumulative_integral(&dphi);
        let phi = self.center(&tilde);
        Ok(PoissonSolution {
            grid: self.x.clone(),
            phi,
            dphi,
            kappa,
        })
    }

    /// `max |𝓛Φ + φ|` over the grid, with `Φ''` from fourth-order centered
    /// differences of `Φ'`.
    pub fn residual(&self, sol: &PoissonSolution, rhs: &[f64]) -> f64 {
        let n = self.len();
        let h = 1.0 / n as f64;
        let d = &sol.dphi;
        (0..n)
            .map(|i| {
                let at = |k: isize| d[(i as isize + k).rem_euclid(n as isize) as usize];
                let d2 = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
                (-self.dv[i] * d[i] + d2 / self.beta + rhs[i]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves `−𝓛Φ = φ` for the generator of `model`.
pub fn solve_poisson_1d(
    model: &LineModel,
    rhs: &dyn Fn(f64) -> f64,
    grid_size: usize,
) -> Result<PoissonSolution> {
    let grid = LineGrid::new(model, grid_size)?;
    grid.solve(&grid.sample(rhs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub d1: f64,
    pub d2: f64,
    /// `2‖S‖²⟨R, −𝓛⁻¹R⟩`, the slope of `Var(ρ̂_T)` in `T`.
    pub sigma2_gk: f64,
    /// `D₁²/(2D₂)`; `None` when `D₂ = 0`.
    pub gain: Option<f64>,
    /// `−D₁/D₂`; `None` when `D₂ = 0`.
    pub alpha_slope: Option<f64>,
    /// `ρ = ⟨S, −𝓛⁻¹R⟩`.
    pub rho_ref: f64,
}

impl AsymptoticConstants {
    /// Large-`T` optimal bias `−D₁/(D₂ T)`.
    pub fn predicted_alpha(&self, t: f64) -> Option<f64> {
        self.alpha_slope.map(|s| s / t)
    }

    /// Large-`T` relative reduction of the second moment,
    /// `D₁² / (4 D₂ ‖S‖² ⟨R, −𝓛⁻¹R⟩ T)`.
    pub fn predicted_reduction(&self, t: f64) -> Option<f64> {
        self.gain.map(|g| g / (self.sigma2_gk * t))
    }

    pub fn is_degenerate(&self) -> bool {
        self.gain.is_none()
    }
}

/// Grid fields and Poisson solutions behind [`AsymptoticConstants`].
#[derive(Debug, Clone)]
pub struct OracleFields {
    pub grid: LineGrid,
    pub sigma: f64,
    /// Centered `R`.
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    /// `−𝓛𝓡 = R`.
    pub script_r: PoissonSolution,
    /// `Π(σ𝓡' u)`.
    pub f_rhs: Vec<f64>,
    /// `−𝓛𝓕 = Π(σ𝓡' u)`.
    pub script_f: PoissonSolution,
    /// `Π(σ𝓡')²`.
    pub g_rhs: Vec<f64>,
    /// `−𝓛𝓖 = Π(σ𝓡')²`.
    pub script_g: PoissonSolution,
}

impl OracleFields {
    pub fn new(model: &dyn Model, grid_size: usize) -> Result<Self> {
        let line = model.line_reduction().ok_or(Error::NotSeparable)?;
        let grid = LineGrid::new(&line, grid_size)?;
        let sigma = line.sigma();
        let r = grid.center(&grid.sample(&*line.r));
        let s = grid.sample(&*line.s);
        let u = grid.sample(&*line.u);
        let script_r = grid.solve(&r)?;
        let sdr: Vec<f64> = script_r.dphi.iter().map(|d| sigma * d).collect();
        let f_rhs = grid.center(&sdr.iter().zip(&u).map(|(a, b)| a * b).collect::<Vec<_>>());
        let g_rhs = grid.center(&sdr.iter().map(|a| a * a).collect::<Vec<_>>());
        let script_f = grid.solve(&f_rhs)?;
        let script_g = grid.solve(&g_rhs)?;
        Ok(Self {
            grid,
            sigma,
            r,
            s,
            u,
            script_r,
            f_rhs,
            script_f,
            g_rhs,
            script_g,
        })
    }

    /// `σ𝓡'` on the grid.
    pub fn sigma_dr(&self) -> Vec<f64> {
        self.script_r.dphi.iter().map(|d| self.sigma * d).collect()
    }

    pub fn constants(&self) -> AsymptoticConstants {
        let g = &self.grid;
        let sigma = self.sigma;
        let sdr = self.sigma_dr();
        let sdf: Vec<f64> = self.script_f.dphi.iter().map(|d| sigma * d).collect();
        let sdg: Vec<f64> = self.script_g.dphi.iter().map(|d| sigma * d).collect();
        let s2: Vec<f64> = self.s.iter().map(|v| v * v).collect();
        let norm_s = g.inner(&self.s, &self.s);
        let u_sdr = g.inner(&self.u, &sdr);
        let d1 = -2.0 * g.inner(&s2, &self.script_r.phi) * u_sdr
            - norm_s * (2.0 * g.inner(&sdf, &sdr) + g.inner(&sdg, &self.u));
        let d2 = 2.0 * norm_s * (g.inner(&sdr, &sdr) * g.inner(&self.u, &self.u) + u_sdr * u_sdr);
        let (gain, alpha_slope) = if d2 > 0.0 {
            (Some(d1 * d1 / (2.0 * d2)), Some(-d1 / d2))
        } else {
            (None, None)
        };
        AsymptoticConstants {
            d1,
            d2,
            sigma2_gk: 2.0 * norm_s * g.inner(&self.r, &self.script_r.phi),
            gain,
            alpha_slope,
            rho_ref: g.inner(&self.s, &self.script_r.phi),
        }
    }
}

/// Asymptotic constants of a one-dimensional or separable model.
pub fn compute_constants(model: &dyn Model, grid_size: usize) -> Result<AsymptoticConstants> {
    Ok(OracleFields::new(model, grid_size)?.constants())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

/// `(1 − e^{−λT})/λ`, continuous at `λ = 0`.
fn e_int(lambda: f64, t: f64) -> f64 {
    if (lambda * t).abs() < 1e-10 {
        t * (1.0 - 0.5 * lambda * t)
    } else {
        -(-lambda * t).exp_m1() / lambda
    }
}

/// Eigendecomposition of `−𝓛` in a real Fourier basis.
#[derive(Debug, Clone)]
pub struct GeneratorSpectrum {
    x: Vec<f64>,
    /// `e^{−βV/2}/√Z` on the quadrature grid.
    ground: Vec<f64>,
    /// Basis functions, one row per mode, sampled on the grid.
    basis: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl GeneratorSpectrum {
    /// `modes` frequencies `1..=modes` besides the constant; `quadrature`
    /// grid points, at least `8·modes`.
    pub fn new(model: &LineModel, modes: usize, quadrature: usize) -> Result<Self> {
        if modes < 2 || quadrature < 8 * modes {
            return Err(Error::GridTooCoarse(format!(
                "{modes} modes need at least {} quadrature points, got {quadrature}",
                8 * modes
            )));
        }
        let beta = model.beta;
        let grid = LineGrid::new(model, quadrature)?;
        let n = quadrature as f64;
        let d2v = spectral::derivative(&grid.dv);
        let w: Vec<f64> = grid
            .dv
            .iter()
            .zip(&d2v)
            .map(|(d1, d2)| 0.25 * beta * d1 * d1 - 0.5 * d2)
            .collect();
        let size = 2 * modes + 1;
        let freq = |a: usize| a.div_ceil(2) as f64;
        let basis = DMatrix::from_fn(size, quadrature, |a, i| {
            let x = grid.x[i];
            if a == 0 {
                1.0
            } else if a % 2 == 1 {
                2f64.sqrt() * (2.0 * PI * freq(a) * x).cos()
            } else {
                2f64.sqrt() * (2.0 * PI * freq(a) * x).sin()
            }
        });
        let weighted = DMatrix::from_fn(size, quadrature, |a, i| basis[(a, i)] * w[i] / n);
        let mut h = &weighted * basis.transpose();
        for a in 0..size {
            h[(a, a)] += (2.0 * PI * freq(a)).powi(2) / beta;
        }
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_iterator(size, order.iter().map(|&k| eig.eigenvalues[k]));
        let eigenvectors = DMatrix::from_fn(size, size, |a, k| eig.eigenvectors[(a, order[k])]);

        let z = grid.mass / n;
        let ground: Vec<f64> = grid.v.iter().map(|&v| (-0.5 * beta * v).exp() / z.sqrt()).collect();
        let spectrum = Self {
            x: grid.x,
            ground,
            basis,
            eigenvalues,
            eigenvectors,
        };
        spectrum.check(modes)?;
        Ok(spectrum)
    }

    /// The ground state must be resolved: its eigenvalue vanishes and its
    /// coefficients decay well before the truncation.
    fn check(&self, modes: usize) -> Result<()> {
        let lam = &self.eigenvalues;
        if lam[0].abs() > 1e-8 * lam[1].abs().max(1.0) {
            return Err(Error::GridTooCoarse(format!(
                "lowest eigenvalue {:.3e} is not zero",
                lam[0]
            )));
        }
        let coef = self.basis_coefficients(&vec![1.0; self.x.len()]);
        let total = coef.norm_squared();
        let cut = 2 * (3 * modes / 4) + 1;
        let tail: f64 = coef.iter().skip(cut).map(|c| c * c).sum();
        if tail > 1e-20 * total {
            return Err(Error::GridTooCoarse(format!(
                "ground state not resolved by {modes} modes (tail energy {:.3e})",
                tail / total
            )));
        }
        Ok(())
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn grid(&self) -> &[f64] {
        &self.x
    }

    fn basis_coefficients(&self, values: &[f64]) -> DVector<f64> {
        let n = self.x.len() as f64;
        let g = DVector::from_iterator(
            self.x.len(),
            values.iter().zip(&self.ground).map(|(f, e)| f * e / n),
        );
        &self.basis * g
    }

    /// Coordinates of `f ∈ L²(μ)` in the eigenbasis; `⟨f, g⟩_μ = Σ f_k g_k`.
    pub fn coefficients(&self, values: &[f64]) -> DVector<f64> {
        self.eigenvectors.transpose() * self.basis_coefficients(values)
    }

    fn zero_mode(&self, k: usize) -> bool {
        k == 0
    }

    /// `∫_0^T ⟨e^{t𝓛}R, S⟩_μ dt`, or `⟨S, −𝓛⁻¹R⟩` for an infinite horizon.
    pub fn rho(&self, r: &[f64], s: &[f64], horizon: Horizon) -> f64 {
        let cr = self.coefficients(r);
        let cs = self.coefficients(s);
        KahanSum::sum((0..cr.len()).filter(|&k| !self.zero_mode(k)).map(|k| {
            let lam = self.eigenvalues[k];
            let h = match horizon {
                Horizon::Infinite => 1.0 / lam,
                Horizon::Finite(t) => e_int(lam, t),
            };
            h * cr[k] * cs[k]
        }))
    }

    /// `t ↦ ⟨e^{t𝓛}R, S⟩_μ = E_μ[R(q_t) S(q_0)]`.
    pub fn correlation(&self, r: &[f64], s: &[f64], t: f64) -> f64 {
        let cr = self.coefficients(r);
        let cs = self.coefficients(s);
        KahanSum::sum((0..cr.len()).map(|k| (-self.eigenvalues[k] * t).exp() * cr[k] * cs[k]))
    }

    /// `E[(∫_0^T R(q_t) dt · S(q_0))²]` for the stationary process.
    pub fn gk_second_moment(&self, r: &[f64], s: &[f64], t: f64) -> f64 {
        let s2: Vec<f64> = s.iter().map(|v| v * v).collect();
        let a = self.coefficients(&s2);
        let b = self.coefficients(r);
        // multiplication by R in the eigenbasis
        let n = self.x.len() as f64;
        let scaled = DMatrix::from_fn(self.basis.nrows(), self.x.len(), |p, i| {
            self.basis[(p, i)] * r[i] / n
        });
        let mult = &scaled * self.basis.transpose();
        let m = self.eigenvectors.transpose() * mult * &self.eigenvectors;
        let lam: Vec<f64> = self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, &l)| if self.zero_mode(k) { 0.0 } else { l })
            .collect();
        let mut acc = KahanSum::default();
        for i in 0..lam.len() {
            for j in 0..lam.len() {
                acc.add(a[i] * m[(i, j)] * b[j] * double_integral(lam[i], lam[j], t));
            }
        }
        2.0 * acc.total()
    }
}

/// `∫_0^T e^{−λ_i s} (1 − e^{−λ_j (T−s)})/λ_j ds`.
fn double_integral(li: f64, lj: f64, t: f64) -> f64 {
    if lj == 0.0 {
        // ∫ e^{−λ_i s}(T − s) ds
        return if li == 0.0 { 0.5 * t * t } else { (t - e_int(li, t)) / li };
    }
    let delta = (lj - li).abs();
    let cross = (-li.min(lj) * t).exp() * e_int(delta, t);
    (e_int(li, t) - cross) / lj
}

/// Reference value of the GK integral up to `horizon`.
///
/// The infinite horizon goes through the Poisson solver on a grid of
/// `grid_size` points; finite horizons use [`GeneratorSpectrum`] with
/// [`DEFAULT_MODES`] modes on the same grid.
pub fn gk_reference_value(model: &dyn Model, horizon: Horizon, grid_size: usize) -> Result<f64> {
    let line = model.line_reduction().ok_or(Error::NotSeparable)?;
    match horizon {
        Horizon::Infinite => {
            let grid = LineGrid::new(&line, grid_size)?;
            let r = grid.center(&grid.sample(&*line.r));
            if r.iter().all(|&v| v == 0.0) {
                return Ok(0.0);
            }
            let s = grid.sample(&*line.s);
            Ok(grid.inner(&s, &grid.solve(&r)?.phi))
        }
        Horizon::Finite(t) => {
            let spectrum = GeneratorSpectrum::new(&line, DEFAULT_MODES, grid_size)?;
            let r: Vec<f64> = spectrum.grid().iter().map(|&x| (line.r)(x)).collect();
            let s: Vec<f64> = spectrum.grid().iter().map(|&x| (line.s)(x)).collect();
            Ok(spectrum.rho(&r, &s, Horizon::Finite(t)))
        }
    }
}

/// Collocation points used by [`FiniteHorizonF`] by default.
pub const DEFAULT_COLLOCATION: usize = 64;

/// Exact `F_T(α)` for the continuous-time dynamics.
///
/// Since `E_T(α) = exp(αX + α²⟨X⟩/2)` is the density of the path law under
/// drift `−ασu` times `exp(α² ∫|u|²)`, Feynman–Kac gives
/// `F_T(α) = 2 ∫∫_{0<a, a+τ<T} μ(S² e^{aA}(R e^{τA}(R e^{(T−a−τ)A} 1)))`
/// with `A = 𝓛 − ασu∂ + α²|u|²`. The three nested segments are the top-right
/// block of the exponential of a block upper-triangular matrix, with `A`
/// discretized by Fourier collocation.
#[derive(Debug, Clone)]
pub struct FiniteHorizonF {
    beta: f64,
    sigma: f64,
    dv: Vec<f64>,
    u: Vec<f64>,
    r: Vec<f64>,
    /// `μ_i S_i²`, normalized collocation weights.
    weighted_s2: Vec<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
}

impl FiniteHorizonF {
    /// `points` must be even and at least [`MIN_GRID`].
    pub fn new(model: &LineModel, points: usize) -> Result<Self> {
        if points < MIN_GRID || points % 2 != 0 {
            return Err(Error::GridTooSmall {
                got: points,
                min: MIN_GRID,
            });
        }
        let grid = LineGrid::new(model, points)?;
        let weighted_s2 = grid
            .x
            .iter()
            .zip(&grid.boltzmann)
            .map(|(&x, &b)| b / grid.mass * (model.s)(x).powi(2))
            .collect();
        let n = points as f64;
        let d1 = DMatrix::from_fn(points, points, |i, j| {
            if i == j {
                return 0.0;
            }
            let k = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * PI / (PI * k / n).tan()
        });
        let d2 = DMatrix::from_fn(points, points, |i, j| {
            let h = 2.0 * PI / n;
            let scale = 4.0 * PI * PI;
            if i == j {
                return scale * (-PI * PI / (3.0 * h * h) - 1.0 / 6.0);
            }
            let k = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            scale * -0.5 * sign / (0.5 * k * h).sin().powi(2)
        });
        Ok(Self {
            beta: model.beta,
            sigma: (2.0 / model.beta).sqrt(),
            u: grid.x.iter().map(|&x| (model.u)(x)).collect(),
            r: grid.x.iter().map(|&x| (model.r)(x)).collect(),
            dv: grid.dv,
            weighted_s2,
            d1,
            d2,
        })
    }

    fn generator(&self, alpha: f64) -> DMatrix<f64> {
        let mut a = &self.d2 / self.beta;
        for i in 0..self.dv.len() {
            let drift = -self.dv[i] - alpha * self.sigma * self.u[i];
            for j in 0..self.dv.len() {
                a[(i, j)] += drift * self.d1[(i, j)];
            }
            a[(i, i)] += alpha * alpha * self.u[i] * self.u[i];
        }
        a
    }

    /// `F_T(α)`.
    pub fn value(&self, alpha: f64, t: f64) -> f64 {
        let n = self.dv.len();
        let a = self.generator(alpha) * t;
        let mut g = DMatrix::zeros(3 * n, 3 * n);
        for k in 0..3 {
            g.view_mut((k * n, k * n), (n, n)).copy_from(&a);
        }
        for i in 0..n {
            g[(i, n + i)] = t * self.r[i];
            g[(n + i, 2 * n + i)] = t * self.r[i];
        }
        let e = g.exp();
        let mut total = KahanSum::default();
        for i in 0..n {
            let v: f64 = e.view((i, 2 * n), (1, n)).sum();
            total.add(self.weighted_s2[i] * v);
        }
        2.0 * total.total()
    }

    /// `(F'_T(0), F''_T(0))` by central differences.
    pub fn derivatives(&self, t: f64) -> (f64, f64) {
        let h = 1e-3;
        let (lo, mid, hi) = (self.value(-h, t), self.value(0.0, t), self.value(h, t));
        ((hi - lo) / (2.0 * h), (hi - 2.0 * mid + lo) / (h * h))
    }

    /// `−F'_T(0)/F''_T(0)`, the quantity estimated by `α̂_T`; `None` when
    /// `F''_T(0) = 0`.
    pub fn alpha_star(&self, t: f64) -> Option<f64> {
        let (f1, f2) = self.derivatives(t);
        (f2 > 0.0).then(|| -f1 / f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{model_1d, model_2d};
    use std::sync::Arc;

    fn flat(beta: f64) -> LineModel {
        LineModel::new(
            beta,
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|x| (2.0 * PI * x).sin()),
            Arc::new(move |x| beta * (2.0 * PI * x).sin()),
            Arc::new(|_| 0.0),
        )
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let sol = solve_poisson_1d(&model_1d(3.0).unwrap().line_reduction().unwrap(), &|_| 0.0, 64).unwrap();
        assert_eq!(sol.kappa, 0.0);
        assert!(sol.phi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_on_fourier_mode() {
        for beta in [0.5, 2.0, 7.0] {
            let sol = solve_poisson_1d(&flat(beta), &|x| (2.0 * PI * x).sin(), 256).unwrap();
            for (x, p) in sol.grid.iter().zip(&sol.phi) {
                let exact = beta / (4.0 * PI * PI) * (2.0 * PI * x).sin();
                assert!((p - exact).abs() < 1e-8, "{p} vs {exact}");
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let m = flat(1.0);
        assert!(matches!(solve_poisson_1d(&m, &|_| 1.0, 64), Err(Error::NotCentered(_))));
        assert!(matches!(solve_poisson_1d(&m, &|_| 0.0, 8), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn solution_is_centered_and_periodic() {
        let line = model_1d(3.0).unwrap().line_reduction().unwrap();
        let grid = LineGrid::new(&line, 1 << 12).unwrap();
        let r = grid.center(&grid.sample(&*line.r));
        let sol = grid.solve(&r).unwrap();
        assert!(grid.expectation(&sol.phi).abs() < 1e-12);
        assert!(spectral::mean(&sol.dphi).abs() < 1e-10);
        assert!(grid.residual(&sol, &r) < 1e-6);
    }

    #[test]
    fn constants_1d() {
        let c = compute_constants(&model_1d(3.0).unwrap(), 1 << 12).unwrap();
        assert!((c.d1 / 11.6 - 1.0).abs() < 0.01, "{}", c.d1);
        assert!((c.d2 / 116.6 - 1.0).abs() < 0.01, "{}", c.d2);
        assert_eq!(c.gain.unwrap(), c.d1 * c.d1 / (2.0 * c.d2));
        assert_eq!(c.alpha_slope.unwrap(), -c.d1 / c.d2);
    }

    #[test]
    fn constants_2d() {
        let c = compute_constants(&model_2d(2.0).unwrap(), 1 << 12).unwrap();
        assert!((c.d1 / -67.2 - 1.0).abs() < 0.02, "{}", c.d1);
        assert!((c.d2 / 6780.0 - 1.0).abs() < 0.03, "{}", c.d2);
    }

    #[test]
    fn unbiased_model_is_degenerate() {
        let m = crate::model::CosineModel::new(3.0, 0.0).unwrap();
        let c = compute_constants(&m, 1 << 10).unwrap();
        assert_eq!((c.d1, c.d2), (0.0, 0.0));
        assert!(c.is_degenerate());
        assert!(c.predicted_alpha(1.0).is_none());
    }

    #[test]
    fn spectral_rho_matches_poisson_route() {
        let m = model_1d(3.0).unwrap();
        let poisson = gk_reference_value(&m, Horizon::Infinite, 1 << 12).unwrap();
        let line = m.line_reduction().unwrap();
        let spectrum = GeneratorSpectrum::new(&line, DEFAULT_MODES, 1 << 12).unwrap();
        let r = spectrum.grid().iter().map(|&x| (line.r)(x)).collect::<Vec<_>>();
        let s = spectrum.grid().iter().map(|&x| (line.s)(x)).collect::<Vec<_>>();
        let spectral = spectrum.rho(&r, &s, Horizon::Infinite);
        assert!((poisson - spectral).abs() < 1e-8, "{poisson} vs {spectral}");
        // the finite horizon increases towards the limit
        let a = spectrum.rho(&r, &s, Horizon::Finite(0.2));
        let b = spectrum.rho(&r, &s, Horizon::Finite(2.0));
        assert!(a < b && b <= spectral + 1e-12);
        // at t = 0 the correlation is E_μ[R S]
        let grid = LineGrid::new(&line, 1 << 12).unwrap();
        assert!((spectrum.correlation(&r, &s, 0.0) - grid.inner(&r, &s)).abs() < 1e-9);
    }

    #[test]
    fn double_integral_against_quadrature() {
        for (li, lj, t) in [(0.0, 3.0, 1.0), (2.0, 0.0, 0.5), (4.0, 4.0 + 1e-13, 2.0), (1.0, 30.0, 0.3)] {
            let m = 200_000;
            let h = t / m as f64;
            let mut acc = 0.0;
            for k in 0..=m {
                let s = k as f64 * h;
                let w = if k == 0 || k == m { 0.5 } else { 1.0 };
                acc += w * (-li * s).exp() * e_int(lj, t - s);
            }
            acc *= h;
            assert!((double_integral(li, lj, t) - acc).abs() < 1e-8, "{li} {lj}");
        }
    }

    #[test]
    fn coarse_spectrum_is_rejected() {
        let line = model_1d(3.0).unwrap().line_reduction().unwrap();
        assert!(GeneratorSpectrum::new(&line, 64, 256).is_err());
    }

    #[test]
    fn finite_horizon_f_matches_independent_values() {
        let line = model_1d(3.0).unwrap().line_reduction().unwrap();
        let f = FiniteHorizonF::new(&line, DEFAULT_COLLOCATION).unwrap();
        assert!((f.value(0.0, 2.0) - 29.16777).abs() < 1e-4);
        assert!((f.alpha_star(0.2).unwrap() + 0.24004).abs() < 1e-4);
        assert!((f.alpha_star(2.0).unwrap() + 0.04505).abs() < 1e-4);
    }

    #[test]
    fn finite_horizon_f_at_zero_matches_spectrum() {
        let line = model_1d(3.0).unwrap().line_reduction().unwrap();
        let f = FiniteHorizonF::new(&line, DEFAULT_COLLOCATION).unwrap();
        let spectrum = GeneratorSpectrum::new(&line, DEFAULT_MODES, 4096).unwrap();
        let r: Vec<f64> = spectrum.grid().iter().map(|&x| (line.r)(x)).collect();
        let s: Vec<f64> = spectrum.grid().iter().map(|&x| (line.s)(x)).collect();
        for t in [0.1, 1.0, 3.0] {
            let m2 = spectrum.gk_second_moment(&r, &s, t);
            assert!((f.value(0.0, t) / m2 - 1.0).abs() < 1e-8, "T = {t}");
        }
    }

    #[test]
    fn finite_horizon_alpha_approaches_asymptote() {
        let model = model_1d(3.0).unwrap();
        let c = compute_constants(&model, 1 << 12).unwrap();
        let f = FiniteHorizonF::new(&model.line_reduction().unwrap(), DEFAULT_COLLOCATION).unwrap();
        let gap = |t: f64| (f.alpha_star(t).unwrap() / c.predicted_alpha(t).unwrap() - 1.0).abs();
        assert!(gap(16.0) < gap(4.0));
        assert!(gap(16.0) < 0.02);
    }

}
