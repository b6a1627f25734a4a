//! Green–Kubo transport coefficients of overdamped Langevin dynamics, with
//! Girsanov reweighting along a scalar bias direction.
//!
//! The crate simulates replicas of `dq = (−∇V + ασu) dt + σ dW` on the torus,
//! keeps per-replica sufficient statistics, and evaluates every `α`-dependent
//! quantity (weights, `F_T(α)`, its derivatives, the optimal `α̂`) from those
//! statistics without re-simulation. A quadrature oracle for one-dimensional
//! and separable models gives the asymptotic constants, and exact
//! finite-horizon values, against which the Monte Carlo results are checked.

pub mod error;
pub mod estimators;
pub mod experiment;
pub mod girsanov;
pub mod model;
pub mod poisson;
pub mod sde;
pub mod spectral;

pub use error::{Error, Result};
pub use estimators::{EnsembleStats, FitResult, KahanSum};
pub use girsanov::{AlphaHat, FDerivatives, FTScan, Provenance, WeightedSample};
pub use model::{model_1d, model_2d, BuiltinModel, LineModel, Model, ModelSpec};
pub use poisson::{AsymptoticConstants, FiniteHorizonF, Horizon, PoissonSolution};
pub use sde::{IntegratorConfig, ReplicaRecord, SeedPolicy};
