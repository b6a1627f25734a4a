//! Euler–Maruyama integration of the reference and biased dynamics.
//!
//! The biased scheme is
//! `q_{n+1} = q_n + (−∇V(q_n) + α σ u(q_n)) Δt + σ ΔW_n`,
//! with `α = 0` giving the reference scheme. A replica is integrated in one
//! streaming pass; only the sufficient statistics needed downstream are kept:
//!
//! * `gk_integral = Σ_{n=0}^{N} R(q_n) S(q_0) Δt` (left-point rule, both endpoints),
//! * `x_sum = −Σ_{n=0}^{N−1} u(q_n)·ΔW_n`,
//! * `qv_sum = Σ_{n=0}^{N−1} |u(q_n)|² Δt`.
//!
//! Randomness is keyed by `(master_seed, replica_index)`: each replica owns a
//! ChaCha8 stream, so results do not depend on scheduling or worker count.
//! Gaussian increments use the ziggurat sampler of `rand_distr::StandardNormal`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, MAX_DIM};

/// Steps between two finiteness checks of the state.
const FINITE_CHECK_INTERVAL: usize = 1024;

/// Default cap on consecutive rejections in [`RejectionSampler`].
pub const DEFAULT_REJECTION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub n_steps: usize,
    /// Bias magnitude; `0` is the reference dynamics.
    pub alpha: f64,
}

impl IntegratorConfig {
    pub fn new(dt: f64, n_steps: usize, alpha: f64) -> Result<Self> {
        let cfg = Self { dt, n_steps, alpha };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of steps reaching time `t`, rejecting times off the `dt` grid.
    pub fn steps_for(dt: f64, t: f64) -> Result<usize> {
        let steps = (t / dt).round();
        if !(steps >= 0.0) || ((steps * dt - t).abs() > 1e-12 * t.abs().max(dt)) {
            return Err(Error::InvalidIntegrator(format!(
                "time {t} is not a multiple of dt = {dt}"
            )));
        }
        Ok(steps as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidIntegrator(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_steps < 1 {
            return Err(Error::InvalidIntegrator("n_steps must be at least 1".into()));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidIntegrator("alpha must be finite".into()));
        }
        Ok(())
    }

    pub fn final_time(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
}

/// Independent random streams owned by one replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    InitialCondition,
    Brownian,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::InitialCondition => 0x5eed_0001,
            Stream::Brownian => 0x5eed_0002,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub master_seed: u64,
    pub replica_index: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SeedPolicy {
    pub fn new(master_seed: u64, replica_index: u64) -> Self {
        Self {
            master_seed,
            replica_index,
        }
    }

    /// The generator for one stream: the key comes from `(master_seed, stream)`
    /// and the ChaCha stream id is the replica index.
    pub fn rng(&self, stream: Stream) -> ChaCha8Rng {
        let mut state = self.master_seed ^ stream.tag().rotate_left(32);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.replica_index);
        rng
    }
}

/// Partial sums recorded at a checkpoint step `k`, as if the run stopped at `N = k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub gk_integral: f64,
    pub x_sum: f64,
    pub qv_sum: f64,
    /// `R(q_k)`.
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub replica_index: u64,
    pub alpha: f64,
    pub dt: f64,
    pub n_steps: usize,
    /// `S(q_0)`.
    pub s0: f64,
    pub gk_integral: f64,
    pub x_sum: f64,
    pub qv_sum: f64,
    pub snapshots: Vec<Snapshot>,
}

impl ReplicaRecord {
    pub fn snapshot_at(&self, step: usize) -> Option<&Snapshot> {
        self.snapshots
            .binary_search_by_key(&step, |s| s.step)
            .ok()
            .map(|i| &self.snapshots[i])
    }

    /// This record truncated at a checkpoint.
    pub fn truncated(&self, step: usize) -> Option<ReplicaRecord> {
        let snap = self.snapshot_at(step)?;
        Some(ReplicaRecord {
            replica_index: self.replica_index,
            alpha: self.alpha,
            dt: self.dt,
            n_steps: step,
            s0: self.s0,
            gk_integral: snap.gk_integral,
            x_sum: snap.x_sum,
            qv_sum: snap.qv_sum,
            snapshots: self
                .snapshots
                .iter()
                .filter(|s| s.step <= step)
                .copied()
                .collect(),
        })
    }
}

#[inline(always)]
fn advance<M: Model + ?Sized>(
    model: &M,
    q: &mut [f64],
    grad: &[f64],
    bias: &[f64],
    alpha: f64,
    dt: f64,
    dw: &[f64],
) {
    let sigma = model.sigma();
    for i in 0..q.len() {
        q[i] += (-grad[i] + alpha * sigma * bias[i]) * dt + sigma * dw[i];
    }
}

/// One Euler–Maruyama step `q + (−∇V(q) + α σ u(q)) Δt + σ ΔW`.
pub fn em_step<M: Model + ?Sized>(
    model: &M,
    q: &[f64],
    cfg: &IntegratorConfig,
    dw: &[f64],
) -> Vec<f64> {
    let d = model.dim();
    let mut grad = [0.0; MAX_DIM];
    let mut bias = [0.0; MAX_DIM];
    model.grad_potential(q, &mut grad[..d]);
    model.bias(q, &mut bias[..d]);
    let mut next = q.to_vec();
    advance(model, &mut next, &grad[..d], &bias[..d], cfg.alpha, cfg.dt, dw);
    next
}

/// Receives the discrete path one grid point at a time.
pub trait PathObserver {
    /// Called for `n = 0..=N` with the state `q_n`, `u(q_n)`, `R(q_n)` and the
    /// increment `ΔW_n` that moves the path to `q_{n+1}` (`None` at `n = N`).
    fn visit(&mut self, n: usize, q: &[f64], bias: &[f64], r: f64, dw: Option<&[f64]>);
}

/// Integrates one path from `initial`, feeding every grid point to `observer`.
pub fn drive<M: Model + ?Sized, O: PathObserver>(
    model: &M,
    cfg: &IntegratorConfig,
    seeds: SeedPolicy,
    initial: &[f64],
    observer: &mut O,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let d = model.dim();
    let mut rng = seeds.rng(Stream::Brownian);
    let sqrt_dt = cfg.dt.sqrt();
    let mut q = [0.0; MAX_DIM];
    q[..d].copy_from_slice(initial);
    let mut grad = [0.0; MAX_DIM];
    let mut bias = [0.0; MAX_DIM];
    let mut dw = [0.0; MAX_DIM];
    let mut r = model.evaluate(&q[..d], &mut grad[..d], &mut bias[..d]);
    for n in 0..cfg.n_steps {
        for w in dw[..d].iter_mut() {
            *w = sqrt_dt * rng.sample::<f64, _>(StandardNormal);
        }
        observer.visit(n, &q[..d], &bias[..d], r, Some(&dw[..d]));
        advance(model, &mut q[..d], &grad[..d], &bias[..d], cfg.alpha, cfg.dt, &dw[..d]);
        r = model.evaluate(&q[..d], &mut grad[..d], &mut bias[..d]);
        if (n + 1) % FINITE_CHECK_INTERVAL == 0 && !(q[..d].iter().all(|v| v.is_finite()) && r.is_finite()) {
            return Err(Error::NonFiniteState {
                replica: seeds.replica_index,
                step: n + 1,
            });
        }
    }
    if !(q[..d].iter().all(|v| v.is_finite()) && r.is_finite()) {
        return Err(Error::NonFiniteState {
            replica: seeds.replica_index,
            step: cfg.n_steps,
        });
    }
    observer.visit(cfg.n_steps, &q[..d], &bias[..d], r, None);
    Ok(q[..d].to_vec())
}

struct Recorder<'a> {
    dt: f64,
    sum_r: f64,
    x_sum: f64,
    qv_sum: f64,
    s0: f64,
    checkpoints: &'a [usize],
    next_checkpoint: usize,
    snapshots: Vec<Snapshot>,
}

impl PathObserver for Recorder<'_> {
    #[inline(always)]
    fn visit(&mut self, n: usize, _q: &[f64], bias: &[f64], r: f64, dw: Option<&[f64]>) {
        self.sum_r += r;
        if self.checkpoints.get(self.next_checkpoint) == Some(&n) {
            self.snapshots.push(Snapshot {
                step: n,
                gk_integral: self.sum_r * self.s0 * self.dt,
                x_sum: self.x_sum,
                qv_sum: self.qv_sum,
                r,
            });
            self.next_checkpoint += 1;
        }
        if let Some(dw) = dw {
            let mut dot = 0.0;
            let mut sq = 0.0;
            for (u, w) in bias.iter().zip(dw) {
                dot += u * w;
                sq += u * u;
            }
            self.x_sum -= dot;
            self.qv_sum += sq * self.dt;
        }
    }
}

fn check_checkpoints(checkpoints: &[usize], n_steps: usize) -> Result<()> {
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidIntegrator("checkpoints must be strictly increasing".into()));
    }
    if checkpoints.last().is_some_and(|&c| c > n_steps) {
        return Err(Error::InvalidIntegrator("checkpoint beyond the final step".into()));
    }
    Ok(())
}

/// Integrates one replica and returns its sufficient statistics.
///
/// `checkpoints` are strictly increasing step indices in `0..=n_steps`.
pub fn simulate_replica<M: Model + ?Sized>(
    model: &M,
    cfg: &IntegratorConfig,
    seeds: SeedPolicy,
    initial: &[f64],
    checkpoints: &[usize],
) -> Result<ReplicaRecord> {
    check_checkpoints(checkpoints, cfg.n_steps)?;
    let s0 = model.observable_s(initial);
    let mut rec = Recorder {
        dt: cfg.dt,
        sum_r: 0.0,
        x_sum: 0.0,
        qv_sum: 0.0,
        s0,
        checkpoints,
        next_checkpoint: 0,
        snapshots: Vec::with_capacity(checkpoints.len()),
    };
    drive(model, cfg, seeds, initial, &mut rec)?;
    Ok(ReplicaRecord {
        replica_index: seeds.replica_index,
        alpha: cfg.alpha,
        dt: cfg.dt,
        n_steps: cfg.n_steps,
        s0,
        gk_integral: rec.sum_r * s0 * cfg.dt,
        x_sum: rec.x_sum,
        qv_sum: rec.qv_sum,
        snapshots: rec.snapshots,
    })
}

/// Draws initial conditions from `μ ∝ e^{−βV}` by rejection from the uniform law.
#[derive(Debug, Clone, Copy)]
pub struct RejectionSampler {
    v_min: f64,
    cap: usize,
}

impl RejectionSampler {
    /// Scan resolution used to locate `min V`.
    const SCAN: usize = 1 << 14;

    pub fn new<M: Model + ?Sized>(model: &M) -> Self {
        Self::with_cap(model, DEFAULT_REJECTION_CAP)
    }

    pub fn with_cap<M: Model + ?Sized>(model: &M, cap: usize) -> Self {
        let grid = crate::spectral::uniform_grid(Self::SCAN);
        let v_min = match model.axis_potentials() {
            Some(axes) => axes
                .iter()
                .map(|v| grid.iter().map(|&x| v(x)).fold(f64::INFINITY, f64::min))
                .sum(),
            None => {
                let coarse = crate::spectral::uniform_grid(1 << 10);
                let d = model.dim();
                let mut best = f64::INFINITY;
                let mut q = [0.0; MAX_DIM];
                for i in 0..coarse.len().pow(d as u32) {
                    let mut rest = i;
                    for axis in 0..d {
                        q[axis] = coarse[rest % coarse.len()];
                        rest /= coarse.len();
                    }
                    best = best.min(model.potential(&q[..d]));
                }
                best
            }
        };
        Self { v_min, cap }
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    /// Returns the accepted point and the number of proposals used.
    pub fn sample_counted<M: Model + ?Sized, R: Rng>(
        &self,
        model: &M,
        rng: &mut R,
    ) -> Result<(Vec<f64>, usize)> {
        let d = model.dim();
        let beta = model.beta();
        let mut q = [0.0; MAX_DIM];
        for attempt in 1..=self.cap {
            for v in q[..d].iter_mut() {
                *v = rng.random::<f64>();
            }
            let ratio = (-beta * (model.potential(&q[..d]) - self.v_min)).exp();
            if rng.random::<f64>() < ratio {
                return Ok((q[..d].to_vec(), attempt));
            }
        }
        Err(Error::RejectionCapExceeded(self.cap))
    }

    pub fn sample<M: Model + ?Sized>(&self, model: &M, seeds: SeedPolicy) -> Result<Vec<f64>> {
        let mut rng = seeds.rng(Stream::InitialCondition);
        self.sample_counted(model, &mut rng).map(|(q, _)| q)
    }
}

/// `q_0 ~ μ` for one replica.
pub fn sample_initial<M: Model + ?Sized>(model: &M, seeds: SeedPolicy) -> Result<Vec<f64>> {
    RejectionSampler::new(model).sample(model, seeds)
}

/// Simulates replicas `0..replicas` in parallel on the current rayon pool.
///
/// Every replica draws its own initial condition and increments from its
/// [`SeedPolicy`], so the output is identical for any pool size. Runs sharing
/// a master seed share initial conditions and Brownian increments whatever
/// their `alpha`.
pub fn simulate_ensemble<M: Model + ?Sized>(
    model: &M,
    cfg: &IntegratorConfig,
    master_seed: u64,
    replicas: usize,
    checkpoints: &[usize],
) -> Result<Vec<ReplicaRecord>> {
    cfg.validate()?;
    check_checkpoints(checkpoints, cfg.n_steps)?;
    let sampler = RejectionSampler::new(model);
    (0..replicas)
        .into_par_iter()
        .with_min_len(64)
        .map(|j| {
            let j = j as u64;
            let seeds = SeedPolicy::new(master_seed, j);
            sampler
                .sample(model, seeds)
                .and_then(|q0| simulate_replica(model, cfg, seeds, &q0, checkpoints))
                .map_err(|e| Error::Replica {
                    replica: j,
                    source: Box::new(e),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{model_1d, model_2d, LineModel};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn flat_model() -> LineModel {
        LineModel::new(
            3.0,
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|q| (2.0 * PI * q).sin()),
            Arc::new(|q| (2.0 * PI * q).sin()),
            Arc::new(|_| 0.0),
        )
    }

    #[test]
    fn em_step_fixed_point_and_reference() {
        let flat = flat_model();
        let cfg = IntegratorConfig::new(1e-2, 1, 0.7).unwrap();
        assert_eq!(em_step(&flat, &[0.3], &cfg, &[0.0]), vec![0.3]);

        let m = model_1d(3.0).unwrap();
        let cfg = IntegratorConfig::new(1e-4, 1, 0.0).unwrap();
        let next = em_step(&m, &[0.25], &cfg, &[0.0]);
        assert!((next[0] - (0.25 + PI * 1e-4)).abs() < 1e-15);

        // α = 0 ignores the bias entirely
        let dw = [0.013];
        let a = em_step(&m, &[0.1], &cfg, &dw);
        let sigma = m.sigma();
        let expected = 0.1 + PI * (2.0 * PI * 0.1f64).sin() * 1e-4 + sigma * dw[0];
        assert_eq!(a[0], expected);
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0, 10, 0.0).is_err());
        assert!(IntegratorConfig::new(1e-3, 0, 0.0).is_err());
        assert!(IntegratorConfig::new(1e-3, 1, f64::NAN).is_err());
        assert_eq!(IntegratorConfig::steps_for(1e-4, 0.2).unwrap(), 2000);
        assert!(IntegratorConfig::steps_for(1e-4, 0.20005).is_err());
    }

    #[test]
    fn zero_bias_single_step() {
        let flat = flat_model();
        let cfg = IntegratorConfig::new(1e-3, 1, 0.5).unwrap();
        let rec = simulate_replica(&flat, &cfg, SeedPolicy::new(1, 0), &[0.2], &[]).unwrap();
        assert_eq!(rec.x_sum, 0.0);
        assert_eq!(rec.qv_sum, 0.0);
    }

    #[test]
    fn replica_is_bit_reproducible() {
        let m = model_1d(3.0).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 500, -0.3).unwrap();
        let seeds = SeedPolicy::new(99, 17);
        let q0 = sample_initial(&m, seeds).unwrap();
        let a = simulate_replica(&m, &cfg, seeds, &q0, &[0, 100, 500]).unwrap();
        let b = simulate_replica(&m, &cfg, seeds, &q0, &[0, 100, 500]).unwrap();
        assert_eq!(a, b);
        let other = simulate_replica(&m, &cfg, SeedPolicy::new(99, 18), &q0, &[]).unwrap();
        assert_ne!(a.gk_integral, other.gk_integral);
    }

    struct Trace(Vec<Vec<f64>>, Vec<Vec<f64>>);

    impl PathObserver for Trace {
        fn visit(&mut self, _n: usize, q: &[f64], _u: &[f64], _r: f64, dw: Option<&[f64]>) {
            self.0.push(q.to_vec());
            if let Some(dw) = dw {
                self.1.push(dw.to_vec());
            }
        }
    }

    #[test]
    fn driver_matches_iterated_em_step() {
        let m = model_2d(2.0).unwrap();
        let cfg = IntegratorConfig::new(4e-4, 50, 0.4).unwrap();
        let mut trace = Trace(vec![], vec![]);
        drive(&m, &cfg, SeedPolicy::new(3, 4), &[0.1, 0.6], &mut trace).unwrap();
        let mut q = vec![0.1, 0.6];
        for (n, dw) in trace.1.iter().enumerate() {
            assert_eq!(q, trace.0[n]);
            q = em_step(&m, &q, &cfg, dw);
        }
        assert_eq!(&q, trace.0.last().unwrap());
    }

    #[test]
    fn sums_follow_their_index_ranges() {
        // R ≡ 1, S ≡ 1, u ≡ 1: gk has N+1 terms, the weight sums have N
        let ones = LineModel::new(
            2.0,
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|_| 1.0),
            Arc::new(|_| 1.0),
            Arc::new(|_| 1.0),
        );
        let cfg = IntegratorConfig::new(0.01, 10, 0.0).unwrap();
        let mut trace = Trace(vec![], vec![]);
        drive(&ones, &cfg, SeedPolicy::new(5, 0), &[0.0], &mut trace).unwrap();
        let rec = simulate_replica(&ones, &cfg, SeedPolicy::new(5, 0), &[0.0], &[0, 4, 10]).unwrap();
        assert!((rec.gk_integral - 11.0 * 0.01).abs() < 1e-15);
        assert!((rec.qv_sum - 10.0 * 0.01).abs() < 1e-15);
        let w_sum: f64 = trace.1.iter().map(|w| w[0]).sum();
        assert!((rec.x_sum + w_sum).abs() < 1e-15);
        let s4 = rec.snapshot_at(4).unwrap();
        assert!((s4.gk_integral - 0.05).abs() < 1e-15);
        assert!((s4.qv_sum - 0.04).abs() < 1e-15);
        let w4: f64 = trace.1[..4].iter().map(|w| w[0]).sum();
        assert!((s4.x_sum + w4).abs() < 1e-15);
        let last = rec.snapshot_at(10).unwrap();
        assert_eq!(last.gk_integral, rec.gk_integral);
        assert_eq!(last.x_sum, rec.x_sum);
        let t = rec.truncated(4).unwrap();
        assert_eq!(t.gk_integral, s4.gk_integral);
        assert_eq!(t.snapshots.len(), 2);
    }

    #[test]
    fn non_finite_state_is_reported() {
        let blowup = LineModel::new(
            2.0,
            Arc::new(|q| -q * q * q * q),
            Arc::new(|q| -4.0 * q * q * q),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
        );
        let cfg = IntegratorConfig::new(0.1, 5000, 0.0).unwrap();
        let err = simulate_replica(&blowup, &cfg, SeedPolicy::new(1, 2), &[10.0], &[]).unwrap_err();
        match err {
            Error::NonFiniteState { replica, step } => {
                assert_eq!(replica, 2);
                assert_eq!(step % FINITE_CHECK_INTERVAL, 0);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_bad_checkpoints() {
        let m = model_1d(3.0).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 10, 0.0).unwrap();
        let seeds = SeedPolicy::new(0, 0);
        assert!(simulate_replica(&m, &cfg, seeds, &[0.0], &[5, 5]).is_err());
        assert!(simulate_replica(&m, &cfg, seeds, &[0.0], &[11]).is_err());
    }

    #[test]
    fn flat_potential_accepts_first_proposal() {
        let flat = flat_model();
        let sampler = RejectionSampler::new(&flat);
        let mut rng = SeedPolicy::new(1, 1).rng(Stream::InitialCondition);
        for _ in 0..100 {
            let (q, attempts) = sampler.sample_counted(&flat, &mut rng).unwrap();
            assert_eq!(attempts, 1);
            assert!((0.0..1.0).contains(&q[0]));
        }
    }

    #[test]
    fn rejection_cap_is_enforced() {
        let m = model_1d(3.0).unwrap();
        let sampler = RejectionSampler::with_cap(&m, 1);
        let failures = (0..200)
            .filter(|&j| sampler.sample(&m, SeedPolicy::new(4, j)).is_err())
            .count();
        assert!(failures > 0);
    }

    #[test]
    fn distinct_replicas_get_distinct_streams() {
        let mut a = SeedPolicy::new(1, 0).rng(Stream::Brownian);
        let mut b = SeedPolicy::new(1, 1).rng(Stream::Brownian);
        let mut c = SeedPolicy::new(1, 0).rng(Stream::InitialCondition);
        let xa: u64 = a.random();
        let xb: u64 = b.random();
        let xc: u64 = c.random();
        assert_ne!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn ensemble_independent_of_pool_size() {
        let m = model_1d(3.0).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 200, 0.25).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_ensemble(&m, &cfg, 11, 300, &[100, 200]).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
