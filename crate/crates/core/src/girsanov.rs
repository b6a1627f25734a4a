//! Girsanov weights and the second-moment function `F_T(α)`.
//!
//! With `X = −Σ u(q_n)·ΔW_n` and `⟨X⟩ = Σ |u(q_n)|² Δt` taken from a replica,
//! the weight depends on which dynamics produced the path:
//!
//! * reference paths: `E_T(α) = exp(α X + α²⟨X⟩/2)`, so that
//!   `F_T(α) = E[Φ_T E_T(α)]` with `Φ_T` the squared GK functional;
//! * biased paths at `α`: `M_N = exp(α X − α²⟨X⟩/2)`, which turns the biased
//!   GK functional into an unbiased estimator of the reference mean.
//!
//! Samples carry a [`Provenance`] tag so the two forms cannot be mixed up.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::KahanSum;
use crate::sde::ReplicaRecord;

/// Largest accepted log-weight.
pub const MAX_LOG_WEIGHT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Reference,
    Biased { alpha: f64 },
}

impl Provenance {
    fn describe(&self) -> String {
        match self {
            Provenance::Reference => "reference".into(),
            Provenance::Biased { alpha } => format!("biased (alpha = {alpha})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub gk_integral: f64,
    pub x_sum: f64,
    pub qv_sum: f64,
    pub provenance: Provenance,
}

impl WeightedSample {
    pub fn from_record(record: &ReplicaRecord) -> Self {
        Self {
            gk_integral: record.gk_integral,
            x_sum: record.x_sum,
            qv_sum: record.qv_sum,
            provenance: provenance_of(record.alpha),
        }
    }

    /// The sample obtained by stopping the replica at checkpoint `step`.
    pub fn from_snapshot(record: &ReplicaRecord, step: usize) -> Option<Self> {
        record.snapshot_at(step).map(|s| Self {
            gk_integral: s.gk_integral,
            x_sum: s.x_sum,
            qv_sum: s.qv_sum,
            provenance: provenance_of(record.alpha),
        })
    }

    /// `Φ_T`, the squared GK functional.
    pub fn phi(&self) -> f64 {
        self.gk_integral * self.gk_integral
    }

    /// Log of the weight at `alpha`, in the form dictated by the provenance.
    /// Exactly zero at `alpha = 0`.
    pub fn log_weight(&self, alpha: f64) -> f64 {
        let drift = alpha * self.x_sum;
        let curvature = 0.5 * alpha * alpha * self.qv_sum;
        match self.provenance {
            Provenance::Reference => drift + curvature,
            Provenance::Biased { .. } => drift - curvature,
        }
    }

    /// `E_T(α)` for reference samples; `M_N` for biased samples, which only
    /// accept the `α` they were simulated with.
    pub fn weight(&self, alpha: f64) -> Result<f64> {
        if let Provenance::Biased { alpha: simulated } = self.provenance {
            if simulated != alpha {
                return Err(Error::ProvenanceMismatch {
                    expected: format!("biased (alpha = {alpha})"),
                    found: self.provenance.describe(),
                });
            }
        }
        let log_weight = self.log_weight(alpha);
        if !(log_weight <= MAX_LOG_WEIGHT) {
            return Err(Error::WeightOverflow { alpha, log_weight });
        }
        Ok(log_weight.exp())
    }

    /// Weight times GK functional.
    pub fn weighted_gk(&self, alpha: f64) -> Result<f64> {
        Ok(self.weight(alpha)? * self.gk_integral)
    }
}

fn provenance_of(alpha: f64) -> Provenance {
    if alpha == 0.0 {
        Provenance::Reference
    } else {
        Provenance::Biased { alpha }
    }
}

pub fn weight(sample: &WeightedSample, alpha: f64) -> Result<f64> {
    sample.weight(alpha)
}

/// Samples of all records, stopped at `step` (or at the end when `None`).
pub fn samples_at(records: &[ReplicaRecord], step: Option<usize>) -> Result<Vec<WeightedSample>> {
    records
        .iter()
        .map(|r| match step {
            None => Ok(WeightedSample::from_record(r)),
            Some(k) if k == r.n_steps => Ok(WeightedSample::from_record(r)),
            Some(k) => WeightedSample::from_snapshot(r, k).ok_or(Error::CheckpointMismatch),
        })
        .collect()
}

fn require_reference(samples: &[WeightedSample]) -> Result<()> {
    if let Some(s) = samples.iter().find(|s| s.provenance != Provenance::Reference) {
        return Err(Error::ProvenanceMismatch {
            expected: "reference".into(),
            found: s.provenance.describe(),
        });
    }
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    Ok(())
}

/// Mean and standard error of the mean.
fn mean_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = KahanSum::sum(values.clone()) / nf;
    let var = KahanSum::sum(values.map(|v| (v - mean) * (v - mean))) / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// A function of `α` tabulated from one reference ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FTScan {
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub j: usize,
}

impl FTScan {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,f_value,std_error\n");
        for ((a, v), s) in self.alphas.iter().zip(&self.values).zip(&self.std_errors) {
            let _ = writeln!(out, "{a:.16e},{v:.16e},{s:.16e}");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Index of the smallest value.
    pub fn argmin(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.iter().any(|a| !a.is_finite()) || alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::UnsortedAlphas);
    }
    Ok(())
}

/// Per-sample weights `E_T(α)` for every `α`, row-major by `α`.
fn reference_weights(samples: &[WeightedSample], alphas: &[f64]) -> Result<Vec<Vec<f64>>> {
    alphas
        .iter()
        .map(|&a| samples.iter().map(|s| s.weight(a)).collect())
        .collect()
}

/// Empirical `F_T(α) = E[Φ_T E_T(α)]` on a grid of `α`, from reference samples.
pub fn f_scan(samples: &[WeightedSample], alphas: &[f64]) -> Result<FTScan> {
    require_reference(samples)?;
    check_alphas(alphas)?;
    let n = samples.len();
    let mut values = Vec::with_capacity(alphas.len());
    let mut std_errors = Vec::with_capacity(alphas.len());
    for w in reference_weights(samples, alphas)? {
        let (m, se) = mean_se(samples.iter().zip(&w).map(|(s, w)| s.phi() * w), n);
        values.push(m);
        std_errors.push(se);
    }
    Ok(FTScan {
        alphas: alphas.to_vec(),
        values,
        std_errors,
        j: n,
    })
}

/// Forward differences `F(α_{i+1}) − F(α_i)` with sample-wise standard errors,
/// tabulated at the left grid point.
pub fn f_scan_first_differences(samples: &[WeightedSample], alphas: &[f64]) -> Result<FTScan> {
    require_reference(samples)?;
    check_alphas(alphas)?;
    let w = reference_weights(samples, alphas)?;
    let n = samples.len();
    let mut values = Vec::new();
    let mut std_errors = Vec::new();
    for i in 0..alphas.len().saturating_sub(1) {
        let (m, se) = mean_se(
            samples.iter().enumerate().map(|(j, s)| s.phi() * (w[i + 1][j] - w[i][j])),
            n,
        );
        values.push(m);
        std_errors.push(se);
    }
    Ok(FTScan {
        alphas: alphas[..alphas.len().saturating_sub(1)].to_vec(),
        values,
        std_errors,
        j: n,
    })
}

/// Second differences `F(α_{i−1}) − 2F(α_i) + F(α_{i+1})` with sample-wise
/// standard errors, tabulated at interior grid points.
pub fn f_scan_second_differences(samples: &[WeightedSample], alphas: &[f64]) -> Result<FTScan> {
    require_reference(samples)?;
    check_alphas(alphas)?;
    let w = reference_weights(samples, alphas)?;
    let n = samples.len();
    let mut values = Vec::new();
    let mut std_errors = Vec::new();
    for i in 1..alphas.len().saturating_sub(1) {
        let (m, se) = mean_se(
            samples
                .iter()
                .enumerate()
                .map(|(j, s)| s.phi() * (w[i - 1][j] - 2.0 * w[i][j] + w[i + 1][j])),
            n,
        );
        values.push(m);
        std_errors.push(se);
    }
    Ok(FTScan {
        alphas: alphas[1..alphas.len().saturating_sub(1)].to_vec(),
        values,
        std_errors,
        j: n,
    })
}

/// Number of local minima of a scan, from its forward differences.
///
/// A difference within `k` standard errors of zero counts as flat. Among the
/// remaining signs, every `−` to `+` change is an interior minimum, a leading
/// `+` puts one at the left end and a trailing `−` one at the right end. A
/// completely flat scan has a single minimum.
pub fn count_local_minima(differences: &FTScan, k: f64) -> usize {
    let signs: Vec<i8> = differences
        .values
        .iter()
        .zip(&differences.std_errors)
        .filter_map(|(d, se)| {
            if d.abs() <= k * se {
                None
            } else if *d > 0.0 {
                Some(1)
            } else {
                Some(-1)
            }
        })
        .collect();
    if signs.is_empty() {
        return 1;
    }
    let interior = signs.windows(2).filter(|w| w[0] < 0 && w[1] > 0).count();
    interior + usize::from(signs[0] > 0) + usize::from(*signs.last().unwrap() < 0)
}

/// Number of local maxima, counted like [`count_local_minima`] but only in the interior.
pub fn count_interior_maxima(differences: &FTScan, k: f64) -> usize {
    let signs: Vec<i8> = differences
        .values
        .iter()
        .zip(&differences.std_errors)
        .filter(|(d, se)| d.abs() > k * **se)
        .map(|(d, _)| if *d > 0.0 { 1 } else { -1 })
        .collect();
    signs.windows(2).filter(|w| w[0] > 0 && w[1] < 0).count()
}

/// `F'_T(0)` and `F''_T(0)` with standard errors and the covariance of the two means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FDerivatives {
    pub f1: f64,
    pub f2: f64,
    pub se1: f64,
    pub se2: f64,
    pub cov12: f64,
    pub j: usize,
}

/// `F'_T(0) = E[Φ_T X_T]` and `F''_T(0) = E[Φ_T (⟨X⟩_T + X_T²)]` from reference samples.
pub fn f_derivatives_at_zero(samples: &[WeightedSample]) -> Result<FDerivatives> {
    require_reference(samples)?;
    let n = samples.len();
    let nf = n as f64;
    let d1 = |s: &WeightedSample| s.phi() * s.x_sum;
    let d2 = |s: &WeightedSample| s.phi() * (s.qv_sum + s.x_sum * s.x_sum);
    let f1 = KahanSum::sum(samples.iter().map(d1)) / nf;
    let f2 = KahanSum::sum(samples.iter().map(d2)) / nf;
    let mut v1 = KahanSum::default();
    let mut v2 = KahanSum::default();
    let mut c12 = KahanSum::default();
    for s in samples {
        let a = d1(s) - f1;
        let b = d2(s) - f2;
        v1.add(a * a);
        v2.add(b * b);
        c12.add(a * b);
    }
    let denom = (nf - 1.0) * nf;
    let out = FDerivatives {
        f1,
        f2,
        se1: (v1.total() / denom).sqrt(),
        se2: (v2.total() / denom).sqrt(),
        cov12: c12.total() / denom,
        j: n,
    };
    if ![out.f1, out.f2, out.se1, out.se2].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite replica statistics".into()));
    }
    Ok(out)
}

/// `F'''_T(0) = E[Φ_T (X_T³ + 3⟨X⟩_T X_T)]` with its standard error. Diagnostic only.
pub fn f_third_derivative_at_zero(samples: &[WeightedSample]) -> Result<(f64, f64)> {
    require_reference(samples)?;
    Ok(mean_se(
        samples
            .iter()
            .map(|s| s.phi() * (s.x_sum.powi(3) + 3.0 * s.qv_sum * s.x_sum)),
        samples.len(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaHat {
    pub alpha: f64,
    pub se: f64,
}

impl AlphaHat {
    /// `−f1/f2` with a delta-method standard error.
    pub fn from_derivatives(d: &FDerivatives) -> Result<Self> {
        if !(d.f2 > 3.0 * d.se2) {
            return Err(Error::DegenerateDenominator { f2: d.f2, se2: d.se2 });
        }
        let alpha = -d.f1 / d.f2;
        let g1 = -1.0 / d.f2;
        let g2 = d.f1 / (d.f2 * d.f2);
        let var = g1 * g1 * d.se1 * d.se1 + g2 * g2 * d.se2 * d.se2 + 2.0 * g1 * g2 * d.cov12;
        Ok(Self {
            alpha,
            se: var.max(0.0).sqrt(),
        })
    }
}

/// Minimizer of the quadratic model `F(0) + α f1 + α² f2 / 2`.
pub fn alpha_hat(samples: &[WeightedSample]) -> Result<AlphaHat> {
    AlphaHat::from_derivatives(&f_derivatives_at_zero(samples)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference(gk: f64, x: f64, qv: f64) -> WeightedSample {
        WeightedSample {
            gk_integral: gk,
            x_sum: x,
            qv_sum: qv,
            provenance: Provenance::Reference,
        }
    }

    #[test]
    fn weight_formulas() {
        let biased = WeightedSample {
            gk_integral: 1.0,
            x_sum: 0.0,
            qv_sum: 2.0,
            provenance: Provenance::Biased { alpha: 1.0 },
        };
        assert_eq!(biased.weight(1.0).unwrap(), (-1.0f64).exp());
        assert_eq!(reference(1.0, 0.0, 2.0).weight(1.0).unwrap(), 1.0f64.exp());
        assert_eq!(reference(1.0, 0.3, 2.0).weight(0.0).unwrap(), 1.0);
        assert!(matches!(biased.weight(0.5), Err(Error::ProvenanceMismatch { .. })));
    }

    #[test]
    fn overflow_is_reported() {
        let s = reference(1.0, 800.0, 0.0);
        match s.weight(1.0) {
            Err(Error::WeightOverflow { alpha, log_weight }) => {
                assert_eq!(alpha, 1.0);
                assert_eq!(log_weight, 800.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_bias_gives_degenerate_alpha() {
        let samples: Vec<_> = (0..10).map(|i| reference(i as f64, 0.0, 0.0)).collect();
        let d = f_derivatives_at_zero(&samples).unwrap();
        assert_eq!((d.f1, d.f2), (0.0, 0.0));
        assert!(matches!(alpha_hat(&samples), Err(Error::DegenerateDenominator { .. })));
    }

    #[test]
    fn scan_at_zero_is_plain_second_moment() {
        let samples: Vec<_> = (0..50)
            .map(|i| reference((i as f64 * 0.37).sin(), (i as f64).cos(), 0.1 * i as f64))
            .collect();
        let scan = f_scan(&samples, &[-0.5, 0.0, 0.5]).unwrap();
        let m2 = KahanSum::sum(samples.iter().map(|s| s.phi())) / 50.0;
        assert_eq!(scan.values[1], m2);
        assert!(f_scan(&samples, &[0.5, 0.0]).is_err());
        let csv = scan.to_csv();
        assert!(csv.starts_with("alpha,f_value,std_error\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn biased_samples_rejected_by_scan() {
        let mut s = reference(1.0, 0.0, 0.0);
        s.provenance = Provenance::Biased { alpha: 0.2 };
        assert!(matches!(f_scan(&[s, s], &[0.0]), Err(Error::ProvenanceMismatch { .. })));
    }

    #[test]
    fn minima_counting() {
        let scan = |v: &[f64]| FTScan {
            alphas: (0..v.len()).map(|i| i as f64).collect(),
            values: v.to_vec(),
            std_errors: vec![0.1; v.len()],
            j: 10,
        };
        assert_eq!(count_local_minima(&scan(&[-1.0, -1.0, 0.05, 1.0]), 2.0), 1);
        assert_eq!(count_local_minima(&scan(&[-1.0, 1.0, -1.0, 1.0]), 2.0), 2);
        assert_eq!(count_local_minima(&scan(&[1.0, 1.0]), 2.0), 1);
        assert_eq!(count_local_minima(&scan(&[0.0, 0.01]), 2.0), 1);
        assert_eq!(count_interior_maxima(&scan(&[1.0, -1.0]), 2.0), 1);
    }

    proptest! {
        #[test]
        fn log_weight_vanishes_at_zero(x in -1e6f64..1e6, qv in 0.0f64..1e6, a in -2.0f64..2.0) {
            let r = reference(1.0, x, qv);
            prop_assert_eq!(r.log_weight(0.0), 0.0);
            prop_assert_eq!(r.weight(0.0).unwrap(), 1.0);
            let b = WeightedSample { provenance: Provenance::Biased { alpha: a }, ..r };
            if b.log_weight(a).abs() < MAX_LOG_WEIGHT {
                prop_assert!(b.weight(a).unwrap() > 0.0);
            }
        }

        #[test]
        fn alpha_hat_minimizes_quadratic_model(f1 in -10.0f64..10.0, f2 in 0.1f64..10.0) {
            let d = FDerivatives { f1, f2, se1: 0.0, se2: 0.0, cov12: 0.0, j: 2 };
            let a = AlphaHat::from_derivatives(&d).unwrap().alpha;
            // derivative of the quadratic model vanishes at the estimate
            prop_assert!((f1 + a * f2).abs() <= 1e-12 * (1.0 + f1.abs()));
        }
    }
}
