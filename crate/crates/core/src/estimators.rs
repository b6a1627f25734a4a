//! Ensemble statistics, Green–Kubo estimators and least-squares fits.
//!
//! Every reduction runs sequentially in replica order with compensated
//! summation, so results are bit-stable for a given input ordering.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::girsanov::{Provenance, WeightedSample};
use crate::sde::ReplicaRecord;

/// 97.5% quantile of the standard normal law.
pub const Z95: f64 = 1.96;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }

    pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
        let mut acc = Self::default();
        for v in values {
            acc.add(v);
        }
        acc.total()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub count: usize,
    pub mean: f64,
    /// Sample variance with Bessel correction.
    pub variance: f64,
    pub ci95_halfwidth: f64,
    /// `(1/J) Σ x_j²`.
    pub raw_second_moment: f64,
}

impl EnsembleStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let j = values.len();
        if j < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: j });
        }
        let n = j as f64;
        let mean = KahanSum::sum(values.iter().copied()) / n;
        let variance = KahanSum::sum(values.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
        let raw_second_moment = KahanSum::sum(values.iter().map(|x| x * x)) / n;
        Ok(Self {
            count: j,
            mean,
            variance,
            ci95_halfwidth: Z95 * (variance / n).sqrt(),
            raw_second_moment,
        })
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }
}

/// Plain estimator `ρ̂_{T,J}` from reference replicas.
pub fn gk_plain(records: &[ReplicaRecord]) -> Result<EnsembleStats> {
    if let Some(r) = records.iter().find(|r| r.alpha != 0.0) {
        return Err(Error::ProvenanceMismatch {
            expected: "reference".into(),
            found: format!("biased (alpha = {})", r.alpha),
        });
    }
    let values: Vec<f64> = records.iter().map(|r| r.gk_integral).collect();
    EnsembleStats::from_values(&values)
}

/// Reweighted estimator `Â^α_{T,J}` from replicas of the biased dynamics.
///
/// At `α = 0` every weight is exactly one and the result equals [`gk_plain`]
/// bit for bit. Reference samples are rejected for `α ≠ 0`: there the
/// weights only serve second-moment estimates.
pub fn gk_weighted(samples: &[WeightedSample], alpha: f64) -> Result<EnsembleStats> {
    if alpha != 0.0 && samples.iter().any(|s| s.provenance == Provenance::Reference) {
        return Err(Error::ProvenanceMismatch {
            expected: format!("biased (alpha = {alpha})"),
            found: "reference".into(),
        });
    }
    let values = samples
        .iter()
        .map(|s| s.weighted_gk(alpha))
        .collect::<Result<Vec<f64>>>()?;
    EnsembleStats::from_values(&values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReduction {
    /// `(F_T(0) − F_T(α)) / F_T(0)`, the headline number.
    pub second_moment: f64,
    /// Same ratio for the variance.
    pub variance: f64,
}

pub fn variance_reduction_report(
    reference: &EnsembleStats,
    weighted: &EnsembleStats,
) -> Result<VarianceReduction> {
    if reference.raw_second_moment == 0.0 {
        return Err(Error::ZeroSecondMoment);
    }
    let variance = if reference.variance > 0.0 {
        (reference.variance - weighted.variance) / reference.variance
    } else {
        0.0
    };
    Ok(VarianceReduction {
        second_moment: (reference.raw_second_moment - weighted.raw_second_moment)
            / reference.raw_second_moment,
        variance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Polynomial coefficients in ascending order of degree.
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub r_squared: f64,
}

fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(format!("{} abscissae, {} ordinates", xs.len(), ys.len())));
    }
    let p = degree + 1;
    let needed = if degree == 1 { 2 } else { p };
    if xs.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            got: xs.len(),
        });
    }
    let design = DMatrix::from_fn(xs.len(), p, |i, k| xs[i].powi(k as i32));
    let rhs = DVector::from_column_slice(ys);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= smax * 1e-12 {
        return Err(Error::RankDeficient);
    }
    let coef = svd.solve(&rhs, 0.0).map_err(|_| Error::RankDeficient)?;
    let residual = &rhs - &design * &coef;
    let ss_res = residual.norm_squared();
    let mean = KahanSum::sum(ys.iter().copied()) / ys.len() as f64;
    let ss_tot = KahanSum::sum(ys.iter().map(|y| (y - mean) * (y - mean)));
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(FitResult {
        coefficients: coef.iter().copied().collect(),
        residual_norm: ss_res.sqrt(),
        r_squared,
    })
}

/// Least-squares `y ≈ c₀ + c₁ x`.
pub fn fit_affine(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    polyfit(xs, ys, 1)
}

/// Least-squares `y ≈ c₀ + c₁ x + c₂ x²`.
pub fn fit_quadratic(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    polyfit(xs, ys, 2)
}

/// Affine fit of `ln |y|` against `ln x`; the slope is `coefficients[1]`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(format!("{} abscissae, {} ordinates", xs.len(), ys.len())));
    }
    let positive = ys.iter().all(|&y| y > 0.0);
    let negative = ys.iter().all(|&y| y < 0.0);
    if xs.iter().any(|&x| !(x > 0.0)) || !(positive || negative) {
        return Err(Error::SignViolation);
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    if lx.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: lx.len(),
        });
    }
    polyfit(&lx, &ly, 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub value: f64,
    pub se: f64,
}

/// `t ↦ E[R(q_t) S(q_0)]` along the simulated dynamics, from the `R` values
/// recorded at each checkpoint. No reweighting is applied, so for biased
/// replicas this is the correlation of the biased process.
pub fn autocorrelation_curve(records: &[ReplicaRecord]) -> Result<Vec<CurvePoint>> {
    let first = records.first().ok_or(Error::TooFewSamples { needed: 2, got: 0 })?;
    let steps: Vec<usize> = first.snapshots.iter().map(|s| s.step).collect();
    for r in records {
        if r.dt != first.dt
            || r.snapshots.len() != steps.len()
            || r.snapshots.iter().zip(&steps).any(|(s, &k)| s.step != k)
        {
            return Err(Error::CheckpointMismatch);
        }
    }
    steps
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let values: Vec<f64> = records.iter().map(|r| r.snapshots[i].r * r.s0).collect();
            let stats = EnsembleStats::from_values(&values)?;
            Ok(CurvePoint {
                t: k as f64 * first.dt,
                value: stats.mean,
                se: stats.std_error(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kahan_beats_naive_summation() {
        let mut values = vec![1.0];
        values.extend(std::iter::repeat(1e-16).take(10_000));
        let naive: f64 = values.iter().sum();
        assert_eq!(naive, 1.0);
        assert!((KahanSum::sum(values.iter().copied()) - (1.0 + 1e-12)).abs() < 1e-20);
    }

    #[test]
    fn stats_of_small_sample() {
        let s = EnsembleStats::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.count, 4);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
        assert!((s.raw_second_moment - 7.5).abs() < 1e-15);
        assert!((s.ci95_halfwidth - 1.96 * (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(EnsembleStats::from_values(&[1.0]).is_err());
    }

    #[test]
    fn constant_values_have_zero_variance() {
        let s = EnsembleStats::from_values(&[0.0; 10]).unwrap();
        assert_eq!((s.mean, s.variance, s.ci95_halfwidth), (0.0, 0.0, 0.0));
    }

    #[test]
    fn fits_recover_exact_polynomials() {
        let xs: Vec<f64> = (0..6).map(|i| i as f64 * 0.4 + 1.0).collect();
        let affine = fit_affine(&xs, &xs.iter().map(|x| 2.0 * x + 1.0).collect::<Vec<_>>()).unwrap();
        assert!((affine.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((affine.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(affine.residual_norm < 1e-12);
        assert!((affine.r_squared - 1.0).abs() < 1e-12);

        let quad = fit_quadratic(&xs, &xs.iter().map(|x| x * x).collect::<Vec<_>>()).unwrap();
        for (c, e) in quad.coefficients.iter().zip([0.0, 0.0, 1.0]) {
            assert!((c - e).abs() < 1e-10);
        }

        let ll = fit_loglog_slope(&xs, &xs.iter().map(|x| -3.0 / x).collect::<Vec<_>>()).unwrap();
        assert!((ll.coefficients[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(fit_affine(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::RankDeficient)));
        assert!(matches!(fit_quadratic(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::TooFewSamples { .. })));
        assert!(matches!(
            fit_loglog_slope(&[1.0, 2.0, 3.0], &[1.0, -1.0, 2.0]),
            Err(Error::SignViolation)
        ));
        assert!(matches!(
            fit_loglog_slope(&[0.0, 2.0, 3.0], &[1.0, 1.0, 2.0]),
            Err(Error::SignViolation)
        ));
        assert!(matches!(fit_affine(&[1.0, 2.0], &[1.0]), Err(Error::LengthMismatch(_))));
    }

    #[test]
    fn reduction_of_identical_ensembles_is_zero() {
        let s = EnsembleStats::from_values(&[1.0, -2.0, 0.5]).unwrap();
        let r = variance_reduction_report(&s, &s).unwrap();
        assert_eq!((r.second_moment, r.variance), (0.0, 0.0));
        let zero = EnsembleStats::from_values(&[0.0, 0.0]).unwrap();
        assert!(matches!(variance_reduction_report(&zero, &s), Err(Error::ZeroSecondMoment)));
    }

    proptest! {
        #[test]
        fn variance_is_shift_invariant(values in prop::collection::vec(-1e3f64..1e3, 2..200), shift in -1e3f64..1e3) {
            let a = EnsembleStats::from_values(&values).unwrap();
            let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
            let b = EnsembleStats::from_values(&shifted).unwrap();
            prop_assert!(a.variance >= 0.0);
            prop_assert!((a.variance - b.variance).abs() <= 1e-8 * (1.0 + a.variance));
            prop_assert!((b.mean - a.mean - shift).abs() <= 1e-9 * (1.0 + shift.abs() + a.mean.abs()));
        }

        #[test]
        fn affine_fit_is_exact_on_lines(c0 in -10.0f64..10.0, c1 in -10.0f64..10.0, n in 2usize..20) {
            let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let ys: Vec<f64> = xs.iter().map(|x| c0 + c1 * x).collect();
            let fit = fit_affine(&xs, &ys).unwrap();
            prop_assert!((fit.coefficients[0] - c0).abs() < 1e-9);
            prop_assert!((fit.coefficients[1] - c1).abs() < 1e-9);
        }
    }
}
