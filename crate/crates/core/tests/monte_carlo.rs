use gk_girsanov::estimators::EnsembleStats;
use gk_girsanov::experiment::{paired_difference, simulate_campaign, ExperimentConfig};
use gk_girsanov::model::model_1d;
use gk_girsanov::poisson::{gk_reference_value, Horizon};
use gk_girsanov::{Model, ModelSpec};

fn config(replicas: usize, t_grid: Vec<f64>, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        replicas,
        ..ExperimentConfig::new(ModelSpec::new("cosine1d", 3.0), 1e-3, t_grid, seed)
    }
}

#[test]
fn plain_estimator_is_consistent_with_spectral_value() {
    let t = 0.2;
    let campaign = simulate_campaign(&config(20_000, vec![t], 41), 0.0).unwrap();
    let stats = campaign.gk_stats(t).unwrap();
    let exact = gk_reference_value(&model_1d(3.0).unwrap(), Horizon::Finite(t), 4096).unwrap();
    assert!(
        (stats.mean - exact).abs() < 3.0 * stats.std_error(),
        "{} ± {} vs {exact}",
        stats.mean,
        stats.std_error()
    );
}

#[test]
fn correlation_at_time_zero_is_beta_times_second_moment_of_r() {
    let cfg = ExperimentConfig {
        checkpoints: vec![0.0, 0.1],
        ..config(20_000, vec![0.1], 43)
    };
    let campaign = simulate_campaign(&cfg, 0.0).unwrap();
    let curve = campaign.autocorrelation(&[0.0]).unwrap();
    let model = model_1d(3.0).unwrap();
    let n = 1 << 14;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        let x = [(i as f64 + 0.5) / n as f64];
        let w = (-model.beta() * model.potential(&x)).exp();
        num += w * model.observable_r(&x).powi(2);
        den += w;
    }
    let target = model.beta() * num / den;
    assert!((curve[0].value - target).abs() < 3.0 * curve[0].se, "{:?} vs {target}", curve[0]);
}

#[test]
fn girsanov_densities_have_unit_mean() {
    let t = 1.0;
    let cfg = config(20_000, vec![t], 47);
    let reference = simulate_campaign(&cfg, 0.0).unwrap();
    for alpha in [-0.5, 0.5] {
        // dP_alpha/dP_0 along reference paths
        let w: Vec<f64> = reference
            .records
            .iter()
            .map(|r| (-alpha * r.x_sum - 0.5 * alpha * alpha * r.qv_sum).exp())
            .collect();
        let stats = EnsembleStats::from_values(&w).unwrap();
        assert!((stats.mean - 1.0).abs() < 3.0 * stats.std_error(), "reference alpha {alpha}: {stats:?}");

        let biased = simulate_campaign(&cfg, alpha).unwrap();
        let stats = EnsembleStats::from_values(&biased.weights(t).unwrap()).unwrap();
        assert!((stats.mean - 1.0).abs() < 3.0 * stats.std_error(), "biased alpha {alpha}: {stats:?}");
    }
}

#[test]
fn reweighted_reference_predicts_biased_second_moment() {
    let t = 0.5;
    let cfg = config(20_000, vec![t], 53);
    let reference = simulate_campaign(&cfg, 0.0).unwrap();
    for alpha in [-0.3, 0.3] {
        let reweighted: Vec<f64> = reference
            .samples(t)
            .unwrap()
            .iter()
            .map(|s| s.phi() * s.weight(alpha).unwrap())
            .collect();
        let biased = simulate_campaign(&cfg, alpha).unwrap();
        let direct: Vec<f64> = biased
            .samples(t)
            .unwrap()
            .iter()
            .map(|s| s.weighted_gk(alpha).unwrap().powi(2))
            .collect();
        let (diff, se) = paired_difference(&direct, &reweighted).unwrap();
        assert!(diff.abs() < 3.0 * se, "alpha {alpha}: {diff} ± {se}");
    }
}

#[test]
fn zero_bias_reproduces_reference_exactly() {
    let t = 0.3;
    let cfg = config(500, vec![t], 59);
    let a = simulate_campaign(&cfg, 0.0).unwrap();
    let b = simulate_campaign(&cfg, -0.0).unwrap();
    assert_eq!(a.gk_stats(t).unwrap(), b.gk_stats(t).unwrap());
    assert!(a.weights(t).unwrap().iter().all(|&w| w == 1.0));
}

#[test]
fn derivative_estimators_match_finite_horizon_oracle() {
    use gk_girsanov::poisson::{FiniteHorizonF, DEFAULT_COLLOCATION};
    let t = 0.5;
    let campaign = simulate_campaign(&config(20_000, vec![t], 61), 0.0).unwrap();
    let d = campaign.derivatives(t).unwrap();
    let line = model_1d(3.0).unwrap().line_reduction().unwrap();
    let (f1, f2) = FiniteHorizonF::new(&line, DEFAULT_COLLOCATION).unwrap().derivatives(t);
    assert!((d.f1 - f1).abs() < 3.0 * d.se1, "f1 {} ± {} vs {f1}", d.f1, d.se1);
    assert!((d.f2 - f2).abs() < 3.0 * d.se2, "f2 {} ± {} vs {f2}", d.f2, d.se2);
}
