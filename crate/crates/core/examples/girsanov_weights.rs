//! Second moments of the reweighted estimator: predicted from reference
//! paths through `E_T(α)`, and measured on the biased dynamics.
//!
//! ```text
//! cargo run --release --example girsanov_weights -- [replicas]
//! ```

use gk_girsanov::estimators::variance_reduction_report;
use gk_girsanov::experiment::{simulate_campaign, ExperimentConfig};
use gk_girsanov::ModelSpec;

fn main() -> gk_girsanov::Result<()> {
    let replicas = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4000);
    let t = 0.5;
    let cfg = ExperimentConfig {
        replicas,
        ..ExperimentConfig::new(ModelSpec::new("cosine1d", 3.0), 1e-3, vec![t], 11)
    };
    let reference = simulate_campaign(&cfg, 0.0)?;
    let plain = reference.gk_stats(t)?;
    let alphas = [-0.5, -0.25, -0.1, 0.0, 0.25];
    let scan = reference.f_scan(t, &alphas)?;
    println!("T = {t}, {replicas} replicas, plain mean {:.4} ± {:.4}", plain.mean, plain.ci95_halfwidth);

    println!(
        "{:>6} {:>18} {:>10} {:>18} {:>18} {:>10}",
        "alpha", "biased mean", "E[M]", "F_T reweighted", "F_T biased", "reduction"
    );
    for (i, &alpha) in alphas.iter().enumerate() {
        let biased = simulate_campaign(&cfg, alpha)?;
        let direct = biased.gk_stats(t)?;
        let weights = biased.weights(t)?;
        let mean_weight = weights.iter().sum::<f64>() / weights.len() as f64;
        let reduction = variance_reduction_report(&plain, &direct)?;
        println!(
            "{alpha:>6} {:>9.4} ± {:<6.4} {mean_weight:>10.4} {:>9.4} ± {:<6.4} {:>18.4} {:>10.4}",
            direct.mean,
            direct.ci95_halfwidth,
            scan.values[i],
            scan.std_errors[i],
            direct.raw_second_moment,
            reduction.second_moment
        );
    }
    Ok(())
}
