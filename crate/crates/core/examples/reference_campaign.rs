//! Plain Green–Kubo estimation along unbiased paths, with `F_T` derivatives
//! and the estimated optimal bias at each horizon.
//!
//! ```text
//! cargo run --release --example reference_campaign -- [replicas]
//! ```

use gk_girsanov::experiment::{simulate_campaign, ExperimentConfig};
use gk_girsanov::model::model_1d;
use gk_girsanov::poisson::{gk_reference_value, Horizon};
use gk_girsanov::ModelSpec;

fn main() -> gk_girsanov::Result<()> {
    let replicas = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4000);
    let cfg = ExperimentConfig {
        replicas,
        ..ExperimentConfig::new(ModelSpec::new("cosine1d", 3.0), 1e-3, vec![0.2, 0.5, 1.0, 2.0], 7)
    };
    let reference = simulate_campaign(&cfg, 0.0)?;
    let model = model_1d(3.0)?;

    println!("{replicas} replicas, dt = {}", cfg.dt);
    println!(
        "{:>5} {:>10} {:>10} {:>10} {:>10} {:>16}",
        "T", "mean", "rho_T", "Var/T", "f1", "alpha_hat"
    );
    for &t in &cfg.t_grid {
        let stats = reference.gk_stats(t)?;
        let exact = gk_reference_value(&model, Horizon::Finite(t), 4096)?;
        let d = reference.derivatives(t)?;
        let alpha = match reference.alpha_hat(t) {
            Ok(a) => format!("{:+.4} ± {:.4}", a.alpha, a.se),
            Err(e) => format!("({e})"),
        };
        println!(
            "{t:>5} {:>10.4} {exact:>10.4} {:>10.4} {:>10.4} {alpha:>16}",
            stats.mean,
            stats.variance / t,
            d.f1
        );
    }
    Ok(())
}
