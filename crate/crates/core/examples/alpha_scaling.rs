//! Estimated optimal bias against its large-`T` prediction `−D₁/(D₂T)`.
//!
//! ```text
//! cargo run --release --example alpha_scaling -- [replicas]
//! ```

use gk_girsanov::estimators::fit_loglog_slope;
use gk_girsanov::experiment::{simulate_campaign, ExperimentConfig};
use gk_girsanov::model::model_1d;
use gk_girsanov::poisson::compute_constants;
use gk_girsanov::ModelSpec;

fn main() -> gk_girsanov::Result<()> {
    let replicas = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let t_grid = vec![0.5, 1.0, 1.5, 2.0, 3.0];
    let cfg = ExperimentConfig {
        replicas,
        ..ExperimentConfig::new(ModelSpec::new("cosine1d", 3.0), 1e-3, t_grid.clone(), 5)
    };
    let constants = compute_constants(&model_1d(3.0)?, 1 << 14)?;
    let reference = simulate_campaign(&cfg, 0.0)?;

    let mut ts = Vec::new();
    let mut magnitudes = Vec::new();
    println!("{:>5} {:>20} {:>12}", "T", "alpha_hat", "predicted");
    for &t in &t_grid {
        let predicted = constants.predicted_alpha(t).unwrap_or(f64::NAN);
        match reference.alpha_hat(t) {
            Ok(a) => {
                println!("{t:>5} {:>+10.5} ± {:<7.5} {predicted:>+12.5}", a.alpha, a.se);
                ts.push(t);
                magnitudes.push(a.alpha.abs());
            }
            Err(e) => println!("{t:>5} {:>20} {predicted:>+12.5}", e.to_string()),
        }
    }
    if ts.len() >= 2 {
        let fit = fit_loglog_slope(&ts, &magnitudes)?;
        println!("log|alpha_hat| vs log T slope: {:.3} (R² = {:.3})", fit.coefficients[1], fit.r_squared);
    }
    Ok(())
}
