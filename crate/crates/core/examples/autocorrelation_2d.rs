//! Correlation `E[R(q_t)S(q_0)]` of the two-dimensional model under
//! negative, zero and positive bias.
//!
//! ```text
//! cargo run --release --example autocorrelation_2d -- [replicas]
//! ```

use gk_girsanov::experiment::{simulate_campaign, ExperimentConfig};
use gk_girsanov::ModelSpec;

fn main() -> gk_girsanov::Result<()> {
    let replicas = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let times: Vec<f64> = (0..=10).map(|i| 0.2 * i as f64).collect();
    let cfg = ExperimentConfig {
        replicas,
        checkpoints: times.clone(),
        ..ExperimentConfig::new(ModelSpec::new("double-well-2d", 2.0), 4e-4, vec![2.0], 3)
    };

    let curves = [-0.4, 0.0, 0.4]
        .iter()
        .map(|&alpha| simulate_campaign(&cfg, alpha)?.autocorrelation(&times))
        .collect::<gk_girsanov::Result<Vec<_>>>()?;

    println!("{:>5} {:>16} {:>16} {:>16}", "t", "alpha = -0.4", "alpha = 0", "alpha = 0.4");
    for (i, t) in times.iter().enumerate() {
        print!("{t:>5.1}");
        for curve in &curves {
            print!(" {:>8.4} ± {:<5.3}", curve[i].value, curve[i].se);
        }
        println!();
    }
    Ok(())
}
