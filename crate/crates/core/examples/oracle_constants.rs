//! Asymptotic constants of the optimal bias for both built-in models.
//!
//! ```text
//! cargo run --release --example oracle_constants
//! ```

use gk_girsanov::model::{model_1d, model_2d};
use gk_girsanov::poisson::compute_constants;
use gk_girsanov::Model;

fn report(model: &dyn Model, grid: usize) -> gk_girsanov::Result<()> {
    let c = compute_constants(model, grid)?;
    println!("{} (beta = {})", model.name(), model.beta());
    println!("  D1        = {:.6}", c.d1);
    println!("  D2        = {:.6}", c.d2);
    println!("  sigma2_gk = {:.6}", c.sigma2_gk);
    println!("  rho       = {:.6}", c.rho_ref);
    for t in [1.0, 2.0, 5.0, 10.0] {
        println!(
            "  T = {t:>4}: alpha* ~ {:+.5}, relative reduction ~ {:.5}",
            c.predicted_alpha(t).unwrap_or(f64::NAN),
            c.predicted_reduction(t).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn main() -> gk_girsanov::Result<()> {
    report(&model_1d(3.0)?, 1 << 14)?;
    report(&model_2d(2.0)?, 1 << 14)?;
    Ok(())
}
