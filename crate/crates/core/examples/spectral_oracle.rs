//! Finite-horizon Green–Kubo values and variances from the generator spectrum.
//!
//! ```text
//! cargo run --release --example spectral_oracle
//! ```

use gk_girsanov::model::model_1d;
use gk_girsanov::poisson::{compute_constants, GeneratorSpectrum, Horizon, DEFAULT_MODES};
use gk_girsanov::Model;

fn main() -> gk_girsanov::Result<()> {
    let model = model_1d(3.0)?;
    let line = model.line_reduction().expect("one-dimensional model");
    let spectrum = GeneratorSpectrum::new(&line, DEFAULT_MODES, 4096)?;
    let x = spectrum.grid().to_vec();
    let r: Vec<f64> = x.iter().map(|&q| (line.r)(q)).collect();
    let s: Vec<f64> = x.iter().map(|&q| (line.s)(q)).collect();

    let lambda = spectrum.eigenvalues();
    println!("lowest eigenvalues of -L: {:.6?}", &lambda.as_slice()[..5]);

    let c = compute_constants(&model, 1 << 14)?;
    println!("rho (infinite horizon) = {:.8}", spectrum.rho(&r, &s, Horizon::Infinite));
    println!("Var/T asymptote        = {:.6}", c.sigma2_gk);
    println!("{:>6} {:>12} {:>12} {:>12}", "T", "rho_T", "C(T)", "Var/T");
    for t in [0.1, 0.2, 0.5, 1.0, 2.0, 5.0] {
        let rho_t = spectrum.rho(&r, &s, Horizon::Finite(t));
        let var = spectrum.gk_second_moment(&r, &s, t) - rho_t * rho_t;
        println!(
            "{t:>6} {rho_t:>12.6} {:>12.6} {:>12.6}",
            spectrum.correlation(&r, &s, t),
            var / t
        );
    }
    Ok(())
}
