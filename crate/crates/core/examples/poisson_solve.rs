//! Solving `−𝓛Φ = R − E_μ[R]` for a user-defined periodic model.
//!
//! ```text
//! cargo run --release --example poisson_solve
//! ```

use std::f64::consts::PI;
use std::sync::Arc;

use gk_girsanov::model::LineModel;
use gk_girsanov::poisson::LineGrid;

fn main() -> gk_girsanov::Result<()> {
    let beta = 2.0;
    let tau = 2.0 * PI;
    let model = LineModel::try_new(
        beta,
        Arc::new(move |x| (tau * x).cos() + 0.3 * (2.0 * tau * x).sin()),
        Arc::new(move |x| -tau * (tau * x).sin() + 0.6 * tau * (2.0 * tau * x).cos()),
        Arc::new(move |x| (tau * x).sin()),
        Arc::new(move |x| beta * (tau * x).sin()),
        Arc::new(move |x| (tau * x).cos()),
    )?;

    for n in [256, 1024, 4096, 16384] {
        let grid = LineGrid::new(&model, n)?;
        let r = grid.sample(&*model.r);
        let rhs = grid.center(&r);
        let sol = grid.solve(&rhs)?;
        let s = grid.sample(&*model.s);
        println!(
            "N = {n:>5}: kappa = {:+.12}, <S, Phi> = {:.12}, residual = {:.2e}",
            sol.kappa,
            grid.inner(&s, &sol.phi),
            grid.residual(&sol, &rhs)
        );
    }
    Ok(())
}
