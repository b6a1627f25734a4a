//! Runs a figure preset at reduced size and prints its comparison report.
//!
//! ```text
//! cargo run --release --example reproduce_figure -- fig-1d-derivatives 5000
//! ```

use gk_girsanov::experiment::{figure_config, reproduce, FIGURES};

fn main() -> gk_girsanov::Result<()> {
    let mut args = std::env::args().skip(1);
    let figure = args.next().unwrap_or_else(|| FIGURES[0].to_string());
    let replicas = args.next().and_then(|s| s.parse().ok()).unwrap_or(5000);

    let mut cfg = figure_config(&figure)?;
    cfg.replicas = replicas;
    cfg.dt = cfg.dt.max(1e-3);
    cfg.output_dir = std::env::temp_dir().join("gk-girsanov").join(&figure);

    let (manifest, report) = reproduce(&figure, Some(cfg))?;
    for c in &report.entries {
        let verdict = match c.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "info",
        };
        let target = c.target.map_or(String::from("-"), |t| format!("{t:.5}"));
        println!("{verdict} {:<32} {:>12.5} {target:>12}  {}", c.quantity, c.value, c.criterion);
    }
    for out in &manifest.outputs {
        println!("wrote {}", out.file);
    }
    Ok(())
}
