//! The missing-rate sweep on the default synthetic problem: every method at
//! rates 0.5, 0.8, 0.9 and 0.95, averaged over five seeds. Prints the
//! summary table and optionally writes the CSV report.
//!
//! `cargo run --release --example rate_sweep [threads] [report.csv]`

use std::time::Instant;

use mmle::sweep::{run_sweep, SweepConfig};
use mmle::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let threads = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let csv_path = args.next();

    let config = SweepConfig {
        threads,
        ..SweepConfig::default()
    };
    let start = Instant::now();
    let report = run_sweep(&config)?;
    print!("{}", report.summary_table());
    println!(
        "{} cells in {:.1}s",
        report.cells.len(),
        start.elapsed().as_secs_f64()
    );

    if let Some(path) = csv_path {
        std::fs::write(&path, report.to_csv()).map_err(|e| mmle::Error::io(&path, e))?;
        println!("wrote {path}");
    }
    Ok(())
}
