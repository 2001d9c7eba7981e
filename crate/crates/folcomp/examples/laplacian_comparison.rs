//! Finite-difference horizontal Laplacian of the distance on the Heisenberg
//! group against the comparison bound, plus the coupled version.
//!
//! cargo run --release --example laplacian_comparison

use std::time::Instant;

use folcomp::bundled;
use folcomp::comparison::{comparison_audit, coupled_audit, ComparisonConfig};

fn main() -> folcomp::Result<()> {
    let m = bundled::heisenberg();
    let start = Instant::now();
    let report = comparison_audit(&m, &[0.25, 0.5, 1.0, 1.5, 2.0], 16)?;
    println!("{:<10} {:>6} {:>12} {:>12} {:>10}", "point", "r", "measured", "bound", "fd error");
    for row in &report.rows {
        println!(
            "{:<10} {:>6.3} {:>12.6} {:>12.6} {:>10.2e}",
            row.label, row.r, row.measured, row.bound, row.error
        );
    }
    println!(
        "verdict {:?}, skipped {}, {:.1}s",
        report.verdict,
        report.skipped,
        start.elapsed().as_secs_f64()
    );

    let start = Instant::now();
    let coupled = coupled_audit(&m, &[0.5, 1.0, 1.5], 6, ComparisonConfig::default())?;
    for row in &coupled.rows {
        println!(
            "coupled {:<8} r = {:.3}: {:>10.6} <= {:.6}",
            row.label, row.r, row.measured, row.bound
        );
    }
    println!(
        "coupled verdict {:?}, skipped {}, {:.1}s",
        coupled.verdict,
        coupled.skipped,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
