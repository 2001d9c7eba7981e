//! Horizontal Brownian motion on the Heisenberg group: radial quantiles
//! against the model process, exit tails, and a lower bound for the heat
//! kernel diagonal on flat space.
//!
//! cargo run --release --example brownian_motion

use folcomp::bundled;
use folcomp::group::Group;
use folcomp::stochastic::{exit_tail, heat_diag_lower, radial_comparison_run, SimConfig};

fn main() -> folcomp::Result<()> {
    let m = bundled::heisenberg();
    let id = Group::new(&m)?.identity();
    let cfg = SimConfig::new(1e-2, 1.0, 400, 42)?;

    let radial = radial_comparison_run(&m, &id, &cfg)?;
    for row in &radial.rows {
        println!("radial {:<12} t = {:.2}: {:.4} <= {:.4}", row.label, row.t, row.measured, row.bound);
    }
    println!("radial verdict {:?}", radial.verdict);

    let exits = exit_tail(&m, &id, &[1.0, 1.5, 2.0, 2.5], 1.0, &cfg)?;
    for row in exits.rows.iter().filter(|r| r.label == "tail") {
        println!("P(sup d > {:.1}) = {:.4} ± {:.4}", row.r, row.measured, row.error);
    }
    println!("log-tail slope {:.3}", exits.summary_value("slope").unwrap_or(f64::NAN));

    let flat = bundled::flat3();
    let t = 0.25;
    let hd = heat_diag_lower(&flat, &Group::new(&flat)?.identity(), t, 2.0, &SimConfig::new(1e-2, t, 2000, 42)?)?;
    let exact = (8.0 * std::f64::consts::PI * t).powf(-1.5);
    println!("flat3 heat diagonal: lower bound {:.5} ± {:.5}, exact {exact:.5}", hd.value, hd.std_error);
    Ok(())
}
