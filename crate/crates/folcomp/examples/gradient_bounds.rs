//! Semigroup gradient bounds on the Heisenberg group: the horizontal
//! gradient bound for a coordinate function and the mixed bound over a
//! range of times.
//!
//! cargo run --release --example gradient_bounds

use folcomp::bundled;
use folcomp::group::Group;
use folcomp::stochastic::{gradient_bound_audit, mixed_gradient_audit, SimConfig, TestFunction};
use folcomp::GroupPoint;

fn main() -> folcomp::Result<()> {
    let m = bundled::heisenberg();
    let id = Group::new(&m)?.identity();
    let cfg = SimConfig::new(1e-2, 1.0, 2000, 42)?;

    let fx = TestFunction::with_fd_gradient(&m, "x", |p: &GroupPoint| p.coords()[0])?;
    let rep = gradient_bound_audit(&m, &fx, &id, 0.5, &cfg)?;
    println!(
        "|grad P_t f| = {:.4}, e^(-Kt) P_t|grad f| = {:.4}, verdict {:?}",
        rep.summary_value("grad_P_t_f").unwrap_or(f64::NAN),
        rep.rows.first().map_or(f64::NAN, |r| r.bound),
        rep.verdict
    );

    let fs = TestFunction::with_fd_gradient(&m, "sin(x+z)", |p: &GroupPoint| {
        let c = p.coords();
        (c[0] + c[2]).sin()
    })?;
    let rep = mixed_gradient_audit(&m, &fs, &id, &[0.1, 0.2, 0.5, 1.0], &cfg)?;
    for row in &rep.rows {
        println!("t = {:.2}: {:.4} <= {:.4}", row.t, row.measured, row.bound);
    }
    println!("empirical C = {:.4}, verdict {:?}", rep.summary_value("C").unwrap_or(f64::NAN), rep.verdict);
    Ok(())
}
