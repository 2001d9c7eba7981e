//! Diameter of the Berger sphere against the Bonnet-Myers bound
//! `π sqrt(n/K)`, from certified distances between random pairs.
//!
//! cargo run --release --example bonnet_myers

use folcomp::bundled;
use folcomp::comparison::bonnet_myers_audit;
use folcomp::connection::frak_r_decomposed;

fn main() -> folcomp::Result<()> {
    let m = bundled::su2_berger();
    let k = frak_r_decomposed(&m).k;
    let bound = std::f64::consts::PI * (m.n() as f64 / k).sqrt();
    let pairs = 300;
    let rep = bonnet_myers_audit(&m, pairs, 42)?;
    println!("K = {k:.6}, bound {bound:.6}");
    println!(
        "max certified distance {:.6} over {} of {pairs} pairs, verdict {:?}",
        rep.summary_value("max_distance").unwrap_or(f64::NAN),
        rep.summary_value("certified_pairs").unwrap_or(0.0),
        rep.verdict
    );
    // K <= 0 has no diameter bound
    match bonnet_myers_audit(&bundled::heisenberg(), 10, 42) {
        Err(e) => println!("heisenberg: {e}"),
        Ok(_) => unreachable!("heisenberg has K = -1"),
    }
    Ok(())
}
