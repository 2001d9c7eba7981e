//! Geodesics on the Heisenberg group and the Berger sphere: the exponential
//! map, energy conservation, shooting back to the endpoint and the cut
//! certificate.
//!
//! cargo run --release --example geodesics

use folcomp::bundled;
use folcomp::geodesy::{cut_certificate, exp_map, Geometry};
use folcomp::{AlgebraVector, GroupPoint};

fn main() -> folcomp::Result<()> {
    for m in [bundled::heisenberg(), bundled::su2_berger()] {
        let geo = Geometry::new(&m)?;
        let id = geo.group().identity();
        println!("{}", m.name());
        for v in [vec![1.0, 0.0, 0.0], vec![0.8, 0.0, 0.6], vec![0.3, 0.4, 1.2]] {
            let rec = exp_map(&m, &id, &AlgebraVector::new(v.clone()), 1.0)?;
            let end = rec.endpoint().clone();
            let (back, shot) = geo.distance(&id, &end)?;
            println!(
                "  v = {v:?}: length {:.6}, energy drift {:.1e}, end {:?}",
                rec.length,
                rec.energy_drift(),
                end.coords().iter().map(|c| (c * 1e6).round() / 1e6).collect::<Vec<_>>()
            );
            println!(
                "    shot back: d = {:.6} ({:?}, {:?}, {} starts converged)",
                back.length, shot.certificate, shot.cut, shot.converged_starts
            );
        }
    }

    // antipodal point of the round sphere: many minimisers, no certificate
    let round = bundled::su2_round();
    let cert = cut_certificate(&round, &GroupPoint::Quat([1.0, 0.0, 0.0, 0.0]), &GroupPoint::Quat([-1.0, 0.0, 0.0, 0.0]))?;
    println!("su2_round antipode: {cert:?}");
    Ok(())
}
