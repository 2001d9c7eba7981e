//! Skewed and ∇°-parallel transport along a Heisenberg geodesic, and the
//! index form of a horizontal field in both the Riemannian and horizontal
//! forms, which agree for totally geodesic foliations.
//!
//! cargo run --release --example transport_index

use std::f64::consts::PI;

use folcomp::bundled;
use folcomp::geodesy::{exp_map_steps, Geometry, IndexMode};
use folcomp::{AlgebraVector, TransportKind};

fn main() -> folcomp::Result<()> {
    let m = bundled::heisenberg();
    let geo = Geometry::new(&m)?;
    let id = geo.group().identity();
    let rec = exp_map_steps(&m, &id, &AlgebraVector::new(vec![0.8, 0.0, 0.6]), 1.5, 1500)?;

    let x0 = AlgebraVector::new(vec![0.0, 1.0, 0.0]);
    for kind in [TransportKind::Skewed, TransportKind::Circ] {
        let x1 = geo.transport(&rec, &x0, kind)?;
        println!("{kind:?}: {:?} -> {:?}, norm {:.12}", x0.coefficients(), x1.coefficients(), m.norm(&x1));
    }

    let r = rec.length;
    let field = |t: f64| AlgebraVector::new(vec![0.0, 0.3 + 0.2 * t + 0.5 * (PI * t / r).sin(), 0.0]);
    let riem = geo.index_form(&rec, &field, IndexMode::Riemannian)?;
    let horiz = geo.index_form(&rec, &field, IndexMode::Horizontal)?;
    println!("index form: Riemannian {riem:.10}, horizontal {horiz:.10}, gap {:.1e}", (riem - horiz).abs());
    Ok(())
}
