//! Prints the Ricci-like tensor, its lower bound and the component matrices
//! for every bundled model, plus the canonical-variation family of SU(2).
//!
//! cargo run --example tensor_report

use folcomp::bundled;
use folcomp::connection::frak_r_decomposed;
use folcomp::model::canonical_variation;

fn print_matrix(label: &str, rows: &[Vec<f64>]) {
    println!("  {label}:");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>9.5}")).collect();
        println!("    [{}]", cells.join(" "));
    }
}

fn main() -> folcomp::Result<()> {
    let models = [
        bundled::heisenberg(),
        bundled::engel(),
        bundled::su2_round(),
        bundled::su2_berger(),
        bundled::abelian3(),
    ];
    for m in &models {
        let report = frak_r_decomposed(m);
        println!("{} (n = {}, m = {})", m.name(), m.n(), m.dim() - m.n());
        print_matrix("frak_r", &report.frak_r_matrix);
        print_matrix("(J,J)_H", &report.components.j_j);
        println!(
            "  K = {:.6}, Yang-Mills residual = {:.1e}, decomposition residual = {:.1e}",
            report.k, report.yang_mills_residual, report.decomposition_residual
        );
        if let Some(b) = report.gb_total_bound {
            println!("  gradient-bound constant = {b:.6}");
        }
        if let Some(dev) = report.carnot_formula_deviation {
            println!("  closed-form Carnot entries deviate by {dev:.3e}");
        }
    }

    println!("\ncanonical variation of su2_round:");
    let round = bundled::su2_round();
    for eps in [0.5, 1.0, 2.0, 4.0] {
        let k = frak_r_decomposed(&canonical_variation(&round, eps)?).k;
        println!("  eps = {eps:<4} K = {k:.6}");
    }
    Ok(())
}
