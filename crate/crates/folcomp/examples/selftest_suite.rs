//! Runs the cheap criteria of the validation suite in the quick profile and
//! prints their detail lines.
//!
//! cargo run --release --example selftest_suite

use folcomp::suite::{run_criterion, SuiteConfig};

fn main() -> folcomp::Result<()> {
    let cfg = SuiteConfig::quick(42);
    for id in [1, 2, 3, 4, 7] {
        let out = run_criterion(id, &cfg)?;
        println!("{id:>2} {} {} ({:.1}s)", out.name, if out.pass { "PASS" } else { "FAIL" }, out.seconds);
        for line in &out.details {
            println!("     {line}");
        }
        for t in &out.tables {
            println!("     table {} ({} lines)", t.file, t.content.lines().count());
        }
    }
    Ok(())
}
