//! Acceptance run: executes `folcomp selftest --seed 42` twice and prints one
//! pass/fail line per criterion. Criteria 1 to 11 come from the first run's
//! summary; criterion 12 compares the CSV files of both runs byte for byte.
//! The second run uses two worker threads, so agreement also shows that the
//! outputs do not depend on scheduling.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

fn selftest(dir: &Path, threads: usize) -> (i32, f64) {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_folcomp"))
        .args(["selftest", "--seed", "42", "--threads", &threads.to_string(), "--out"])
        .arg(dir)
        .stdout(std::process::Stdio::null())
        .status()
        .expect("folcomp runs");
    (status.code().unwrap_or(-1), start.elapsed().as_secs_f64())
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .expect("output directory")
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).expect("csv readable"),
            )
        })
        .collect()
}

fn main() {
    let root = tempfile::tempdir().expect("temp dir");
    let (a, b) = (root.path().join("a"), root.path().join("b"));

    let (code_a, secs_a) = selftest(&a, 1);
    let summary: serde_json::Value = std::fs::read_to_string(a.join("summary.json"))
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok())
        .unwrap_or(serde_json::Value::Null);
    let criteria = summary["criteria"].as_array().cloned().unwrap_or_default();

    let mut failures = 0;
    for id in 1..=11u64 {
        let entry = criteria.iter().find(|c| c["id"].as_u64() == Some(id));
        let (pass, name, secs) = match entry {
            Some(c) => (
                c["pass"].as_bool().unwrap_or(false),
                c["name"].as_str().unwrap_or("?").to_string(),
                c["seconds"].as_f64().unwrap_or(f64::NAN),
            ),
            None => (false, "missing from summary".to_string(), f64::NAN),
        };
        if !pass {
            failures += 1;
        }
        println!("criterion {id:>2}: {} {name} ({secs:.1}s)", if pass { "PASS" } else { "FAIL" });
        if let Some(c) = entry {
            for line in c["details"].as_array().into_iter().flatten() {
                println!("      {}", line.as_str().unwrap_or(""));
            }
        }
    }

    let (code_b, secs_b) = selftest(&b, 2);
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    let differing: Vec<&String> = fa
        .keys()
        .chain(fb.keys())
        .filter(|k| fa.get(*k) != fb.get(*k))
        .collect();
    let identical = !fa.is_empty() && differing.is_empty();
    if !identical {
        failures += 1;
    }
    println!(
        "criterion 12: {} reproducibility ({} CSV files, {} differ; runs took {secs_a:.0}s and {secs_b:.0}s)",
        if identical { "PASS" } else { "FAIL" },
        fa.len(),
        differing.len()
    );
    println!("selftest exit codes: {code_a}, {code_b}");

    if failures > 0 || code_a != 0 || code_b != 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
