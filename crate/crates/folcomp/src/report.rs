//! Audit tables, CSV formatting and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The audit's hypotheses do not hold for this model.
    Inapplicable,
    /// Too few certified rows to decide.
    Uncertified,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail | Verdict::Uncertified => 2,
            Verdict::Inapplicable => 3,
        }
    }
}

/// One measured quantity against its theoretical bound. A row passes when
/// `measured <= bound + slack`; `slack` already folds in every tolerance
/// (absolute, relative and standard-error terms).
#[derive(Debug, Clone, Serialize)]
pub struct AuditRow {
    pub r: f64,
    pub t: f64,
    pub direction_id: usize,
    pub label: String,
    pub measured: f64,
    pub bound: f64,
    pub slack: f64,
    pub margin: f64,
    /// Finite-difference or Monte Carlo error estimate for `measured`.
    pub error: f64,
    pub certified: bool,
}

impl AuditRow {
    pub fn new(label: impl Into<String>, measured: f64, bound: f64, slack: f64) -> Self {
        Self {
            r: f64::NAN,
            t: f64::NAN,
            direction_id: 0,
            label: label.into(),
            measured,
            bound,
            slack,
            margin: bound - measured,
            error: 0.0,
            certified: true,
        }
    }

    pub fn at_r(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    pub fn at_t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn direction(mut self, id: usize) -> Self {
        self.direction_id = id;
        self
    }

    pub fn with_error(mut self, e: f64) -> Self {
        self.error = e;
        self
    }

    pub fn uncertified(mut self) -> Self {
        self.certified = false;
        self
    }

    pub fn passes(&self) -> bool {
        self.measured <= self.bound + self.slack
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub name: String,
    pub rows: Vec<AuditRow>,
    /// Points dropped because their distances could not be certified.
    pub skipped: usize,
    pub verdict: Verdict,
    /// Scalar diagnostics (fitted slopes, fractions, constants).
    pub summary: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            rows: Vec::new(),
            skipped: 0,
            verdict: Verdict::Pass,
            summary: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn inapplicable(name: impl Into<String>, note: impl Into<String>) -> Self {
        let mut r = Self::new(name);
        r.verdict = Verdict::Inapplicable;
        r.notes.push(note.into());
        r
    }

    /// Pass iff every certified row passes; uncertified rows are reported only.
    pub fn finalize(mut self) -> Self {
        if self.verdict == Verdict::Inapplicable {
            return self;
        }
        let failed = self.rows.iter().any(|r| r.certified && !r.passes());
        self.verdict = if failed { Verdict::Fail } else { Verdict::Pass };
        self
    }

    pub fn summary_value(&self, key: &str) -> Option<f64> {
        self.summary.get(key).copied()
    }

    pub fn max_measured(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.certified)
            .map(|r| r.measured)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "r,t,direction_id,label,measured,bound,slack,margin,error,certificate\n",
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_f64(row.r),
                fmt_f64(row.t),
                row.direction_id,
                row.label,
                fmt_f64(row.measured),
                fmt_f64(row.bound),
                fmt_f64(row.slack),
                fmt_f64(row.margin),
                fmt_f64(row.error),
                if row.certified { "certified" } else { "uncertified" }
            );
        }
        out
    }
}

/// Fixed 17-significant-digit scientific formatting.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Record of one CLI run, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command_line: String,
    pub model_hash: Option<String>,
    /// Hash over the model text and all flags that determine the outputs.
    pub input_hash: String,
    pub seed: Option<u64>,
    pub tool_version: String,
    /// Worker threads; outputs do not depend on it.
    pub threads: usize,
    pub config: serde_json::Value,
    pub started: String,
    pub finished: String,
    pub wall_seconds: f64,
    pub outputs: Vec<PathBuf>,
    pub verdicts: BTreeMap<String, Verdict>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_numbers_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, std::f64::consts::PI] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn verdict_ignores_uncertified_rows() {
        let mut rep = AuditReport::new("t");
        rep.rows.push(AuditRow::new("a", 1.0, 2.0, 0.0));
        rep.rows.push(AuditRow::new("b", 5.0, 2.0, 0.0).uncertified());
        assert_eq!(rep.clone().finalize().verdict, Verdict::Pass);
        rep.rows.push(AuditRow::new("c", 2.1, 2.0, 0.05));
        assert_eq!(rep.finalize().verdict, Verdict::Fail);
    }

    #[test]
    fn empty_report_passes() {
        assert_eq!(AuditReport::new("e").finalize().verdict, Verdict::Pass);
    }
}
