//! Model files shipped with the crate, embedded at compile time.

use crate::error::{Error, Result};
use crate::model::{canonical_variation, validate_model, validate_model_relaxed, FoliatedModel, ModelSpec};

const FILES: &[(&str, &str)] = &[
    ("heisenberg", include_str!("../models/heisenberg.json")),
    ("engel_step3", include_str!("../models/engel_step3.json")),
    ("su2_berger", include_str!("../models/su2_berger.json")),
    ("su2_round", include_str!("../models/su2_round.json")),
    ("abelian3", include_str!("../models/abelian3.json")),
    ("flat3", include_str!("../models/flat3.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    FILES.iter().map(|(n, _)| *n)
}

/// Raw JSON of a bundled model (`name` with or without `.json`).
pub fn source(name: &str) -> Option<&'static str> {
    let stem = name.strip_suffix(".json").unwrap_or(name);
    FILES.iter().find(|(n, _)| *n == stem).map(|(_, s)| *s)
}

pub fn spec(name: &str) -> Result<ModelSpec> {
    let text = source(name).ok_or_else(|| Error::Malformed(format!("no bundled model '{name}'")))?;
    ModelSpec::from_json_str(text)
}

pub fn load(name: &str) -> Result<FoliatedModel> {
    validate_model(spec(name)?)
}

/// Bundled model validated without enforcing the geometric certificates.
pub fn load_relaxed(name: &str) -> Result<FoliatedModel> {
    validate_model_relaxed(spec(name)?)
}

pub fn heisenberg() -> FoliatedModel {
    load("heisenberg").expect("bundled heisenberg is valid")
}

pub fn engel() -> FoliatedModel {
    load("engel_step3").expect("bundled engel is valid")
}

pub fn su2_round() -> FoliatedModel {
    load("su2_round").expect("bundled su2 is valid")
}

/// Berger sphere, vertical block scaled by `1/2`.
pub fn su2_berger() -> FoliatedModel {
    load("su2_berger").expect("bundled berger is valid")
}

/// `R^3` with `H = span(e1, e2)`; not bracket generating.
pub fn abelian3() -> FoliatedModel {
    load_relaxed("abelian3").expect("bundled abelian3 is well formed")
}

/// `R^3` with every direction horizontal.
pub fn flat3() -> FoliatedModel {
    load_relaxed("flat3").expect("bundled flat3 is well formed")
}

/// Canonical variation of a bundled model.
pub fn varied(name: &str, eps: f64) -> Result<FoliatedModel> {
    canonical_variation(&load(name)?, eps)
}
