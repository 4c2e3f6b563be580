//! Flat `key = value` configuration files mirroring the `run` flags.

use std::collections::BTreeMap;

use dpm_core::DpmError;

pub const KEYS: &[&str] = &[
    "problem",
    "order",
    "grids",
    "geometry",
    "out",
    "basis-modes",
    "data-modes",
    "independent-side",
    "dt-factor",
    "final-time",
    "format",
    "dump-fields",
    "step-log",
    "lambda-variant",
    "rate",
    "startup",
    "check",
];

/// Parse `key = value` lines; `#` starts a comment. Underscores in keys are
/// accepted in place of dashes.
pub fn parse(text: &str) -> Result<BTreeMap<String, String>, DpmError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| DpmError::Parse { line: i + 1, message: m };
        let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got '{line}'")))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(err(format!("unknown key '{}'", k.trim())));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(err(format!("duplicate key '{key}'")));
        }
    }
    Ok(out)
}

pub fn parse_bool(key: &str, v: &str) -> Result<bool, DpmError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(DpmError::InvalidInput(format!("{key}: expected a boolean, got '{v}'"))),
    }
}
