//! The C benchmark skeleton and its placeholder substitution.
//!
//! Placeholders are written `@@NAME@@` and each must occur exactly once in
//! the skeleton. Rendering fails if a placeholder is missing from the
//! template or from the substitutions, or if an unknown key is supplied.

use std::collections::BTreeMap;

use crate::{Error, Result};

/// The stand-alone benchmark harness the emitter fills in.
pub const HARNESS: &str = include_str!("../../templates/harness.c.in");

pub const PLACEHOLDERS: [&str; 10] = [
    "MARKER_HEADER",
    "DTYPE",
    "DIMS",
    "DECLARATIONS",
    "OMP_PRAGMA",
    "BLOCK_LOOPS",
    "KERNEL_BODY",
    "OMP_INIT_PRAGMA",
    "MARKER_BEGIN",
    "MARKER_END",
];

fn token(name: &str) -> String {
    format!("@@{name}@@")
}

/// Substitutes every placeholder of `template` with the matching entry of `subs`.
pub fn render(template: &str, subs: &BTreeMap<&str, String>) -> Result<String> {
    for key in subs.keys() {
        if !PLACEHOLDERS.contains(key) {
            return Err(Error::Template(format!("unknown placeholder `{key}`")));
        }
    }
    let mut out = template.to_string();
    for name in PLACEHOLDERS {
        let tok = token(name);
        match template.matches(&tok).count() {
            1 => {}
            0 => return Err(Error::Template(format!("template lacks placeholder {tok}"))),
            n => {
                return Err(Error::Template(format!(
                    "placeholder {tok} occurs {n} times, expected once"
                )))
            }
        }
        let value = subs
            .get(name)
            .ok_or_else(|| Error::Template(format!("no substitution for {tok}")))?;
        out = out.replacen(&tok, value, 1);
    }
    if let Some(pos) = out.find("@@") {
        let tail: String = out[pos..].chars().take(40).collect();
        return Err(Error::Template(format!(
            "unsubstituted marker left in output near `{tail}`"
        )));
    }
    Ok(out)
}
