//! `--seed` lists: comma-separated seeds and inclusive ranges, e.g. `1,4-6,10`.

use std::collections::BTreeSet;
use std::fmt;

/// Longest list a single argument may expand to.
pub const MAX_SEEDS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedListError(pub String);

impl fmt::Display for SeedListError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid seed list: {}", self.0)
    }
}

impl std::error::Error for SeedListError {}

fn number(s: &str) -> Result<u64, SeedListError> {
    s.parse()
        .map_err(|_| SeedListError(format!("`{s}` is not a non-negative integer")))
}

/// Parses a seed list, keeping the given order. Duplicates are rejected
/// because each seed names an output file.
pub fn parse_seed_list(text: &str) -> Result<Vec<u64>, SeedListError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    if text.trim().is_empty() {
        return Err(SeedListError("empty".into()));
    }
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(SeedListError("empty entry".into()));
        }
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (number(a.trim())?, number(b.trim())?),
            None => {
                let v = number(part)?;
                (v, v)
            }
        };
        if hi < lo {
            return Err(SeedListError(format!("range `{part}` is reversed")));
        }
        if (hi - lo) >= MAX_SEEDS || out.len() as u64 + (hi - lo) >= MAX_SEEDS {
            return Err(SeedListError(format!("more than {MAX_SEEDS} seeds")));
        }
        for s in lo..=hi {
            if !seen.insert(s) {
                return Err(SeedListError(format!("seed {s} is listed twice")));
            }
            out.push(s);
        }
    }
    Ok(out)
}
