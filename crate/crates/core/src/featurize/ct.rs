//! Conjoint-triad composition of protein sequences.
//!
//! Residues are mapped onto seven classes and every window of three
//! consecutive classified residues is counted as one of 7³ = 343 triads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CT_CLASSES: usize = 7;
pub const CT_DIM: usize = CT_CLASSES * CT_CLASSES * CT_CLASSES;

const DEFAULT_GROUPS: &str = include_str!("../../data/ct_groups.tsv");

/// Residue letter to class (1..=7) table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CtGrouping {
    classes: [Option<u8>; 26],
}

impl Default for CtGrouping {
    fn default() -> Self {
        CtGrouping::from_tsv(DEFAULT_GROUPS).expect("bundled grouping table is valid")
    }
}

impl CtGrouping {
    /// Parses `residue<TAB>class` lines; `#` starts a comment.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut classes = [None; 26];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(res), Some(class), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::InvalidArgument(format!(
                    "grouping line {}: expected `residue<TAB>class`",
                    lineno + 1
                )));
            };
            let letter = match res.trim().as_bytes() {
                [b] if b.is_ascii_alphabetic() => b.to_ascii_uppercase(),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "grouping line {}: `{res}` is not a single residue letter",
                        lineno + 1
                    )))
                }
            };
            let class: u8 = class.trim().parse().map_err(|_| {
                Error::InvalidArgument(format!("grouping line {}: bad class `{class}`", lineno + 1))
            })?;
            if !(1..=CT_CLASSES as u8).contains(&class) {
                return Err(Error::InvalidArgument(format!(
                    "grouping line {}: class {class} outside 1..=7",
                    lineno + 1
                )));
            }
            classes[(letter - b'A') as usize] = Some(class);
        }
        Ok(CtGrouping { classes })
    }

    pub fn class_of(&self, residue: u8) -> Option<u8> {
        let up = residue.to_ascii_uppercase();
        up.is_ascii_uppercase()
            .then(|| self.classes[(up - b'A') as usize])
            .flatten()
    }
}

/// Zero-based position of triad `(c1, c2, c3)` with classes in 1..=7.
pub fn triad_index(c1: u8, c2: u8, c3: u8) -> usize {
    49 * (c1 as usize - 1) + 7 * (c2 as usize - 1) + (c3 as usize - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CtScaling {
    /// Counts divided by the number of counted windows.
    #[default]
    Frequency,
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtFeatures {
    /// 343 entries.
    pub values: Vec<f64>,
    /// Windows made entirely of classified residues.
    pub windows: usize,
    /// Set when no window could be counted; `values` is then all zero.
    pub warning: bool,
}

/// Raw triad counts and the number of counted windows. Windows touching
/// an unclassified residue (ambiguity codes, gaps, stop symbols) are skipped.
pub fn ct_counts(sequence: &str, grouping: &CtGrouping) -> (Vec<u32>, usize) {
    let classes: Vec<Option<u8>> = sequence.bytes().map(|b| grouping.class_of(b)).collect();
    let mut counts = vec![0u32; CT_DIM];
    let mut windows = 0;
    for w in classes.windows(3) {
        if let [Some(a), Some(b), Some(c)] = *w {
            counts[triad_index(a, b, c)] += 1;
            windows += 1;
        }
    }
    (counts, windows)
}

pub fn ct_features(sequence: &str, grouping: &CtGrouping, scaling: CtScaling) -> CtFeatures {
    let (counts, windows) = ct_counts(sequence, grouping);
    if windows == 0 {
        return CtFeatures {
            values: vec![0.0; CT_DIM],
            windows,
            warning: true,
        };
    }
    let denom = match scaling {
        CtScaling::Frequency => windows as f64,
        CtScaling::Raw => 1.0,
    };
    CtFeatures {
        values: counts.iter().map(|&c| c as f64 / denom).collect(),
        windows,
        warning: false,
    }
}
