use std::collections::{BTreeSet, HashMap};

use log::warn;

use crate::error::{Error, Result};
use crate::graph::Pattern;

/// Fixed-length binary fingerprint, packed 64 bits per word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    pub id: String,
    words: Vec<u64>,
    len: usize,
}

impl Fingerprint {
    pub fn from_bits(id: impl Into<String>, bits: &[bool]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (k, &b) in bits.iter().enumerate() {
            if b {
                words[k / 64] |= 1 << (k % 64);
            }
        }
        Fingerprint {
            id: id.into(),
            words,
            len: bits.len(),
        }
    }

    /// Parses a string of `0`/`1` characters.
    pub fn from_bitstring(id: impl Into<String>, bits: &str) -> Result<Self> {
        let id = id.into();
        let parsed = bits
            .bytes()
            .map(|c| match c {
                b'0' => Ok(false),
                b'1' => Ok(true),
                other => Err(Error::InvalidArgument(format!(
                    "fingerprint `{id}` contains `{}`",
                    other as char
                ))),
            })
            .collect::<Result<Vec<bool>>>()?;
        Ok(Fingerprint::from_bits(id, &parsed))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, k: usize) -> bool {
        self.words[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn to_bitstring(&self) -> String {
        (0..self.len).map(|k| if self.bit(k) { '1' } else { '0' }).collect()
    }
}

/// `|a AND b| / |a OR b|`.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64> {
    if a.len != b.len {
        return Err(Error::InvalidArgument(format!(
            "fingerprint lengths differ: `{}` has {}, `{}` has {}",
            a.id, a.len, b.id, b.len
        )));
    }
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    if union == 0 {
        return Err(Error::UndefinedSimilarity(format!(
            "`{}` and `{}` both have no set bits",
            a.id, b.id
        )));
    }
    Ok(inter as f64 / union as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub patterns: Vec<Pattern>,
    pub labeled: usize,
    pub unlabeled: usize,
    pub duplicates_dropped: usize,
}

/// One pattern per distinct unordered pair. Pairs whose compounds both have
/// fingerprints get the Tanimoto coefficient as label; any other pair is
/// emitted unlabeled.
pub fn pairwise_tanimoto_targets(
    fingerprints: &[Fingerprint],
    pairs: &[(String, String)],
) -> Result<TargetSet> {
    let mut by_id: HashMap<&str, &Fingerprint> = HashMap::with_capacity(fingerprints.len());
    for fp in fingerprints {
        if by_id.insert(fp.id.as_str(), fp).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate fingerprint id `{}`", fp.id)));
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = TargetSet {
        patterns: Vec::with_capacity(pairs.len()),
        labeled: 0,
        unlabeled: 0,
        duplicates_dropped: 0,
    };
    for (a, b) in pairs {
        let key = if a <= b { (a, b) } else { (b, a) };
        if !seen.insert(key) {
            out.duplicates_dropped += 1;
            continue;
        }
        let pattern = match (by_id.get(a.as_str()), by_id.get(b.as_str())) {
            (Some(fa), Some(fb)) => {
                out.labeled += 1;
                Pattern::labeled(a.clone(), b.clone(), tanimoto(fa, fb)?)?
            }
            _ => {
                out.unlabeled += 1;
                Pattern::unlabeled(a.clone(), b.clone())?
            }
        };
        out.patterns.push(pattern);
    }
    if out.duplicates_dropped > 0 {
        warn!("dropped {} duplicate pairs", out.duplicates_dropped);
    }
    Ok(out)
}

/// Every unordered pair of `ids`, in input order.
pub fn all_pairs(ids: &[String]) -> Vec<(String, String)> {
    let mut out = Vec::with_capacity(ids.len() * ids.len().saturating_sub(1) / 2);
    for (k, a) in ids.iter().enumerate() {
        for b in &ids[k + 1..] {
            out.push((a.clone(), b.clone()));
        }
    }
    out
}
