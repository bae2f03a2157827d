//! Dataset construction: sequence descriptors, fingerprint similarity
//! targets, one-hot node features and enzyme-class edge features.

mod ct;
mod fingerprint;

pub use ct::{ct_counts, ct_features, triad_index, CtFeatures, CtGrouping, CtScaling, CT_DIM};
pub use fingerprint::{all_pairs, pairwise_tanimoto_targets, tanimoto, Fingerprint, TargetSet};

use crate::error::{Error, Result};
use crate::tensor::Dense;

pub const ENZYME_CLASSES: usize = 7;

/// Identity matrix used as node features when nodes carry no descriptors.
pub fn one_hot_nodes(n: usize) -> Result<Dense> {
    if n == 0 {
        return Err(Error::InvalidArgument("one-hot features need at least one node".into()));
    }
    Ok(Dense::identity(n))
}

/// Presence vector over the seven top-level enzyme classes.
pub fn enzyme_edge_features(classes: &[u8]) -> Result<Vec<f64>> {
    if classes.is_empty() {
        return Err(Error::InvalidArgument("no enzyme classes given".into()));
    }
    let mut out = vec![0.0; ENZYME_CLASSES];
    for &c in classes {
        if !(1..=ENZYME_CLASSES as u8).contains(&c) {
            return Err(Error::InvalidArgument(format!("enzyme class {c} outside 1..=7")));
        }
        out[c as usize - 1] = 1.0;
    }
    Ok(out)
}

/// Top-level class from an EC number such as `2.7.1.1` or `EC:1.1.1.1`.
pub fn ec_class(ec: &str) -> Result<u8> {
    let trimmed = ec.trim();
    let body = trimmed
        .strip_prefix("EC:")
        .or_else(|| trimmed.strip_prefix("EC "))
        .or_else(|| trimmed.strip_prefix("ec:"))
        .unwrap_or(trimmed);
    let first = body.split('.').next().unwrap_or("");
    let class: u8 = first
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("cannot read EC number `{ec}`")))?;
    if !(1..=ENZYME_CLASSES as u8).contains(&class) {
        return Err(Error::InvalidArgument(format!("EC class {class} outside 1..=7 in `{ec}`")));
    }
    Ok(class)
}
