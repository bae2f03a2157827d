use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.16;

/// Index sets for one repeat × fold. All three lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub repeat: usize,
    pub fold: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn kfold_split(n: usize, k: usize, repeats: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    kfold_split_with_validation(n, k, repeats, seed, DEFAULT_VALIDATION_FRACTION)
}

/// Repeated k-fold partition. Each repeat shuffles with its own RNG stream,
/// cuts k folds whose sizes differ by at most one, and carves
/// `round(fraction * remaining)` validation indices from each training part.
pub fn kfold_split_with_validation(
    n: usize,
    k: usize,
    repeats: usize,
    seed: u64,
    fraction: f64,
) -> Result<Vec<FoldSplit>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds the {n} patterns")));
    }
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be positive".into()));
    }
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("validation fraction {fraction} outside [0, 1)")));
    }

    let mut out = Vec::with_capacity(k * repeats);
    for repeat in 0..repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(repeat as u64);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);

        let (base, extra) = (n / k, n % k);
        let mut folds = Vec::with_capacity(k);
        let mut start = 0;
        for f in 0..k {
            let size = base + usize::from(f < extra);
            folds.push(&order[start..start + size]);
            start += size;
        }

        for (fold, test) in folds.iter().enumerate() {
            let mut rest: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != fold)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            rest.shuffle(&mut rng);
            let n_val = ((fraction * rest.len() as f64).round() as usize).min(rest.len().saturating_sub(1));
            let mut validation = rest[..n_val].to_vec();
            let mut train = rest[n_val..].to_vec();
            let mut test = test.to_vec();
            validation.sort_unstable();
            train.sort_unstable();
            test.sort_unstable();
            out.push(FoldSplit {
                repeat,
                fold,
                train,
                validation,
                test,
            });
        }
    }
    Ok(out)
}
