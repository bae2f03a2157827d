//! Seeded synthetic datasets for tests, the acceptance suite and the shipped fixture.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::{all_pairs, tanimoto, Fingerprint};
use crate::graph::{build_knn_graph, Graph, Pattern};
use crate::tensor::Dense;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TanimotoSpec {
    pub nodes: usize,
    pub bits: usize,
    pub k: usize,
    pub labeled: usize,
    pub unlabeled: usize,
    /// Fingerprints are noisy copies of this many random prototypes.
    pub prototypes: usize,
    pub flip_probability: f64,
    /// Attach each edge's similarity as a one-column edge feature.
    pub edge_feature: bool,
    pub seed: u64,
}

impl Default for TanimotoSpec {
    fn default() -> Self {
        TanimotoSpec {
            nodes: 60,
            bits: 64,
            k: 4,
            labeled: 400,
            unlabeled: 0,
            prototypes: 4,
            flip_probability: 0.15,
            edge_feature: true,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TanimotoDataset {
    pub graph: Graph,
    pub fingerprints: Vec<Fingerprint>,
    pub similarity: Dense,
    pub patterns: Vec<Pattern>,
}

pub fn node_ids(n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|k| format!("n{k:0width$}")).collect()
}

/// Random fingerprints grouped around a few prototypes, a KNN graph over
/// their Tanimoto similarity with one-hot node features, and distinct
/// random node pairs labeled with the true Tanimoto value.
pub fn tanimoto_dataset(spec: &TanimotoSpec) -> Result<TanimotoDataset> {
    let n = spec.nodes;
    if spec.prototypes == 0 || spec.bits == 0 {
        return Err(Error::InvalidArgument("need at least one prototype and one bit".into()));
    }
    let max_pairs = n * n.saturating_sub(1) / 2;
    if spec.labeled + spec.unlabeled > max_pairs {
        return Err(Error::InvalidArgument(format!(
            "{} pairs requested but only {max_pairs} exist",
            spec.labeled + spec.unlabeled
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let protos: Vec<Vec<bool>> = (0..spec.prototypes)
        .map(|_| (0..spec.bits).map(|_| rng.random_bool(0.5)).collect())
        .collect();
    let ids = node_ids(n);
    let mut fingerprints = Vec::with_capacity(n);
    for id in &ids {
        let proto = &protos[rng.random_range(0..spec.prototypes)];
        let mut bits: Vec<bool> = proto
            .iter()
            .map(|&b| b ^ rng.random_bool(spec.flip_probability))
            .collect();
        if !bits.iter().any(|&b| b) {
            bits[0] = true;
        }
        fingerprints.push(Fingerprint::from_bits(id.clone(), &bits));
    }

    let mut similarity = Dense::identity(n);
    for a in 0..n {
        for b in a + 1..n {
            let s = tanimoto(&fingerprints[a], &fingerprints[b])?;
            similarity.set(a, b, s);
            similarity.set(b, a, s);
        }
    }
    let graph = build_knn_graph(ids.clone(), &similarity, spec.k, None, spec.edge_feature)?;

    let mut pairs = all_pairs(&ids);
    pairs.shuffle(&mut rng);
    let index: std::collections::HashMap<&str, usize> = ids.iter().enumerate().map(|(k, s)| (s.as_str(), k)).collect();
    let mut patterns = Vec::with_capacity(spec.labeled + spec.unlabeled);
    for (k, (a, b)) in pairs.into_iter().take(spec.labeled + spec.unlabeled).enumerate() {
        let label = (k < spec.labeled).then(|| similarity.get(index[a.as_str()], index[b.as_str()]));
        patterns.push(Pattern::new(a, b, label)?);
    }
    Ok(TanimotoDataset {
        graph,
        fingerprints,
        similarity,
        patterns,
    })
}

/// Erdős–Rényi graph with uniform node features in [-1, 1] and, when
/// `edge_dim > 0`, uniform edge features.
pub fn random_graph(n: usize, edge_probability: f64, feature_dim: usize, edge_dim: usize, seed: u64) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(edge_probability) {
                edges.push((a, b));
            }
        }
    }
    let mut uniform = |len: usize| (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect::<Vec<f64>>();
    let features = Dense::from_vec(n, feature_dim, uniform(n * feature_dim))?;
    let edge_features = if edge_dim > 0 {
        Some(Dense::from_vec(edges.len(), edge_dim, uniform(edges.len() * edge_dim))?)
    } else {
        None
    };
    Graph::new(node_ids(n), edges, features, edge_features)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dataset_shape() {
        let ds = tanimoto_dataset(&TanimotoSpec::default()).unwrap();
        assert_eq!(ds.graph.node_count(), 60);
        assert_eq!(ds.patterns.len(), 400);
        assert!(ds.patterns.iter().all(Pattern::is_labeled));
        assert!((0..60).all(|v| ds.graph.degree(v) >= 4));
        let labels: Vec<f64> = ds.patterns.iter().filter_map(|p| p.label).collect();
        let lo = labels.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo > 0.4, "targets span [{lo}, {hi}]");
    }

    #[test]
    fn pairs_are_distinct() {
        let ds = tanimoto_dataset(&TanimotoSpec::default()).unwrap();
        let mut keys: Vec<(String, String)> = ds
            .patterns
            .iter()
            .map(|p| if p.i < p.j { (p.i.clone(), p.j.clone()) } else { (p.j.clone(), p.i.clone()) })
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 400);
    }

    #[test]
    fn seeded() {
        let a = tanimoto_dataset(&TanimotoSpec::default()).unwrap();
        let b = tanimoto_dataset(&TanimotoSpec::default()).unwrap();
        assert_eq!(a.patterns, b.patterns);
        assert_eq!(a.similarity, b.similarity);
    }

    #[test]
    fn unlabeled_tail() {
        let spec = TanimotoSpec {
            nodes: 12,
            labeled: 5,
            unlabeled: 3,
            ..TanimotoSpec::default()
        };
        let ds = tanimoto_dataset(&spec).unwrap();
        assert_eq!(ds.patterns.iter().filter(|p| !p.is_labeled()).count(), 3);
    }

    #[test]
    fn random_graph_dims() {
        let g = random_graph(10, 0.3, 4, 2, 1).unwrap();
        assert_eq!(g.feature_dim(), 4);
        assert_eq!(g.edge_feature_dim(), 2);
    }
}
