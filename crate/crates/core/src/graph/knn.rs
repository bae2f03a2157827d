use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Dense;

const SYMMETRY_TOL: f64 = 1e-9;

/// `true` when candidate `(sa, a)` ranks ahead of `(sb, b)`: higher
/// similarity first, lower index on ties.
fn ranks_before(sa: f64, a: usize, sb: f64, b: usize) -> bool {
    match sa.partial_cmp(&sb).unwrap_or(Ordering::Equal) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a < b,
    }
}

fn validate(similarity: &Dense, k: usize) -> Result<()> {
    let (n, m) = similarity.shape();
    if n != m {
        return Err(Error::InvalidArgument(format!(
            "similarity matrix must be square, got {n}x{m}"
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 1 <= k < n, got k={k} with n={n}"
        )));
    }
    if !similarity.is_finite() {
        return Err(Error::InvalidArgument("similarity matrix contains non-finite values".into()));
    }
    for r in 0..n {
        for c in (r + 1)..n {
            if (similarity.get(r, c) - similarity.get(c, r)).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidArgument(format!(
                    "similarity matrix is not symmetric at ({r}, {c})"
                )));
            }
        }
    }
    Ok(())
}

/// Undirected KNN edge set: each node picks its `k` most similar other
/// nodes (ties to the lower index) and the directed picks are unioned.
/// The diagonal is ignored. Edges come back as sorted `(min, max)` pairs.
pub fn knn_edges(similarity: &Dense, k: usize) -> Result<Vec<(usize, usize)>> {
    validate(similarity, k)?;
    let n = similarity.rows();
    let mut edges = Vec::with_capacity(n * k);
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for u in 0..n {
        best.clear();
        let row = similarity.row(u);
        for (v, &s) in row.iter().enumerate() {
            if v == u {
                continue;
            }
            if best.len() == k {
                let (ws, wv) = best[k - 1];
                if !ranks_before(s, v, ws, wv) {
                    continue;
                }
                best.pop();
            }
            let pos = best
                .iter()
                .position(|&(bs, bv)| ranks_before(s, v, bs, bv))
                .unwrap_or(best.len());
            best.insert(pos, (s, v));
        }
        edges.extend(best.iter().map(|&(_, v)| (u.min(v), u.max(v))));
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(edges)
}

/// KNN graph over `node_ids`. Node features default to one-hot rows; with
/// `similarity_edge_feature` each edge carries its similarity as a single
/// feature column.
pub fn build_knn_graph(
    node_ids: Vec<String>,
    similarity: &Dense,
    k: usize,
    node_features: Option<Dense>,
    similarity_edge_feature: bool,
) -> Result<Graph> {
    if node_ids.len() != similarity.rows() {
        return Err(Error::InvalidShape(format!(
            "{} ids for a {}-row similarity matrix",
            node_ids.len(),
            similarity.rows()
        )));
    }
    let edges = knn_edges(similarity, k)?;
    let features = node_features.unwrap_or_else(|| Dense::identity(node_ids.len()));
    let edge_features = similarity_edge_feature.then(|| {
        let values = edges.iter().map(|&(u, v)| similarity.get(u, v)).collect();
        Dense::from_vec(edges.len(), 1, values).expect("one value per edge")
    });
    Graph::new(node_ids, edges, features, edge_features)
}
