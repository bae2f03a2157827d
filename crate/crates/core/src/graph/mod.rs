//! Undirected feature graphs, KNN construction and two-center pattern subgraphs.

mod knn;
mod subgraph;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use knn::{build_knn_graph, knn_edges};
pub use subgraph::{induce_pattern_subgraph, PatternSubgraph, SubgraphOptions};

use crate::error::{Error, Result};
use crate::tensor::Dense;

/// Undirected simple graph with node features and optional edge features.
///
/// Edges are stored as `(min, max)` pairs in lexicographic order; edge
/// feature rows follow that same order.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_ids: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    node_features: Dense,
    edge_features: Option<Dense>,
}

impl Graph {
    /// Builds a graph from edges in any order. `edge_features`, when given,
    /// is aligned with `edges` as passed and is reordered to canonical order.
    pub fn new(
        node_ids: Vec<String>,
        edges: Vec<(usize, usize)>,
        node_features: Dense,
        edge_features: Option<Dense>,
    ) -> Result<Self> {
        let n = node_ids.len();
        if node_features.rows() != n {
            return Err(Error::InvalidShape(format!(
                "{} node feature rows for {n} nodes",
                node_features.rows()
            )));
        }
        let mut index = HashMap::with_capacity(n);
        for (k, id) in node_ids.iter().enumerate() {
            if index.insert(id.clone(), k).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate node id `{id}`")));
            }
        }
        if let Some(ef) = &edge_features {
            if ef.rows() != edges.len() {
                return Err(Error::InvalidShape(format!(
                    "{} edge feature rows for {} edges",
                    ef.rows(),
                    edges.len()
                )));
            }
        }

        let mut keyed: Vec<((usize, usize), usize)> = Vec::with_capacity(edges.len());
        for (row, &(u, v)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!(
                    "self-loop on node `{}`",
                    node_ids[u]
                )));
            }
            keyed.push(((u.min(v), u.max(v)), row));
        }
        keyed.sort_unstable();
        if let Some(w) = keyed.windows(2).find(|w| w[0].0 == w[1].0) {
            let (u, v) = w[0].0;
            return Err(Error::InvalidArgument(format!(
                "duplicate edge {} - {}",
                node_ids[u], node_ids[v]
            )));
        }

        let edge_features = edge_features.map(|ef| {
            let order: Vec<usize> = keyed.iter().map(|&(_, row)| row).collect();
            ef.select_rows(&order)
        });
        let edges: Vec<(usize, usize)> = keyed.into_iter().map(|(e, _)| e).collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }

        Ok(Graph {
            node_ids,
            index,
            edges,
            adjacency,
            node_features,
            edge_features,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_id(&self, index: usize) -> &str {
        &self.node_ids[index]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Lookup(id.to_string()))
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor list of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edge_index(u, v).is_some()
    }

    /// Position of edge `u - v` in canonical order.
    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        self.edges.binary_search(&(u.min(v), u.max(v))).ok()
    }

    pub fn node_features(&self) -> &Dense {
        &self.node_features
    }

    pub fn edge_features(&self) -> Option<&Dense> {
        self.edge_features.as_ref()
    }

    pub fn feature_dim(&self) -> usize {
        self.node_features.cols()
    }

    pub fn edge_feature_dim(&self) -> usize {
        self.edge_features.as_ref().map_or(0, Dense::cols)
    }
}

/// A pair of nodes to score, with an optional target value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub i: String,
    pub j: String,
    pub label: Option<f64>,
}

impl Pattern {
    pub fn new(i: impl Into<String>, j: impl Into<String>, label: Option<f64>) -> Result<Self> {
        let (i, j) = (i.into(), j.into());
        if i == j {
            return Err(Error::InvalidArgument(format!("pattern pairs `{i}` with itself")));
        }
        Ok(Pattern { i, j, label })
    }

    pub fn labeled(i: impl Into<String>, j: impl Into<String>, label: f64) -> Result<Self> {
        Pattern::new(i, j, Some(label))
    }

    pub fn unlabeled(i: impl Into<String>, j: impl Into<String>) -> Result<Self> {
        Pattern::new(i, j, None)
    }

    pub fn is_labeled(&self) -> bool {
        self.label.is_some()
    }

    /// Node indices of both ends in `graph`.
    pub fn resolve(&self, graph: &Graph) -> Result<(usize, usize)> {
        Ok((graph.index_of(&self.i)?, graph.index_of(&self.j)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|k| format!("n{k}")).collect()
    }

    #[test]
    fn edges_are_canonicalized_with_features() {
        let ef = Dense::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let g = Graph::new(ids(4), vec![(3, 1), (0, 2), (1, 0)], Dense::identity(4), Some(ef)).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 3)]);
        assert_eq!(g.edge_features().unwrap().data(), &[3.0, 2.0, 1.0]);
        assert_eq!(g.neighbors(0), &[1, 2]);
        assert_eq!(g.edge_index(3, 1), Some(2));
    }

    #[test]
    fn rejects_self_loops_and_duplicates() {
        assert!(Graph::new(ids(2), vec![(1, 1)], Dense::identity(2), None).is_err());
        assert!(Graph::new(ids(2), vec![(0, 1), (1, 0)], Dense::identity(2), None).is_err());
        assert!(Graph::new(ids(2), vec![(0, 5)], Dense::identity(2), None).is_err());
    }

    #[test]
    fn rejects_misaligned_features() {
        assert!(Graph::new(ids(3), vec![], Dense::identity(2), None).is_err());
        let ef = Dense::zeros(2, 1);
        assert!(Graph::new(ids(3), vec![(0, 1)], Dense::identity(3), Some(ef)).is_err());
    }

    #[test]
    fn pattern_rejects_self_pair_and_resolves() {
        assert!(Pattern::unlabeled("a", "a").is_err());
        let g = Graph::new(ids(2), vec![(0, 1)], Dense::identity(2), None).unwrap();
        assert_eq!(Pattern::unlabeled("n1", "n0").unwrap().resolve(&g).unwrap(), (1, 0));
        assert!(matches!(
            Pattern::unlabeled("n1", "zz").unwrap().resolve(&g),
            Err(Error::Lookup(_))
        ));
    }
}
