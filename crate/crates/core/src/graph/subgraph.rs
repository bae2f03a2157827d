use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Dense;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgraphOptions {
    /// Drop a direct edge between the two centers from the induced edge set.
    pub exclude_center_edge: bool,
}

/// Subgraph induced by two centers and their one-hop neighborhoods.
///
/// `members` lists the lower-index center, the higher-index center, then the
/// remaining members ascending. Swapping the centers therefore changes only
/// `center_i`/`center_j`; members, edges and feature slices are identical.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSubgraph {
    pub center_i: usize,
    pub center_j: usize,
    pub members: Vec<usize>,
    /// Canonical `(min, max)` graph-index pairs, sorted.
    pub induced_edges: Vec<(usize, usize)>,
    pub node_feature_slice: Dense,
    pub edge_feature_slice: Option<Dense>,
}

pub fn induce_pattern_subgraph(
    graph: &Graph,
    i: usize,
    j: usize,
    options: SubgraphOptions,
) -> Result<PatternSubgraph> {
    let n = graph.node_count();
    for c in [i, j] {
        if c >= n {
            return Err(Error::Lookup(format!("node index {c} (graph has {n} nodes)")));
        }
    }
    if i == j {
        return Err(Error::InvalidArgument(format!(
            "pattern centers must differ, both are `{}`",
            graph.node_id(i)
        )));
    }

    let (lo, hi) = (i.min(j), i.max(j));
    let mut rest: Vec<usize> = graph
        .neighbors(i)
        .iter()
        .chain(graph.neighbors(j))
        .copied()
        .filter(|&v| v != lo && v != hi)
        .collect();
    rest.sort_unstable();
    rest.dedup();
    let mut members = Vec::with_capacity(rest.len() + 2);
    members.extend([lo, hi]);
    members.extend(rest);

    let mut sorted_members = members.clone();
    sorted_members.sort_unstable();
    let is_member = |v: usize| sorted_members.binary_search(&v).is_ok();

    // every induced edge touches at least one member, so scanning the
    // members' adjacency lists finds them all
    let mut induced_edges = Vec::new();
    for &u in &sorted_members {
        for &v in graph.neighbors(u) {
            if u < v && is_member(v) {
                if options.exclude_center_edge && (u, v) == (lo, hi) {
                    continue;
                }
                induced_edges.push((u, v));
            }
        }
    }
    induced_edges.sort_unstable();

    let node_feature_slice = graph.node_features().select_rows(&members);
    let edge_feature_slice = graph.edge_features().map(|ef| {
        let rows: Vec<usize> = induced_edges
            .iter()
            .map(|&(u, v)| graph.edge_index(u, v).expect("induced edge exists in graph"))
            .collect();
        ef.select_rows(&rows)
    });

    Ok(PatternSubgraph {
        center_i: i,
        center_j: j,
        members,
        induced_edges,
        node_feature_slice,
        edge_feature_slice,
    })
}

impl PatternSubgraph {
    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    /// Row of `node` in the member order.
    pub fn position(&self, node: usize) -> Option<usize> {
        self.members.iter().position(|&m| m == node)
    }

    /// Ascending graph indices of members sharing an induced edge with a center.
    pub fn neighbors_in_subgraph(&self, target: usize) -> Result<Vec<usize>> {
        if target != self.center_i && target != self.center_j {
            return Err(Error::Contract(format!(
                "node {target} is not a center of this pattern"
            )));
        }
        let mut out: Vec<usize> = self
            .induced_edges
            .iter()
            .filter_map(|&(u, v)| {
                if u == target {
                    Some(v)
                } else if v == target {
                    Some(u)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Feature row of the induced edge `u - v`, if that edge is present.
    pub fn edge_feature_row(&self, u: usize, v: usize) -> Option<&[f64]> {
        let ef = self.edge_feature_slice.as_ref()?;
        let k = self.induced_edges.binary_search(&(u.min(v), u.max(v))).ok()?;
        Some(ef.row(k))
    }

    pub fn edge_feature_dim(&self) -> usize {
        self.edge_feature_slice.as_ref().map_or(0, Dense::cols)
    }
}
