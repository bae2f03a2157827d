#![allow(dead_code)]

use rand::Rng;

use edgewise::graph::Graph;
use edgewise::model::{AttendOver, HiddenActivation, ModelConfig, Task, TokenizerArch};
use edgewise::tensor::Dense;

/// Graph whose pattern on centers (0, 1) has exactly `members` members, plus
/// two outside nodes hanging off non-center members.
pub fn pattern_graph<R: Rng>(rng: &mut R, members: usize, d: usize, q: usize) -> Graph {
    assert!(members >= 2);
    let outsiders = if members > 2 { 2 } else { 0 };
    let n = members + outsiders;
    let mut edges = Vec::new();
    if rng.random_bool(0.5) {
        edges.push((0, 1));
    }
    for v in 2..members {
        match rng.random_range(0..3) {
            0 => edges.push((0, v)),
            1 => edges.push((1, v)),
            _ => {
                edges.push((0, v));
                edges.push((1, v));
            }
        }
        for u in 2..v {
            if rng.random_bool(0.3) {
                edges.push((u, v));
            }
        }
    }
    for o in members..n {
        edges.push((rng.random_range(2..members), o));
    }
    let uniform = |rng: &mut R, len: usize| (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect::<Vec<f64>>();
    let features = Dense::from_vec(n, d, uniform(rng, n * d)).unwrap();
    let edge_features = (q > 0).then(|| Dense::from_vec(edges.len(), q, uniform(rng, edges.len() * q)).unwrap());
    let ids = (0..n).map(|k| format!("v{k}")).collect();
    Graph::new(ids, edges, features, edge_features).unwrap()
}

pub fn random_model_config<R: Rng>(rng: &mut R, d: usize, t: usize, q: usize) -> ModelConfig {
    ModelConfig {
        tokenizer: if rng.random_bool(0.5) {
            TokenizerArch::Deep
        } else {
            TokenizerArch::Shallow
        },
        task: if rng.random_bool(0.5) {
            Task::Regression
        } else {
            Task::BinaryClassification
        },
        head_activation: if rng.random_bool(0.5) {
            HiddenActivation::Relu
        } else {
            HiddenActivation::Tanh
        },
        attend_over: if rng.random_bool(0.7) {
            AttendOver::Neighbors
        } else {
            AttendOver::Members
        },
        exclude_center_edge: rng.random_bool(0.3),
        ..ModelConfig::new(d, t, q)
    }
}

pub fn random_label<R: Rng>(rng: &mut R, task: Task) -> f64 {
    match task {
        Task::Regression => rng.random_range(0.0..1.0),
        Task::BinaryClassification => f64::from(u8::from(rng.random_bool(0.5))),
    }
}

/// Exhaustive top-k by full sort, independent of the library's buffer scan.
pub fn knn_oracle(sim: &Dense, k: usize) -> Vec<(usize, usize)> {
    let n = sim.rows();
    let mut set = std::collections::BTreeSet::new();
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| sim.get(i, b).partial_cmp(&sim.get(i, a)).unwrap().then(a.cmp(&b)));
        for &j in others.iter().take(k) {
            set.insert((i.min(j), i.max(j)));
        }
    }
    set.into_iter().collect()
}

/// F1 straight from the confusion counts.
pub fn f1_oracle(scores: &[f64], labels: &[bool], tau: f64) -> f64 {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    for (&s, &l) in scores.iter().zip(labels) {
        if s >= tau {
            if l {
                tp += 1.0
            } else {
                fp += 1.0
            }
        } else if l {
            fn_ += 1.0
        }
    }
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

pub const SHEN_GROUPS: [&str; 7] = ["AGV", "ILFP", "YMTS", "HNQW", "RK", "DE", "C"];

/// Triad counts by direct window enumeration.
pub fn ct_oracle(seq: &str) -> Vec<u32> {
    let class = |c: u8| SHEN_GROUPS.iter().position(|g| g.as_bytes().contains(&c.to_ascii_uppercase()));
    let b = seq.as_bytes();
    let mut counts = vec![0u32; 343];
    for w in b.windows(3) {
        if let (Some(x), Some(y), Some(z)) = (class(w[0]), class(w[1]), class(w[2])) {
            counts[x * 49 + y * 7 + z] += 1;
        }
    }
    counts
}
