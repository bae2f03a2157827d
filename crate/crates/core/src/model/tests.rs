use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::graph::{induce_pattern_subgraph, SubgraphOptions};
use crate::tensor::finite_diff_check;

fn random_dense(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Dense {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Dense::from_vec(rows, cols, data).unwrap()
}

/// Star-ish graph: centers 0 and 1 joined, node 0 linked to 2..=a, node 1 to the rest.
fn pattern_graph(n: usize, d: usize, q: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = vec![(0, 1)];
    for v in 2..n {
        edges.push((if v % 2 == 0 { 0 } else { 1 }, v));
        if v > 2 && rng.random_bool(0.5) {
            edges.push((v - 1, v));
        }
    }
    let ef = (q > 0).then(|| random_dense(edges.len(), q, &mut rng));
    let ids = (0..n).map(|k| format!("v{k}")).collect();
    Graph::new(ids, edges, random_dense(n, d, &mut rng), ef).unwrap()
}

fn config(d: usize, t: usize, q: usize) -> ModelConfig {
    let mut c = ModelConfig::new(d, t, q);
    c.head_hidden = [6, 5];
    c
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `sigmoid(W x + b)` for a row vector, by explicit loops.
fn perceptron(w: &Dense, b: &Dense, x: &[f64]) -> Vec<f64> {
    (0..w.rows())
        .map(|o| sigmoid(b.get(0, o) + (0..w.cols()).map(|i| w.get(o, i) * x[i]).sum::<f64>()))
        .collect()
}

#[test]
fn zero_tokenizer_gives_zero_tokens() {
    let model = Model::new(config(3, 4, 0)).unwrap();
    let mut params = model.init_params(1).unwrap();
    for name in [names::TOK_W1, names::TOK_B1, names::TOK_W2, names::TOK_B2] {
        params.get_mut(name).unwrap().data_mut().fill(0.0);
    }
    let mut tape = Tape::new();
    let bound = model.bind(&params, &mut tape).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = tape.constant(random_dense(5, 3, &mut rng));
    let tok = model.tokenize(&mut tape, &bound, x).unwrap();
    assert!(tape.value(tok).data().iter().all(|&v| v == 0.0));
}

#[test]
fn shallow_identity_tokenizer_is_tanh() {
    let mut cfg = config(3, 3, 0);
    cfg.tokenizer = TokenizerArch::Shallow;
    let model = Model::new(cfg).unwrap();
    let mut params = model.init_params(1).unwrap();
    *params.get_mut(names::TOK_W1).unwrap() = Dense::identity(3);
    assert!(params.get(names::TOK_W2).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let input = random_dense(4, 3, &mut rng);
    let mut tape = Tape::new();
    let bound = model.bind(&params, &mut tape).unwrap();
    let x = tape.constant(input.clone());
    let tok = model.tokenize(&mut tape, &bound, x).unwrap();
    assert_eq!(tape.value(tok), &input.map(f64::tanh));
}

#[test]
fn tokenizer_rejects_wrong_width() {
    let model = Model::new(config(3, 4, 0)).unwrap();
    let params = model.init_params(1).unwrap();
    let mut tape = Tape::new();
    let bound = model.bind(&params, &mut tape).unwrap();
    let x = tape.constant(Dense::zeros(2, 5));
    assert!(matches!(model.tokenize(&mut tape, &bound, x), Err(Error::Contract(_))));
}

#[test]
fn tokenizer_gradient_matches_finite_differences() {
    for arch in [TokenizerArch::Deep, TokenizerArch::Shallow] {
        let mut cfg = config(5, 4, 0);
        cfg.tokenizer = arch;
        let model = Model::new(cfg).unwrap();
        let params = model.init_params(11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let input = random_dense(4, 5, &mut rng);
        let report = finite_diff_check(&params, 1e-5, 1e-4, |p, tape| {
            let bound = model.bind(p, tape)?;
            let x = tape.constant(input.clone());
            let tok = model.tokenize(tape, &bound, x)?;
            Ok(tape.sum(tok))
        })
        .unwrap();
        assert!(report.passed, "{arch:?}: {report:?}");
    }
}

fn weights_for(model: &Model, params: &Parameters, sub: &PatternSubgraph, target: usize) -> Vec<f64> {
    let mut tape = Tape::new();
    let bound = model.bind(params, &mut tape).unwrap();
    let x = tape.constant(sub.node_feature_slice.clone());
    let tok = model.tokenize(&mut tape, &bound, x).unwrap();
    let nb = model.neighborhood(sub, target).unwrap();
    let w = model.attention_weights(&mut tape, &bound, tok, &nb).unwrap().unwrap();
    tape.value(w).data().to_vec()
}

#[test]
fn singleton_neighborhood_gets_full_weight() {
    let g = pattern_graph(3, 4, 2, 5);
    let model = Model::new(config(4, 3, 2)).unwrap();
    let params = model.init_params(2).unwrap();
    let sub = induce_pattern_subgraph(&g, 1, 2, SubgraphOptions::default()).unwrap();
    // node 2 hangs off node 0 only; inside pattern (1,2) its single neighbor is 0
    assert_eq!(sub.neighbors_in_subgraph(2).unwrap(), vec![0]);
    assert_eq!(weights_for(&model, &params, &sub, 2), vec![1.0]);
}

#[test]
fn identical_neighbors_split_evenly() {
    let ids = (0..4).map(|k| k.to_string()).collect();
    let mut x = Dense::zeros(4, 2);
    x.row_mut(0).copy_from_slice(&[0.3, -0.2]);
    x.row_mut(1).copy_from_slice(&[0.5, 0.1]);
    x.row_mut(2).copy_from_slice(&[-0.4, 0.9]);
    x.row_mut(3).copy_from_slice(&[-0.4, 0.9]);
    let ef = Dense::from_rows(&[vec![1.0], vec![0.5], vec![0.5]]).unwrap();
    let g = Graph::new(ids, vec![(0, 1), (0, 2), (0, 3)], x, Some(ef)).unwrap();
    let model = Model::new(config(2, 3, 1)).unwrap();
    let params = model.init_params(9).unwrap();
    let sub = induce_pattern_subgraph(&g, 2, 3, SubgraphOptions::default()).unwrap();
    // centers 2 and 3 each see only node 0; use center 0's view through pattern (0,1)
    let sub0 = induce_pattern_subgraph(&g, 0, 1, SubgraphOptions::default()).unwrap();
    let w = weights_for(&model, &params, &sub0, 0);
    assert_eq!(w.len(), 3);
    assert!((w[1] - w[2]).abs() < 1e-15);
    assert_eq!(weights_for(&model, &params, &sub, 2), vec![1.0]);
}

#[test]
fn attention_weights_match_direct_softmax() {
    for seed in 0..10 {
        let g = pattern_graph(7, 4, 3, seed);
        let model = Model::new(config(4, 5, 3)).unwrap();
        let params = model.init_params(seed + 100).unwrap();
        let sub = induce_pattern_subgraph(&g, 0, 1, SubgraphOptions::default()).unwrap();
        let got = weights_for(&model, &params, &sub, 0);

        // oracle: explicit loops over the raw parameter matrices
        let mut tape = Tape::new();
        let bound = model.bind(&params, &mut tape).unwrap();
        let x = tape.constant(sub.node_feature_slice.clone());
        let tok_node = model.tokenize(&mut tape, &bound, x).unwrap();
        let tokens = tape.value(tok_node).clone();
        let target = tokens.row(sub.position(0).unwrap()).to_vec();
        let scores: Vec<f64> = sub
            .neighbors_in_subgraph(0)
            .unwrap()
            .iter()
            .map(|&k| {
                let mut qin = target.clone();
                qin.extend_from_slice(sub.edge_feature_row(0, k).unwrap());
                let q = perceptron(params.get(names::Q_W).unwrap(), params.get(names::Q_B).unwrap(), &qin);
                let key = perceptron(
                    params.get(names::K_W).unwrap(),
                    params.get(names::K_B).unwrap(),
                    tokens.row(sub.position(k).unwrap()),
                );
                q.iter().zip(&key).map(|(a, b)| a * b).sum()
            })
            .collect();
        let exps: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        let total: f64 = exps.iter().sum();
        assert_eq!(got.len(), scores.len());
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (w, e) in got.iter().zip(&exps) {
            assert!((w - e / total).abs() < 1e-12);
        }
    }
}

#[test]
fn without_edge_features_weights_follow_neighbor_permutation() {
    let model = Model::new(config(3, 4, 0)).unwrap();
    let params = model.init_params(21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let tokens = random_dense(5, 4, &mut rng);
    let run = |order: Vec<usize>| {
        let mut tape = Tape::new();
        let bound = model.bind(&params, &mut tape).unwrap();
        let tok = tape.constant(tokens.clone());
        let nb = Neighborhood {
            target_row: 0,
            source_rows: order,
            edge_rows: None,
        };
        let w = model.attention_weights(&mut tape, &bound, tok, &nb).unwrap().unwrap();
        tape.value(w).data().to_vec()
    };
    let a = run(vec![1, 2, 3, 4]);
    let b = run(vec![3, 1, 4, 2]);
    for (pos, row) in [3, 1, 4, 2].iter().enumerate() {
        assert!((b[pos] - a[row - 1]).abs() < 1e-15);
    }
}

#[test]
fn isolated_center_embeds_own_token_only() {
    let ids = (0..3).map(|k| k.to_string()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = Graph::new(ids, vec![(0, 1)], random_dense(3, 4, &mut rng), None).unwrap();
    let model = Model::new(config(4, 3, 0)).unwrap();
    let params = model.init_params(3).unwrap();
    let sub = induce_pattern_subgraph(&g, 0, 2, SubgraphOptions::default()).unwrap();
    let mut tape = Tape::new();
    let bound = model.bind(&params, &mut tape).unwrap();
    let x = tape.constant(sub.node_feature_slice.clone());
    let tok = model.tokenize(&mut tape, &bound, x).unwrap();
    let nb = model.neighborhood(&sub, 2).unwrap();
    assert!(nb.source_rows.is_empty());
    let z = model.nea_embed(&mut tape, &bound, tok, &nb).unwrap();
    let z = tape.value(z).data().to_vec();
    let own = tape.value(tok).row(sub.position(2).unwrap()).to_vec();
    assert_eq!(&z[..3], &[0.0, 0.0, 0.0]);
    for (zv, t) in z[3..].iter().zip(&own) {
        assert_eq!(*zv, t.tanh());
    }
}

#[test]
fn single_neighbor_aggregate_is_its_value() {
    let ids = (0..3).map(|k| k.to_string()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let g = Graph::new(ids, vec![(0, 1)], random_dense(3, 4, &mut rng), None).unwrap();
    let model = Model::new(config(4, 3, 0)).unwrap();
    let params = model.init_params(4).unwrap();
    let sub = induce_pattern_subgraph(&g, 0, 2, SubgraphOptions::default()).unwrap();
    let mut tape = Tape::new();
    let bound = model.bind(&params, &mut tape).unwrap();
    let x = tape.constant(sub.node_feature_slice.clone());
    let tok = model.tokenize(&mut tape, &bound, x).unwrap();
    let nb = model.neighborhood(&sub, 0).unwrap();
    let z = model.nea_embed(&mut tape, &bound, tok, &nb).unwrap();
    let v = perceptron(
        params.get(names::V_W).unwrap(),
        params.get(names::V_B).unwrap(),
        tape.value(tok).row(sub.position(1).unwrap()),
    );
    for (zv, vv) in tape.value(z).data()[..3].iter().zip(&v) {
        assert!((zv - vv.tanh()).abs() < 1e-15);
    }
}

#[test]
fn embeddings_bounded_and_differentiable() {
    for (seed, q) in [(1u64, 0usize), (2, 3)] {
        let g = pattern_graph(6, 4, q, seed);
        let model = Model::new(config(4, 3, q)).unwrap();
        let params = model.init_params(seed).unwrap();
        let sub = induce_pattern_subgraph(&g, 0, 1, SubgraphOptions::default()).unwrap();
        assert_eq!(sub.member_count(), 6);
        let p = model.predict(&params, &sub).unwrap();
        assert_eq!(p.z_i.len(), 6);
        assert!(p.z_i.iter().chain(&p.z_j).all(|v| (-1.0..=1.0).contains(v)));

        let report = finite_diff_check(&params, 1e-5, 1e-4, |p, tape| {
            let bound = model.bind(p, tape)?;
            let x = tape.constant(sub.node_feature_slice.clone());
            let tok = model.tokenize(tape, &bound, x)?;
            let nb = model.neighborhood(&sub, 0)?;
            let z = model.nea_embed(tape, &bound, tok, &nb)?;
            Ok(tape.sum(z))
        })
        .unwrap();
        assert!(report.passed, "{report:?}");
    }
}

#[test]
fn head_input_is_elementwise_min_then_max() {
    let mut tape = Tape::new();
    let a = tape.constant(Dense::row_vector(vec![1.0, -2.0]));
    let b = tape.constant(Dense::row_vector(vec![0.0, 3.0]));
    let lo = tape.min(a, b).unwrap();
    let hi = tape.max(a, b).unwrap();
    let h = tape.hconcat(&[lo, hi]).unwrap();
    assert_eq!(tape.value(h).data(), &[0.0, -2.0, 1.0, 3.0]);
}

#[test]
fn head_is_symmetric_and_differentiable() {
    let model = Model::new(config(2, 3, 0)).unwrap();
    let params = model.init_params(5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let zi = random_dense(1, 6, &mut rng);
    let zj = random_dense(1, 6, &mut rng);
    let run = |a: &Dense, b: &Dense| {
        let mut tape = Tape::new();
        let bound = model.bind(&params, &mut tape).unwrap();
        let (a, b) = (tape.constant(a.clone()), tape.constant(b.clone()));
        let y = model.predict_head(&mut tape, &bound, a, b).unwrap();
        tape.scalar(y).unwrap()
    };
    assert_eq!(run(&zi, &zj), run(&zj, &zi));

    let report = finite_diff_check(&params, 1e-5, 1e-4, |p, tape| {
        let bound = model.bind(p, tape)?;
        let (a, b) = (tape.constant(zi.clone()), tape.constant(zj.clone()));
        model.predict_head(tape, &bound, a, b)
    })
    .unwrap();
    assert!(report.passed, "{report:?}");

    let mut tape = Tape::new();
    let bound = model.bind(&params, &mut tape).unwrap();
    let a = tape.constant(Dense::zeros(1, 5));
    let b = tape.constant(Dense::zeros(1, 6));
    assert!(model.predict_head(&mut tape, &bound, a, b).is_err());
}

#[test]
fn zero_model_predicts_output_bias() {
    let model = Model::new(config(4, 3, 0)).unwrap();
    let mut params = model.init_params(1).unwrap();
    let names: Vec<String> = params.names().map(str::to_owned).collect();
    for n in names {
        params.get_mut(&n).unwrap().data_mut().fill(0.0);
    }
    params.get_mut(names::HEAD_B3).unwrap().data_mut()[0] = 0.37;
    let g = pattern_graph(5, 4, 0, 3);
    for (i, j) in [(0, 1), (2, 4), (3, 1)] {
        let sub = induce_pattern_subgraph(&g, i, j, SubgraphOptions::default()).unwrap();
        assert_eq!(model.predict(&params, &sub).unwrap().value, 0.37);
    }
}

#[test]
fn swapping_centers_changes_nothing() {
    for seed in 0..20 {
        let q = (seed % 3) as usize;
        let g = pattern_graph(8, 4, q, seed);
        let mut cfg = config(4, 4, q);
        cfg.task = if seed % 2 == 0 { Task::Regression } else { Task::BinaryClassification };
        let model = Model::new(cfg).unwrap();
        let params = model.init_params(seed).unwrap();
        let a = induce_pattern_subgraph(&g, 2, 5, SubgraphOptions::default()).unwrap();
        let b = induce_pattern_subgraph(&g, 5, 2, SubgraphOptions::default()).unwrap();
        let pa = model.predict(&params, &a).unwrap();
        let pb = model.predict(&params, &b).unwrap();
        assert_eq!(pa.value, pb.value);
        assert_eq!(pa.z_i, pb.z_j);
        assert_eq!(pa.z_j, pb.z_i);
    }
}

#[test]
fn classification_output_is_a_probability() {
    let g = pattern_graph(6, 4, 0, 1);
    let mut cfg = config(4, 3, 0);
    cfg.task = Task::BinaryClassification;
    let model = Model::new(cfg).unwrap();
    let params = model.init_params(1).unwrap();
    let sub = induce_pattern_subgraph(&g, 0, 1, SubgraphOptions::default()).unwrap();
    let p = model.predict(&params, &sub).unwrap().value;
    assert!(p > 0.0 && p < 1.0);
}

#[test]
fn forward_is_bitwise_reproducible() {
    let g = pattern_graph(5, 3, 2, 9);
    let model = Model::new(config(3, 4, 2)).unwrap();
    let sub = induce_pattern_subgraph(&g, 0, 1, SubgraphOptions::default()).unwrap();
    let a = model.predict(&model.init_params(7).unwrap(), &sub).unwrap();
    let b = model.predict(&model.init_params(7).unwrap(), &sub).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a, b);
}

#[test]
fn node_embedding_matches_pattern_embedding() {
    let g = pattern_graph(8, 4, 2, 4);
    let model = Model::new(config(4, 3, 2)).unwrap();
    let params = model.init_params(4).unwrap();
    let sub = induce_pattern_subgraph(&g, 3, 6, SubgraphOptions::default()).unwrap();
    let p = model.predict(&params, &sub).unwrap();
    assert_eq!(model.embed_node(&params, &g, 3).unwrap(), p.z_i);
    assert_eq!(model.embed_node(&params, &g, 6).unwrap(), p.z_j);
}

#[test]
fn attend_over_members_includes_non_neighbors() {
    let g = pattern_graph(6, 4, 2, 2);
    let mut cfg = config(4, 3, 2);
    cfg.attend_over = AttendOver::Members;
    let model = Model::new(cfg).unwrap();
    let sub = induce_pattern_subgraph(&g, 0, 1, SubgraphOptions::default()).unwrap();
    let nb = model.neighborhood(&sub, 0).unwrap();
    assert_eq!(nb.source_rows.len(), sub.member_count() - 1);
    let params = model.init_params(2).unwrap();
    assert!(model.predict(&params, &sub).unwrap().value.is_finite());
}

#[test]
fn check_params_detects_layout_mismatch() {
    let model = Model::new(config(4, 3, 0)).unwrap();
    let other = Model::new(config(5, 3, 0)).unwrap();
    assert!(model.check_params(&model.init_params(1).unwrap()).is_ok());
    assert!(matches!(
        model.check_params(&other.init_params(1).unwrap()),
        Err(Error::CheckpointMismatch(_))
    ));
}
