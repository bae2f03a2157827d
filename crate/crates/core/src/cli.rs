//! Command line front end.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::eval::{pca2, MetricsReport};
use crate::featurize::{
    ct_features, ec_class, enzyme_edge_features, one_hot_nodes, pairwise_tanimoto_targets, tanimoto, CtGrouping,
    CtScaling, ENZYME_CLASSES,
};
use crate::graph::{build_knn_graph, induce_pattern_subgraph, Graph, Pattern};
use crate::io::{self, PatternRow, PredictionRow};
use crate::manifest::RunManifest;
use crate::model::AttendOver;
use crate::synthetic::{tanimoto_dataset, TanimotoSpec};
use crate::tensor::Dense;
use crate::training::{aggregate, cross_validate, fold_splits, train_runs, Select, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "edgewise", version, about = "Pairwise node property prediction with an attention GNN")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a k-nearest-neighbor graph from a similarity table.
    KnnGraph(KnnGraphArgs),
    /// Compute node or edge features and similarity targets.
    #[command(subcommand)]
    Featurize(FeaturizeCommand),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Score patterns with a trained checkpoint.
    Predict(PredictArgs),
    /// Repeated k-fold cross-validation.
    Crossval(CrossvalArgs),
    /// Compute metrics for a prediction file against labeled patterns.
    Evaluate(EvaluateArgs),
    /// Export node embeddings projected to two principal components.
    Embed(EmbedArgs),
    /// Write a synthetic Tanimoto dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct KnnGraphArgs {
    /// Square similarity table with an `id` header row.
    #[arg(long)]
    pub similarity: PathBuf,
    #[arg(long)]
    pub k: usize,
    /// Optional node table to use as features instead of one-hot rows.
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    /// Attach each edge's similarity as an edge feature.
    #[arg(long)]
    pub edge_feature: bool,
    /// Output graph directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum FeaturizeCommand {
    /// Conjoint-triad features from protein sequences.
    Ct {
        #[arg(long)]
        fasta: PathBuf,
        /// Emit raw counts instead of frequencies.
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tanimoto similarity table and pattern targets from fingerprints.
    Tanimoto {
        #[arg(long)]
        fingerprints: PathBuf,
        /// Pairs to label; all pairs when omitted.
        #[arg(long)]
        patterns: Option<PathBuf>,
        /// Output directory for similarity.tsv and patterns.tsv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Seven-class enzyme edge features from EC numbers.
    Enzyme {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One-hot node table from a list of ids.
    OneHot {
        #[arg(long)]
        ids: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttendOverArg {
    Neighbors,
    Members,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectArg {
    BestVal,
}

/// Settings shared by commands that train.
#[derive(Debug, Args)]
pub struct TrainingArgs {
    /// JSON training config; defaults are used for missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub patterns: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub exclude_center_edge: bool,
    #[arg(long, value_enum)]
    pub attend_over: Option<AttendOverArg>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: TrainingArgs,
    /// Number of independently seeded runs.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, value_enum)]
    pub select: Option<SelectArg>,
    /// Checkpoint path; history and manifest are written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[command(flatten)]
    pub common: TrainingArgs,
    /// Folds trained in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub patterns: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Prediction table written by `predict`.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Labeled patterns; rows are matched by unordered id pair.
    #[arg(long)]
    pub patterns: PathBuf,
    /// Config supplying task and threshold.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    /// Coordinates TSV; a `.pca.json` sidecar is written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 60)]
    pub nodes: usize,
    #[arg(long, default_value_t = 400)]
    pub labeled: usize,
    #[arg(long, default_value_t = 0)]
    pub unlabeled: usize,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::KnnGraph(a) => cmd_knn_graph(&a),
        Command::Featurize(f) => cmd_featurize(&f),
        Command::Train(a) => cmd_train(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Crossval(a) => cmd_crossval(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Embed(a) => cmd_embed(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    io::write_atomic(path, s.as_bytes())
}

/// `dir/stem.suffix` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn cmd_knn_graph(a: &KnnGraphArgs) -> Result<()> {
    let (ids, sim) = io::parse_similarity(&io::read_text(&a.similarity)?, &a.similarity)?;
    let features = match &a.nodes {
        Some(p) => {
            let (node_ids, f) = io::parse_nodes(&io::read_text(p)?, p)?;
            if node_ids != ids {
                return Err(Error::parse(p, 0, "node ids differ from the similarity header"));
            }
            f
        }
        None => None,
    };
    let graph = build_knn_graph(ids, &sim, a.k, features, a.edge_feature)?;
    io::write_graph_dir(&a.out, &graph)?;
    let degrees: Vec<usize> = (0..graph.node_count()).map(|v| graph.degree(v)).collect();
    let min = degrees.iter().min().copied().unwrap_or(0);
    let max = degrees.iter().max().copied().unwrap_or(0);
    let mean = degrees.iter().sum::<usize>() as f64 / degrees.len().max(1) as f64;
    println!(
        "{} nodes, {} edges, degree min {min} mean {mean:.2} max {max}",
        graph.node_count(),
        graph.edge_count()
    );
    Ok(())
}

pub fn cmd_featurize(cmd: &FeaturizeCommand) -> Result<()> {
    match cmd {
        FeaturizeCommand::Ct { fasta, raw, out } => {
            let records = io::parse_fasta(&io::read_text(fasta)?, fasta)?;
            let grouping = CtGrouping::default();
            let scaling = if *raw { CtScaling::Raw } else { CtScaling::Frequency };
            let mut data = Vec::new();
            let mut ids = Vec::new();
            for (id, seq) in &records {
                let f = ct_features(seq, &grouping, scaling);
                if f.warning {
                    log::warn!("{id}: no countable triad window, features set to zero");
                }
                data.extend_from_slice(&f.values);
                ids.push(id.clone());
            }
            let width = data.len() / ids.len();
            let features = Dense::from_vec(ids.len(), width, data)?;
            io::write_atomic(out, io::format_nodes(&ids, &features).as_bytes())?;
            println!("{} sequences featurized", ids.len());
        }
        FeaturizeCommand::Tanimoto {
            fingerprints,
            patterns,
            out,
        } => {
            let fps = io::parse_fingerprints(&io::read_text(fingerprints)?, fingerprints)?;
            let ids: Vec<String> = fps.iter().map(|f| f.id.clone()).collect();
            let n = fps.len();
            let mut sim = Dense::identity(n);
            for a in 0..n {
                for b in a + 1..n {
                    // an all-zero pair gets similarity 0 in the graph table
                    let s = match tanimoto(&fps[a], &fps[b]) {
                        Ok(s) => s,
                        Err(Error::UndefinedSimilarity(_)) => 0.0,
                        Err(e) => return Err(e),
                    };
                    sim.set(a, b, s);
                    sim.set(b, a, s);
                }
            }
            let pairs: Vec<(String, String)> = match patterns {
                Some(p) => io::read_patterns(p)?
                    .into_iter()
                    .map(|r| (r.pattern.i, r.pattern.j))
                    .collect(),
                None => crate::featurize::all_pairs(&ids),
            };
            let targets = pairwise_tanimoto_targets(&fps, &pairs)?;
            io::write_atomic(&out.join("similarity.tsv"), io::format_similarity(&ids, &sim).as_bytes())?;
            io::write_atomic(&out.join("patterns.tsv"), io::format_patterns(&targets.patterns).as_bytes())?;
            println!(
                "{} patterns ({} labeled, {} unlabeled, {} duplicates dropped)",
                targets.patterns.len(),
                targets.labeled,
                targets.unlabeled,
                targets.duplicates_dropped
            );
        }
        FeaturizeCommand::Enzyme { edges, out } => {
            let rows = io::parse_ec_edges(&io::read_text(edges)?, edges)?;
            let mut text = String::from("src\tdst");
            for c in 0..ENZYME_CLASSES {
                text.push_str(&format!("\tec{}", c + 1));
            }
            text.push('\n');
            for (k, (src, dst, ecs)) in rows.iter().enumerate() {
                let classes = ecs
                    .iter()
                    .map(|e| ec_class(e))
                    .collect::<Result<Vec<u8>>>()
                    .map_err(|e| Error::parse(edges, k + 2, e.to_string()))?;
                let f = enzyme_edge_features(&classes)?;
                text.push_str(src);
                text.push('\t');
                text.push_str(dst);
                for v in f {
                    text.push('\t');
                    text.push_str(&v.to_string());
                }
                text.push('\n');
            }
            io::write_atomic(out, text.as_bytes())?;
            println!("{} edges featurized", rows.len());
        }
        FeaturizeCommand::OneHot { ids, out } => {
            let (list, _) = io::parse_nodes(&io::read_text(ids)?, ids)?;
            let features = one_hot_nodes(list.len())?;
            io::write_atomic(out, io::format_nodes(&list, &features).as_bytes())?;
        }
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::from_json(&io::read_text(p)?),
        None => Ok(TrainConfig::default()),
    }
}

fn training_setup(a: &TrainingArgs) -> Result<(TrainConfig, Graph, Vec<PatternRow>)> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.exclude_center_edge {
        cfg.exclude_center_edge = true;
    }
    if let Some(att) = a.attend_over {
        cfg.attend_over = match att {
            AttendOverArg::Neighbors => AttendOver::Neighbors,
            AttendOverArg::Members => AttendOver::Members,
        };
    }
    cfg.validate()?;
    let graph = io::read_graph_dir(&a.graph)?;
    let rows = io::read_patterns(&a.patterns)?;
    check_known(&graph, &rows, &a.patterns)?;
    Ok((cfg, graph, rows))
}

/// Lists every row naming an unknown node, then fails.
fn check_known(graph: &Graph, rows: &[PatternRow], path: &Path) -> Result<()> {
    let mut bad = Vec::new();
    for r in rows {
        for id in [&r.pattern.i, &r.pattern.j] {
            if graph.index_of(id).is_err() {
                bad.push((r.line, id.clone()));
            }
        }
    }
    if bad.is_empty() {
        return Ok(());
    }
    for (line, id) in &bad {
        eprintln!("{}:{line}: unknown node id '{id}'", path.display());
    }
    Err(Error::Lookup(format!(
        "{} unknown node reference(s) in {}",
        bad.len(),
        path.display()
    )))
}

fn manifest_inputs(m: &mut RunManifest, a: &TrainingArgs) -> Result<()> {
    if let Some(c) = &a.config {
        m.config_path = Some(c.display().to_string());
        m.add_input(c)?;
    }
    m.add_input(&a.graph.join(io::NODES_FILE))?;
    m.add_input(&a.graph.join(io::EDGES_FILE))?;
    m.add_input(&a.patterns)
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let start = Instant::now();
    let (mut cfg, graph, rows) = training_setup(&a.common)?;
    if let Some(r) = a.runs {
        cfg.runs = r;
    }
    if let Some(SelectArg::BestVal) = a.select {
        cfg.select = Select::BestVal;
    }
    cfg.validate()?;
    let patterns: Vec<Pattern> = rows.into_iter().map(|r| r.pattern).collect();
    let unlabeled = patterns.iter().filter(|p| !p.is_labeled()).count();

    let sel = train_runs(&graph, &patterns, &cfg)?;
    let ckpt = Checkpoint::new(&sel.outcome.model, &sel.outcome.params)?;
    ckpt.save(&a.out)?;
    let history_path = sibling(&a.out, "history.csv");
    io::write_atomic(&history_path, sel.outcome.history.to_csv().as_bytes())?;

    let mut m = RunManifest::new("train");
    m.seed = Some(cfg.seed);
    manifest_inputs(&mut m, &a.common)?;
    m.add_artifact(&a.out)?;
    m.add_artifact(&history_path)?;
    m.note("patterns", patterns.len())?;
    m.note("unlabeled_patterns", unlabeled)?;
    m.note("best_epoch", sel.outcome.history.best_epoch)?;
    m.note("monitor", cfg.monitor)?;
    m.note("best_value", sel.outcome.history.best_value)?;
    m.note("stop_reason", &sel.outcome.history.stop_reason)?;
    m.note("run_seeds", &sel.seeds)?;
    m.note("run_scores", &sel.scores)?;
    m.note("selected_run", sel.selected)?;
    m.wall_time_seconds = start.elapsed().as_secs_f64();
    m.save(&sibling(&a.out, "manifest.json"))?;

    println!(
        "trained on {} patterns ({unlabeled} unlabeled); best epoch {} with {:?} {}",
        patterns.len(),
        sel.outcome.history.best_epoch,
        cfg.monitor,
        sel.outcome.history.best_value
    );
    Ok(())
}

pub fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let graph = io::read_graph_dir(&a.graph)?;
    ckpt.check_graph(&graph)?;
    let (model, params) = ckpt.parts()?;
    let rows = io::read_patterns(&a.patterns)?;
    check_known(&graph, &rows, &a.patterns)?;
    let opts = model.config().subgraph_options();
    let out = rows
        .iter()
        .map(|r| {
            let (i, j) = r.pattern.resolve(&graph)?;
            let sub = induce_pattern_subgraph(&graph, i, j, opts)?;
            let p = model.predict(&params, &sub)?;
            Ok(PredictionRow {
                i: r.pattern.i.clone(),
                j: r.pattern.j.clone(),
                prediction: p.value,
                cosine: p.cosine,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    io::write_atomic(&a.out, io::format_predictions(&out).as_bytes())?;
    println!("{} predictions written", out.len());
    Ok(())
}

#[derive(Serialize)]
struct FoldFailure {
    repeat: usize,
    fold: usize,
    error: String,
}

pub fn cmd_crossval(a: &CrossvalArgs) -> Result<()> {
    let start = Instant::now();
    let (cfg, graph, rows) = training_setup(&a.common)?;
    let patterns: Vec<Pattern> = rows.into_iter().map(|r| r.pattern).collect();
    let splits = fold_splits(patterns.len(), &cfg)?;

    let mut folds_tsv = String::from("repeat\tfold\trole\tindex\ti\tj\n");
    for s in &splits {
        for (role, idx) in [("train", &s.train), ("validation", &s.validation), ("test", &s.test)] {
            for &k in idx.iter() {
                let p = &patterns[k];
                folds_tsv.push_str(&format!("{}\t{}\t{role}\t{k}\t{}\t{}\n", s.repeat, s.fold, p.i, p.j));
            }
        }
    }
    let folds_path = a.out.join("folds.tsv");
    io::write_atomic(&folds_path, folds_tsv.as_bytes())?;

    let results = cross_validate(&graph, &patterns, &splits, &cfg, a.jobs)?;
    let mut m = RunManifest::new("crossval");
    m.seed = Some(cfg.seed);
    manifest_inputs(&mut m, &a.common)?;
    m.add_artifact(&folds_path)?;

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for (s, r) in splits.iter().zip(results) {
        match r {
            Ok(outcome) => {
                let path = a.out.join("metrics").join(format!("repeat{}_fold{}.json", s.repeat, s.fold));
                write_json(&path, &outcome)?;
                m.add_artifact(&path)?;
                reports.push(outcome.report);
            }
            Err(e) => {
                log::error!("repeat {} fold {}: {e}", s.repeat, s.fold);
                failures.push(FoldFailure {
                    repeat: s.repeat,
                    fold: s.fold,
                    error: e.to_string(),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    let agg = aggregate(&reports)?;
    let agg_path = a.out.join("aggregate.json");
    let mut summary = BTreeMap::new();
    summary.insert("folds_completed", serde_json::to_value(reports.len())?);
    summary.insert("folds_failed", serde_json::to_value(&failures)?);
    summary.insert("metrics", serde_json::to_value(&agg)?);
    write_json(&agg_path, &summary)?;
    m.add_artifact(&agg_path)?;
    m.note("folds", cfg.folds)?;
    m.note("repeats", cfg.repeats)?;
    m.note("jobs", a.jobs)?;
    m.wall_time_seconds = start.elapsed().as_secs_f64();
    m.save(&a.out.join("manifest.json"))?;

    for (name, ms) in &agg {
        println!("{name}: {} ± {} (n = {})", ms.mean, ms.std, ms.count);
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let preds = io::parse_predictions(&io::read_text(&a.predictions)?, &a.predictions)?;
    let key = |i: &str, j: &str| if i <= j { (i.to_string(), j.to_string()) } else { (j.to_string(), i.to_string()) };
    let labels: HashMap<(String, String), f64> = io::read_patterns(&a.patterns)?
        .into_iter()
        .filter_map(|r| r.pattern.label.map(|l| (key(&r.pattern.i, &r.pattern.j), l)))
        .collect();
    let (mut scores, mut targets) = (Vec::new(), Vec::new());
    for p in &preds {
        if let Some(&y) = labels.get(&key(&p.i, &p.j)) {
            scores.push(p.prediction);
            targets.push(y);
        }
    }
    if scores.is_empty() {
        return Err(Error::UndefinedMetric("no prediction row has a label".into()));
    }
    let report = MetricsReport::compute(&scores, &targets, cfg.task, cfg.threshold)?;
    write_json(&a.out, &report)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

#[derive(Serialize)]
struct PcaSidecar<'a> {
    components: &'a [Vec<f64>; 2],
    eigenvalues: [f64; 2],
    explained_variance: [f64; 2],
    embedding_dim: usize,
}

pub fn cmd_embed(a: &EmbedArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let graph = io::read_graph_dir(&a.graph)?;
    ckpt.check_graph(&graph)?;
    let (model, params) = ckpt.parts()?;
    let dim = model.config().embedding_dim();
    let mut data = Vec::with_capacity(graph.node_count() * dim);
    for v in 0..graph.node_count() {
        data.extend(model.embed_node(&params, &graph, v)?);
    }
    let emb = Dense::from_vec(graph.node_count(), dim, data)?;
    let pca = pca2(&emb)?;
    io::write_atomic(&a.out, io::format_coords(graph.node_ids(), &pca.coords).as_bytes())?;
    write_json(
        &sibling(&a.out, "pca.json"),
        &PcaSidecar {
            components: &pca.components,
            eigenvalues: pca.eigenvalues,
            explained_variance: pca.explained_variance,
            embedding_dim: dim,
        },
    )?;
    println!(
        "explained variance {:.4} and {:.4}",
        pca.explained_variance[0], pca.explained_variance[1]
    );
    Ok(())
}

/// Training config written with the synthetic fixture: short runs that
/// still learn on the toy data.
pub fn fixture_config() -> TrainConfig {
    TrainConfig {
        epochs: 40,
        patience: 10,
        batch_size: 16,
        lr: 0.01,
        token_dim: 8,
        head_hidden: [16, 8],
        folds: 5,
        repeats: 2,
        ..TrainConfig::default()
    }
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = TanimotoSpec {
        nodes: a.nodes,
        labeled: a.labeled,
        unlabeled: a.unlabeled,
        k: a.k,
        seed: a.seed,
        ..TanimotoSpec::default()
    };
    let ds = tanimoto_dataset(&spec)?;
    io::write_graph_dir(&a.out.join("graph"), &ds.graph)?;
    io::write_atomic(&a.out.join("patterns.tsv"), io::format_patterns(&ds.patterns).as_bytes())?;
    io::write_atomic(&a.out.join("fingerprints.tsv"), io::format_fingerprints(&ds.fingerprints).as_bytes())?;
    io::write_atomic(
        &a.out.join("similarity.tsv"),
        io::format_similarity(ds.graph.node_ids(), &ds.similarity).as_bytes(),
    )?;
    write_json(&a.out.join("config.json"), &fixture_config())?;
    write_json(&a.out.join("dataset.json"), &spec)?;
    println!(
        "{} nodes, {} edges, {} patterns",
        ds.graph.node_count(),
        ds.graph.edge_count(),
        ds.patterns.len()
    );
    Ok(())
}

/// Exit status for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    e.exit_class() as i32
}

