//! Tab-separated and FASTA readers and writers, plus atomic file output.
//!
//! Every table starts with a header row. Blank lines and lines starting
//! with `#` are ignored. Floats are written in shortest round-trip form, so
//! reading a written file gives back identical values.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::featurize::Fingerprint;
use crate::graph::{Graph, Pattern};
use crate::tensor::Dense;
use crate::training::{EpochRecord, Split, HISTORY_HEADER};

pub const NODES_FILE: &str = "nodes.tsv";
pub const EDGES_FILE: &str = "edges.tsv";

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Non-comment lines as (1-based line number, fields).
fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(k, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((k + 1, line.split('\t').collect()))
        }
    })
}

fn header<'a>(
    path: &Path,
    it: &mut impl Iterator<Item = (usize, Vec<&'a str>)>,
    first: &str,
) -> Result<(usize, Vec<&'a str>)> {
    match it.next() {
        Some((line, fields)) if fields[0] == first => Ok((line, fields)),
        Some((line, fields)) => Err(Error::parse(
            path,
            line,
            format!("expected a header starting with '{first}', found '{}'", fields[0]),
        )),
        None => Err(Error::parse(path, 0, "file is empty")),
    }
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("'{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("'{field}' is not finite")));
    }
    Ok(v)
}

fn check_id(path: &Path, line: usize, id: &str) -> Result<String> {
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(Error::parse(path, line, format!("invalid id '{id}'")));
    }
    Ok(id.to_string())
}

fn expect_width(path: &Path, line: usize, fields: &[&str], width: usize) -> Result<()> {
    if fields.len() != width {
        return Err(Error::parse(
            path,
            line,
            format!("expected {width} columns, found {}", fields.len()),
        ));
    }
    Ok(())
}

fn push_row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let mut first = true;
    for c in cells {
        if !first {
            out.push('\t');
        }
        out.push_str(&c);
        first = false;
    }
    out.push('\n');
}

/// Node table: `id f0 f1 ...`. Without feature columns the features are `None`.
pub fn parse_nodes(text: &str, path: &Path) -> Result<(Vec<String>, Option<Dense>)> {
    let mut it = rows(text);
    let (_, head) = header(path, &mut it, "id")?;
    let width = head.len();
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (line, fields) in it {
        expect_width(path, line, &fields, width)?;
        ids.push(check_id(path, line, fields[0])?);
        for f in &fields[1..] {
            data.push(parse_f64(path, line, f)?);
        }
    }
    if ids.is_empty() {
        return Err(Error::parse(path, 0, "no nodes"));
    }
    let features = if width > 1 {
        Some(Dense::from_vec(ids.len(), width - 1, data)?)
    } else {
        None
    };
    Ok((ids, features))
}

pub fn format_nodes(ids: &[String], features: &Dense) -> String {
    let mut out = String::new();
    push_row(
        &mut out,
        std::iter::once("id".to_string()).chain((0..features.cols()).map(|c| format!("f{c}"))),
    );
    for (r, id) in ids.iter().enumerate() {
        push_row(
            &mut out,
            std::iter::once(id.clone()).chain(features.row(r).iter().map(|v| v.to_string())),
        );
    }
    out
}

/// Edge endpoints and the optional edge feature matrix.
pub type EdgeTable = (Vec<(usize, usize)>, Option<Dense>);

/// Edge table: `src dst [e0 e1 ...]` with endpoints given by id.
pub fn parse_edges(text: &str, path: &Path, index: &HashMap<String, usize>) -> Result<EdgeTable> {
    let mut it = rows(text);
    let (_, head) = header(path, &mut it, "src")?;
    let width = head.len();
    if width < 2 {
        return Err(Error::parse(path, 1, "edge header needs src and dst columns"));
    }
    let mut edges = Vec::new();
    let mut data = Vec::new();
    for (line, fields) in it {
        expect_width(path, line, &fields, width)?;
        let end = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::parse(path, line, format!("unknown node id '{id}'")))
        };
        edges.push((end(fields[0])?, end(fields[1])?));
        for f in &fields[2..] {
            data.push(parse_f64(path, line, f)?);
        }
    }
    let features = if width > 2 {
        Some(Dense::from_vec(edges.len(), width - 2, data)?)
    } else {
        None
    };
    Ok((edges, features))
}

pub fn format_edges(graph: &Graph) -> String {
    let mut out = String::new();
    push_row(
        &mut out,
        ["src".to_string(), "dst".to_string()]
            .into_iter()
            .chain((0..graph.edge_feature_dim()).map(|c| format!("e{c}"))),
    );
    for (k, &(u, v)) in graph.edges().iter().enumerate() {
        let feats = graph.edge_features().map(|ef| ef.row(k).to_vec()).unwrap_or_default();
        push_row(
            &mut out,
            [graph.node_id(u).to_string(), graph.node_id(v).to_string()]
                .into_iter()
                .chain(feats.iter().map(|x| x.to_string())),
        );
    }
    out
}

/// Reads `nodes.tsv` and `edges.tsv` from a directory. A node table
/// without feature columns yields one-hot features.
pub fn read_graph_dir(dir: &Path) -> Result<Graph> {
    let nodes_path = dir.join(NODES_FILE);
    let edges_path = dir.join(EDGES_FILE);
    let (ids, features) = parse_nodes(&read_text(&nodes_path)?, &nodes_path)?;
    let mut index = HashMap::with_capacity(ids.len());
    for (k, id) in ids.iter().enumerate() {
        if index.insert(id.clone(), k).is_some() {
            return Err(Error::parse(&nodes_path, 0, format!("duplicate node id '{id}'")));
        }
    }
    let (edges, edge_features) = parse_edges(&read_text(&edges_path)?, &edges_path, &index)?;
    let features = features.unwrap_or_else(|| Dense::identity(ids.len()));
    Graph::new(ids, edges, features, edge_features).map_err(|e| match e {
        Error::InvalidArgument(m) | Error::InvalidShape(m) => Error::parse(&edges_path, 0, m),
        other => other,
    })
}

pub fn write_graph_dir(dir: &Path, graph: &Graph) -> Result<()> {
    write_atomic(
        &dir.join(NODES_FILE),
        format_nodes(graph.node_ids(), graph.node_features()).as_bytes(),
    )?;
    write_atomic(&dir.join(EDGES_FILE), format_edges(graph).as_bytes())
}

/// Square similarity table: header `id a b c ...`, then one row per id in
/// the same order.
pub fn parse_similarity(text: &str, path: &Path) -> Result<(Vec<String>, Dense)> {
    let mut it = rows(text);
    let (hline, head) = header(path, &mut it, "id")?;
    let ids: Vec<String> = head[1..]
        .iter()
        .map(|s| check_id(path, hline, s))
        .collect::<Result<_>>()?;
    let n = ids.len();
    if n == 0 {
        return Err(Error::parse(path, hline, "no ids in header"));
    }
    let mut data = Vec::with_capacity(n * n);
    let mut r = 0;
    for (line, fields) in it {
        expect_width(path, line, &fields, n + 1)?;
        if r >= n {
            return Err(Error::parse(path, line, "more rows than header ids"));
        }
        if fields[0] != ids[r] {
            return Err(Error::parse(
                path,
                line,
                format!("row id '{}' does not match header id '{}'", fields[0], ids[r]),
            ));
        }
        for f in &fields[1..] {
            data.push(parse_f64(path, line, f)?);
        }
        r += 1;
    }
    if r != n {
        return Err(Error::parse(path, 0, format!("{r} rows for {n} header ids")));
    }
    Ok((ids, Dense::from_vec(n, n, data)?))
}

pub fn format_similarity(ids: &[String], sim: &Dense) -> String {
    let mut out = String::new();
    push_row(&mut out, std::iter::once("id".to_string()).chain(ids.iter().cloned()));
    for (r, id) in ids.iter().enumerate() {
        push_row(
            &mut out,
            std::iter::once(id.clone()).chain(sim.row(r).iter().map(|v| v.to_string())),
        );
    }
    out
}

/// A pattern with the line it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternRow {
    pub line: usize,
    pub pattern: Pattern,
}

/// Pattern table: `i j [label]`. An empty or missing label marks the row unlabeled.
pub fn parse_patterns(text: &str, path: &Path) -> Result<Vec<PatternRow>> {
    let mut it = rows(text);
    let (_, head) = header(path, &mut it, "i")?;
    if head.len() < 2 || head[1] != "j" || head.len() > 3 {
        return Err(Error::parse(path, 1, "pattern header must be 'i<TAB>j[<TAB>label]'"));
    }
    let mut out = Vec::new();
    for (line, fields) in it {
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 2 or 3 columns, found {}", fields.len()),
            ));
        }
        let label = match fields.get(2).map(|s| s.trim()) {
            None | Some("") => None,
            Some(s) => Some(parse_f64(path, line, s)?),
        };
        let i = check_id(path, line, fields[0])?;
        let j = check_id(path, line, fields[1])?;
        let pattern = Pattern::new(i, j, label).map_err(|e| Error::parse(path, line, e.to_string()))?;
        out.push(PatternRow { line, pattern });
    }
    Ok(out)
}

pub fn read_patterns(path: &Path) -> Result<Vec<PatternRow>> {
    parse_patterns(&read_text(path)?, path)
}

pub fn format_patterns(patterns: &[Pattern]) -> String {
    let mut out = String::from("i\tj\tlabel\n");
    for p in patterns {
        let label = p.label.map(|l| l.to_string()).unwrap_or_default();
        push_row(&mut out, [p.i.clone(), p.j.clone(), label]);
    }
    out
}

/// Fingerprint table: `id bits` where bits is a string of 0s and 1s.
pub fn parse_fingerprints(text: &str, path: &Path) -> Result<Vec<Fingerprint>> {
    let mut it = rows(text);
    header(path, &mut it, "id")?;
    it.map(|(line, fields)| {
        expect_width(path, line, &fields, 2)?;
        let id = check_id(path, line, fields[0])?;
        Fingerprint::from_bitstring(id, fields[1].trim()).map_err(|e| Error::parse(path, line, e.to_string()))
    })
    .collect()
}

pub fn format_fingerprints(fps: &[Fingerprint]) -> String {
    let mut out = String::from("id\tbits\n");
    for fp in fps {
        push_row(&mut out, [fp.id.clone(), fp.to_bitstring()]);
    }
    out
}

/// FASTA records as (id, sequence). The id is the first word after `>`.
pub fn parse_fasta(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('>') {
            let id = rest.split_whitespace().next().unwrap_or("");
            out.push((check_id(path, k + 1, id)?, String::new()));
        } else {
            match out.last_mut() {
                Some((_, seq)) => seq.push_str(line),
                None => return Err(Error::parse(path, k + 1, "sequence data before the first '>' header")),
            }
        }
    }
    if out.is_empty() {
        return Err(Error::parse(path, 0, "no FASTA records"));
    }
    Ok(out)
}

/// Edge list annotated with enzyme numbers: `src dst ec`, where `ec` holds
/// one or more numbers separated by `;`.
pub fn parse_ec_edges(text: &str, path: &Path) -> Result<Vec<(String, String, Vec<String>)>> {
    let mut it = rows(text);
    header(path, &mut it, "src")?;
    it.map(|(line, fields)| {
        expect_width(path, line, &fields, 3)?;
        let ecs: Vec<String> = fields[2]
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        Ok((check_id(path, line, fields[0])?, check_id(path, line, fields[1])?, ecs))
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub i: String,
    pub j: String,
    pub prediction: f64,
    pub cosine: f64,
}

pub const PREDICTION_HEADER: &str = "i\tj\tprediction\tcosine";

pub fn format_predictions(rows: &[PredictionRow]) -> String {
    let mut out = format!("{PREDICTION_HEADER}\n");
    for r in rows {
        push_row(
            &mut out,
            [r.i.clone(), r.j.clone(), r.prediction.to_string(), r.cosine.to_string()],
        );
    }
    out
}

pub fn parse_predictions(text: &str, path: &Path) -> Result<Vec<PredictionRow>> {
    let mut it = rows(text);
    header(path, &mut it, "i")?;
    it.map(|(line, f)| {
        expect_width(path, line, &f, 4)?;
        Ok(PredictionRow {
            i: check_id(path, line, f[0])?,
            j: check_id(path, line, f[1])?,
            prediction: parse_f64(path, line, f[2])?,
            cosine: parse_f64(path, line, f[3])?,
        })
    })
    .collect()
}

/// Per-node 2-D coordinates: `id pc1 pc2`.
pub fn format_coords(ids: &[String], coords: &Dense) -> String {
    let mut out = String::from("id\tpc1\tpc2\n");
    for (r, id) in ids.iter().enumerate() {
        push_row(
            &mut out,
            [id.clone(), coords.get(r, 0).to_string(), coords.get(r, 1).to_string()],
        );
    }
    out
}

pub fn parse_history_csv(text: &str, path: &Path) -> Result<Vec<EpochRecord>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim_end() == HISTORY_HEADER => {}
        _ => return Err(Error::parse(path, 1, format!("expected header '{HISTORY_HEADER}'"))),
    }
    lines
        .map(|(k, l)| {
            let line = k + 1;
            let f: Vec<&str> = l.trim_end().split(',').collect();
            expect_width(path, line, &f, 7)?;
            let epoch = f[0]
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad epoch '{}'", f[0])))?;
            let split = match f[1] {
                "train" => Split::Train,
                "validation" => Split::Validation,
                other => return Err(Error::parse(path, line, format!("unknown split '{other}'"))),
            };
            Ok(EpochRecord {
                epoch,
                split,
                total: parse_f64(path, line, f[2])?,
                l_sup: parse_f64(path, line, f[3])?,
                l_cos: parse_f64(path, line, f[4])?,
                l_cospred: parse_f64(path, line, f[5])?,
                best: parse_f64(path, line, f[6])?,
            })
        })
        .collect()
}

/// Writes one line per id.
pub fn format_id_list(ids: &[String]) -> String {
    let mut out = String::from("id\n");
    for id in ids {
        let _ = writeln!(out, "{id}");
    }
    out
}
