//! Sectioned text format for hypergraph datasets.
//!
//! A dataset file is a sequence of `[section]` blocks. Lines starting with
//! `#` and blank lines are ignored everywhere.
//!
//! ```text
//! [header]
//! name = toy                 # optional; defaults to the file stem
//! num_nodes = 4
//! num_classes = 2
//! feature_dim = 3
//! feature_encoding = dense   # dense | sparse; optional, default dense
//!
//! [features]                 # exactly num_nodes rows, in node-id order
//! 1.0 0.0 2.5                # dense: feature_dim values
//! # sparse rows are index:value pairs; "-" alone is an all-zero row
//!
//! [labels]                   # optional; num_nodes integers, -1 = unlabeled
//! 0
//! 1
//! -1
//! 0
//!
//! [hyperedges]               # one edge per line: optional w=WEIGHT, then members
//! w=2.0 0 1 2
//! 1 3
//! ```
//!
//! Simple-graph files replace `[hyperedges]` with `[edges]` holding one
//! `u v` pair per line; each node's closed neighborhood then becomes a
//! hyperedge of weight 1 and duplicate neighborhoods collapse.

use hyperfed_core::hypergraph::{from_simple_graph, GraphError, Hypergraph};
use ndarray::Array2;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn parse_err(line: usize, message: impl Into<String>) -> DatasetError {
    DatasetError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureEncoding {
    Dense,
    Sparse,
}

/// A loaded dataset plus ingestion facts worth reporting.
#[derive(Debug)]
pub struct LoadReport {
    pub hypergraph: Hypergraph,
    /// Duplicate hyperedges merged away (weights summed) during ingestion.
    pub duplicates_merged: usize,
    /// For simple-graph files, the pair count the hyperedges were built from.
    pub simple_edges: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Header,
    Features,
    Labels,
    Hyperedges,
    Edges,
}

#[derive(Default)]
struct Builder {
    name: Option<String>,
    num_nodes: Option<usize>,
    num_classes: Option<usize>,
    feature_dim: Option<usize>,
    encoding: Option<FeatureEncoding>,
    rows: Vec<Vec<f64>>,
    labels: Vec<Option<usize>>,
    saw_labels: bool,
    hyperedges: Vec<Vec<usize>>,
    weights: Vec<f64>,
    saw_hyperedges: bool,
    pairs: Vec<(usize, usize)>,
    saw_pairs: bool,
}

impl Builder {
    fn header_done(&self, line: usize) -> Result<(usize, usize, usize), DatasetError> {
        match (self.num_nodes, self.num_classes, self.feature_dim) {
            (Some(n), Some(c), Some(d)) => Ok((n, c, d)),
            _ => Err(parse_err(
                line,
                "[header] with num_nodes, num_classes and feature_dim must come first",
            )),
        }
    }
}

fn parse_kv(line_no: usize, line: &str) -> Result<(&str, &str), DatasetError> {
    let (key, value) = line
        .split_once('=')
        .ok_or_else(|| parse_err(line_no, "expected `key = value`"))?;
    Ok((key.trim(), value.trim()))
}

fn parse_usize(line_no: usize, what: &str, token: &str) -> Result<usize, DatasetError> {
    token.parse::<usize>().map_err(|_| {
        parse_err(
            line_no,
            format!("{what}: `{token}` is not a non-negative integer"),
        )
    })
}

fn parse_f64(line_no: usize, what: &str, token: &str) -> Result<f64, DatasetError> {
    let value = token
        .parse::<f64>()
        .map_err(|_| parse_err(line_no, format!("{what}: `{token}` is not a number")))?;
    if !value.is_finite() {
        return Err(parse_err(
            line_no,
            format!("{what}: `{token}` is not finite"),
        ));
    }
    Ok(value)
}

fn parse_feature_row(
    line_no: usize,
    line: &str,
    encoding: FeatureEncoding,
    dim: usize,
) -> Result<Vec<f64>, DatasetError> {
    let mut row = vec![0.0; dim];
    match encoding {
        FeatureEncoding::Dense => {
            let values: Vec<&str> = line.split_whitespace().collect();
            if values.len() != dim {
                return Err(parse_err(
                    line_no,
                    format!(
                        "dense feature row has {} values, expected {dim}",
                        values.len()
                    ),
                ));
            }
            for (slot, token) in row.iter_mut().zip(values) {
                *slot = parse_f64(line_no, "feature value", token)?;
            }
        }
        FeatureEncoding::Sparse => {
            if line == "-" {
                return Ok(row);
            }
            for pair in line.split_whitespace() {
                let (idx, value) = pair.split_once(':').ok_or_else(|| {
                    parse_err(line_no, format!("expected `index:value`, got `{pair}`"))
                })?;
                let idx = parse_usize(line_no, "feature index", idx)?;
                if idx >= dim {
                    return Err(parse_err(
                        line_no,
                        format!("feature index {idx} out of range for feature_dim {dim}"),
                    ));
                }
                row[idx] = parse_f64(line_no, "feature value", value)?;
            }
        }
    }
    Ok(row)
}

fn parse_label(line_no: usize, token: &str) -> Result<Option<usize>, DatasetError> {
    let value = token
        .parse::<i64>()
        .map_err(|_| parse_err(line_no, format!("label `{token}` is not an integer")))?;
    match value {
        -1 => Ok(None),
        v if v >= 0 => Ok(Some(v as usize)),
        v => Err(parse_err(
            line_no,
            format!("label {v} must be -1 or a class index"),
        )),
    }
}

fn parse_hyperedge(line_no: usize, line: &str) -> Result<(f64, Vec<usize>), DatasetError> {
    let mut tokens = line.split_whitespace().peekable();
    let mut weight = 1.0;
    if let Some(first) = tokens.peek() {
        if let Some(raw) = first.strip_prefix("w=") {
            weight = parse_f64(line_no, "edge weight", raw)?;
            if weight <= 0.0 {
                return Err(parse_err(
                    line_no,
                    format!("edge weight {weight} must be positive"),
                ));
            }
            tokens.next();
        }
    }
    let members: Vec<usize> = tokens
        .map(|t| parse_usize(line_no, "member node id", t))
        .collect::<Result<_, _>>()?;
    if members.is_empty() {
        return Err(parse_err(line_no, "hyperedge has no members"));
    }
    Ok((weight, members))
}

/// Parse dataset text. `default_name` is used when the header has no `name`.
pub fn parse_dataset(text: &str, default_name: &str) -> Result<LoadReport, DatasetError> {
    let mut section = Section::Preamble;
    let mut b = Builder::default();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line_no, "unterminated section header"))?;
            section = match name {
                "header" => Section::Header,
                "features" => Section::Features,
                "labels" => Section::Labels,
                "hyperedges" => Section::Hyperedges,
                "edges" => Section::Edges,
                other => return Err(parse_err(line_no, format!("unknown section [{other}]"))),
            };
            match section {
                Section::Header => {}
                Section::Labels => {
                    if b.saw_labels {
                        return Err(parse_err(line_no, "duplicate [labels] section"));
                    }
                    b.header_done(line_no)?;
                    b.saw_labels = true;
                }
                Section::Hyperedges => {
                    if b.saw_hyperedges || b.saw_pairs {
                        return Err(parse_err(line_no, "only one edge section is allowed"));
                    }
                    b.header_done(line_no)?;
                    b.saw_hyperedges = true;
                }
                Section::Edges => {
                    if b.saw_hyperedges || b.saw_pairs {
                        return Err(parse_err(line_no, "only one edge section is allowed"));
                    }
                    b.header_done(line_no)?;
                    b.saw_pairs = true;
                }
                Section::Features => {
                    b.header_done(line_no)?;
                }
                Section::Preamble => unreachable!(),
            }
            continue;
        }
        match section {
            Section::Preamble => {
                return Err(parse_err(line_no, "content before the first section"));
            }
            Section::Header => {
                let (key, value) = parse_kv(line_no, line)?;
                match key {
                    "name" => b.name = Some(value.to_string()),
                    "num_nodes" => b.num_nodes = Some(parse_usize(line_no, "num_nodes", value)?),
                    "num_classes" => {
                        b.num_classes = Some(parse_usize(line_no, "num_classes", value)?)
                    }
                    "feature_dim" => {
                        b.feature_dim = Some(parse_usize(line_no, "feature_dim", value)?)
                    }
                    "feature_encoding" => {
                        b.encoding = Some(match value {
                            "dense" => FeatureEncoding::Dense,
                            "sparse" => FeatureEncoding::Sparse,
                            other => {
                                return Err(parse_err(
                                    line_no,
                                    format!(
                                        "feature_encoding must be dense or sparse, got `{other}`"
                                    ),
                                ))
                            }
                        })
                    }
                    other => {
                        return Err(parse_err(line_no, format!("unknown header key `{other}`")))
                    }
                }
            }
            Section::Features => {
                let (num_nodes, _, dim) = b.header_done(line_no)?;
                if b.rows.len() == num_nodes {
                    return Err(parse_err(
                        line_no,
                        format!("more than num_nodes = {num_nodes} feature rows"),
                    ));
                }
                let encoding = b.encoding.unwrap_or(FeatureEncoding::Dense);
                b.rows
                    .push(parse_feature_row(line_no, line, encoding, dim)?);
            }
            Section::Labels => {
                let (num_nodes, _, _) = b.header_done(line_no)?;
                if b.labels.len() == num_nodes {
                    return Err(parse_err(
                        line_no,
                        format!("more than num_nodes = {num_nodes} labels"),
                    ));
                }
                b.labels.push(parse_label(line_no, line)?);
            }
            Section::Hyperedges => {
                let (weight, members) = parse_hyperedge(line_no, line)?;
                b.weights.push(weight);
                b.hyperedges.push(members);
            }
            Section::Edges => {
                let tokens: Vec<&str> = line.split_whitespace().collect();
                if tokens.len() != 2 {
                    return Err(parse_err(
                        line_no,
                        "expected exactly two node ids per edge line",
                    ));
                }
                let u = parse_usize(line_no, "node id", tokens[0])?;
                let v = parse_usize(line_no, "node id", tokens[1])?;
                b.pairs.push((u, v));
            }
        }
    }

    let eof = last_line + 1;
    let (num_nodes, num_classes, feature_dim) = b.header_done(eof)?;
    if b.rows.len() != num_nodes {
        return Err(parse_err(
            eof,
            format!(
                "[features] has {} rows, expected num_nodes = {num_nodes}",
                b.rows.len()
            ),
        ));
    }
    if b.saw_labels && b.labels.len() != num_nodes {
        return Err(parse_err(
            eof,
            format!(
                "[labels] has {} entries, expected num_nodes = {num_nodes}",
                b.labels.len()
            ),
        ));
    }
    if !b.saw_hyperedges && !b.saw_pairs {
        return Err(parse_err(eof, "missing [hyperedges] or [edges] section"));
    }

    let mut flat = Vec::with_capacity(num_nodes * feature_dim);
    for row in &b.rows {
        flat.extend_from_slice(row);
    }
    let features = Array2::from_shape_vec((num_nodes, feature_dim), flat)
        .expect("row arity is checked per line");
    let labels = if b.saw_labels {
        b.labels
    } else {
        vec![None; num_nodes]
    };
    let name = b.name.unwrap_or_else(|| default_name.to_string());

    if b.saw_pairs {
        let hg = from_simple_graph(num_nodes, &b.pairs, features, labels, num_classes, name)?;
        Ok(LoadReport {
            hypergraph: hg,
            duplicates_merged: 0,
            simple_edges: Some(b.pairs.len()),
        })
    } else {
        let mut hg = Hypergraph::new(features, labels, num_classes, b.hyperedges, b.weights, name)?;
        let before = hg.num_edges();
        hg.merge_duplicate_edges();
        let duplicates_merged = before - hg.num_edges();
        Ok(LoadReport {
            hypergraph: hg,
            duplicates_merged,
            simple_edges: None,
        })
    }
}

/// Load a dataset file; the file stem names the hypergraph unless the header
/// says otherwise.
pub fn load_dataset(path: &Path) -> Result<LoadReport, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    parse_dataset(&text, &stem)
}

/// Render a hypergraph back to dataset text. Weights are written only when
/// they differ from 1; `parse_dataset` inverts this exactly.
pub fn render_dataset(hg: &Hypergraph, encoding: FeatureEncoding) -> String {
    let mut out = String::new();
    out.push_str("[header]\n");
    let _ = writeln!(out, "name = {}", hg.name);
    let _ = writeln!(out, "num_nodes = {}", hg.num_nodes);
    let _ = writeln!(out, "num_classes = {}", hg.num_classes);
    let _ = writeln!(out, "feature_dim = {}", hg.feature_dim);
    let encoding_name = match encoding {
        FeatureEncoding::Dense => "dense",
        FeatureEncoding::Sparse => "sparse",
    };
    let _ = writeln!(out, "feature_encoding = {encoding_name}");
    out.push_str("\n[features]\n");
    for row in hg.features.rows() {
        match encoding {
            FeatureEncoding::Dense => {
                let rendered: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{}", rendered.join(" "));
            }
            FeatureEncoding::Sparse => {
                let rendered: Vec<String> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(i, v)| format!("{i}:{v}"))
                    .collect();
                if rendered.is_empty() {
                    out.push_str("-\n");
                } else {
                    let _ = writeln!(out, "{}", rendered.join(" "));
                }
            }
        }
    }
    out.push_str("\n[labels]\n");
    for label in &hg.labels {
        match label {
            Some(c) => {
                let _ = writeln!(out, "{c}");
            }
            None => out.push_str("-1\n"),
        }
    }
    out.push_str("\n[hyperedges]\n");
    for (members, &weight) in hg.hyperedges.iter().zip(&hg.edge_weights) {
        let ids: Vec<String> = members.iter().map(|v| v.to_string()).collect();
        if weight == 1.0 {
            let _ = writeln!(out, "{}", ids.join(" "));
        } else {
            let _ = writeln!(out, "w={weight} {}", ids.join(" "));
        }
    }
    out
}

/// Write a hypergraph as a dataset file.
pub fn write_dataset(
    hg: &Hypergraph,
    path: &Path,
    encoding: FeatureEncoding,
) -> Result<(), DatasetError> {
    std::fs::write(path, render_dataset(hg, encoding))?;
    Ok(())
}
