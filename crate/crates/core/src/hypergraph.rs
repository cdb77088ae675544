//! Immutable hypergraph representation with bidirectional sparse incidence
//! indices and degree computations.
//!
//! A hypergraph connects any number of nodes through a single hyperedge. The
//! incidence relation is kept in both directions (edge -> members and
//! node -> incident edges) so that propagation kernels can iterate whichever
//! side is cheaper.

use ndarray::Array2;
use thiserror::Error;

/// Errors produced while constructing a hypergraph.
#[derive(Debug, Error)]
pub enum GraphError {
    /// The structure breaks one or more invariants; the report lists them all.
    #[error("invalid hypergraph: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    /// A graph with zero nodes cannot be expanded into hyperedges.
    #[error("cannot build a hypergraph from an empty graph")]
    EmptyGraph,
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A single violated invariant found by [`Hypergraph::validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("hyperedge {edge} contains node {node} >= num_nodes {num_nodes}")]
    NodeOutOfRange {
        edge: usize,
        node: usize,
        num_nodes: usize,
    },
    #[error("hyperedge {edge} is empty")]
    EmptyHyperedge { edge: usize },
    #[error("hyperedge {edge} has unsorted or duplicate members")]
    UnsortedOrDuplicateMembers { edge: usize },
    #[error("hyperedge {edge} has non-positive weight {weight}")]
    NonPositiveWeight { edge: usize, weight: f64 },
    #[error("{weights} edge weights for {edges} hyperedges")]
    WeightCountMismatch { edges: usize, weights: usize },
    #[error("feature matrix has {rows} rows, expected {num_nodes}")]
    FeatureRowMismatch { rows: usize, num_nodes: usize },
    #[error("feature matrix has {cols} columns, expected {feature_dim}")]
    FeatureDimMismatch { cols: usize, feature_dim: usize },
    #[error("node {node} has a non-finite feature value")]
    NonFiniteFeature { node: usize },
    #[error("{labels} labels for {num_nodes} nodes")]
    LabelCountMismatch { labels: usize, num_nodes: usize },
    #[error("node {node} has label {label} >= num_classes {num_classes}")]
    LabelOutOfRange {
        node: usize,
        label: usize,
        num_classes: usize,
    },
}

/// A whole hypergraph: nodes with features and optional labels, plus weighted
/// hyperedges. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    pub num_nodes: usize,
    pub feature_dim: usize,
    /// Row-major node feature matrix, one row per node.
    pub features: Array2<f64>,
    /// Class index per node, `None` when unlabeled.
    pub labels: Vec<Option<usize>>,
    pub num_classes: usize,
    /// Member lists, each sorted ascending with no duplicates.
    pub hyperedges: Vec<Vec<usize>>,
    /// Strictly positive weight per hyperedge.
    pub edge_weights: Vec<f64>,
    pub name: String,
}

impl Hypergraph {
    /// Build a hypergraph, normalizing member lists (sort + dedup within an
    /// edge) and rejecting anything that violates the structural invariants.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<Option<usize>>,
        num_classes: usize,
        mut hyperedges: Vec<Vec<usize>>,
        edge_weights: Vec<f64>,
        name: impl Into<String>,
    ) -> Result<Self, GraphError> {
        for members in &mut hyperedges {
            members.sort_unstable();
            members.dedup();
        }
        let hg = Hypergraph {
            num_nodes: features.nrows(),
            feature_dim: features.ncols(),
            features,
            labels,
            num_classes,
            hyperedges,
            edge_weights,
            name: name.into(),
        };
        let report = hg.validate();
        if report.is_empty() {
            Ok(hg)
        } else {
            Err(GraphError::Invalid(report))
        }
    }

    /// Number of hyperedges.
    pub fn num_edges(&self) -> usize {
        self.hyperedges.len()
    }

    /// True when every node carries a label.
    pub fn fully_labeled(&self) -> bool {
        self.labels.iter().all(|l| l.is_some())
    }

    /// Check every structural invariant and return the list of violations
    /// (empty when the hypergraph is valid).
    pub fn validate(&self) -> Vec<Violation> {
        let mut report = Vec::new();
        if self.features.nrows() != self.num_nodes {
            report.push(Violation::FeatureRowMismatch {
                rows: self.features.nrows(),
                num_nodes: self.num_nodes,
            });
        }
        if self.features.ncols() != self.feature_dim {
            report.push(Violation::FeatureDimMismatch {
                cols: self.features.ncols(),
                feature_dim: self.feature_dim,
            });
        }
        for (node, row) in self.features.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                report.push(Violation::NonFiniteFeature { node });
            }
        }
        if self.labels.len() != self.num_nodes {
            report.push(Violation::LabelCountMismatch {
                labels: self.labels.len(),
                num_nodes: self.num_nodes,
            });
        }
        for (node, label) in self.labels.iter().enumerate() {
            if let Some(label) = *label {
                if label >= self.num_classes {
                    report.push(Violation::LabelOutOfRange {
                        node,
                        label,
                        num_classes: self.num_classes,
                    });
                }
            }
        }
        if self.edge_weights.len() != self.hyperedges.len() {
            report.push(Violation::WeightCountMismatch {
                edges: self.hyperedges.len(),
                weights: self.edge_weights.len(),
            });
        }
        for (edge, members) in self.hyperedges.iter().enumerate() {
            if members.is_empty() {
                report.push(Violation::EmptyHyperedge { edge });
            }
            if !members.windows(2).all(|w| w[0] < w[1]) {
                report.push(Violation::UnsortedOrDuplicateMembers { edge });
            }
            for &node in members {
                if node >= self.num_nodes {
                    report.push(Violation::NodeOutOfRange {
                        edge,
                        node,
                        num_nodes: self.num_nodes,
                    });
                }
            }
        }
        for (edge, &weight) in self.edge_weights.iter().enumerate() {
            // NaN also lands here: it is not a positive weight
            if weight <= 0.0 || weight.is_nan() {
                report.push(Violation::NonPositiveWeight { edge, weight });
            }
        }
        report
    }

    /// Merge hyperedges with identical member sets, summing their weights.
    /// Keeps the first occurrence's position. Ingestion uses this to keep
    /// incidence columns distinct.
    pub fn merge_duplicate_edges(&mut self) {
        let mut seen: std::collections::HashMap<Vec<usize>, usize> =
            std::collections::HashMap::new();
        let mut edges = Vec::with_capacity(self.hyperedges.len());
        let mut weights = Vec::with_capacity(self.edge_weights.len());
        for (members, weight) in self.hyperedges.drain(..).zip(self.edge_weights.drain(..)) {
            match seen.entry(members) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    weights[*e.get()] += weight;
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    edges.push(e.key().clone());
                    weights.push(weight);
                    e.insert(edges.len() - 1);
                }
            }
        }
        self.hyperedges = edges;
        self.edge_weights = weights;
    }
}

/// Both directions of the incidence relation. `node_to_edges` is the exact
/// transpose of `edge_to_nodes`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceIndex {
    /// Sorted member list per hyperedge.
    pub edge_to_nodes: Vec<Vec<usize>>,
    /// Sorted incident-edge list per node.
    pub node_to_edges: Vec<Vec<usize>>,
}

/// Weighted node degrees and hyperedge degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVectors {
    /// d(v): sum of the weights of the hyperedges containing v. Zero for
    /// isolated nodes.
    pub node_degree: Vec<f64>,
    /// s(e): number of nodes in hyperedge e.
    pub edge_degree: Vec<usize>,
}

/// Populate both directions of the incidence relation.
pub fn build_incidence(hg: &Hypergraph) -> IncidenceIndex {
    let mut node_to_edges = vec![Vec::new(); hg.num_nodes];
    for (edge, members) in hg.hyperedges.iter().enumerate() {
        for &node in members {
            node_to_edges[node].push(edge);
        }
    }
    // edges are visited in ascending order so each node list is already sorted
    IncidenceIndex {
        edge_to_nodes: hg.hyperedges.clone(),
        node_to_edges,
    }
}

/// Compute node and hyperedge degrees.
pub fn compute_degrees(hg: &Hypergraph, idx: &IncidenceIndex) -> DegreeVectors {
    let node_degree = idx
        .node_to_edges
        .iter()
        .map(|edges| edges.iter().map(|&e| hg.edge_weights[e]).sum())
        .collect();
    let edge_degree = idx.edge_to_nodes.iter().map(|m| m.len()).collect();
    DegreeVectors {
        node_degree,
        edge_degree,
    }
}

/// Expand a simple undirected graph into a hypergraph: one candidate
/// hyperedge per node v equal to {v} union neighbors(v), with identical
/// member sets deduplicated and all weights 1.0. Directed duplicates and
/// self-loops in the edge list are tolerated.
pub fn from_simple_graph(
    num_nodes: usize,
    edges: &[(usize, usize)],
    features: Array2<f64>,
    labels: Vec<Option<usize>>,
    num_classes: usize,
    name: impl Into<String>,
) -> Result<Hypergraph, GraphError> {
    if num_nodes == 0 {
        return Err(GraphError::EmptyGraph);
    }
    let mut neighborhoods: Vec<std::collections::BTreeSet<usize>> = (0..num_nodes)
        .map(|v| std::collections::BTreeSet::from([v]))
        .collect();
    for &(u, v) in edges {
        if u >= num_nodes || v >= num_nodes {
            return Err(GraphError::Invalid(vec![Violation::NodeOutOfRange {
                edge: 0,
                node: u.max(v),
                num_nodes,
            }]));
        }
        neighborhoods[u].insert(v);
        neighborhoods[v].insert(u);
    }
    let mut seen = std::collections::HashSet::new();
    let mut hyperedges = Vec::new();
    for hood in neighborhoods {
        let members: Vec<usize> = hood.into_iter().collect();
        if seen.insert(members.clone()) {
            hyperedges.push(members);
        }
    }
    let weights = vec![1.0; hyperedges.len()];
    Hypergraph::new(features, labels, num_classes, hyperedges, weights, name)
}
