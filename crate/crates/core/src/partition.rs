//! Label-driven Dirichlet partitioning of a hypergraph into client
//! subgraphs, border-edge bookkeeping, trimming, and mask generation.
//!
//! A hyperedge whose members span two or more clients is a border hyperedge.
//! Every client touching one keeps a local view of it (its own members); the
//! [`BorderIndex`] records the global picture the server needs.

use crate::hypergraph::Hypergraph;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("node {node} has no label; label-driven partitioning requires full labels")]
    NoLabels { node: usize },
    #[error("train+val+test ratios sum to {total}, must be <= 1")]
    RatioOverflow { total: f64 },
}

/// How to split a hypergraph across clients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSpec {
    pub num_clients: usize,
    /// Dirichlet concentration; large values approach an i.i.d. split.
    pub beta: f64,
    pub seed: u64,
}

/// Per-node client assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub client_of: Vec<usize>,
    pub num_clients: usize,
}

/// A hyperedge as one client sees it: members are local node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEdge {
    pub global_id: usize,
    pub members: Vec<usize>,
    pub weight: f64,
}

/// Disjoint train/val/test node selections over a client's local nodes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Masks {
    pub fn empty(n: usize) -> Self {
        Masks {
            train: vec![false; n],
            val: vec![false; n],
            test: vec![false; n],
        }
    }

    pub fn train_count(&self) -> usize {
        self.train.iter().filter(|&&b| b).count()
    }
}

/// One client's complete local view of the partitioned hypergraph.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientSubgraph {
    pub client_id: usize,
    /// Sorted global ids of the nodes this client holds; local id = position.
    pub global_node_ids: Vec<usize>,
    pub local_features: Array2<f64>,
    pub local_labels: Vec<Option<usize>>,
    /// Hyperedges fully inside this client, ascending global id.
    pub internal_edges: Vec<LocalEdge>,
    /// Local views of border hyperedges, ascending global id.
    pub border_edges: Vec<LocalEdge>,
    /// Sorted local ids of nodes touching any border edge.
    pub border_nodes: Vec<usize>,
    /// d(v) over internal plus untrimmed border membership; equals the global
    /// degree, which the completion protocol relies on.
    pub node_degree: Vec<f64>,
    pub masks: Masks,
}

impl ClientSubgraph {
    pub fn num_nodes(&self) -> usize {
        self.global_node_ids.len()
    }

    /// Node degrees recomputed as if the trimmed graph were the whole world
    /// (basic mode). Border membership is already local-only, so the values
    /// coincide with `node_degree`; this recomputes them from the trimmed
    /// edge set as that mode defines them.
    pub fn trimmed_node_degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.num_nodes()];
        for edge in self.internal_edges.iter().chain(&self.border_edges) {
            for &v in &edge.members {
                deg[v] += edge.weight;
            }
        }
        deg
    }

    /// Internal and trimmed border edges merged in ascending global-id order:
    /// the standalone hypergraph basic mode propagates over.
    pub fn standalone_trimmed_edges(&self) -> Vec<LocalEdge> {
        let mut edges: Vec<LocalEdge> = self
            .internal_edges
            .iter()
            .chain(&self.border_edges)
            .cloned()
            .collect();
        edges.sort_by_key(|e| e.global_id);
        edges
    }
}

/// Global bookkeeping for one border hyperedge.
#[derive(Debug, Clone, PartialEq)]
pub struct BorderEdgeInfo {
    /// Clients holding at least one member, ascending.
    pub clients: Vec<usize>,
    /// Member count per entry of `clients`.
    pub member_counts: Vec<usize>,
    /// s(e*): total member count across all clients.
    pub total_members: usize,
    pub weight: f64,
}

/// All border hyperedges keyed by global edge id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BorderIndex {
    pub edges: BTreeMap<usize, BorderEdgeInfo>,
}

impl BorderIndex {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Sample proportions from a symmetric Dirichlet via normalized Gamma draws.
fn sample_dirichlet(k: usize, beta: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gamma = Gamma::new(beta, 1.0).expect("beta > 0");
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 {
        draws.iter().map(|g| g / sum).collect()
    } else {
        vec![1.0 / k as f64; k]
    }
}

/// Apportion `n` items to integer block sizes proportional to `props`,
/// summing exactly to `n` (largest-remainder rounding, ties to lower index).
fn largest_remainder(n: usize, props: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = props.iter().map(|p| p * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..props.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(n - assigned) {
        sizes[i] += 1;
    }
    sizes
}

/// Assign every node to a client, class by class: proportions drawn from
/// Dirichlet(beta), the class's nodes shuffled and split into contiguous
/// blocks of apportioned sizes. Deterministic per seed. Refuses graphs with
/// unlabeled nodes; see [`uniform_partition`] for the explicit fallback.
pub fn dirichlet_partition(
    hg: &Hypergraph,
    spec: &PartitionSpec,
) -> Result<Assignment, PartitionError> {
    assert!(spec.num_clients >= 1 && spec.beta > 0.0);
    let mut labels = Vec::with_capacity(hg.num_nodes);
    for (node, label) in hg.labels.iter().enumerate() {
        match label {
            Some(c) => labels.push(*c),
            None => return Err(PartitionError::NoLabels { node }),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut client_of = vec![0usize; hg.num_nodes];
    for class in 0..hg.num_classes {
        let mut nodes: Vec<usize> = (0..hg.num_nodes).filter(|&v| labels[v] == class).collect();
        let props = sample_dirichlet(spec.num_clients, spec.beta, &mut rng);
        nodes.shuffle(&mut rng);
        let sizes = largest_remainder(nodes.len(), &props);
        let mut offset = 0;
        for (client, &size) in sizes.iter().enumerate() {
            for &v in &nodes[offset..offset + size] {
                client_of[v] = client;
            }
            offset += size;
        }
    }
    Ok(Assignment {
        client_of,
        num_clients: spec.num_clients,
    })
}

/// Label-free fallback: shuffle all nodes and split into near-equal blocks.
/// Only used when explicitly requested; label-driven partitioning is the
/// default and refuses unlabeled graphs rather than silently degrading.
pub fn uniform_partition(hg: &Hypergraph, spec: &PartitionSpec) -> Assignment {
    assert!(spec.num_clients >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut nodes: Vec<usize> = (0..hg.num_nodes).collect();
    nodes.shuffle(&mut rng);
    let props = vec![1.0 / spec.num_clients as f64; spec.num_clients];
    let sizes = largest_remainder(hg.num_nodes, &props);
    let mut client_of = vec![0usize; hg.num_nodes];
    let mut offset = 0;
    for (client, &size) in sizes.iter().enumerate() {
        for &v in &nodes[offset..offset + size] {
            client_of[v] = client;
        }
        offset += size;
    }
    Assignment {
        client_of,
        num_clients: spec.num_clients,
    }
}

/// Split the hypergraph according to an assignment. Each hyperedge whose
/// members all map to one client becomes internal to it; every other edge is
/// recorded in the border index and in each touched client's local view.
pub fn split_subgraphs(
    hg: &Hypergraph,
    assignment: &Assignment,
) -> (Vec<ClientSubgraph>, BorderIndex) {
    let k = assignment.num_clients;
    assert_eq!(assignment.client_of.len(), hg.num_nodes);

    let mut global_ids: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (v, &c) in assignment.client_of.iter().enumerate() {
        global_ids[c].push(v);
    }
    let mut local_of = vec![usize::MAX; hg.num_nodes];
    for ids in &global_ids {
        for (local, &global) in ids.iter().enumerate() {
            local_of[global] = local;
        }
    }

    let mut internal: Vec<Vec<LocalEdge>> = vec![Vec::new(); k];
    let mut border: Vec<Vec<LocalEdge>> = vec![Vec::new(); k];
    let mut border_index = BorderIndex::default();

    for (e, members) in hg.hyperedges.iter().enumerate() {
        let weight = hg.edge_weights[e];
        let mut by_client: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &v in members {
            by_client
                .entry(assignment.client_of[v])
                .or_default()
                .push(local_of[v]);
        }
        if by_client.len() == 1 {
            let (&c, locals) = by_client.iter().next().unwrap();
            internal[c].push(LocalEdge {
                global_id: e,
                members: locals.clone(),
                weight,
            });
        } else {
            let clients: Vec<usize> = by_client.keys().copied().collect();
            let member_counts: Vec<usize> = by_client.values().map(|m| m.len()).collect();
            border_index.edges.insert(
                e,
                BorderEdgeInfo {
                    clients,
                    member_counts,
                    total_members: members.len(),
                    weight,
                },
            );
            for (c, locals) in by_client {
                border[c].push(LocalEdge {
                    global_id: e,
                    members: locals,
                    weight,
                });
            }
        }
    }

    let subgraphs = (0..k)
        .map(|c| {
            let ids = std::mem::take(&mut global_ids[c]);
            let n = ids.len();
            let mut features = Array2::zeros((n, hg.feature_dim));
            let mut labels = Vec::with_capacity(n);
            for (local, &global) in ids.iter().enumerate() {
                features.row_mut(local).assign(&hg.features.row(global));
                labels.push(hg.labels[global]);
            }
            let internal_edges = std::mem::take(&mut internal[c]);
            let border_edges = std::mem::take(&mut border[c]);
            let mut degree = vec![0.0; n];
            for edge in internal_edges.iter().chain(&border_edges) {
                for &v in &edge.members {
                    degree[v] += edge.weight;
                }
            }
            let mut border_nodes: Vec<usize> = border_edges
                .iter()
                .flat_map(|e| e.members.iter().copied())
                .collect();
            border_nodes.sort_unstable();
            border_nodes.dedup();
            ClientSubgraph {
                client_id: c,
                global_node_ids: ids,
                local_features: features,
                local_labels: labels,
                internal_edges,
                border_edges,
                border_nodes,
                node_degree: degree,
                masks: Masks::empty(n),
            }
        })
        .collect();

    (subgraphs, border_index)
}

/// Basic-mode preparation: each border edge restricted to the client's local
/// members, with the edge degree redefined as that local member count.
pub fn trim_border(sub: &ClientSubgraph) -> Vec<LocalEdge> {
    sub.border_edges.clone()
}

/// Sample disjoint train/val/test masks over a client's labeled nodes at the
/// given ratios (counts by floor; a nonempty client always gets at least one
/// train node). Deterministic per seed.
pub fn make_masks(
    sub: &ClientSubgraph,
    train_ratio: f64,
    val_ratio: f64,
    test_ratio: f64,
    seed: u64,
) -> Result<Masks, PartitionError> {
    let total = train_ratio + val_ratio + test_ratio;
    if total > 1.0 + 1e-9 {
        return Err(PartitionError::RatioOverflow { total });
    }
    let mut masks = Masks::empty(sub.num_nodes());
    let mut labeled: Vec<usize> = (0..sub.num_nodes())
        .filter(|&v| sub.local_labels[v].is_some())
        .collect();
    let n = labeled.len();
    if n == 0 {
        return Ok(masks);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labeled.shuffle(&mut rng);

    let mut train = ((n as f64 * train_ratio).floor() as usize).max(1);
    let mut val = (n as f64 * val_ratio).floor() as usize;
    let mut test = (n as f64 * test_ratio).floor() as usize;
    // bumping train to 1 on tiny clients can overshoot; shed from test first
    while train + val + test > n {
        if test > 0 {
            test -= 1;
        } else if val > 0 {
            val -= 1;
        } else {
            train -= 1;
        }
    }
    for &v in &labeled[..train] {
        masks.train[v] = true;
    }
    for &v in &labeled[train..train + val] {
        masks.val[v] = true;
    }
    for &v in &labeled[train + val..train + val + test] {
        masks.test[v] = true;
    }
    Ok(masks)
}
