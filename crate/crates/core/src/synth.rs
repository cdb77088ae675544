//! Seeded synthetic hypergraph generators for tests, benchmarks, and demo
//! datasets.

use crate::hypergraph::Hypergraph;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// A labeled random hypergraph with gaussian features. Edge sizes are drawn
/// uniformly from 2..=5 and weights from 0.5..2.0. Useful for structural
/// tests; carries no class signal.
pub fn random_hypergraph(
    num_nodes: usize,
    num_edges: usize,
    num_classes: usize,
    feature_dim: usize,
    seed: u64,
) -> Hypergraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((num_nodes, feature_dim));
    for v in features.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    let labels = (0..num_nodes)
        .map(|_| Some(rng.random_range(0..num_classes)))
        .collect();
    let mut hyperedges = Vec::with_capacity(num_edges);
    let mut weights = Vec::with_capacity(num_edges);
    for _ in 0..num_edges {
        let size = rng.random_range(2..=5usize.min(num_nodes));
        let mut members: Vec<usize> = (0..num_nodes).collect();
        members.shuffle(&mut rng);
        members.truncate(size);
        members.sort_unstable();
        hyperedges.push(members);
        weights.push(rng.random_range(0.5..2.0));
    }
    Hypergraph::new(features, labels, num_classes, hyperedges, weights, "random")
        .expect("generated hypergraph is valid")
}

/// Parameters for [`community_hypergraph`].
#[derive(Debug, Clone)]
pub struct CommunitySpec {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub num_edges: usize,
    /// Inclusive range of hyperedge sizes.
    pub edge_size: (usize, usize),
    /// Probability that a member of an edge is drawn from the edge's anchor
    /// class rather than uniformly at random.
    pub purity: f64,
    /// Magnitude of the class-mean component of each feature row.
    pub signal: f64,
    /// Standard deviation of the gaussian noise added per feature entry.
    pub noise: f64,
    pub seed: u64,
}

impl Default for CommunitySpec {
    fn default() -> Self {
        CommunitySpec {
            num_nodes: 1000,
            num_classes: 4,
            feature_dim: 32,
            num_edges: 250,
            edge_size: (8, 16),
            purity: 0.9,
            signal: 1.0,
            noise: 3.0,
            seed: 7,
        }
    }
}

/// A community-structured hypergraph: each class has a distinct feature mean,
/// node features are noisy draws around it, and hyperedges group nodes mostly
/// from a single class. Propagation over whole hyperedges denoises the
/// features, so classifiers benefit from seeing complete (untrimmed) edges.
pub fn community_hypergraph(spec: &CommunitySpec) -> Hypergraph {
    assert!(spec.num_classes >= 1 && spec.num_nodes >= spec.num_classes);
    assert!(spec.edge_size.0 >= 1 && spec.edge_size.0 <= spec.edge_size.1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise).expect("valid noise sigma");

    // class means: orthogonal-ish random sign patterns, one per class
    let mut means = Array2::zeros((spec.num_classes, spec.feature_dim));
    for c in 0..spec.num_classes {
        for d in 0..spec.feature_dim {
            means[[c, d]] = if rng.random::<bool>() {
                spec.signal
            } else {
                -spec.signal
            };
        }
    }

    let labels: Vec<usize> = (0..spec.num_nodes).map(|v| v % spec.num_classes).collect();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); spec.num_classes];
    for (v, &c) in labels.iter().enumerate() {
        by_class[c].push(v);
    }

    let mut features = Array2::zeros((spec.num_nodes, spec.feature_dim));
    for v in 0..spec.num_nodes {
        for d in 0..spec.feature_dim {
            features[[v, d]] = means[[labels[v], d]] + noise.sample(&mut rng);
        }
    }

    let mut hyperedges = Vec::with_capacity(spec.num_edges);
    for e in 0..spec.num_edges {
        let anchor = e % spec.num_classes;
        let size = rng.random_range(spec.edge_size.0..=spec.edge_size.1);
        let mut members = std::collections::BTreeSet::new();
        while members.len() < size.min(spec.num_nodes) {
            let v = if rng.random::<f64>() < spec.purity {
                by_class[anchor][rng.random_range(0..by_class[anchor].len())]
            } else {
                rng.random_range(0..spec.num_nodes)
            };
            members.insert(v);
        }
        hyperedges.push(members.into_iter().collect::<Vec<_>>());
    }
    let weights = vec![1.0; hyperedges.len()];

    Hypergraph::new(
        features,
        labels.into_iter().map(Some).collect(),
        spec.num_classes,
        hyperedges,
        weights,
        "community",
    )
    .expect("generated hypergraph is valid")
}
