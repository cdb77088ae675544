//! Benchmark-only crate; see `benches/engine.rs`. Shared fixtures live here
//! so the bench target stays small.

use hyperfed_core::hypergraph::Hypergraph;
use hyperfed_core::synth::{community_hypergraph, CommunitySpec};

/// The standard benchmark graph: 1000 nodes, 4 classes, 250 hyperedges of
/// 8 to 16 members.
pub fn bench_graph() -> Hypergraph {
    community_hypergraph(&CommunitySpec::default())
}
