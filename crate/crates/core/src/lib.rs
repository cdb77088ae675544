//! Federated hypergraph learning: spectral propagation over hypergraphs,
//! label-driven Dirichlet partitioning, an exact hyperedge-completion
//! pre-training protocol, and FedAvg training of a linearized classifier.
//!
//! The pipeline: build or load a [`hypergraph::Hypergraph`], split it across
//! simulated clients with [`partition`], restore cross-client hyperedge
//! information with the completion protocol in [`federation`] (or trim it
//! away for the degraded baselines), then train the [`training`] classifier
//! head federated or in isolation. Everything is seeded and deterministic.

pub mod federation;
pub mod hypergraph;
pub mod partition;
pub mod propagation;
pub mod seeding;
pub mod synth;
pub mod training;

pub use federation::{
    ClientState, FedError, InProcess, PropagationMode, RoundMetrics, ServerState, Transport,
    WireRoundTrip,
};
pub use hypergraph::{GraphError, Hypergraph};
pub use partition::{
    dirichlet_partition, make_masks, split_subgraphs, Assignment, BorderIndex, ClientSubgraph,
    PartitionError, PartitionSpec,
};
pub use propagation::{propagate_global, EmbeddingMatrix, PropError, PropagationConfig};
pub use seeding::derive_substream;
pub use training::{ClassifierParams, TrainConfig, TrainError};
