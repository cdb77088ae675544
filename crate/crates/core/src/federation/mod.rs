//! Client/server state machines, the hyperedge-completion pre-training
//! protocol, FedAvg aggregation, and pluggable message transports.

pub mod client;
pub mod codec;
pub mod engine;
pub mod messages;
pub mod server;
pub mod transport;

pub use client::{ClientState, MetricsParts, PropagationMode};
pub use codec::{decode_message, encode_message, CodecError};
pub use engine::{
    initialize_training, run_basic_propagation, run_hc_pretraining, run_training, RoundMetrics,
};
pub use messages::{
    HcBroadcastMsg, HcEdgeBroadcast, HcEdgeUpload, HcUploadMsg, Message, ParamBroadcastMsg,
    ParamUploadMsg,
};
pub use server::{fedavg_aggregate, ServerState};
pub use transport::{InProcess, Transport, WireRoundTrip};

use crate::propagation::PropError;
use crate::training::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FedError {
    #[error("layer {layer} embeddings are not available yet")]
    MissingLayer { layer: usize },
    #[error("expected layer {expected}, message carries layer {got}")]
    LayerSkew { expected: usize, got: usize },
    #[error("round incomplete: expected {expected} uploads, have {got}")]
    IncompleteRound { expected: usize, got: usize },
    #[error("duplicate upload from client {client}")]
    DuplicateUpload { client: usize },
    #[error("upload from client {client} lists edge {edge} twice")]
    DuplicateEdgeEntry { client: usize, edge: usize },
    #[error("member counts for edge {edge} sum to {got}, index records {expected}")]
    CountMismatch {
        edge: usize,
        expected: usize,
        got: usize,
    },
    #[error("edge {edge} is not a registered border edge")]
    UnknownEdge { edge: usize },
    #[error("client {client} does not touch border edge {edge}")]
    ForeignEdge { client: usize, edge: usize },
    #[error("client id {client} is outside the federation")]
    UnknownClient { client: usize },
    #[error("broadcast is missing border edge {edge}")]
    MissingEntry { edge: usize },
    #[error("matrix shapes disagree across the federation")]
    ShapeMismatch,
    #[error("no client reported a positive training-node count")]
    NoTrainingNodes,
    #[error("transport delivered a message of the wrong kind")]
    UnexpectedMessage,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Prop(#[from] PropError),
}
