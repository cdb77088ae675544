//! Protocol messages exchanged between clients and the server.

use ndarray::Array2;

/// One border edge's contribution in an HC upload: the partial edge
/// embedding over the client's local members and how many members those are.
#[derive(Debug, Clone, PartialEq)]
pub struct HcEdgeUpload {
    pub edge_id: usize,
    pub partial: Vec<f64>,
    pub local_count: usize,
}

/// Per-layer client upload for hyperedge completion.
#[derive(Debug, Clone, PartialEq)]
pub struct HcUploadMsg {
    pub client_id: usize,
    pub layer: usize,
    pub entries: Vec<HcEdgeUpload>,
}

/// Aggregated border-edge state: the full edge embedding, the global edge
/// degree, and the edge weight.
#[derive(Debug, Clone, PartialEq)]
pub struct HcEdgeBroadcast {
    pub edge_id: usize,
    pub total: Vec<f64>,
    pub edge_degree: usize,
    pub weight: f64,
}

/// Per-layer server broadcast; each client receives entries only for the
/// border edges it touches.
#[derive(Debug, Clone, PartialEq)]
pub struct HcBroadcastMsg {
    pub layer: usize,
    pub entries: Vec<HcEdgeBroadcast>,
}

/// Per-round parameter upload, weighted by the client's train-node count.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamUploadMsg {
    pub client_id: usize,
    pub blocks: Vec<Array2<f64>>,
    pub train_node_count: usize,
}

/// Aggregated global parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBroadcastMsg {
    pub blocks: Vec<Array2<f64>>,
}

/// Any protocol message, as the transport sees it.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    HcUpload(HcUploadMsg),
    HcBroadcast(HcBroadcastMsg),
    ParamUpload(ParamUploadMsg),
    ParamBroadcast(ParamBroadcastMsg),
}
