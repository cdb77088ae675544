//! Server-side state machine: staging barriers for HC uploads and parameter
//! uploads, validated aggregation, and FedAvg.
//!
//! Aggregation never fires until every client has reported, duplicates are
//! rejected, and all sums run in ascending client id so results do not
//! depend on arrival order.

use super::messages::{
    HcBroadcastMsg, HcEdgeBroadcast, HcUploadMsg, ParamBroadcastMsg, ParamUploadMsg,
};
use super::FedError;
use crate::partition::BorderIndex;
use crate::training::ClassifierParams;
use std::collections::{BTreeMap, BTreeSet};

pub struct ServerState {
    pub border_index: BorderIndex,
    pub num_clients: usize,
    pub global_params: Option<ClassifierParams>,
    staged_hc: BTreeMap<usize, HcUploadMsg>,
    staged_hc_layer: Option<usize>,
    staged_params: BTreeMap<usize, ParamUploadMsg>,
}

impl ServerState {
    pub fn new(border_index: BorderIndex, num_clients: usize) -> Self {
        assert!(num_clients >= 1);
        ServerState {
            border_index,
            num_clients,
            global_params: None,
            staged_hc: BTreeMap::new(),
            staged_hc_layer: None,
            staged_params: BTreeMap::new(),
        }
    }

    /// Stage one client's HC upload for the current layer. Rejects replays,
    /// cross-layer mixing, and edges the client has no business reporting.
    pub fn stage_hc_upload(&mut self, msg: HcUploadMsg) -> Result<(), FedError> {
        if msg.client_id >= self.num_clients {
            return Err(FedError::UnknownClient {
                client: msg.client_id,
            });
        }
        if self.staged_hc.contains_key(&msg.client_id) {
            return Err(FedError::DuplicateUpload {
                client: msg.client_id,
            });
        }
        if let Some(layer) = self.staged_hc_layer {
            if msg.layer != layer {
                return Err(FedError::LayerSkew {
                    expected: layer,
                    got: msg.layer,
                });
            }
        }
        let mut seen = BTreeSet::new();
        for entry in &msg.entries {
            if !seen.insert(entry.edge_id) {
                return Err(FedError::DuplicateEdgeEntry {
                    client: msg.client_id,
                    edge: entry.edge_id,
                });
            }
            let info =
                self.border_index
                    .edges
                    .get(&entry.edge_id)
                    .ok_or(FedError::UnknownEdge {
                        edge: entry.edge_id,
                    })?;
            if !info.clients.contains(&msg.client_id) {
                return Err(FedError::ForeignEdge {
                    client: msg.client_id,
                    edge: entry.edge_id,
                });
            }
        }
        self.staged_hc_layer = Some(msg.layer);
        self.staged_hc.insert(msg.client_id, msg);
        Ok(())
    }

    /// Sum the staged partial embeddings per border edge, validate member
    /// counts against the border index, and route each edge's aggregate to
    /// exactly the clients touching it. Returns one broadcast per client,
    /// indexed by client id. Clears the staging area.
    pub fn hc_aggregate(&mut self) -> Result<Vec<HcBroadcastMsg>, FedError> {
        if self.staged_hc.len() != self.num_clients {
            return Err(FedError::IncompleteRound {
                expected: self.num_clients,
                got: self.staged_hc.len(),
            });
        }
        let layer = self.staged_hc_layer.unwrap_or(0);

        let per_client: BTreeMap<usize, BTreeMap<usize, (&[f64], usize)>> = self
            .staged_hc
            .iter()
            .map(|(&c, msg)| {
                let entries = msg
                    .entries
                    .iter()
                    .map(|e| (e.edge_id, (e.partial.as_slice(), e.local_count)))
                    .collect();
                (c, entries)
            })
            .collect();

        let mut broadcasts: Vec<HcBroadcastMsg> = (0..self.num_clients)
            .map(|_| HcBroadcastMsg {
                layer,
                entries: Vec::new(),
            })
            .collect();

        for (&edge_id, info) in &self.border_index.edges {
            let mut count_sum = 0usize;
            let mut total: Option<Vec<f64>> = None;
            for &client in &info.clients {
                let Some(&(partial, local_count)) =
                    per_client.get(&client).and_then(|m| m.get(&edge_id))
                else {
                    continue;
                };
                count_sum += local_count;
                match &mut total {
                    None => total = Some(partial.to_vec()),
                    Some(acc) => {
                        if acc.len() != partial.len() {
                            return Err(FedError::ShapeMismatch);
                        }
                        for (a, p) in acc.iter_mut().zip(partial) {
                            *a += p;
                        }
                    }
                }
            }
            if count_sum != info.total_members {
                return Err(FedError::CountMismatch {
                    edge: edge_id,
                    expected: info.total_members,
                    got: count_sum,
                });
            }
            let total = total.expect("count check guarantees at least one report");
            for &client in &info.clients {
                broadcasts[client].entries.push(HcEdgeBroadcast {
                    edge_id,
                    total: total.clone(),
                    edge_degree: info.total_members,
                    weight: info.weight,
                });
            }
        }

        self.staged_hc.clear();
        self.staged_hc_layer = None;
        Ok(broadcasts)
    }

    /// Stage one client's parameter upload for the current round.
    pub fn stage_param_upload(&mut self, msg: ParamUploadMsg) -> Result<(), FedError> {
        if msg.client_id >= self.num_clients {
            return Err(FedError::UnknownClient {
                client: msg.client_id,
            });
        }
        if self.staged_params.contains_key(&msg.client_id) {
            return Err(FedError::DuplicateUpload {
                client: msg.client_id,
            });
        }
        if let Some(reference) = self
            .staged_params
            .values()
            .next()
            .map(|m| &m.blocks)
            .or(self.global_params.as_ref().map(|p| &p.blocks))
        {
            if reference.len() != msg.blocks.len()
                || reference
                    .iter()
                    .zip(&msg.blocks)
                    .any(|(a, b)| a.raw_dim() != b.raw_dim())
            {
                return Err(FedError::ShapeMismatch);
            }
        }
        self.staged_params.insert(msg.client_id, msg);
        Ok(())
    }

    /// FedAvg over the staged uploads; stores and returns the new global
    /// parameters. Clears the staging area.
    pub fn fedavg(&mut self) -> Result<ParamBroadcastMsg, FedError> {
        if self.staged_params.len() != self.num_clients {
            return Err(FedError::IncompleteRound {
                expected: self.num_clients,
                got: self.staged_params.len(),
            });
        }
        let uploads: Vec<ParamUploadMsg> = std::mem::take(&mut self.staged_params)
            .into_values()
            .collect();
        let broadcast = fedavg_aggregate(&uploads)?;
        self.global_params = Some(ClassifierParams {
            blocks: broadcast.blocks.clone(),
        });
        Ok(broadcast)
    }
}

/// Weighted parameter average: each block is the train-count-weighted mean
/// of the uploads, with the counts summed exactly as integers before the
/// single division. Uploads must arrive sorted by client id; a single
/// upload passes through unchanged, making one-client federation an
/// identity.
pub fn fedavg_aggregate(uploads: &[ParamUploadMsg]) -> Result<ParamBroadcastMsg, FedError> {
    let Some(first) = uploads.first() else {
        return Err(FedError::IncompleteRound {
            expected: 1,
            got: 0,
        });
    };
    for msg in uploads {
        if msg.blocks.len() != first.blocks.len()
            || msg
                .blocks
                .iter()
                .zip(&first.blocks)
                .any(|(a, b)| a.raw_dim() != b.raw_dim())
        {
            return Err(FedError::ShapeMismatch);
        }
    }
    if uploads.len() == 1 {
        return Ok(ParamBroadcastMsg {
            blocks: first.blocks.clone(),
        });
    }
    let total: u64 = uploads.iter().map(|m| m.train_node_count as u64).sum();
    if total == 0 {
        return Err(FedError::NoTrainingNodes);
    }
    let blocks = (0..first.blocks.len())
        .map(|b| {
            let mut acc = ndarray::Array2::zeros(first.blocks[b].raw_dim());
            for msg in uploads {
                acc.scaled_add(msg.train_node_count as f64, &msg.blocks[b]);
            }
            acc.mapv_inplace(|v| v / total as f64);
            acc
        })
        .collect();
    Ok(ParamBroadcastMsg { blocks })
}
