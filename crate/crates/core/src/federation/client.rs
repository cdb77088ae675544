//! Client-side state machine: layered embeddings, the HC upload/apply
//! steps, the no-communication trimmed propagation path, and the local
//! trainer wrapper used during federated rounds.

use super::messages::{
    HcBroadcastMsg, HcEdgeUpload, HcUploadMsg, ParamBroadcastMsg, ParamUploadMsg,
};
use super::FedError;
use crate::partition::ClientSubgraph;
use crate::propagation::{
    edge_gather, node_aggregate, propagate_combined, propagate_step, EdgeSlice,
};
use crate::training::{count_correct, forward, ClassifierParams, LocalTrainer, TrainConfig};
use ndarray::{Array1, Array2, ArrayView1, Axis};
use std::collections::BTreeMap;

/// Which feature pipeline a client runs before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationMode {
    /// Border hyperedges trimmed to local members; no communication.
    Basic,
    /// Hyperedge completion: border edges restored exactly via the server.
    Hc,
}

/// Pooling ingredients one client contributes to a round's metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsParts {
    pub train_count: usize,
    pub loss_sum: f64,
    pub val_correct: usize,
    pub val_total: usize,
    pub test_correct: usize,
    pub test_total: usize,
}

struct EvalCache {
    x_eval: Array2<f64>,
    labels: Vec<usize>,
    val_mask: Vec<bool>,
    test_mask: Vec<bool>,
}

/// One simulated client. Embeddings for layers 0..=N accumulate during the
/// feature phase; the trainer exists once training is initialized.
pub struct ClientState {
    pub subgraph: ClientSubgraph,
    pub mode: PropagationMode,
    pub num_layers: usize,
    /// X^(0) .. X^(n) computed so far; index = layer.
    pub layer_embeddings: Vec<Array2<f64>>,
    internal_incidence: Vec<Vec<usize>>,
    border_incidence: Vec<Vec<usize>>,
    pub trainer: Option<LocalTrainer>,
    eval: Option<EvalCache>,
}

impl ClientState {
    pub fn new(subgraph: ClientSubgraph, mode: PropagationMode, num_layers: usize) -> Self {
        assert!(num_layers >= 1);
        let n = subgraph.num_nodes();
        let mut internal_incidence = vec![Vec::new(); n];
        for (i, edge) in subgraph.internal_edges.iter().enumerate() {
            for &v in &edge.members {
                internal_incidence[v].push(i);
            }
        }
        let mut border_incidence = vec![Vec::new(); n];
        for (i, edge) in subgraph.border_edges.iter().enumerate() {
            for &v in &edge.members {
                border_incidence[v].push(i);
            }
        }
        let first = subgraph.local_features.clone();
        ClientState {
            subgraph,
            mode,
            num_layers,
            layer_embeddings: vec![first],
            internal_incidence,
            border_incidence,
            trainer: None,
            eval: None,
        }
    }

    pub fn client_id(&self) -> usize {
        self.subgraph.client_id
    }

    fn current_layer(&self) -> usize {
        self.layer_embeddings.len() - 1
    }

    /// Partial edge embeddings for every border edge this client touches,
    /// at the given layer, under HC-mode (global-equal) degrees.
    pub fn hc_upload(&self, layer: usize) -> Result<HcUploadMsg, FedError> {
        assert_eq!(self.mode, PropagationMode::Hc);
        let x = self
            .layer_embeddings
            .get(layer)
            .ok_or(FedError::MissingLayer { layer })?;
        let entries = self
            .subgraph
            .border_edges
            .iter()
            .map(|edge| HcEdgeUpload {
                edge_id: edge.global_id,
                partial: edge_gather(&edge.members, x, &self.subgraph.node_degree).to_vec(),
                local_count: edge.members.len(),
            })
            .collect();
        Ok(HcUploadMsg {
            client_id: self.client_id(),
            layer,
            entries,
        })
    }

    /// Combine locally computable internal-edge aggregates with the
    /// broadcast border-edge aggregates into the next layer's embeddings.
    pub fn hc_apply(&mut self, msg: &HcBroadcastMsg) -> Result<(), FedError> {
        assert_eq!(self.mode, PropagationMode::Hc);
        let layer = self.current_layer();
        if msg.layer != layer || layer >= self.num_layers {
            return Err(FedError::LayerSkew {
                expected: layer,
                got: msg.layer,
            });
        }
        let x = self
            .layer_embeddings
            .last()
            .expect("layer 0 always present");
        let dim = x.ncols();

        let by_edge: BTreeMap<usize, &super::messages::HcEdgeBroadcast> =
            msg.entries.iter().map(|e| (e.edge_id, e)).collect();
        for edge in &self.subgraph.border_edges {
            let entry = by_edge.get(&edge.global_id).ok_or(FedError::MissingEntry {
                edge: edge.global_id,
            })?;
            if entry.total.len() != dim {
                return Err(FedError::ShapeMismatch);
            }
        }

        let internal_deltas: Vec<Array1<f64>> = self
            .subgraph
            .internal_edges
            .iter()
            .map(|edge| edge_gather(&edge.members, x, &self.subgraph.node_degree))
            .collect();

        let n = self.subgraph.num_nodes();
        let mut next = Array2::zeros((n, dim));
        for v in 0..n {
            let d = self.subgraph.node_degree[v];
            let local_phi = node_aggregate(
                self.internal_incidence[v].iter().map(|&i| {
                    let edge = &self.subgraph.internal_edges[i];
                    (edge.weight, edge.members.len(), internal_deltas[i].view())
                }),
                d,
                dim,
            );
            let border_phi = node_aggregate(
                self.border_incidence[v].iter().map(|&i| {
                    let entry = by_edge[&self.subgraph.border_edges[i].global_id];
                    (
                        entry.weight,
                        entry.edge_degree,
                        ArrayView1::from(&entry.total[..]),
                    )
                }),
                d,
                dim,
            );
            next.row_mut(v)
                .assign(&propagate_combined(&local_phi, &border_phi)?);
        }
        self.layer_embeddings.push(next);
        Ok(())
    }

    /// Run all N propagation steps over the standalone trimmed hypergraph,
    /// with degrees recomputed as if it were the whole world. No messages.
    pub fn basic_propagate(&mut self) -> Result<(), FedError> {
        assert_eq!(self.mode, PropagationMode::Basic);
        assert_eq!(self.current_layer(), 0, "basic propagation runs once");
        let merged = self.subgraph.standalone_trimmed_edges();
        let degree = self.subgraph.trimmed_node_degrees();
        let edges: Vec<EdgeSlice<'_>> = merged
            .iter()
            .map(|e| EdgeSlice {
                weight: e.weight,
                degree: e.members.len(),
                members: &e.members,
            })
            .collect();
        let mut incidence = vec![Vec::new(); self.subgraph.num_nodes()];
        for (i, edge) in merged.iter().enumerate() {
            for &v in &edge.members {
                incidence[v].push(i);
            }
        }
        for _ in 0..self.num_layers {
            let x = self
                .layer_embeddings
                .last()
                .expect("layer 0 always present");
            let next = propagate_step(&edges, &incidence, &degree, x);
            self.layer_embeddings.push(next);
        }
        Ok(())
    }

    /// Final features X^(N); available once the feature phase completed.
    pub fn final_embeddings(&self) -> &Array2<f64> {
        assert_eq!(
            self.layer_embeddings.len(),
            self.num_layers + 1,
            "feature phase has not finished"
        );
        self.layer_embeddings.last().expect("checked above")
    }

    /// Build the local trainer from the finished features and the masks:
    /// training rows are extracted once, evaluation rows cached once.
    pub fn init_trainer(
        &mut self,
        params: ClassifierParams,
        config: &TrainConfig,
        dropout_seed: u64,
    ) {
        let x = self.final_embeddings();
        let masks = &self.subgraph.masks;
        let train_rows: Vec<usize> = (0..self.subgraph.num_nodes())
            .filter(|&v| masks.train[v])
            .collect();
        let x_train = x.select(Axis(0), &train_rows);
        let train_labels: Vec<usize> = train_rows
            .iter()
            .map(|&v| self.subgraph.local_labels[v].expect("train nodes are labeled"))
            .collect();

        let eval_rows: Vec<usize> = (0..self.subgraph.num_nodes())
            .filter(|&v| masks.val[v] || masks.test[v])
            .collect();
        let eval = EvalCache {
            x_eval: x.select(Axis(0), &eval_rows),
            labels: eval_rows
                .iter()
                .map(|&v| self.subgraph.local_labels[v].expect("eval nodes are labeled"))
                .collect(),
            val_mask: eval_rows.iter().map(|&v| masks.val[v]).collect(),
            test_mask: eval_rows.iter().map(|&v| masks.test[v]).collect(),
        };

        self.trainer = Some(LocalTrainer::new(
            params,
            x_train,
            train_labels,
            config,
            dropout_seed,
        ));
        self.eval = Some(eval);
    }

    fn trainer(&self) -> &LocalTrainer {
        self.trainer.as_ref().expect("trainer initialized")
    }

    pub fn train_iters(&mut self, iters: usize) -> Result<Vec<f64>, FedError> {
        let trainer = self.trainer.as_mut().expect("trainer initialized");
        Ok(trainer.train_iters(iters)?)
    }

    pub fn param_upload(&self) -> ParamUploadMsg {
        let trainer = self.trainer();
        ParamUploadMsg {
            client_id: self.client_id(),
            blocks: trainer.params.blocks.clone(),
            train_node_count: trainer.num_train_rows(),
        }
    }

    pub fn receive_params(&mut self, msg: ParamBroadcastMsg) {
        let trainer = self.trainer.as_mut().expect("trainer initialized");
        trainer.receive_params(ClassifierParams { blocks: msg.blocks });
    }

    /// This client's share of the round metrics, computed with its current
    /// parameters (the freshly broadcast global model in federated modes).
    pub fn metrics_contribution(&self) -> Result<MetricsParts, FedError> {
        let trainer = self.trainer();
        let eval = self.eval.as_ref().expect("trainer initialized");
        let train_count = trainer.num_train_rows();
        let loss_sum = if train_count > 0 {
            trainer.train_loss()? * train_count as f64
        } else {
            0.0
        };
        let (val_correct, val_total, test_correct, test_total) = if eval.labels.is_empty() {
            (0, 0, 0, 0)
        } else {
            let logits = forward(&eval.x_eval, &trainer.params, None)?;
            let (vc, vt) = count_correct(&logits, &eval.labels, &eval.val_mask);
            let (tc, tt) = count_correct(&logits, &eval.labels, &eval.test_mask);
            (vc, vt, tc, tt)
        };
        Ok(MetricsParts {
            train_count,
            loss_sum,
            val_correct,
            val_total,
            test_correct,
            test_total,
        })
    }
}
