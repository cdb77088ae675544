//! Round drivers: the HC pre-training loop, the trimmed no-communication
//! feature path, and the synchronous training loop with optional FedAvg.
//!
//! Per-client work runs on worker threads between barriers; every
//! cross-boundary value goes through the transport, and all folds run in
//! ascending client id so results are schedule-independent.

use super::client::{ClientState, MetricsParts, PropagationMode};
use super::messages::{HcBroadcastMsg, HcUploadMsg, Message, ParamBroadcastMsg};
use super::server::ServerState;
use super::transport::Transport;
use super::FedError;
use crate::seeding::derive_substream;
use crate::training::{ClassifierParams, TrainConfig};
use rayon::prelude::*;

/// Pooled measurements for one training round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundMetrics {
    /// 1-based round number.
    pub round: usize,
    /// Train-count-weighted cross-entropy over all clients, measured with
    /// each client's post-round parameters and no dropout.
    pub train_loss: f64,
    /// Pooled validation accuracy (sum of corrects over sum of mask sizes).
    pub val_accuracy: f64,
    /// Pooled test accuracy.
    pub test_accuracy: f64,
}

fn expect_hc_upload(msg: Message) -> Result<HcUploadMsg, FedError> {
    match msg {
        Message::HcUpload(m) => Ok(m),
        _ => Err(FedError::UnexpectedMessage),
    }
}

fn expect_hc_broadcast(msg: Message) -> Result<HcBroadcastMsg, FedError> {
    match msg {
        Message::HcBroadcast(m) => Ok(m),
        _ => Err(FedError::UnexpectedMessage),
    }
}

fn expect_param_upload(msg: Message) -> Result<super::messages::ParamUploadMsg, FedError> {
    match msg {
        Message::ParamUpload(m) => Ok(m),
        _ => Err(FedError::UnexpectedMessage),
    }
}

fn expect_param_broadcast(msg: Message) -> Result<ParamBroadcastMsg, FedError> {
    match msg {
        Message::ParamBroadcast(m) => Ok(m),
        _ => Err(FedError::UnexpectedMessage),
    }
}

/// Run the N upload/aggregate/broadcast/apply cycles of hyperedge
/// completion. Afterwards every client holds X^(0)..X^(N) and no further
/// feature traffic is needed.
pub fn run_hc_pretraining<T: Transport>(
    clients: &mut [ClientState],
    server: &mut ServerState,
    transport: &T,
) -> Result<(), FedError> {
    assert!(!clients.is_empty());
    assert_eq!(clients.len(), server.num_clients);
    let num_layers = clients[0].num_layers;
    assert!(clients
        .iter()
        .all(|c| c.num_layers == num_layers && c.mode == PropagationMode::Hc));

    for layer in 0..num_layers {
        let uploads: Vec<HcUploadMsg> = clients
            .par_iter()
            .map(|c| c.hc_upload(layer))
            .collect::<Result<_, _>>()?;
        for upload in uploads {
            let delivered = expect_hc_upload(transport.deliver(Message::HcUpload(upload))?)?;
            server.stage_hc_upload(delivered)?;
        }
        let broadcasts = server.hc_aggregate()?;
        clients
            .par_iter_mut()
            .zip(broadcasts)
            .try_for_each(|(client, broadcast)| {
                let delivered =
                    expect_hc_broadcast(transport.deliver(Message::HcBroadcast(broadcast))?)?;
                client.hc_apply(&delivered)
            })?;
    }
    Ok(())
}

/// Run the trimmed feature path on every client; no server involvement.
pub fn run_basic_propagation(clients: &mut [ClientState]) -> Result<(), FedError> {
    clients.par_iter_mut().try_for_each(|c| c.basic_propagate())
}

/// Initialize training: the server creates the model once and broadcasts
/// it, so every client starts from identical parameters. Per-client dropout
/// streams are derived from `dropout_seed_base` and the client id.
pub fn initialize_training<T: Transport>(
    clients: &mut [ClientState],
    server: &mut ServerState,
    config: &TrainConfig,
    num_classes: usize,
    param_seed: u64,
    dropout_seed_base: u64,
    transport: &T,
) -> Result<(), FedError> {
    config.validate();
    assert!(!clients.is_empty());
    let feature_dim = clients[0].final_embeddings().ncols();
    let params =
        ClassifierParams::xavier(&[feature_dim, config.hidden_dim, num_classes], param_seed);
    server.global_params = Some(params.clone());
    for client in clients.iter_mut() {
        let delivered = expect_param_broadcast(transport.deliver(Message::ParamBroadcast(
            ParamBroadcastMsg {
                blocks: params.blocks.clone(),
            },
        ))?)?;
        let dropout_seed = derive_substream(dropout_seed_base, client.client_id() as u64);
        client.init_trainer(
            ClassifierParams {
                blocks: delivered.blocks,
            },
            config,
            dropout_seed,
        );
    }
    Ok(())
}

fn pooled_metrics(parts: &[MetricsParts], round: usize) -> RoundMetrics {
    let mut loss_sum = 0.0;
    let mut train_total = 0usize;
    let mut val = (0usize, 0usize);
    let mut test = (0usize, 0usize);
    for p in parts {
        loss_sum += p.loss_sum;
        train_total += p.train_count;
        val.0 += p.val_correct;
        val.1 += p.val_total;
        test.0 += p.test_correct;
        test.1 += p.test_total;
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    RoundMetrics {
        round,
        train_loss: if train_total == 0 {
            0.0
        } else {
            loss_sum / train_total as f64
        },
        val_accuracy: ratio(val.0, val.1),
        test_accuracy: ratio(test.0, test.1),
    }
}

/// The synchronous training loop. Every round each client takes
/// `local_iters` full-batch steps; with `federate` set, parameters then
/// flow through FedAvg and back. Metrics are recorded after the round's
/// parameter exchange, so federated rows describe the global model.
pub fn run_training<T: Transport>(
    clients: &mut [ClientState],
    server: &mut ServerState,
    config: &TrainConfig,
    federate: bool,
    transport: &T,
) -> Result<Vec<RoundMetrics>, FedError> {
    assert!(!clients.is_empty());
    let mut history = Vec::with_capacity(config.rounds);
    for round in 1..=config.rounds {
        clients
            .par_iter_mut()
            .try_for_each(|c| c.train_iters(config.local_iters).map(|_| ()))?;

        if federate {
            let uploads: Vec<_> = clients.iter().map(|c| c.param_upload()).collect();
            for upload in uploads {
                let delivered =
                    expect_param_upload(transport.deliver(Message::ParamUpload(upload))?)?;
                server.stage_param_upload(delivered)?;
            }
            let broadcast = server.fedavg()?;
            for client in clients.iter_mut() {
                let delivered = expect_param_broadcast(
                    transport.deliver(Message::ParamBroadcast(broadcast.clone()))?,
                )?;
                client.receive_params(delivered);
            }
        }

        let parts: Vec<MetricsParts> = clients
            .par_iter()
            .map(|c| c.metrics_contribution())
            .collect::<Result<_, _>>()?;
        history.push(pooled_metrics(&parts, round));
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federation::transport::{InProcess, WireRoundTrip};
    use crate::partition::{dirichlet_partition, make_masks, split_subgraphs, PartitionSpec};
    use crate::propagation::{propagate_global, PropagationConfig};
    use crate::seeding::derive_substream;
    use crate::synth::random_hypergraph;
    use crate::training::LocalTrainer;
    use ndarray::Axis;

    fn build_clients(
        num_nodes: usize,
        num_clients: usize,
        seed: u64,
        mode: PropagationMode,
    ) -> (Vec<ClientState>, ServerState, crate::hypergraph::Hypergraph) {
        let hg = random_hypergraph(num_nodes, num_nodes / 2, 3, 4, seed);
        let spec = PartitionSpec {
            num_clients,
            beta: 1.0,
            seed,
        };
        let assignment = dirichlet_partition(&hg, &spec).unwrap();
        let (mut subs, border) = split_subgraphs(&hg, &assignment);
        for sub in &mut subs {
            sub.masks = make_masks(
                sub,
                0.3,
                0.2,
                0.4,
                derive_substream(seed, sub.client_id as u64),
            )
            .unwrap();
        }
        let clients: Vec<ClientState> = subs
            .into_iter()
            .map(|s| ClientState::new(s, mode, 2))
            .collect();
        let server = ServerState::new(border, num_clients);
        (clients, server, hg)
    }

    #[test]
    fn hc_pretraining_reproduces_global_propagation() {
        for seed in [1, 2, 3] {
            let (mut clients, mut server, hg) = build_clients(40, 3, seed, PropagationMode::Hc);
            run_hc_pretraining(&mut clients, &mut server, &InProcess).unwrap();
            let global = propagate_global(&hg, &hg.features, PropagationConfig::new(2)).unwrap();
            for client in &clients {
                let x = client.final_embeddings();
                for (local, &g) in client.subgraph.global_node_ids.iter().enumerate() {
                    let diff = (&x.row(local) - &global.row(g))
                        .iter()
                        .fold(0.0f64, |m, v| m.max(v.abs()));
                    assert!(diff < 1e-9, "seed {seed} node {g}: diff {diff}");
                }
            }
        }
    }

    #[test]
    fn hc_pretraining_runs_exactly_num_layers_cycles() {
        let (mut clients, mut server, _) = build_clients(30, 2, 4, PropagationMode::Hc);
        run_hc_pretraining(&mut clients, &mut server, &InProcess).unwrap();
        for c in &clients {
            assert_eq!(c.layer_embeddings.len(), 3);
        }
        // a third upload for layer 2 would need embeddings beyond X^(N);
        // the protocol never requests it
        assert!(clients[0].hc_upload(2).is_ok());
        assert!(clients[0].hc_upload(3).is_err());
    }

    #[test]
    fn single_client_federation_equals_standalone_training() {
        let (mut clients, mut server, hg) = build_clients(50, 1, 7, PropagationMode::Hc);
        run_hc_pretraining(&mut clients, &mut server, &InProcess).unwrap();
        let config = TrainConfig {
            rounds: 12,
            hidden_dim: 8,
            ..TrainConfig::default()
        };
        initialize_training(
            &mut clients,
            &mut server,
            &config,
            hg.num_classes,
            21,
            22,
            &InProcess,
        )
        .unwrap();

        // mirror the exact setup by hand, without any federation machinery
        let global = propagate_global(&hg, &hg.features, PropagationConfig::new(2)).unwrap();
        let masks = clients[0].subgraph.masks.clone();
        let train_rows: Vec<usize> = (0..hg.num_nodes).filter(|&v| masks.train[v]).collect();
        let x_train = global.select(Axis(0), &train_rows);
        let labels: Vec<usize> = train_rows.iter().map(|&v| hg.labels[v].unwrap()).collect();
        let params = ClassifierParams::xavier(&[4, config.hidden_dim, hg.num_classes], 21);
        let mut reference =
            LocalTrainer::new(params, x_train, labels, &config, derive_substream(22, 0));

        let history = run_training(&mut clients, &mut server, &config, true, &InProcess).unwrap();
        for _ in 0..config.rounds {
            reference.train_iters(config.local_iters).unwrap();
        }
        let federated = &clients[0].trainer.as_ref().unwrap().params;
        assert_eq!(
            federated, &reference.params,
            "one-client FedAvg must be an identity"
        );
        assert_eq!(history.len(), 12);
        let loss_diff =
            (history.last().unwrap().train_loss - reference.train_loss().unwrap()).abs();
        assert!(loss_diff < 1e-12);
    }

    #[test]
    fn optimizer_steps_count_rounds_times_iters() {
        let (mut clients, mut server, hg) = build_clients(30, 2, 9, PropagationMode::Hc);
        run_hc_pretraining(&mut clients, &mut server, &InProcess).unwrap();
        let config = TrainConfig {
            rounds: 10,
            local_iters: 3,
            hidden_dim: 4,
            ..TrainConfig::default()
        };
        initialize_training(
            &mut clients,
            &mut server,
            &config,
            hg.num_classes,
            1,
            2,
            &InProcess,
        )
        .unwrap();
        run_training(&mut clients, &mut server, &config, true, &InProcess).unwrap();
        for c in &clients {
            assert_eq!(c.trainer.as_ref().unwrap().adam.step, 30);
        }
    }

    #[test]
    fn federated_training_matches_reference_simulator() {
        // two clients, no transport, no server: replay the same schedule by
        // hand and require the identical parameter trajectory
        let (mut clients, mut server, hg) = build_clients(36, 2, 11, PropagationMode::Hc);
        run_hc_pretraining(&mut clients, &mut server, &InProcess).unwrap();
        let config = TrainConfig {
            rounds: 6,
            hidden_dim: 4,
            ..TrainConfig::default()
        };
        let param_seed = 31;
        let dropout_base = 32;

        // reference: independent trainers plus manual weighted averaging
        let initial = ClassifierParams::xavier(&[4, config.hidden_dim, hg.num_classes], param_seed);
        let mut refs: Vec<LocalTrainer> = clients
            .iter()
            .map(|c| {
                let masks = &c.subgraph.masks;
                let rows: Vec<usize> = (0..c.subgraph.num_nodes())
                    .filter(|&v| masks.train[v])
                    .collect();
                let x = c.final_embeddings().select(Axis(0), &rows);
                let labels: Vec<usize> = rows
                    .iter()
                    .map(|&v| c.subgraph.local_labels[v].unwrap())
                    .collect();
                LocalTrainer::new(
                    initial.clone(),
                    x,
                    labels,
                    &config,
                    derive_substream(dropout_base, c.client_id() as u64),
                )
            })
            .collect();

        initialize_training(
            &mut clients,
            &mut server,
            &config,
            hg.num_classes,
            param_seed,
            dropout_base,
            &InProcess,
        )
        .unwrap();
        run_training(&mut clients, &mut server, &config, true, &InProcess).unwrap();

        for _ in 0..config.rounds {
            for t in refs.iter_mut() {
                t.train_iters(config.local_iters).unwrap();
            }
            let total: u64 = refs.iter().map(|t| t.num_train_rows() as u64).sum();
            let averaged: Vec<ndarray::Array2<f64>> = (0..refs[0].params.blocks.len())
                .map(|b| {
                    let mut acc = ndarray::Array2::zeros(refs[0].params.blocks[b].raw_dim());
                    for t in refs.iter() {
                        acc.scaled_add(t.num_train_rows() as f64, &t.params.blocks[b]);
                    }
                    acc.mapv_inplace(|v| v / total as f64);
                    acc
                })
                .collect();
            for t in refs.iter_mut() {
                t.receive_params(ClassifierParams {
                    blocks: averaged.clone(),
                });
            }
        }

        for (client, reference) in clients.iter().zip(&refs) {
            assert_eq!(&client.trainer.as_ref().unwrap().params, &reference.params);
        }
    }

    #[test]
    fn wire_and_inproc_transports_agree_bitwise() {
        let run = |use_wire: bool| -> Vec<RoundMetrics> {
            let (mut clients, mut server, hg) = build_clients(32, 3, 13, PropagationMode::Hc);
            let config = TrainConfig {
                rounds: 5,
                hidden_dim: 4,
                ..TrainConfig::default()
            };
            if use_wire {
                run_hc_pretraining(&mut clients, &mut server, &WireRoundTrip).unwrap();
                initialize_training(
                    &mut clients,
                    &mut server,
                    &config,
                    hg.num_classes,
                    3,
                    4,
                    &WireRoundTrip,
                )
                .unwrap();
                run_training(&mut clients, &mut server, &config, true, &WireRoundTrip).unwrap()
            } else {
                run_hc_pretraining(&mut clients, &mut server, &InProcess).unwrap();
                initialize_training(
                    &mut clients,
                    &mut server,
                    &config,
                    hg.num_classes,
                    3,
                    4,
                    &InProcess,
                )
                .unwrap();
                run_training(&mut clients, &mut server, &config, true, &InProcess).unwrap()
            }
        };
        let a = run(false);
        let b = run(true);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.round, y.round);
            assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
            assert_eq!(x.val_accuracy.to_bits(), y.val_accuracy.to_bits());
            assert_eq!(x.test_accuracy.to_bits(), y.test_accuracy.to_bits());
        }
    }

    #[test]
    fn isolated_training_never_exchanges_parameters() {
        let (mut clients, mut server, hg) = build_clients(30, 2, 15, PropagationMode::Basic);
        run_basic_propagation(&mut clients).unwrap();
        let config = TrainConfig {
            rounds: 4,
            hidden_dim: 4,
            ..TrainConfig::default()
        };
        initialize_training(
            &mut clients,
            &mut server,
            &config,
            hg.num_classes,
            5,
            6,
            &InProcess,
        )
        .unwrap();
        run_training(&mut clients, &mut server, &config, false, &InProcess).unwrap();
        let p0 = &clients[0].trainer.as_ref().unwrap().params;
        let p1 = &clients[1].trainer.as_ref().unwrap().params;
        assert_ne!(p0, p1, "isolated clients must drift apart");
        // the server never saw an upload, so its model is still the initial one
        let initial = ClassifierParams::xavier(&[4, config.hidden_dim, hg.num_classes], 5);
        assert_eq!(server.global_params.as_ref().unwrap(), &initial);
    }
}
