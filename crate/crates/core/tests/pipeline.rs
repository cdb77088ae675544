//! Cross-module pipeline checks: hyperedge completion against whole-graph
//! propagation under awkward inputs (weights, deep stacks, empty clients,
//! isolated nodes), and end-to-end determinism.

use hyperfed_core::federation::{
    initialize_training, run_hc_pretraining, run_training, ClientState, InProcess, PropagationMode,
    ServerState,
};
use hyperfed_core::hypergraph::Hypergraph;
use hyperfed_core::partition::{
    dirichlet_partition, make_masks, split_subgraphs, Assignment, PartitionSpec,
};
use hyperfed_core::propagation::{propagate_global, PropagationConfig};
use hyperfed_core::seeding::derive_substream;
use hyperfed_core::synth::random_hypergraph;
use hyperfed_core::training::TrainConfig;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_row_diff(clients: &[ClientState], global: &Array2<f64>) -> f64 {
    let mut worst = 0.0f64;
    for client in clients {
        let x = client.final_embeddings();
        for (local, &g) in client.subgraph.global_node_ids.iter().enumerate() {
            for (a, b) in x.row(local).iter().zip(global.row(g).iter()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}

fn run_hc(hg: &Hypergraph, num_clients: usize, seed: u64, layers: usize) -> Vec<ClientState> {
    let spec = PartitionSpec {
        num_clients,
        beta: 1.0,
        seed,
    };
    let assignment = dirichlet_partition(hg, &spec).unwrap();
    let (subs, border) = split_subgraphs(hg, &assignment);
    let mut clients: Vec<ClientState> = subs
        .into_iter()
        .map(|s| ClientState::new(s, PropagationMode::Hc, layers))
        .collect();
    let mut server = ServerState::new(border, num_clients);
    run_hc_pretraining(&mut clients, &mut server, &InProcess).unwrap();
    clients
}

#[test]
fn completion_is_exact_on_weighted_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    for trial in 0..10 {
        let num_nodes = rng.random_range(20..80);
        let num_edges = rng.random_range(8..40);
        let hg = random_hypergraph(num_nodes, num_edges, 4, 6, 600 + trial);
        // random_hypergraph already draws non-uniform weights in [0.5, 2)
        assert!(hg.edge_weights.iter().any(|&w| w != 1.0));
        let k = [2, 3, 5][trial as usize % 3];
        let clients = run_hc(&hg, k, trial, 2);
        let global = propagate_global(&hg, &hg.features, PropagationConfig::new(2)).unwrap();
        let diff = max_row_diff(&clients, &global);
        assert!(diff < 1e-9, "trial {trial}: diff {diff}");
    }
}

#[test]
fn completion_is_exact_for_deeper_stacks() {
    for layers in [1, 2, 3, 4] {
        let hg = random_hypergraph(50, 25, 3, 4, 42 + layers as u64);
        let clients = run_hc(&hg, 3, 9, layers);
        let global = propagate_global(&hg, &hg.features, PropagationConfig::new(layers)).unwrap();
        let diff = max_row_diff(&clients, &global);
        assert!(diff < 1e-9, "layers {layers}: diff {diff}");
    }
}

#[test]
fn isolated_nodes_stay_zero_through_completion() {
    // nodes 4 and 5 belong to no hyperedge; their propagated rows are zero
    // on every client that holds them
    let features = Array2::from_shape_fn((6, 2), |(i, j)| (i * 2 + j) as f64 + 1.0);
    let hg = Hypergraph::new(
        features,
        vec![Some(0), Some(0), Some(1), Some(1), Some(0), Some(1)],
        2,
        vec![vec![0, 1, 2], vec![2, 3]],
        vec![1.0, 2.0],
        "isolated",
    )
    .unwrap();
    let assignment = Assignment {
        client_of: vec![0, 0, 1, 1, 0, 1],
        num_clients: 2,
    };
    let (subs, border) = split_subgraphs(&hg, &assignment);
    let mut clients: Vec<ClientState> = subs
        .into_iter()
        .map(|s| ClientState::new(s, PropagationMode::Hc, 2))
        .collect();
    let mut server = ServerState::new(border, 2);
    run_hc_pretraining(&mut clients, &mut server, &InProcess).unwrap();
    let global = propagate_global(&hg, &hg.features, PropagationConfig::new(2)).unwrap();
    assert!(max_row_diff(&clients, &global) < 1e-12);
    for client in &clients {
        for (local, &g) in client.subgraph.global_node_ids.iter().enumerate() {
            if g >= 4 {
                assert!(client
                    .final_embeddings()
                    .row(local)
                    .iter()
                    .all(|&v| v == 0.0));
            }
        }
    }
}

#[test]
fn an_empty_client_participates_harmlessly() {
    // client 2 owns nothing: it must still satisfy the barrier during HC
    // and contribute zero weight during FedAvg
    let hg = random_hypergraph(20, 10, 2, 3, 77);
    let mut client_of = vec![0usize; 20];
    client_of[10..20].fill(1);
    let assignment = Assignment {
        client_of,
        num_clients: 3,
    };
    let (mut subs, border) = split_subgraphs(&hg, &assignment);
    assert_eq!(subs[2].num_nodes(), 0);
    for sub in &mut subs {
        sub.masks = make_masks(
            sub,
            0.3,
            0.2,
            0.4,
            derive_substream(1, sub.client_id as u64),
        )
        .unwrap();
    }
    let mut clients: Vec<ClientState> = subs
        .into_iter()
        .map(|s| ClientState::new(s, PropagationMode::Hc, 2))
        .collect();
    let mut server = ServerState::new(border, 3);
    run_hc_pretraining(&mut clients, &mut server, &InProcess).unwrap();
    let global = propagate_global(&hg, &hg.features, PropagationConfig::new(2)).unwrap();
    assert!(max_row_diff(&clients, &global) < 1e-9);

    let config = TrainConfig {
        rounds: 3,
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
    let history = run_training(&mut clients, &mut server, &config, true, &InProcess).unwrap();
    assert_eq!(history.len(), 3);
    assert!(history.iter().all(|m| m.train_loss.is_finite()));
}

#[test]
fn whole_pipeline_is_deterministic() {
    let run = || {
        let hg = random_hypergraph(40, 20, 3, 4, 123);
        let mut clients = run_hc(&hg, 3, 5, 2);
        let mut server = ServerState::new(hyperfed_core::partition::BorderIndex::default(), 3);
        for client in clients.iter_mut() {
            client.subgraph.masks = make_masks(
                &client.subgraph,
                0.2,
                0.2,
                0.4,
                derive_substream(8, client.client_id() as u64),
            )
            .unwrap();
        }
        let config = TrainConfig {
            rounds: 5,
            hidden_dim: 4,
            ..TrainConfig::default()
        };
        initialize_training(
            &mut clients,
            &mut server,
            &config,
            hg.num_classes,
            2,
            3,
            &InProcess,
        )
        .unwrap();
        run_training(&mut clients, &mut server, &config, true, &InProcess).unwrap()
    };
    let a = run();
    let b = run();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
        assert_eq!(x.val_accuracy.to_bits(), y.val_accuracy.to_bits());
        assert_eq!(x.test_accuracy.to_bits(), y.test_accuracy.to_bits());
    }
}
