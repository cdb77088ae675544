//! Benchmarks for the four hot paths: whole-graph propagation, partitioning,
//! the completion protocol, and a local training step plus FedAvg.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use hyperfed_bench::bench_graph;
use hyperfed_core::federation::messages::ParamUploadMsg;
use hyperfed_core::federation::server::fedavg_aggregate;
use hyperfed_core::federation::{
    run_hc_pretraining, ClientState, InProcess, PropagationMode, ServerState,
};
use hyperfed_core::partition::{dirichlet_partition, split_subgraphs, PartitionSpec};
use hyperfed_core::propagation::{propagate_global, PropagationConfig};
use hyperfed_core::training::{ClassifierParams, LocalTrainer, TrainConfig};
use ndarray::Array2;
use std::hint::black_box;

fn bench_propagation(c: &mut Criterion) {
    let hg = bench_graph();
    c.bench_function("propagate_global/1000n_250e_n2", |b| {
        b.iter(|| {
            propagate_global(black_box(&hg), &hg.features, PropagationConfig::new(2)).unwrap()
        })
    });
}

fn bench_partition(c: &mut Criterion) {
    let hg = bench_graph();
    let spec = PartitionSpec {
        num_clients: 3,
        beta: 10_000.0,
        seed: 42,
    };
    c.bench_function("partition/dirichlet_split_k3", |b| {
        b.iter(|| {
            let assignment = dirichlet_partition(black_box(&hg), &spec).unwrap();
            split_subgraphs(&hg, &assignment)
        })
    });
}

fn bench_completion(c: &mut Criterion) {
    let hg = bench_graph();
    let assignment = dirichlet_partition(
        &hg,
        &PartitionSpec {
            num_clients: 3,
            beta: 10_000.0,
            seed: 42,
        },
    )
    .unwrap();
    c.bench_function("completion/pretraining_k3_n2", |b| {
        b.iter_batched(
            || split_subgraphs(&hg, &assignment),
            |(subs, border)| {
                let mut clients: Vec<ClientState> = subs
                    .into_iter()
                    .map(|s| ClientState::new(s, PropagationMode::Hc, 2))
                    .collect();
                let mut server = ServerState::new(border, 3);
                run_hc_pretraining(&mut clients, &mut server, &InProcess).unwrap();
                clients
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_training(c: &mut Criterion) {
    let rows = 100;
    let dim = 32;
    let classes = 4;
    let config = TrainConfig::default();
    let params = ClassifierParams::xavier(&[dim, config.hidden_dim, classes], 1);
    let x = Array2::from_shape_fn((rows, dim), |(i, j)| ((i * 31 + j * 7) % 13) as f64 / 13.0);
    let labels: Vec<usize> = (0..rows).map(|i| i % classes).collect();
    let mut trainer = LocalTrainer::new(params.clone(), x, labels, &config, 5);
    c.bench_function("training/local_iter_100rows", |b| {
        b.iter(|| trainer.train_iters(1).unwrap())
    });

    let uploads: Vec<ParamUploadMsg> = (0..3)
        .map(|client| ParamUploadMsg {
            client_id: client,
            blocks: params.blocks.clone(),
            train_node_count: 90 + client,
        })
        .collect();
    c.bench_function("training/fedavg_k3", |b| {
        b.iter(|| fedavg_aggregate(black_box(&uploads)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_propagation,
    bench_partition,
    bench_completion,
    bench_training
);
criterion_main!(benches);
