//! Experiment orchestration: one function takes a hypergraph and a mode and
//! produces per-round metrics across seeds.
//!
//! The five ablation modes differ only in two switches plus how the node
//! assignment is produced:
//!
//! | mode     | propagation        | parameter exchange | clients |
//! |----------|--------------------|--------------------|---------|
//! | local    | trimmed (basic)    | none               | K       |
//! | local-hc | completion         | none               | K       |
//! | fed      | trimmed (basic)    | FedAvg             | K       |
//! | fed-hc   | completion         | FedAvg             | K       |
//! | global   | completion         | FedAvg             | 1       |
//!
//! Global mode skips partitioning entirely: every node lands on one client,
//! there are no border edges, and completion plus single-client FedAvg
//! degenerate to whole-graph propagation with one trainer. Everything
//! downstream of the assignment is the same code path for all modes.
//!
//! All randomness for one run is derived from its seed through fixed,
//! documented substreams, so a run is reproducible from (dataset, config,
//! seed) alone and modes sharing a seed share the partition, the masks and
//! the initial parameters.

use crate::metrics::{final_test_accuracies, mean_and_std, MetricsRecord, Summary};
use hyperfed_core::federation::{
    initialize_training, run_basic_propagation, run_hc_pretraining, run_training, ClientState,
    FedError, InProcess, PropagationMode, RoundMetrics, ServerState, Transport, WireRoundTrip,
};
use hyperfed_core::hypergraph::Hypergraph;
use hyperfed_core::partition::{
    dirichlet_partition, make_masks, split_subgraphs, Assignment, PartitionError, PartitionSpec,
};
use hyperfed_core::seeding::derive_substream;
use hyperfed_core::training::TrainConfig;
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Substream tags: every random choice in a run draws from
/// `derive_substream(seed, TAG)`, never from the raw seed.
const STREAM_PARTITION: u64 = 0;
const STREAM_MASKS: u64 = 1;
const STREAM_PARAMS: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Federation(#[from] FedError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Local,
    LocalHc,
    Fed,
    FedHc,
    Global,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Local,
        Mode::LocalHc,
        Mode::Fed,
        Mode::FedHc,
        Mode::Global,
    ];

    /// Whether border-edge completion runs before training.
    pub fn uses_completion(self) -> bool {
        matches!(self, Mode::LocalHc | Mode::FedHc | Mode::Global)
    }

    /// Whether parameters are exchanged through the server each round.
    pub fn federates(self) -> bool {
        matches!(self, Mode::Fed | Mode::FedHc | Mode::Global)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Local => "local",
            Mode::LocalHc => "local-hc",
            Mode::Fed => "fed",
            Mode::FedHc => "fed-hc",
            Mode::Global => "global",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(Mode::Local),
            "local-hc" => Ok(Mode::LocalHc),
            "fed" => Ok(Mode::Fed),
            "fed-hc" => Ok(Mode::FedHc),
            "global" => Ok(Mode::Global),
            other => Err(format!(
                "unknown mode `{other}` (expected local, local-hc, fed, fed-hc or global)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    InProcess,
    Wire,
}

impl fmt::Display for TransportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportKind::InProcess => "inproc",
            TransportKind::Wire => "wire",
        })
    }
}

impl FromStr for TransportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inproc" => Ok(TransportKind::InProcess),
            "wire" => Ok(TransportKind::Wire),
            other => Err(format!(
                "unknown transport `{other}` (expected inproc or wire)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Client count; global mode always uses exactly one client.
    pub num_clients: usize,
    /// Dirichlet concentration for the label-driven partition.
    pub beta: f64,
    /// Propagation depth N.
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub rounds: usize,
    pub local_iters: usize,
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
    pub seeds: Vec<u64>,
    pub transport: TransportKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::FedHc,
            num_clients: 3,
            beta: 10_000.0,
            num_layers: 2,
            hidden_dim: 16,
            dropout: 0.5,
            learning_rate: 0.01,
            rounds: 150,
            local_iters: 3,
            train_ratio: 0.1,
            val_ratio: 0.2,
            test_ratio: 0.4,
            seeds: vec![42, 43, 44, 45, 46],
            transport: TransportKind::InProcess,
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), ExpError> {
        let fail = |m: &str| Err(ExpError::InvalidConfig(m.to_string()));
        if self.seeds.is_empty() {
            return fail("at least one seed is required");
        }
        if self.num_clients == 0 {
            return fail("num_clients must be at least 1");
        }
        if self.beta <= 0.0 || !self.beta.is_finite() {
            return fail("beta must be positive and finite");
        }
        if self.num_layers == 0 {
            return fail("num_layers must be at least 1");
        }
        if self.rounds == 0 || self.local_iters == 0 {
            return fail("rounds and local_iters must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout must be in [0, 1)");
        }
        if self.learning_rate <= 0.0 || self.learning_rate.is_nan() {
            return fail("learning rate must be positive");
        }
        Ok(())
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            dropout_rate: self.dropout,
            hidden_dim: self.hidden_dim,
            rounds: self.rounds,
            local_iters: self.local_iters,
            seed,
        }
    }
}

/// Everything run_experiment produces: rows in seed order, plus the summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<MetricsRecord>,
    pub summary: Summary,
}

fn run_pipeline<T: Transport>(
    hg: &Hypergraph,
    cfg: &ExperimentConfig,
    seed: u64,
    transport: &T,
) -> Result<Vec<RoundMetrics>, ExpError> {
    let num_clients = if cfg.mode == Mode::Global {
        1
    } else {
        cfg.num_clients
    };
    let assignment = if cfg.mode == Mode::Global {
        Assignment {
            client_of: vec![0; hg.num_nodes],
            num_clients: 1,
        }
    } else {
        dirichlet_partition(
            hg,
            &PartitionSpec {
                num_clients,
                beta: cfg.beta,
                seed: derive_substream(seed, STREAM_PARTITION),
            },
        )?
    };

    let (mut subs, border) = split_subgraphs(hg, &assignment);
    let mask_base = derive_substream(seed, STREAM_MASKS);
    for sub in &mut subs {
        sub.masks = make_masks(
            sub,
            cfg.train_ratio,
            cfg.val_ratio,
            cfg.test_ratio,
            derive_substream(mask_base, sub.client_id as u64),
        )?;
    }

    let prop_mode = if cfg.mode.uses_completion() {
        PropagationMode::Hc
    } else {
        PropagationMode::Basic
    };
    let mut clients: Vec<ClientState> = subs
        .into_iter()
        .map(|s| ClientState::new(s, prop_mode, cfg.num_layers))
        .collect();
    let mut server = ServerState::new(border, num_clients);

    match prop_mode {
        PropagationMode::Hc => run_hc_pretraining(&mut clients, &mut server, transport)?,
        PropagationMode::Basic => run_basic_propagation(&mut clients)?,
    }

    let train_cfg = cfg.train_config(seed);
    initialize_training(
        &mut clients,
        &mut server,
        &train_cfg,
        hg.num_classes,
        derive_substream(train_cfg.seed, STREAM_PARAMS),
        derive_substream(train_cfg.seed, STREAM_DROPOUT),
        transport,
    )?;
    let history = run_training(
        &mut clients,
        &mut server,
        &train_cfg,
        cfg.mode.federates(),
        transport,
    )?;
    Ok(history)
}

/// Run one seed of the configured experiment.
pub fn run_single(
    hg: &Hypergraph,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<RoundMetrics>, ExpError> {
    cfg.validate()?;
    match cfg.transport {
        TransportKind::InProcess => run_pipeline(hg, cfg, seed, &InProcess),
        TransportKind::Wire => run_pipeline(hg, cfg, seed, &WireRoundTrip),
    }
}

/// Run all configured seeds and aggregate. Seeds run in parallel; records
/// are emitted in the order seeds appear in the config, so output bytes do
/// not depend on scheduling.
pub fn run_experiment(
    hg: &Hypergraph,
    cfg: &ExperimentConfig,
) -> Result<ExperimentOutput, ExpError> {
    cfg.validate()?;
    let per_seed: Vec<Vec<RoundMetrics>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_single(hg, cfg, seed))
        .collect::<Result<_, _>>()?;

    let mut records = Vec::with_capacity(cfg.seeds.len() * cfg.rounds);
    for (&seed, history) in cfg.seeds.iter().zip(&per_seed) {
        records.extend(history.iter().map(|m| MetricsRecord::from_round(seed, m)));
    }
    let finals = final_test_accuracies(&records);
    let (mean, std) = mean_and_std(&finals);
    let summary = Summary {
        dataset: hg.name.clone(),
        mode: cfg.mode.to_string(),
        num_seeds: cfg.seeds.len(),
        final_test_mean: mean,
        final_test_std: std,
    };
    Ok(ExperimentOutput { records, summary })
}
