//! `hyperfed-gen`: write synthetic hypergraph datasets in the text format
//! `hyperfed` consumes. The community generator plants class-pure hyperedges
//! over noisy class-mean features; the random generator has no structure at
//! all and is mostly useful for smoke tests.

use anyhow::{Context, Result};
use clap::Parser;
use hyperfed_cli::dataset::{write_dataset, FeatureEncoding};
use hyperfed_cli::report_line;
use hyperfed_core::synth::{community_hypergraph, random_hypergraph, CommunitySpec};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "hyperfed-gen", version, about)]
struct Args {
    /// Generator kind: community | random
    #[arg(long, default_value = "community")]
    kind: String,

    #[arg(long, default_value_t = 1000)]
    nodes: usize,

    #[arg(long, default_value_t = 4)]
    classes: usize,

    #[arg(long, default_value_t = 250)]
    edges: usize,

    #[arg(long, default_value_t = 32)]
    feature_dim: usize,

    /// Inclusive hyperedge size range `MIN:MAX` (community kind only)
    #[arg(long, default_value = "8:16")]
    edge_size: String,

    /// Probability an edge member comes from the edge's anchor class
    #[arg(long, default_value_t = 0.9)]
    purity: f64,

    /// Magnitude of the class-mean feature component
    #[arg(long, default_value_t = 1.0)]
    signal: f64,

    /// Gaussian feature noise sigma
    #[arg(long, default_value_t = 3.0)]
    noise: f64,

    #[arg(long, default_value_t = 7)]
    seed: u64,

    /// Feature encoding in the output file: dense | sparse
    #[arg(long, default_value = "dense")]
    encoding: String,

    /// Output path
    #[arg(long)]
    output: PathBuf,
}

fn main() -> Result<()> {
    let args = Args::parse();
    let encoding = match args.encoding.as_str() {
        "dense" => FeatureEncoding::Dense,
        "sparse" => FeatureEncoding::Sparse,
        other => anyhow::bail!("unknown encoding `{other}` (expected dense or sparse)"),
    };
    let hg = match args.kind.as_str() {
        "community" => {
            let (lo, hi) = args
                .edge_size
                .split_once(':')
                .context("edge_size must look like MIN:MAX")?;
            let spec = CommunitySpec {
                num_nodes: args.nodes,
                num_classes: args.classes,
                feature_dim: args.feature_dim,
                num_edges: args.edges,
                edge_size: (
                    lo.parse().context("bad edge_size MIN")?,
                    hi.parse().context("bad edge_size MAX")?,
                ),
                purity: args.purity,
                signal: args.signal,
                noise: args.noise,
                seed: args.seed,
            };
            community_hypergraph(&spec)
        }
        "random" => random_hypergraph(
            args.nodes,
            args.edges,
            args.classes,
            args.feature_dim,
            args.seed,
        ),
        other => anyhow::bail!("unknown kind `{other}` (expected community or random)"),
    };
    write_dataset(&hg, &args.output, encoding)
        .with_context(|| format!("writing {}", args.output.display()))?;
    report_line(&format!(
        "wrote {}: {} nodes, {} hyperedges, {} classes, {} features",
        args.output.display(),
        hg.num_nodes,
        hg.num_edges(),
        hg.num_classes,
        hg.feature_dim,
    ));
    Ok(())
}
