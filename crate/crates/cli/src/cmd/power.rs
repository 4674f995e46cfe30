use std::path::{Path, PathBuf};

use graph_dna::graph::{SparseGraph, DEFAULT_NNZ_CAP};

use crate::manifest::Manifest;
use crate::settings::{parse_list, Settings};
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Node count; inferred from the highest edge id when omitted.
    #[arg(long)]
    n: Option<usize>,
    /// Output edge-list file (written only on success).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated weights w1,...,wK of the powers G^1..G^K.
    #[arg(long)]
    weights: Option<String>,
    /// Drop combined entries with magnitude below this.
    #[arg(long)]
    threshold: Option<f64>,
    /// Abort once materialized sparse entries exceed this cap.
    #[arg(long)]
    nnz_cap: Option<usize>,
}

pub fn run(args: Args, config: Option<&Path>) -> Result<(), CliError> {
    let mut settings = Settings::load(config)?;
    let graph_path: PathBuf = settings.get_req(args.graph, "graph")?;
    let out: PathBuf = settings.get_req(args.out, "out")?;
    let weights_raw: String = settings.get_req(args.weights, "weights")?;
    let weights: Vec<f64> = parse_list(&weights_raw, "weight")?;
    let threshold = settings.get(args.threshold, "threshold", 0.0)?;
    let nnz_cap = settings.get(args.nnz_cap, "nnz_cap", DEFAULT_NNZ_CAP)?;

    let declared_n = settings.get_opt(args.n, "n")?;
    let mut manifest = Manifest::start("power");
    let graph = SparseGraph::load_edges(&graph_path, declared_n)?;
    let combined = graph.power_combine(&weights, threshold, nnz_cap)?;
    combined.save_edges(&out)?;

    manifest.record(settings.resolved());
    manifest.add("graph_n", graph.n());
    manifest.add("graph_nnz", graph.nnz());
    manifest.add("result_nnz", combined.nnz());
    manifest.write_for(&out)?;
    println!(
        "power: {} nodes, input nnz {}, result nnz {}",
        graph.n(),
        graph.nnz(),
        combined.nnz()
    );
    Ok(())
}
