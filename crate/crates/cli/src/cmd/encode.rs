use std::path::{Path, PathBuf};

use graph_dna::bloom;
use graph_dna::dna::{encode, DnaConfig};
use graph_dna::graph::SparseGraph;

use crate::manifest::Manifest;
use crate::settings::Settings;
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Edge-list file of the graph to encode.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Node count; inferred from the highest edge id when omitted (trailing
    /// isolated nodes then need this to be spelled out).
    #[arg(long)]
    n: Option<usize>,
    /// Output signature file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Bit width; overrides the capacity/fpr sizing when given.
    #[arg(long)]
    c: Option<usize>,
    /// Hash count; overrides the capacity/fpr sizing when given.
    #[arg(long)]
    k: Option<u32>,
    /// Size the filters for this many elements (with --fpr).
    #[arg(long)]
    capacity: Option<usize>,
    /// Target false-positive rate for the sizing formula.
    #[arg(long)]
    fpr: Option<f64>,
    /// Propagation depth.
    #[arg(long)]
    d: Option<usize>,
    /// Saturation cap on a row's estimated cardinality; `inf` disables.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also export the set bits as `i bit` lines.
    #[arg(long)]
    triplets: Option<PathBuf>,
}

/// Resolve (c, k) from explicit values or the capacity/fpr sizing formula.
pub fn resolve_width(
    settings: &mut Settings,
    c: Option<usize>,
    k: Option<u32>,
    capacity: Option<usize>,
    fpr: Option<f64>,
) -> Result<(usize, u32), CliError> {
    let capacity = settings.get_opt(capacity, "capacity")?;
    let fpr = settings.get_opt(fpr, "fpr")?;
    let sized = match (capacity, fpr) {
        (Some(cap), Some(fpr)) => Some(bloom::params_for(cap, fpr)?),
        (None, None) => None,
        _ => {
            return Err(CliError::Usage(
                "sizing needs both `capacity` and `fpr`".into(),
            ))
        }
    };
    let c = match (settings.get_opt(c, "c")?, sized) {
        (Some(c), _) => c,
        (None, Some((c, _))) => {
            settings.note("c", c);
            c
        }
        (None, None) => {
            return Err(CliError::Usage(
                "need either `c` or `capacity` + `fpr`".into(),
            ))
        }
    };
    let k = match (settings.get_opt(k, "k")?, sized) {
        (Some(k), _) => k,
        (None, Some((_, k))) => {
            settings.note("k", k);
            k
        }
        (None, None) => {
            settings.note("k", 4);
            4
        }
    };
    Ok((c, k))
}

pub fn run(args: Args, config: Option<&Path>) -> Result<(), CliError> {
    let mut settings = Settings::load(config)?;
    let graph_path: PathBuf = settings.get_req(args.graph, "graph")?;
    let out: PathBuf = settings.get_req(args.out, "out")?;
    let (c, k) = resolve_width(&mut settings, args.c, args.k, args.capacity, args.fpr)?;
    let cfg = DnaConfig {
        c,
        k,
        depth: settings.get(args.d, "d", 3)?,
        theta: settings.get(args.theta, "theta", f64::INFINITY)?,
        master_seed: settings.get(args.seed, "seed", 42)?,
    };

    let declared_n = settings.get_opt(args.n, "n")?;
    let mut manifest = Manifest::start("encode");
    let graph = SparseGraph::load_edges(&graph_path, declared_n)?;
    let matrix = encode(&graph, &cfg)?;
    matrix.save(&out)?;
    if let Some(path) = settings.get_opt(args.triplets, "triplets")? {
        matrix.write_triplets(path)?;
    }

    manifest.record(settings.resolved());
    manifest.add("graph_n", graph.n());
    manifest.add("graph_nnz", graph.nnz());
    manifest.add("signature_nnz", matrix.nnz());
    manifest.write_for(&out)?;
    println!(
        "encode: {} rows x {} bits, depth {}, nnz {}",
        matrix.n(),
        matrix.c(),
        matrix.depth(),
        matrix.nnz()
    );
    Ok(())
}
