use std::path::{Path, PathBuf};
use std::time::Instant;

use graph_dna::dna::{encode, DnaConfig};
use graph_dna::graph::SparseGraph;
use graph_dna::synth::erdos_renyi;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::settings::{parse_list, Settings};
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Graph to encode; omit to generate a random one with --n/--p.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    graph_seed: Option<u64>,
    #[arg(long)]
    c: Option<usize>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Depths to time, comma-separated.
    #[arg(long)]
    depths: Option<String>,
    /// Runs per depth; the median is reported.
    #[arg(long)]
    repeat: Option<usize>,
    /// Optional file to append the table to.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args, config: Option<&Path>) -> Result<(), CliError> {
    let mut settings = Settings::load(config)?;
    let graph = match settings.get_opt(args.graph, "graph")? {
        Some(path) => {
            let path: PathBuf = path;
            SparseGraph::load_edges(path, None)?
        }
        None => {
            let n = settings.get(args.n, "n", 10_000)?;
            let p = settings.get(args.p, "p", 1e-3)?;
            let graph_seed = settings.get(args.graph_seed, "graph_seed", 1)?;
            let mut rng = ChaCha8Rng::seed_from_u64(graph_seed);
            erdos_renyi(n, p, &mut rng)?
        }
    };
    let c = settings.get(args.c, "c", 2392)?;
    let k = settings.get(args.k, "k", 4)?;
    let theta = settings.get(args.theta, "theta", f64::INFINITY)?;
    let seed = settings.get(args.seed, "seed", 42)?;
    let depths_raw: String = settings.get(args.depths, "depths", "1,2,3,4".to_string())?;
    let depths: Vec<usize> = parse_list(&depths_raw, "depth")?;
    if depths.is_empty() {
        return Err(CliError::Usage("bench: need at least one depth".into()));
    }
    let repeat = settings.get(args.repeat, "repeat", 1)?.max(1);

    let mut table = String::new();
    table.push_str(&format!(
        "nodes = {}, graph nnz = {}, c = {c}, k = {k}\n",
        graph.n(),
        graph.nnz()
    ));
    table.push_str(&format!("{:>5} {:>12} {:>14}\n", "d", "seconds", "nnz_b"));
    let mut timings = Vec::new();
    for &d in &depths {
        let cfg = DnaConfig {
            c,
            k,
            depth: d,
            theta,
            master_seed: seed,
        };
        let mut runs = Vec::with_capacity(repeat);
        let mut nnz = 0;
        for _ in 0..repeat {
            let start = Instant::now();
            let b = encode(&graph, &cfg)?;
            runs.push(start.elapsed().as_secs_f64());
            nnz = b.nnz();
        }
        runs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let secs = runs[runs.len() / 2];
        timings.push((d, secs));
        table.push_str(&format!("{d:>5} {secs:>12.4} {nnz:>14}\n"));
    }
    if timings.len() > 1 {
        let (d_min, t_min) = timings
            .iter()
            .copied()
            .min_by(|a, b| a.0.cmp(&b.0))
            .expect("non-empty");
        let (d_max, t_max) = timings
            .iter()
            .copied()
            .max_by(|a, b| a.0.cmp(&b.0))
            .expect("non-empty");
        table.push_str(&format!(
            "time ratio d={d_max} vs d={d_min}: {:.2}x\n",
            t_max / t_min
        ));
    }
    print!("{table}");
    if let Some(out) = settings.get_opt(args.out, "out")? {
        let out: PathBuf = out;
        std::fs::write(&out, &table).map_err(|e| CliError::Io(out.display().to_string(), e))?;
    }
    Ok(())
}
