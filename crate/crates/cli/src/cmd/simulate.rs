use std::path::{Path, PathBuf};

use graph_dna::factorize::Split;
use graph_dna::synth::{generate, verify_splits, Smoothing, SynthConfig};

use crate::manifest::Manifest;
use crate::settings::Settings;
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Output prefix: writes PREFIX.ratings, PREFIX.graph, PREFIX.train,
    /// PREFIX.validation, PREFIX.test, PREFIX.manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// Neighborhood influence weight w in [0, 1].
    #[arg(long)]
    influence: Option<f64>,
    /// Smoothing rounds T.
    #[arg(long)]
    steps: Option<usize>,
    /// Edge probability of the random friendship graph.
    #[arg(long)]
    edge_prob: Option<f64>,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    val_frac: Option<f64>,
    #[arg(long)]
    test_frac: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Neighbor aggregation: `mean` (bounded, default) or `sum` (literal
    /// recurrence).
    #[arg(long)]
    smoothing: Option<Smoothing>,
}

pub fn run(args: Args, config: Option<&Path>) -> Result<(), CliError> {
    let mut settings = Settings::load(config)?;
    let defaults = SynthConfig::default();
    let out = settings.get_req(args.out, "out")?;
    let cfg = SynthConfig {
        n_users: settings.get(args.n, "n", 2000)?,
        m_items: settings.get(args.m, "m", 500)?,
        rank: settings.get(args.rank, "rank", 10)?,
        influence: settings.get(args.influence, "influence", defaults.influence)?,
        steps: settings.get(args.steps, "steps", defaults.steps)?,
        edge_prob: settings.get(args.edge_prob, "edge_prob", 0.005)?,
        train_fraction: settings.get(args.train_frac, "train_frac", defaults.train_fraction)?,
        validation_fraction: settings.get(args.val_frac, "val_frac", 0.01)?,
        test_fraction: settings.get(args.test_frac, "test_frac", defaults.test_fraction)?,
        seed: settings.get(args.seed, "seed", defaults.seed)?,
        smoothing: settings.get(args.smoothing, "smoothing", defaults.smoothing)?,
    };

    let mut manifest = Manifest::start("simulate");
    let (data, graph) = generate(&cfg)?;
    debug_assert!(verify_splits(&data, &cfg));

    let out: PathBuf = out;
    let with_ext = |ext: &str| -> PathBuf {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".");
        name.push(ext);
        out.with_file_name(name)
    };
    data.save(with_ext("ratings"))?;
    graph.save_edges(with_ext("graph"))?;
    data.write_split_file(with_ext("train"), Split::Train)?;
    data.write_split_file(with_ext("validation"), Split::Validation)?;
    data.write_split_file(with_ext("test"), Split::Test)?;

    manifest.record(settings.resolved());
    manifest.add("ratings_total", data.len());
    manifest.add("ratings_train", data.count(Split::Train));
    manifest.add("ratings_validation", data.count(Split::Validation));
    manifest.add("ratings_test", data.count(Split::Test));
    manifest.add("graph_nnz", graph.nnz());
    manifest.write_for(&out)?;
    println!(
        "simulate: {} users x {} items, {} ratings, graph nnz {}",
        data.n_users(),
        data.m_items(),
        data.len(),
        graph.nnz()
    );
    Ok(())
}
