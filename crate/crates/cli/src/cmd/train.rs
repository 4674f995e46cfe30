use std::fmt;
use std::path::{Path, PathBuf};

use graph_dna::dna::{encode, DnaConfig, DnaMatrix};
use graph_dna::factorize::{
    train_cofactor, train_grmf, train_wmf, FitResult, RatingData, Side, TrainConfig,
};
use graph_dna::graph::{augment, SparseGraph, DEFAULT_NNZ_CAP};

use crate::manifest::Manifest;
use crate::settings::{parse_list, Settings};
use crate::CliError;

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Method {
    /// Plain l2-regularized factorization, no graph.
    Mf,
    /// Graph-regularized factorization on the first-order graph.
    Grmf,
    /// Graph-regularized factorization on a weighted power combination.
    GrmfPower,
    /// Graph-regularized factorization on the signature-augmented graph.
    GrmfDna,
    /// Weighted implicit factorization, optionally graph-regularized.
    Wmf,
    /// Weighted implicit factorization on the augmented graph.
    WmfDna,
    /// Co-factorization of the ratings and the graph.
    Cofactor,
    /// Co-factorization of the ratings and the signature matrix.
    CofactorDna,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mf => "mf",
            Method::Grmf => "grmf",
            Method::GrmfPower => "grmf_power",
            Method::GrmfDna => "grmf_dna",
            Method::Wmf => "wmf",
            Method::WmfDna => "wmf_dna",
            Method::Cofactor => "cofactor",
            Method::CofactorDna => "cofactor_dna",
        })
    }
}

impl crate::settings::SettingValue for Method {
    fn render(&self) -> String {
        self.to_string()
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mf" => Ok(Method::Mf),
            "grmf" => Ok(Method::Grmf),
            "grmf_power" => Ok(Method::GrmfPower),
            "grmf_dna" => Ok(Method::GrmfDna),
            "wmf" => Ok(Method::Wmf),
            "wmf_dna" => Ok(Method::WmfDna),
            "cofactor" => Ok(Method::Cofactor),
            "cofactor_dna" => Ok(Method::CofactorDna),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(clap::Args)]
#[group(skip)]
pub struct Args {
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    ratings: Option<PathBuf>,
    #[arg(long)]
    split_train: Option<PathBuf>,
    #[arg(long)]
    split_validation: Option<PathBuf>,
    #[arg(long)]
    split_test: Option<PathBuf>,
    /// User graph edge list (all methods except `mf`).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Precomputed signature file for the *_dna methods.
    #[arg(long)]
    dna: Option<PathBuf>,
    /// Inline encoding instead of --dna: bit width.
    #[arg(long)]
    c: Option<usize>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    capacity: Option<usize>,
    #[arg(long)]
    fpr: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    dna_seed: Option<u64>,
    /// Power weights for `grmf_power`.
    #[arg(long)]
    power_weights: Option<String>,
    #[arg(long)]
    power_threshold: Option<f64>,
    #[arg(long)]
    nnz_cap: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    lambda_l: Option<f64>,
    #[arg(long)]
    lambda_g: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    u_sweeps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output model file.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Everything `train` and `sweep` share: data, graph material, train config.
pub struct TrainSetup {
    pub method: Method,
    pub data: RatingData,
    pub graph: Option<SparseGraph>,
    pub dna: Option<DnaMatrix>,
    pub train_cfg: TrainConfig,
}

impl TrainSetup {
    pub fn fit(&self, cfg: &TrainConfig) -> Result<FitResult, CliError> {
        let fit = match self.method {
            Method::Mf => train_grmf(&self.data, None, cfg)?,
            Method::Grmf | Method::GrmfPower => {
                train_grmf(&self.data, Some(self.graph()?), cfg)?
            }
            Method::GrmfDna => {
                let aug = augment(self.graph()?, self.dna()?)?;
                train_grmf(&self.data, Some(aug.as_graph()), cfg)?
            }
            Method::Wmf => train_wmf(&self.data, self.graph.as_ref(), cfg)?,
            Method::WmfDna => {
                let aug = augment(self.graph()?, self.dna()?)?;
                train_wmf(&self.data, Some(aug.as_graph()), cfg)?
            }
            Method::Cofactor => train_cofactor(&self.data, &Side::Graph(self.graph()?), cfg)?,
            Method::CofactorDna => train_cofactor(&self.data, &Side::Dna(self.dna()?), cfg)?,
        };
        Ok(fit)
    }

    fn graph(&self) -> Result<&SparseGraph, CliError> {
        self.graph
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("method `{}` needs `graph`", self.method)))
    }

    fn dna(&self) -> Result<&DnaMatrix, CliError> {
        self.dna
            .as_ref()
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "method `{}` needs `dna` or an inline encoding config",
                    self.method
                ))
            })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn build_setup(args: Args, settings: &mut Settings) -> Result<(TrainSetup, PathBuf), CliError> {
    let method = settings.get_req(args.method, "method")?;
    let ratings: PathBuf = settings.get_req(args.ratings, "ratings")?;
    let out: PathBuf = settings.get_req(args.out, "out")?;
    let split_train = settings.get_opt(args.split_train, "split_train")?;
    let split_validation = settings.get_opt(args.split_validation, "split_validation")?;
    let split_test = settings.get_opt(args.split_test, "split_test")?;
    let data = super::load_ratings(
        &ratings,
        split_train.as_deref(),
        split_validation.as_deref(),
        split_test.as_deref(),
    )?;

    let needs_graph = !matches!(method, Method::Mf | Method::CofactorDna);
    let graph_path: Option<PathBuf> = settings.get_opt(args.graph, "graph")?;
    let mut graph = match graph_path {
        Some(path) => Some(SparseGraph::load_edges(path, Some(data.n_users()))?),
        None if needs_graph && method != Method::Wmf => {
            return Err(CliError::Usage(format!("method `{method}` needs `graph`")))
        }
        None => None,
    };

    if method == Method::GrmfPower {
        let weights_raw: String = settings.get_req(args.power_weights, "power_weights")?;
        let weights: Vec<f64> = parse_list(&weights_raw, "power weight")?;
        let threshold = settings.get(args.power_threshold, "power_threshold", 0.0)?;
        let cap = settings.get(args.nnz_cap, "nnz_cap", DEFAULT_NNZ_CAP)?;
        let base = graph.take().expect("grmf_power requires a graph");
        graph = Some(base.power_combine(&weights, threshold, cap)?);
    }

    let needs_dna = matches!(method, Method::GrmfDna | Method::WmfDna | Method::CofactorDna);
    let dna = if needs_dna {
        match settings.get_opt(args.dna, "dna")? {
            Some(path) => Some(DnaMatrix::load(path)?),
            None => {
                // inline encoding straight from the graph
                let base = match (&graph, method) {
                    (Some(g), _) => g,
                    (None, Method::CofactorDna) => {
                        return Err(CliError::Usage(
                            "cofactor_dna needs `dna` or `graph` for inline encoding".into(),
                        ))
                    }
                    _ => unreachable!("graph requirement checked above"),
                };
                let (c, k) = super::encode::resolve_width(
                    settings,
                    args.c,
                    args.k,
                    args.capacity,
                    args.fpr,
                )?;
                let cfg = DnaConfig {
                    c,
                    k,
                    depth: settings.get(args.d, "d", 3)?,
                    theta: settings.get(args.theta, "theta", f64::INFINITY)?,
                    master_seed: settings.get(args.dna_seed, "dna_seed", 42)?,
                };
                Some(encode(base, &cfg)?)
            }
        }
    } else {
        None
    };

    let defaults = TrainConfig::default();
    let train_cfg = TrainConfig {
        rank: settings.get(args.rank, "rank", defaults.rank)?,
        lambda_l: settings.get(args.lambda_l, "lambda_l", defaults.lambda_l)?,
        lambda_g: settings.get(args.lambda_g, "lambda_g", defaults.lambda_g)?,
        rho: settings.get(args.rho, "rho", defaults.rho)?,
        epochs: settings.get(args.epochs, "epochs", defaults.epochs)?,
        seed: settings.get(args.seed, "seed", defaults.seed)?,
        u_sweeps: settings.get(args.u_sweeps, "u_sweeps", defaults.u_sweeps)?,
    };
    Ok((
        TrainSetup {
            method,
            data,
            graph,
            dna,
            train_cfg,
        },
        out,
    ))
}

pub fn run(args: Args, config: Option<&Path>) -> Result<(), CliError> {
    let mut settings = Settings::load(config)?;
    let mut manifest = Manifest::start("train");
    let (setup, out) = build_setup(args, &mut settings)?;
    let fit = setup.fit(&setup.train_cfg)?;
    fit.model.save(&out)?;

    manifest.record(settings.resolved());
    if let Some(g) = &setup.graph {
        manifest.add("graph_nnz", g.nnz());
    }
    if let Some(b) = &setup.dna {
        manifest.add("signature_nnz", b.nnz());
    }
    let trace: Vec<String> = fit.objectives.iter().map(f64::to_string).collect();
    manifest.add("objective_trace", trace.join(","));
    manifest.add(
        "objective_final",
        fit.objectives.last().copied().unwrap_or(f64::NAN),
    );
    manifest.write_for(&out)?;
    println!(
        "train[{}]: rank {}, {} epochs, final objective {}",
        setup.method,
        setup.train_cfg.rank,
        fit.objectives.len(),
        fit.objectives.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}
