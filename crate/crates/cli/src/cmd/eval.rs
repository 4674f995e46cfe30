use std::path::{Path, PathBuf};

use graph_dna::factorize::{FactorModel, Mode, Split};
use graph_dna::metrics::{ranking_metrics, rgg, rmse, HluParams};

use crate::manifest::Manifest;
use crate::settings::{parse_list, Settings};
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    ratings: Option<PathBuf>,
    #[arg(long)]
    split_train: Option<PathBuf>,
    #[arg(long)]
    split_validation: Option<PathBuf>,
    #[arg(long)]
    split_test: Option<PathBuf>,
    /// Which split to evaluate: `test` (default) or `validation`.
    #[arg(long)]
    split: Option<String>,
    /// RMSE of the no-graph baseline; with --rgg-graph adds a relative
    /// graph gain line (explicit mode).
    #[arg(long)]
    rgg_baseline: Option<f64>,
    /// RMSE of the first-order-graph run.
    #[arg(long)]
    rgg_graph: Option<f64>,
    /// Ranking cutoffs for implicit mode.
    #[arg(long)]
    k_list: Option<String>,
    #[arg(long)]
    hlu_neutral: Option<f64>,
    #[arg(long)]
    hlu_half_life: Option<f64>,
    /// Report file (`metric=value` lines); also printed to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args, config: Option<&Path>) -> Result<(), CliError> {
    let mut settings = Settings::load(config)?;
    let model_path: PathBuf = settings.get_req(args.model, "model")?;
    let ratings: PathBuf = settings.get_req(args.ratings, "ratings")?;
    let split_train = settings.get_opt(args.split_train, "split_train")?;
    let split_validation = settings.get_opt(args.split_validation, "split_validation")?;
    let split_test = settings.get_opt(args.split_test, "split_test")?;
    let split_name: String = settings.get(args.split, "split", "test".to_string())?;
    let split = match split_name.as_str() {
        "test" => Split::Test,
        "validation" => Split::Validation,
        other => return Err(CliError::Usage(format!("unknown split `{other}`"))),
    };

    let mut manifest = Manifest::start("eval");
    let model = FactorModel::load(&model_path)?;
    let data = super::load_ratings(
        &ratings,
        split_train.as_deref(),
        split_validation.as_deref(),
        split_test.as_deref(),
    )?;

    let mut lines = String::new();
    match data.mode() {
        Mode::Explicit => {
            let value = rmse(&model, &data, split)?;
            lines.push_str(&format!("rmse={value}\n"));
            let baseline = settings.get_opt(args.rgg_baseline, "rgg_baseline")?;
            let first_order = settings.get_opt(args.rgg_graph, "rgg_graph")?;
            if let (Some(none), Some(g)) = (baseline, first_order) {
                let gain = rgg(none, g, value)?;
                lines.push_str(&format!("rgg={gain}\n"));
            }
        }
        Mode::Implicit => {
            let k_raw: String = settings.get(args.k_list, "k_list", "1,5".to_string())?;
            let ks: Vec<usize> = parse_list(&k_raw, "k")?;
            let hlu = HluParams {
                neutral: settings.get(args.hlu_neutral, "hlu_neutral", 0.0)?,
                half_life: settings.get(args.hlu_half_life, "hlu_half_life", 5.0)?,
            };
            // implicit ranking metrics always run against the test split
            if split != Split::Test {
                return Err(CliError::Usage(
                    "ranking metrics are defined on the test split".into(),
                ));
            }
            let report = ranking_metrics(&model, &data, &ks, hlu)?;
            print!("{}", report.render_table());
            lines.push_str(&report.render_machine());
        }
    }
    print!("{lines}");
    if let Some(out) = settings.get_opt(args.out, "out")? {
        let out: PathBuf = out;
        std::fs::write(&out, &lines).map_err(|e| CliError::Io(out.display().to_string(), e))?;
        manifest.record(settings.resolved());
        manifest.write_for(&out)?;
    }
    Ok(())
}
