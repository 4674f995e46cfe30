use std::path::Path;

use graph_dna::factorize::{Split, TrainConfig};
use graph_dna::metrics::rmse;

use crate::manifest::Manifest;
use crate::settings::{parse_list, Settings};
use crate::CliError;

/// Same inputs as `train`, plus the regularization grids. Every combination
/// is trained and scored on the validation split; the best model by
/// validation RMSE is written to `out`.
#[derive(clap::Args)]
#[group(skip)]
pub struct Args {
    #[command(flatten)]
    train: super::train::Args,
    /// Grid for the l2 weight.
    #[arg(long)]
    lambda_l_grid: Option<String>,
    /// Grid for the graph weight (skipped for `mf`).
    #[arg(long)]
    lambda_g_grid: Option<String>,
}

pub fn run(args: Args, config: Option<&Path>) -> Result<(), CliError> {
    let mut settings = Settings::load(config)?;
    let ll_raw: String = settings.get(
        args.lambda_l_grid,
        "lambda_l_grid",
        "0.01,0.1,1,10,100".to_string(),
    )?;
    let lg_raw: String = settings.get(
        args.lambda_g_grid,
        "lambda_g_grid",
        "0.01,0.1,1,10,100".to_string(),
    )?;
    let lambda_l_grid: Vec<f64> = parse_list(&ll_raw, "lambda_l")?;
    let lambda_g_grid: Vec<f64> = parse_list(&lg_raw, "lambda_g")?;

    let mut manifest = Manifest::start("sweep");
    let (setup, out) = super::train::build_setup(args.train, &mut settings)?;
    if setup.data.count(Split::Validation) == 0 {
        return Err(CliError::Core(graph_dna::Error::EmptySplit("validation")));
    }
    // methods without a graph term only sweep lambda_l
    let lambda_g_grid = if matches!(
        setup.method,
        super::train::Method::Mf | super::train::Method::Cofactor | super::train::Method::CofactorDna
    ) {
        vec![setup.train_cfg.lambda_g]
    } else {
        lambda_g_grid
    };

    let mut report = String::new();
    let mut best: Option<(f64, f64, f64, graph_dna::factorize::FitResult)> = None;
    for &lambda_l in &lambda_l_grid {
        for &lambda_g in &lambda_g_grid {
            let cfg = TrainConfig {
                lambda_l,
                lambda_g,
                ..setup.train_cfg
            };
            let fit = setup.fit(&cfg)?;
            let score = rmse(&fit.model, &setup.data, Split::Validation)?;
            report.push_str(&format!(
                "lambda_l={lambda_l} lambda_g={lambda_g} validation_rmse={score}\n"
            ));
            println!("sweep: lambda_l={lambda_l} lambda_g={lambda_g} validation_rmse={score}");
            let better = best
                .as_ref()
                .map(|&(s, _, _, _)| score < s)
                .unwrap_or(true);
            if better {
                best = Some((score, lambda_l, lambda_g, fit));
            }
        }
    }
    let (score, lambda_l, lambda_g, fit) = best.expect("non-empty grid");
    fit.model.save(&out)?;
    report.push_str(&format!(
        "best: lambda_l={lambda_l} lambda_g={lambda_g} validation_rmse={score}\n"
    ));
    println!("sweep best: lambda_l={lambda_l} lambda_g={lambda_g} validation_rmse={score}");
    let report_path = out.with_extension("sweep");
    std::fs::write(&report_path, &report)
        .map_err(|e| CliError::Io(report_path.display().to_string(), e))?;

    manifest.record(settings.resolved());
    manifest.add("best_lambda_l", lambda_l);
    manifest.add("best_lambda_g", lambda_g);
    manifest.add("best_validation_rmse", score);
    manifest.write_for(&out)?;
    Ok(())
}
