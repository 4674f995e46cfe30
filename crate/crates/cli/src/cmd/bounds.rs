use std::path::{Path, PathBuf};

use graph_dna::bounds::{default_grid, evaluate_grid, render_report};

use crate::settings::{parse_list, Settings};
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Monte-Carlo trials per grid point.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the bit widths of the default grid.
    #[arg(long)]
    c_list: Option<String>,
    /// Override the hash counts of the default grid.
    #[arg(long)]
    k_list: Option<String>,
    /// Optional file for the report table.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args, config: Option<&Path>) -> Result<(), CliError> {
    let mut settings = Settings::load(config)?;
    let trials = settings.get(args.trials, "trials", 10_000)?;
    let seed = settings.get(args.seed, "seed", 42)?;
    let c_list = settings.get_opt(args.c_list, "c_list")?;
    let k_list = settings.get_opt(args.k_list, "k_list")?;

    let grid = match (c_list, k_list) {
        (None, None) => default_grid(),
        (c_raw, k_raw) => {
            let cs: Vec<usize> = match c_raw {
                Some(raw) => parse_list(&raw, "c")?,
                None => vec![256, 1024, 4096],
            };
            let ks: Vec<u32> = match k_raw {
                Some(raw) => parse_list(&raw, "k")?,
                None => vec![2, 4, 7],
            };
            let mut grid = Vec::new();
            for &c in &cs {
                for &k in &ks {
                    let base = c / (4 * k as usize);
                    grid.push((c, k, base, base));
                    grid.push((c, k, base, 0));
                    grid.push((c, k, 0, base));
                }
            }
            grid
        }
    };

    let rows = evaluate_grid(&grid, trials, seed)?;
    let table = render_report(&rows);
    print!("{table}");
    if let Some(out) = settings.get_opt(args.out, "out")? {
        let out: PathBuf = out;
        std::fs::write(&out, &table).map_err(|e| CliError::Io(out.display().to_string(), e))?;
    }
    Ok(())
}
