use clap::{Args, Subcommand};
use std::io::Write;
use std::path::PathBuf;

use enex_core::absorb::{covariance_pairs, stationary_moment, temperature_profile};
use enex_core::DualConfig;

use super::{load_spec, CliError};
use crate::EXIT_OK;

#[derive(Args)]
pub struct SolveArgs {
    #[command(subcommand)]
    pub what: SolveWhat,
}

#[derive(Subcommand)]
pub enum SolveWhat {
    /// Steady-state per-site energy profile, exactly from one-walker splits.
    Profile {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Steady-state covariance of site energies for all pairs i < j.
    Covariance {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Steady-state duality moment of one dual configuration.
    Moment {
        #[arg(long)]
        spec: PathBuf,
        /// Dual configuration "eta0;eta1,...,etaL;etaL1".
        #[arg(long)]
        eta: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn run(args: SolveArgs) -> Result<u8, CliError> {
    match args.what {
        SolveWhat::Profile { spec, out } => {
            let spec = load_spec(&spec)?;
            let profile = temperature_profile(&spec)?;
            let mut text = format!("# spec: {}\n", serde_json::to_string(&spec)?);
            text.push_str("i,value\n");
            for (i, v) in profile.iter().enumerate() {
                text.push_str(&format!("{},{v:?}\n", i + 1));
            }
            emit(&out, &text)?;
        }
        SolveWhat::Covariance { spec, out } => {
            let spec = load_spec(&spec)?;
            let pairs: Vec<(usize, usize)> = (1..=spec.l)
                .flat_map(|i| ((i + 1)..=spec.l).map(move |j| (i, j)))
                .collect();
            let values = covariance_pairs(&spec, &pairs)?;
            let mut text = format!("# spec: {}\n", serde_json::to_string(&spec)?);
            text.push_str("i,j,value\n");
            for (i, j, v) in values {
                text.push_str(&format!("{i},{j},{v:?}\n"));
            }
            emit(&out, &text)?;
        }
        SolveWhat::Moment { spec, eta, out } => {
            let spec = load_spec(&spec)?;
            let eta = DualConfig::parse(&eta)?;
            let value = stationary_moment(&eta, &spec)?;
            let mut text = format!("# spec: {}\n", serde_json::to_string(&spec)?);
            text.push_str("eta,value\n");
            text.push_str(&format!("{eta},{value:?}\n"));
            emit(&out, &text)?;
        }
    }
    Ok(EXIT_OK)
}
