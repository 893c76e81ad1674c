use clap::Args;
use std::io::Write;
use std::path::PathBuf;

use enex_core::jump::{run_absorption_ensemble, DEFAULT_EVENT_BUDGET};
use enex_core::DualConfig;

use super::{load_spec, CliError};
use crate::manifest::RunManifest;
use crate::EXIT_OK;

#[derive(Args)]
pub struct SipArgs {
    /// Chain spec JSON file (family SIP, boundary absorbing).
    #[arg(long)]
    pub spec: PathBuf,
    /// Start configuration, "eta0;eta1,...,etaL;etaL1".
    #[arg(long)]
    pub eta: String,
    /// Number of independent absorption runs.
    #[arg(long, default_value_t = 10_000)]
    pub runs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-run event budget.
    #[arg(long, default_value_t = DEFAULT_EVENT_BUDGET)]
    pub max_events: u64,
    /// Output CSV file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: SipArgs) -> Result<u8, CliError> {
    let spec = load_spec(&args.spec)?;
    let eta = DualConfig::parse(&args.eta)?;
    let outcomes = run_absorption_ensemble(&eta, &spec, args.seed, args.runs, args.max_events)?;
    let mut csv = String::from("run_index,a,b,n_events,total_time\n");
    for (k, o) in outcomes.iter().enumerate() {
        csv.push_str(&format!("{k},{},{},{},{:?}\n", o.a, o.b, o.n_events, o.total_time));
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, csv)?;
            let manifest = RunManifest::new(&spec, args.seed)
                .with_param("eta", &args.eta)
                .with_param("runs", args.runs)
                .with_param("max_events", args.max_events)
                .finish();
            manifest.write(&path.with_extension("manifest.json"))?;
        }
        None => {
            std::io::stdout().write_all(csv.as_bytes())?;
        }
    }
    Ok(EXIT_OK)
}
