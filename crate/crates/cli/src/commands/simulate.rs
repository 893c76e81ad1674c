use clap::{Args, ValueEnum};
use std::path::PathBuf;

use enex_core::diffusion::{equilibrium_init, run_ensemble, Observable};
use enex_core::diffusion::StepParams;
use enex_core::model::Boundary;
use enex_core::{DualConfig, Family};

use super::{load_spec, CliError};
use crate::manifest::RunManifest;
use crate::EXIT_OK;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SimFamily {
    Bmp,
    Bep,
    Kmp,
    L3,
}

impl SimFamily {
    fn family(self) -> Family {
        match self {
            SimFamily::Bmp => Family::Bmp,
            SimFamily::Bep => Family::Bep,
            SimFamily::Kmp => Family::Kmp,
            SimFamily::L3 => Family::L3,
        }
    }
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Model family; must match the spec file.
    #[arg(value_enum)]
    pub family: SimFamily,
    /// Chain spec JSON file.
    #[arg(long)]
    pub spec: PathBuf,
    /// Time step (ignored by the kmp jump chain).
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Number of steps (sweeps) per trajectory.
    #[arg(long, default_value_t = 100_000)]
    pub steps: u64,
    /// Record observables every this many steps.
    #[arg(long, default_value_t = 100)]
    pub observe_every: u64,
    /// Number of independent trajectories.
    #[arg(long, default_value_t = 1)]
    pub trajectories: u64,
    /// Master seed; trajectory k uses a derived stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for trajectory CSVs and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Extra duality-weight observables, as "eta0;eta1,...,etaL;etaL1".
    #[arg(long = "track-eta")]
    pub track_eta: Vec<String>,
}

pub fn run(args: SimulateArgs) -> Result<u8, CliError> {
    let spec = load_spec(&args.spec)?;
    if spec.family != args.family.family() {
        return Err(format!(
            "spec family {} does not match subcommand {}",
            spec.family,
            args.family.family()
        )
        .into());
    }
    let mut observables = vec![Observable::SiteEnergies, Observable::TotalEnergy];
    let mut manifest = RunManifest::new(&spec, args.seed)
        .with_param("dt", args.dt)
        .with_param("steps", args.steps)
        .with_param("observe_every", args.observe_every)
        .with_param("trajectories", args.trajectories);
    for (k, eta_text) in args.track_eta.iter().enumerate() {
        let eta = DualConfig::parse(eta_text)?;
        manifest = manifest.with_param(format!("D{k}").as_str(), eta_text);
        observables.push(Observable::DualityWeight(eta));
    }
    if spec.boundary == Boundary::Reservoirs {
        observables.push(Observable::Ledger);
    }

    std::fs::create_dir_all(&args.out)?;
    let init = equilibrium_init(&spec, args.seed, 0);
    let params = StepParams::new(args.dt, args.seed);
    let series_list = run_ensemble(
        &spec,
        &init,
        params,
        args.steps,
        args.observe_every,
        &observables,
        args.trajectories,
    )?;
    for (k, series) in series_list.iter().enumerate() {
        let path = args.out.join(format!("traj_{k:04}.csv"));
        std::fs::write(&path, series.to_csv())?;
    }
    manifest.finish().write(&args.out.join("manifest.json"))?;
    eprintln!(
        "wrote {} trajectories ({} rows each) to {}",
        series_list.len(),
        series_list.first().map(|s| s.rows.len()).unwrap_or(0),
        args.out.display()
    );
    Ok(EXIT_OK)
}
