use clap::{Args, Subcommand};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

use enex_core::diffusion::ObservationSeries;
use enex_core::estimators::{pool_estimates, transport_summary, MomentEstimate, DEFAULT_BATCHES};
use enex_core::ChainSpec;

use super::CliError;
use crate::EXIT_OK;

#[derive(Args)]
pub struct ReportArgs {
    #[command(subcommand)]
    pub what: ReportWhat,
}

#[derive(Subcommand)]
pub enum ReportWhat {
    /// Flux, conductivity and profile from a simulate output directory.
    Transport {
        /// Directory holding traj_*.csv and manifest.json.
        #[arg(long = "in")]
        input: PathBuf,
        /// Burn-in in observation rows per trajectory.
        #[arg(long, default_value_t = 0)]
        burn_in: usize,
        #[arg(long, default_value_t = DEFAULT_BATCHES)]
        batches: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct TransportReport {
    spec: ChainSpec,
    #[serde(rename = "J")]
    j: f64,
    #[serde(rename = "J_stderr")]
    j_stderr: f64,
    #[serde(rename = "kappa_L")]
    kappa_l: Option<f64>,
    profile: Vec<SiteEstimate>,
    trajectories: usize,
}

#[derive(Serialize)]
struct SiteEstimate {
    i: usize,
    value: f64,
    stderr: f64,
}

/// Reads back the CSV written by the simulate command.
pub fn read_series_csv(path: &Path) -> Result<ObservationSeries, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| format!("{}: empty series", path.display()))?;
    let names: Vec<&str> = header.split(',').collect();
    if names.len() < 2 || names[0] != "step" || names[1] != "time" {
        return Err(format!("{}: unexpected header {header:?}", path.display()).into());
    }
    let columns: Vec<String> = names[2..].iter().map(|s| s.to_string()).collect();
    let mut series = ObservationSeries {
        columns,
        steps: Vec::new(),
        times: Vec::new(),
        rows: Vec::new(),
    };
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let step = fields
            .next()
            .ok_or("missing step")?
            .parse::<u64>()
            .map_err(|e| format!("bad step: {e}"))?;
        let time = fields
            .next()
            .ok_or("missing time")?
            .parse::<f64>()
            .map_err(|e| format!("bad time: {e}"))?;
        let row: Result<Vec<f64>, _> = fields.map(|f| f.parse::<f64>()).collect();
        series.steps.push(step);
        series.times.push(time);
        series.rows.push(row.map_err(|e| format!("bad value: {e}"))?);
    }
    Ok(series)
}

fn spec_from_manifest(dir: &Path) -> Result<ChainSpec, CliError> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("reading {}: {e}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let spec = value
        .get("spec")
        .ok_or("manifest lacks a spec field")?
        .clone();
    Ok(serde_json::from_value(spec)?)
}

pub fn run(args: ReportArgs) -> Result<u8, CliError> {
    match args.what {
        ReportWhat::Transport { input, burn_in, batches, out } => {
            let spec = spec_from_manifest(&input)?;
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .map(|n| n.starts_with("traj_") && n.ends_with(".csv"))
                        .unwrap_or(false)
                })
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(format!("no traj_*.csv in {}", input.display()).into());
            }
            let mut j_parts = Vec::new();
            let mut profile_parts: Vec<Vec<MomentEstimate>> = vec![Vec::new(); spec.l];
            for path in &paths {
                let series = read_series_csv(path)?;
                let est = transport_summary(&series, &spec, burn_in, batches)?;
                j_parts.push(est.j);
                for (i, p) in est.profile.into_iter().enumerate() {
                    profile_parts[i].push(p);
                }
            }
            let j = pool_estimates(&j_parts)?;
            let profile: Vec<SiteEstimate> = profile_parts
                .iter()
                .enumerate()
                .map(|(i, parts)| {
                    let pooled = pool_estimates(parts)?;
                    Ok(SiteEstimate { i: i + 1, value: pooled.value, stderr: pooled.stderr })
                })
                .collect::<Result<_, CliError>>()?;
            let dt_res = spec.t_left - spec.t_right;
            let report = TransportReport {
                kappa_l: (dt_res != 0.0).then(|| j.value * (spec.l as f64 + 1.0) / dt_res),
                spec,
                j: j.value,
                j_stderr: j.stderr,
                profile,
                trajectories: paths.len(),
            };
            let json = serde_json::to_string_pretty(&report)?;
            match out {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => {
                    let mut stdout = std::io::stdout();
                    stdout.write_all(json.as_bytes())?;
                    stdout.write_all(b"\n")?;
                }
            }
            Ok(EXIT_OK)
        }
    }
}
