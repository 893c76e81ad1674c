use clap::{Args, Subcommand, ValueEnum};
use num_rational::Ratio;
use std::io::Write;
use std::path::PathBuf;

use enex_core::operators::MParam;
use enex_core::verify::{
    bulk_only_configs, check_change_of_coordinates, check_duality, check_intertwiner, check_su11,
    configs_with_cemeteries, DualityPair, Report, RotationFrame, Su11Rep,
};

use super::CliError;
use crate::{EXIT_OK, EXIT_VERIFY_FAILED};

#[derive(Args)]
pub struct VerifyArgs {
    #[command(subcommand)]
    pub what: VerifyWhat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PairChoice {
    BmpSip1,
    BepSip,
    L3Rotated,
    All,
}

#[derive(Subcommand)]
pub enum VerifyWhat {
    /// Generator-level duality identities.
    Duality {
        #[arg(long, value_enum, default_value_t = PairChoice::All)]
        pair: PairChoice,
        /// Largest total walker number to test.
        #[arg(long, default_value_t = 3)]
        max_eta: u32,
        /// Chain sizes for the chain pairs.
        #[arg(long, value_delimiter = ',', default_values_t = vec![2, 3, 4])]
        sizes: Vec<usize>,
        /// Angles (radians) for the rotated-frame pair, numeric mode.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, std::f64::consts::FRAC_PI_6, std::f64::consts::FRAC_PI_4])]
        phi: Vec<f64>,
        /// Skip the formal-angle run of the rotated pair.
        #[arg(long)]
        no_symbolic: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ladder commutation relations for all four representations.
    Su11 {
        #[arg(long, default_value_t = 2)]
        sites: usize,
        #[arg(long, default_value_t = 8)]
        degree: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-site intertwining relations between paired representations.
    Intertwiner {
        #[arg(long, default_value_t = 8)]
        degree: u32,
        /// Fixed m as "p/q"; the formal check always runs.
        #[arg(long)]
        m: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conjugation identity and pulled-back duality of the rotated frame.
    ChangeOfCoords {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, std::f64::consts::FRAC_PI_6, std::f64::consts::FRAC_PI_4])]
        phi: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        max_n: u32,
        #[arg(long)]
        no_symbolic: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn finish(reports: Vec<Report>, out: Option<PathBuf>) -> Result<u8, CliError> {
    let mut pass = true;
    for r in &reports {
        let n_fail = r.failures().count();
        eprintln!(
            "{} {} ({} cases{})",
            if r.pass { "PASS" } else { "FAIL" },
            r.check,
            r.cases.len(),
            if n_fail > 0 { format!(", {n_fail} failing") } else { String::new() }
        );
        pass &= r.pass;
    }
    let json = serde_json::to_string_pretty(&reports)?;
    match out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => {
            let mut stdout = std::io::stdout();
            stdout.write_all(json.as_bytes())?;
            stdout.write_all(b"\n")?;
        }
    }
    Ok(if pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

pub fn run(args: VerifyArgs) -> Result<u8, CliError> {
    match args.what {
        VerifyWhat::Duality { pair, max_eta, sizes, phi, no_symbolic, out } => {
            let mut reports = Vec::new();
            if matches!(pair, PairChoice::BmpSip1 | PairChoice::All) {
                for &l in &sizes {
                    let etas = configs_with_cemeteries(l, max_eta);
                    reports.push(check_duality(&DualityPair::BmpSip1 { l }, &etas)?);
                }
            }
            if matches!(pair, PairChoice::BepSip | PairChoice::All) {
                for &l in &sizes {
                    let etas = bulk_only_configs(l, max_eta);
                    reports.push(check_duality(&DualityPair::BepSip { l }, &etas)?);
                }
            }
            if matches!(pair, PairChoice::L3Rotated | PairChoice::All) {
                let etas = bulk_only_configs(2, max_eta);
                let mut frames = Vec::new();
                if !no_symbolic {
                    frames.push(RotationFrame::symbolic());
                }
                frames.extend(phi.iter().map(|p| RotationFrame::numeric(*p)));
                for frame in frames {
                    reports.push(check_duality(&DualityPair::L3Rotated { frame }, &etas)?);
                }
            }
            finish(reports, out)
        }
        VerifyWhat::Su11 { sites, degree, out } => {
            let reps = [
                Su11Rep::VelocityDifferential,
                Su11Rep::EnergyDifferential(MParam::Formal),
                Su11Rep::OccupationDiscrete(MParam::Fixed(Ratio::from_integer(1))),
                Su11Rep::OccupationDiscrete(MParam::Formal),
            ];
            let mut reports = Vec::new();
            for rep in reps {
                reports.push(check_su11(&rep, sites, degree)?);
            }
            finish(reports, out)
        }
        VerifyWhat::Intertwiner { degree, m, out } => {
            let mut reports = vec![check_intertwiner(MParam::Formal, degree)?];
            if let Some(text) = m {
                let ratio = enex_core::model::parse_ratio(&text)?;
                reports.push(check_intertwiner(MParam::Fixed(ratio), degree)?);
            }
            finish(reports, out)
        }
        VerifyWhat::ChangeOfCoords { phi, max_n, no_symbolic, out } => {
            let mut reports = Vec::new();
            if !no_symbolic {
                reports.push(check_change_of_coordinates(&RotationFrame::symbolic(), max_n)?);
            }
            for p in phi {
                reports.push(check_change_of_coordinates(&RotationFrame::numeric(p), max_n)?);
            }
            finish(reports, out)
        }
    }
}
