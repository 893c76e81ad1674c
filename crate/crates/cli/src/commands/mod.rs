pub mod report;
pub mod simulate;
pub mod sip;
pub mod solve;
pub mod verify;

use enex_core::ChainSpec;
use std::path::Path;

/// Boxed error type shared by the command handlers.
pub type CliError = Box<dyn std::error::Error>;

pub fn load_spec(path: &Path) -> Result<ChainSpec, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| format!("reading {}: {e}", path.display()))?;
    Ok(enex_core::validate_spec(&raw)?)
}
