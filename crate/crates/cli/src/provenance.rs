use serde::Serialize;
use sha2::{Digest, Sha256};

use fairdiv::sampling::RNG_ALGORITHM;

pub const TOOL: &str = "fairdiv";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Reproducibility block attached to every output.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub rng: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    /// SHA-256 over the command's inputs: config or input files and the
    /// parameters that affect the result.
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(command: &'static str, seed: Option<u64>, inputs: &[&[u8]]) -> Self {
        let mut hasher = Sha256::new();
        for part in inputs {
            hasher.update((part.len() as u64).to_le_bytes());
            hasher.update(part);
        }
        Provenance {
            tool: TOOL,
            version: VERSION,
            rng: RNG_ALGORITHM,
            command,
            seed,
            config_sha256: format!("{:x}", hasher.finalize()),
        }
    }

    /// `#`-prefixed lines for the top of a CSV file.
    pub fn csv_comment(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_owned(), |s| s.to_string());
        format!(
            "# tool={} {}\n# rng={}\n# command={}\n# seed={}\n# config_sha256={}\n",
            self.tool, self.version, self.rng, self.command, seed, self.config_sha256
        )
    }
}

pub fn version_line() -> String {
    format!("{VERSION} (rng: {RNG_ALGORITHM})")
}
