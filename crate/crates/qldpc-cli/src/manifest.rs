//! Run manifests: everything needed to replay a simulation bit-identically.

use qldpc::sim::{DecoderSpec, NoiseSpec, StopRule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command_line: Vec<String>,
    pub seed: u64,
    /// SHA-256 over the decoding problem (check matrix, priors, observables);
    /// verified on replay.
    pub problem_hash: String,
    pub config: SimulateConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub source: ProblemSource,
    pub noise: NoiseSpec,
    pub decoder: DecoderSpec,
    pub stop: StopRule,
    pub seed: u64,
    pub threads: usize,
    pub rounds: Option<u64>,
    pub p_label: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProblemSource {
    Builtin { name: String },
    SpecFile { path: String },
    Dem { path: String, merge: bool },
}

pub fn sha256_hex(chunks: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for chunk in chunks {
        hasher.update(chunk);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(2 * digest.len() + 7);
    out.push_str("sha256:");
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}
