//! Run manifests: every subcommand records its effective configuration
//! hash, seed, tool version, and output paths. Manifests carry no
//! timestamps, so identical runs produce identical bytes.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub stage: String,
    pub seed: u64,
    pub config_hash: String,
    pub outputs: Vec<String>,
}

/// Canonical textual form of a command's effective parameters, hashed into
/// the manifest. Key order is the caller's declaration order.
pub fn config_repr(params: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in params {
        s.push_str(k);
        s.push('=');
        s.push_str(v);
        s.push('\n');
    }
    s
}

pub fn write_manifest(
    out_dir: &Path,
    stage: &str,
    seed: u64,
    config_repr: &str,
    outputs: &[PathBuf],
) -> Result<PathBuf> {
    let digest = Sha256::digest(config_repr.as_bytes());
    let manifest = RunManifest {
        tool: "nilmkit",
        version: env!("CARGO_PKG_VERSION"),
        stage: stage.to_string(),
        seed,
        config_hash: hex(&digest),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let path = out_dir.join(format!("manifest-{stage}.json"));
    let text = serde_json::to_string_pretty(&manifest).context("serializing manifest")?;
    std::fs::write(&path, text + "\n")
        .with_context(|| format!("writing manifest {}", path.display()))?;
    Ok(path)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_runs_produce_identical_manifests() {
        let dir = tempfile::tempdir().unwrap();
        let repr = config_repr(&[("a", "1".into()), ("b", "x".into())]);
        let outputs = vec![PathBuf::from("out/file.csv")];
        let p1 = write_manifest(dir.path(), "stage-one", 7, &repr, &outputs).unwrap();
        let bytes1 = std::fs::read(&p1).unwrap();
        let p2 = write_manifest(dir.path(), "stage-one", 7, &repr, &outputs).unwrap();
        let bytes2 = std::fs::read(&p2).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(bytes1, bytes2);
        let text = String::from_utf8(bytes1).unwrap();
        assert!(text.contains("\"seed\": 7"));
        assert!(text.contains("config_hash"));
    }

    #[test]
    fn different_params_change_the_hash() {
        let a = config_repr(&[("epochs", "5".into())]);
        let b = config_repr(&[("epochs", "6".into())]);
        assert_ne!(
            hex(&Sha256::digest(a.as_bytes())),
            hex(&Sha256::digest(b.as_bytes()))
        );
    }
}
