use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use susphom::io::{atomic_write, CSV_SCHEMA_VERSION};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Versions {
    pub susphom: String,
    pub cli: String,
    pub csv_schema: u32,
}

/// Record of one run: what went in, what came out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub inputs: Vec<FileHash>,
    pub artifacts: Vec<FileHash>,
    pub versions: Versions,
}

/// Writes files atomically into the output directory and remembers their hashes.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<FileHash>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Artifacts {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        }
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        atomic_write(&path, contents.as_bytes()).map_err(CliError::from)?;
        log::info!("wrote {}", path.display());
        self.written.push(FileHash {
            name: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    /// Write `manifest.json` last, after every other artifact is in place.
    pub fn finish(self, command: &str, seed: u64, resolved: &str) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            command: command.to_string(),
            seed,
            inputs: vec![FileHash {
                name: "config".into(),
                sha256: sha256_hex(resolved.as_bytes()),
            }],
            artifacts: self.written,
            versions: Versions {
                susphom: susphom::VERSION.to_string(),
                cli: env!("CARGO_PKG_VERSION").to_string(),
                csv_schema: CSV_SCHEMA_VERSION,
            },
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        atomic_write(&self.dir.join("manifest.json"), json.as_bytes()).map_err(CliError::from)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn manifest_lists_artifacts_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::new(dir.path());
        a.write("x.csv", "1\n").unwrap();
        a.write("y.csv", "2\n").unwrap();
        let m = a.finish("tensor", 4, "seed = 4\n").unwrap();
        let names: Vec<&str> = m.artifacts.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["x.csv", "y.csv"]);
        let disk: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(disk, m);
    }
}
