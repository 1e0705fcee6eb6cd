use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_DIR: &str = "manifests";

/// Provenance of one command run. Paths are relative to the working
/// directory (inputs from elsewhere are prefixed `external:`); there is no
/// timestamp, so identical runs write identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Files directly inside `dir`, sorted.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Tracks the inputs and outputs of a command and writes its manifest.
/// Inputs that an earlier command recorded as outputs are checked against
/// the recorded checksum.
pub struct Run {
    root: PathBuf,
    manifest: RunManifest,
    // path -> (command, sha256) from earlier manifests
    recorded: BTreeMap<String, (String, String)>,
}

impl Run {
    pub fn start(root: &Path, command: &str, seed: u64, config_sha256: String) -> Result<Self> {
        let mut recorded = BTreeMap::new();
        let dir = root.join(MANIFEST_DIR);
        if dir.is_dir() {
            for path in list_files(&dir)? {
                if path.extension().and_then(|e| e.to_str()) != Some("json") {
                    continue;
                }
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let m: RunManifest = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("unreadable manifest {}: {e}", path.display())))?;
                if m.command == command {
                    continue;
                }
                for (p, sum) in m.outputs {
                    recorded.insert(p, (m.command.clone(), sum));
                }
            }
        }
        Ok(Self {
            root: root.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed,
                config_sha256,
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
            },
            recorded,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn key(&self, path: &Path) -> String {
        match path.strip_prefix(&self.root) {
            Ok(rel) => rel.to_string_lossy().replace('\\', "/"),
            Err(_) => format!(
                "external:{}",
                path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
            ),
        }
    }

    /// Records an input file; fails if it is missing or was modified since
    /// the command that produced it finished.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        if !path.is_file() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let key = self.key(path);
        let sum = sha256_file(path)?;
        if let Some((command, expected)) = self.recorded.get(&key) {
            if *expected != sum {
                return Err(Error::ArtifactChanged {
                    path: path.to_path_buf(),
                    command: command.clone(),
                });
            }
        }
        self.manifest.inputs.insert(key, sum);
        Ok(())
    }

    /// Records every file directly inside `dir` as an input.
    pub fn input_dir(&mut self, dir: &Path) -> Result<()> {
        if !dir.is_dir() {
            return Err(Error::MissingArtifact(dir.to_path_buf()));
        }
        for f in list_files(dir)? {
            self.input(&f)?;
        }
        Ok(())
    }

    /// Writes `body` to `path` and records it as an output.
    pub fn write(&mut self, path: &Path, body: &str) -> Result<()> {
        crate::table::write_file(path, body)?;
        let key = self.key(path);
        self.manifest.outputs.insert(key, hex::encode(Sha256::digest(body.as_bytes())));
        Ok(())
    }

    /// Records a file written by other means as an output.
    pub fn output(&mut self, path: &Path) -> Result<()> {
        let key = self.key(path);
        let sum = sha256_file(path)?;
        self.manifest.outputs.insert(key, sum);
        Ok(())
    }

    pub fn finish(self) -> Result<RunManifest> {
        let path = self
            .root
            .join(MANIFEST_DIR)
            .join(format!("{}.json", self.manifest.command));
        let mut body = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Error::Config(e.to_string()))?;
        body.push('\n');
        crate::table::write_file(&path, &body)?;
        Ok(self.manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_mutated_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let mut a = Run::start(root, "first", 1, "h".into()).unwrap();
        a.write(&root.join("x.csv"), "1,2\n").unwrap();
        let m = a.finish().unwrap();
        assert_eq!(m.outputs.len(), 1);
        assert!(m.outputs.contains_key("x.csv"));

        let mut b = Run::start(root, "second", 1, "h".into()).unwrap();
        b.input(&root.join("x.csv")).unwrap();

        fs::write(root.join("x.csv"), "1,3\n").unwrap();
        let mut c = Run::start(root, "second", 1, "h".into()).unwrap();
        assert!(matches!(c.input(&root.join("x.csv")), Err(Error::ArtifactChanged { .. })));
        assert!(matches!(c.input(&root.join("nope.csv")), Err(Error::MissingArtifact(_))));
    }
}
