use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub command: &'a str,
    pub config: &'a C,
    pub files: Vec<ManifestEntry>,
}

pub struct OutDir {
    path: PathBuf,
}

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path).map_err(CliError::io(format!("creating {}", path.display())))?;
        Ok(Self { path: path.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let p = self.file(name);
        fs::write(&p, contents).map_err(CliError::io(format!("writing {}", p.display())))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
        text.push('\n');
        self.write(name, text)
    }

    pub fn write_csv<T: Serialize>(&self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| CliError::BadData(format!("{name}: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::BadData(format!("{name}: {e}")))?;
        self.write(name, bytes)
    }

    /// Hashes every file in the directory (except the manifest itself).
    pub fn entries(&self) -> Result<Vec<ManifestEntry>, CliError> {
        let ctx = || format!("listing {}", self.path.display());
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.path).map_err(CliError::io(ctx()))? {
            let entry = entry.map_err(CliError::io(ctx()))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name == MANIFEST || !entry.file_type().map_err(CliError::io(ctx()))?.is_file() {
                continue;
            }
            let bytes = fs::read(entry.path()).map_err(CliError::io(format!("reading {name}")))?;
            out.push(ManifestEntry {
                file: name,
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        out.sort_by(|a, b| a.file.cmp(&b.file));
        Ok(out)
    }

    pub fn write_manifest<C: Serialize>(&self, command: &str, config: &C) -> Result<(), CliError> {
        let m = Manifest {
            command,
            config,
            files: self.entries()?,
        };
        self.write_json(MANIFEST, &m)
    }
}
