//! Staged output directory and run manifest.
//!
//! Files are written into a private staging directory and only moved into
//! the output directory once the whole command has succeeded.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::hex;

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub toolkit_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub files: Vec<FileEntry>,
}

pub struct Staging {
    out: PathBuf,
    dir: PathBuf,
    command: String,
    config_hash: String,
    started: u64,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> std::io::Result<(String, u64)> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex(&h.finalize()), total))
}

impl Staging {
    pub fn new(out: &Path, command: &str, config_hash: &str) -> std::io::Result<Self> {
        fs::create_dir_all(out)?;
        let dir = out.join(format!(".staging-{command}-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir)?;
        Ok(Self {
            out: out.to_path_buf(),
            dir,
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            started: unix_now(),
        })
    }

    /// Path inside the staging directory.
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Moves the staged files into place and writes the manifest.
    pub fn commit(self) -> std::io::Result<RunManifest> {
        let mut names: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        let mut files = Vec::with_capacity(names.len());
        for name in &names {
            let (sha256, bytes) = sha256_file(&self.dir.join(name))?;
            files.push(FileEntry {
                name: name.clone(),
                sha256,
                bytes,
            });
        }
        for name in &names {
            fs::rename(self.dir.join(name), self.out.join(name))?;
        }
        let manifest = RunManifest {
            command: self.command.clone(),
            config_hash: self.config_hash.clone(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: self.started,
            finished_unix: unix_now(),
            files,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        fs::write(self.out.join(format!("manifest_{}.json", self.command)), text + "\n")?;
        fs::remove_dir_all(&self.dir)?;
        Ok(manifest)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        // Only reached with files still staged when the command failed.
        let _ = fs::remove_dir_all(&self.dir);
    }
}
