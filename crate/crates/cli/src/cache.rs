//! On-disk cache of eigenpairs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use levyspin::eigen::EigenPairs;
use levyspin::kernel::Provenance;
use levyspin::{build_kernel, Grid, KernelOperator, SpectralSolution};
use log::{debug, info, warn};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};

#[derive(Serialize)]
struct Key<'a> {
    version: &'a str,
    operator: &'a Provenance,
    uniform: bool,
    modes: usize,
}

pub fn cache_key(op: &KernelOperator, modes: usize) -> String {
    let key = Key {
        version: env!("CARGO_PKG_VERSION"),
        operator: op.provenance(),
        uniform: op.grid().is_uniform(),
        modes,
    };
    let text = serde_json::to_string(&key).expect("key serializes");
    hex(&Sha256::digest(text.as_bytes()))
}

pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn new(cfg: &RunConfig, out: &Path) -> Self {
        let dir = cfg.cache.then(|| cfg.cache_dir.clone().unwrap_or_else(|| out.join(".cache")));
        Self { dir }
    }

    /// Builds the operator and either loads its eigenpairs or solves and
    /// stores them. Only the eigensolve is skipped on a hit.
    pub fn solve(&self, cfg: &RunConfig, grid: &Grid, modes: usize) -> levyspin::Result<SpectralSolution> {
        let op = build_kernel(cfg.model, &cfg.mass, cfg.kill_rate, grid)?;
        self.solve_operator(Arc::new(op), modes)
    }

    pub fn solve_operator(
        &self,
        op: Arc<KernelOperator>,
        modes: usize,
    ) -> levyspin::Result<SpectralSolution> {
        let Some(dir) = &self.dir else {
            return SpectralSolution::from_operator(op, modes);
        };
        let path = dir.join(format!("{}.json", cache_key(&op, modes)));
        if let Some(eig) = load(&path) {
            info!("cache hit: {}", path.display());
            return SpectralSolution::from_eigenpairs(op, eig);
        }
        debug!("no stored eigenpairs at {}", path.display());
        let sol = SpectralSolution::from_operator(op, modes)?;
        if let Err(e) = store(&path, &sol.eigenpairs()) {
            warn!("could not store eigenpairs at {}: {e}", path.display());
        }
        Ok(sol)
    }
}

fn load(path: &Path) -> Option<EigenPairs> {
    let text = std::fs::read_to_string(path).ok()?;
    match serde_json::from_str(&text) {
        Ok(eig) => Some(eig),
        Err(e) => {
            warn!("ignoring unreadable eigenpairs at {}: {e}", path.display());
            None
        }
    }
}

fn store(path: &Path, eig: &EigenPairs) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_vec(eig).map_err(std::io::Error::other)?)?;
    std::fs::rename(tmp, path)
}
