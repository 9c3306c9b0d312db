//! On-disk and in-memory store of eigensystems keyed by model and basis.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use sbdimer_core::{solve, BasisSpec, EigenSystem, ModelParams};

use crate::error::{CliError, InStage, Result, Stage};

/// Hex key of a `(ModelParams, BasisSpec)` pair.
pub fn cache_key(m: &ModelParams, b: &BasisSpec) -> String {
    let mut h = Sha256::new();
    for x in [m.p(), m.r(), m.eps_plus(), m.eps_minus()] {
        h.update(x.to_bits().to_le_bytes());
    }
    h.update((b.n_osc() as u64).to_le_bytes());
    h.update((b.keep() as u64).to_le_bytes());
    hex::encode(&h.finalize()[..16])
}

/// Eigensystems shared across pipeline runs of one process, optionally
/// persisted as CSV pairs in a cache directory.
#[derive(Debug, Default)]
pub struct Session {
    cache_dir: Option<PathBuf>,
    memo: HashMap<String, Arc<EigenSystem>>,
}

impl Session {
    pub fn new(cache_dir: Option<PathBuf>) -> Self {
        Self {
            cache_dir,
            memo: HashMap::new(),
        }
    }

    /// Makes `es` available to later runs with the same parameters.
    pub fn insert(&mut self, es: Arc<EigenSystem>) {
        self.memo.insert(cache_key(es.params(), es.basis()), es);
    }

    fn paths(dir: &Path, key: &str) -> (PathBuf, PathBuf) {
        (dir.join(format!("{key}.energies.csv")), dir.join(format!("{key}.coeffs.csv")))
    }

    /// Looks up memory, then disk, and diagonalizes as a last resort.
    pub fn eigensystem(&mut self, m: &ModelParams, b: &BasisSpec) -> Result<Arc<EigenSystem>> {
        let key = cache_key(m, b);
        if let Some(es) = self.memo.get(&key) {
            return Ok(es.clone());
        }
        let es = match self.load(&key, m, b)? {
            Some(es) => es,
            None => {
                let es = solve(m, b).in_stage(Stage::Spectrum)?;
                self.store(&key, &es)?;
                es
            }
        };
        let es = Arc::new(es);
        self.memo.insert(key, es.clone());
        Ok(es)
    }

    fn load(&self, key: &str, m: &ModelParams, b: &BasisSpec) -> Result<Option<EigenSystem>> {
        let Some(dir) = &self.cache_dir else {
            return Ok(None);
        };
        let (ep, cp) = Self::paths(dir, key);
        if !(ep.is_file() && cp.is_file()) {
            return Ok(None);
        }
        let bad = |path: &Path, reason: String| CliError::Cache {
            path: path.to_path_buf(),
            reason,
        };
        let open = |p: &Path| File::open(p).map(BufReader::new).map_err(|e| bad(p, e.to_string()));
        let es = EigenSystem::read_csv(open(&ep)?, open(&cp)?).map_err(|e| bad(&ep, e.to_string()))?;
        if es.params() != m || es.basis() != b {
            return Err(bad(&ep, "stored parameters do not match the key".into()));
        }
        Ok(Some(es))
    }

    fn store(&self, key: &str, es: &EigenSystem) -> Result<()> {
        let Some(dir) = &self.cache_dir else {
            return Ok(());
        };
        let fail = |path: &Path, e: &dyn std::fmt::Display| CliError::Cache {
            path: path.to_path_buf(),
            reason: e.to_string(),
        };
        fs::create_dir_all(dir).map_err(|e| fail(dir, &e))?;
        let (ep, cp) = Self::paths(dir, key);
        // write under temporary names so a crash never leaves a half table
        let (et, ct) = (ep.with_extension("tmp"), cp.with_extension("tmp"));
        let create = |p: &Path| File::create(p).map(BufWriter::new).map_err(|e| fail(p, &e));
        let (mut ew, mut cw) = (create(&et)?, create(&ct)?);
        es.write_csv(&mut ew, &mut cw).map_err(|e| fail(&ep, &e))?;
        ew.flush().map_err(|e| fail(&et, &e))?;
        cw.flush().map_err(|e| fail(&ct, &e))?;
        fs::rename(&ct, &cp).map_err(|e| fail(&cp, &e))?;
        fs::rename(&et, &ep).map_err(|e| fail(&ep, &e))?;
        Ok(())
    }
}
