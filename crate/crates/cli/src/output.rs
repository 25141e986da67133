//! Run directories: every file carries the config hash and seed, and a
//! manifest lists what was written.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::{CliError, ResolvedRun};

/// SHA-256 of the resolved run (command, config and stored pulse) as hex.
pub fn config_hash(run: &ResolvedRun) -> String {
    let bytes = serde_json::to_vec(run).expect("run config serialises");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    hash: String,
    seed: u64,
    files: Mutex<Vec<String>>,
}

impl RunDir {
    pub fn create(run: &ResolvedRun) -> Result<Self, CliError> {
        let hash = config_hash(run);
        let path = match &run.config.output_dir {
            Some(p) => p.clone(),
            None => PathBuf::from("runs").join(format!("{}-{}", run.command, &hash[..12])),
        };
        std::fs::create_dir_all(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self { path, hash, seed: run.config.rng_seed, files: Mutex::new(Vec::new()) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn files(&self) -> Vec<String> {
        self.files.lock().expect("file list lock").clone()
    }

    fn open(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        self.files.lock().expect("file list lock").push(name.to_string());
        Ok(BufWriter::new(File::create(self.path.join(name))?))
    }

    /// Writes a `# config_hash=... seed=...` line, then the table.
    pub fn write_csv<F>(&self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> cavity_sense::Result<()>,
    {
        let mut w = self.open(name)?;
        writeln!(w, "# config_hash={} seed={}", self.hash, self.seed)?;
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Pretty JSON with `config_hash` and `seed` added to the top-level object.
    pub fn write_json<S: Serialize>(&self, name: &str, value: &S) -> Result<(), CliError> {
        let mut v = serde_json::to_value(value).map_err(|e| CliError::Numerical(e.to_string()))?;
        match &mut v {
            Value::Object(map) => {
                map.insert("config_hash".into(), json!(self.hash));
                map.insert("seed".into(), json!(self.seed));
            }
            other => {
                *other = json!({ "value": other.clone(), "config_hash": self.hash, "seed": self.seed });
            }
        }
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, &v).map_err(|e| CliError::Numerical(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_manifest(&self, run: &ResolvedRun) -> Result<(), CliError> {
        let manifest = json!({
            "command": run.command,
            "version": env!("CARGO_PKG_VERSION"),
            "files": self.files(),
            "config": run,
        });
        self.write_json("manifest.json", &manifest)
    }
}
