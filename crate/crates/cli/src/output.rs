//! Output directory handling and the `run.json` echo.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use phagraph_core::util::sha256_hex;
use phagraph_core::{Error, Result};
use serde::Serialize;

use crate::config::RunConfig;

pub const RUN_FILE: &str = "run.json";

pub struct OutDir {
    root: PathBuf,
    overwrite: bool,
}

impl OutDir {
    pub fn new(root: &Path, overwrite: bool) -> Self {
        OutDir {
            root: root.to_path_buf(),
            overwrite,
        }
    }

    /// Fails if any of `names` already exists and overwriting is off;
    /// otherwise creates the directory.
    pub fn claim(&self, names: &[&str]) -> Result<()> {
        if !self.overwrite {
            for n in names.iter().chain(std::iter::once(&RUN_FILE)) {
                let p = self.root.join(n);
                if p.exists() {
                    return Err(Error::config(
                        "out",
                        format!("{} already exists; pass --overwrite to replace it", p.display()),
                    ));
                }
            }
        }
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(name, e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// Content hashes of everything a command read, keyed by path.
#[derive(Debug, Default)]
pub struct Inputs(BTreeMap<String, String>);

impl Inputs {
    pub fn add_file(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.0.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn add_hash(&mut self, name: String, hash: String) {
        self.0.insert(name, hash);
    }

    /// Hashes every regular file directly inside `dir`.
    pub fn add_dir(&mut self, dir: &Path) -> Result<()> {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        for p in entries {
            self.add_file(&p)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct RunEcho<'a> {
    format_version: &'static str,
    version: &'static str,
    command: &'a str,
    args: &'a serde_json::Value,
    config: &'a RunConfig,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a [String],
}

pub fn write_run(
    out: &OutDir,
    command: &str,
    args: &serde_json::Value,
    config: &RunConfig,
    inputs: &Inputs,
    outputs: &[&str],
) -> Result<()> {
    let outputs: Vec<String> = outputs.iter().map(|s| s.to_string()).collect();
    out.write_json(
        RUN_FILE,
        &RunEcho {
            format_version: "1",
            version: env!("CARGO_PKG_VERSION"),
            command,
            args,
            config,
            inputs: &inputs.0,
            outputs: &outputs,
        },
    )
}
