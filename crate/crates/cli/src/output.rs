use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

/// Writes files into the output directory; every JSON document carries the
/// effective configuration, and every CSV gets a `.meta.json` sidecar.
pub struct OutputDir<'a> {
    dir: PathBuf,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    config: &'a RunConfig,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct Sidecar<'a, M: Serialize> {
    config: &'a RunConfig,
    data_file: &'a str,
    rows: usize,
    #[serde(flatten)]
    meta: &'a M,
}

impl<'a> OutputDir<'a> {
    pub fn create(config: &'a RunConfig) -> Result<Self, CliError> {
        let dir = config.output.dir.clone();
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("run_config.toml"), config.to_toml())?;
        Ok(Self { dir, config })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf, CliError> {
        let doc = Document { config: self.config, body };
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.into()))?;
        text.push('\n');
        let path = self.path(name);
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn csv<R: Serialize, M: Serialize>(&self, name: &str, rows: &[R], meta: &M) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        write_csv(&path, rows)?;
        let sidecar = Sidecar { config: self.config, data_file: name, rows: rows.len(), meta };
        let mut text = serde_json::to_string_pretty(&sidecar).map_err(|e| CliError::Io(e.into()))?;
        text.push('\n');
        fs::write(self.path(&format!("{name}.meta.json")), text)?;
        Ok(path)
    }
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
