//! Line-delimited JSON artifacts. Every file starts with a header line
//! naming the artifact kind, the config hash and the code version.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{Config, CODE_VERSION};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub artifact: String,
    pub config_hash: String,
    pub code_version: String,
    /// Full config in TOML form, so the file can be interpreted on its own.
    pub config: String,
}

impl Header {
    pub fn new(artifact: &str, cfg: &Config) -> Self {
        Header {
            artifact: artifact.to_string(),
            config_hash: cfg.hash(),
            code_version: CODE_VERSION.to_string(),
            config: cfg.to_toml_string(),
        }
    }

    pub fn config(&self) -> Result<Config> {
        Config::from_toml_str(&self.config)
    }
}

pub struct JsonlWriter {
    out: BufWriter<std::fs::File>,
}

impl JsonlWriter {
    /// Creates (or truncates) `path` and writes the header line.
    pub fn create(path: &Path, header: &Header) -> Result<Self> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut w = JsonlWriter {
            out: BufWriter::new(std::fs::File::create(path)?),
        };
        w.write(header)?;
        Ok(w)
    }

    /// Opens `path` for appending. A missing file is created with `header`;
    /// an existing one must carry the same artifact kind and config hash.
    pub fn append(path: &Path, header: &Header) -> Result<Self> {
        if !path.exists() {
            return Self::create(path, header);
        }
        let first = BufReader::new(std::fs::File::open(path)?).lines().next().transpose()?;
        let existing: Header = first
            .as_deref()
            .map(serde_json::from_str)
            .transpose()?
            .ok_or_else(|| Error::Format(format!("{} is empty", path.display())))?;
        if existing.artifact != header.artifact || existing.config_hash != header.config_hash {
            return Err(Error::Format(format!(
                "{} was written by a different run (config {})",
                path.display(),
                existing.config_hash
            )));
        }
        let file = std::fs::OpenOptions::new().append(true).open(path)?;
        Ok(JsonlWriter {
            out: BufWriter::new(file),
        })
    }

    pub fn write<T: Serialize>(&mut self, value: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, value)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

impl Drop for JsonlWriter {
    fn drop(&mut self) {
        let _ = self.out.flush();
    }
}

/// Reads a file written by [`JsonlWriter`], checking the artifact kind.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, artifact: &str) -> Result<(Header, Vec<T>)> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
    let first = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Format(format!("{} is empty", path.display())))?;
    let header: Header =
        serde_json::from_str(&first).map_err(|e| Error::Format(format!("{}: bad header: {e}", path.display())))?;
    if header.artifact != artifact {
        return Err(Error::Format(format!(
            "{} holds `{}` records, expected `{artifact}`",
            path.display(),
            header.artifact
        )));
    }
    let mut items = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("{} line {}: {e}", path.display(), i + 2)))?,
        );
    }
    Ok((header, items))
}

pub fn write_jsonl<T: Serialize>(path: &Path, header: &Header, items: &[T]) -> Result<()> {
    let mut w = JsonlWriter::create(path, header)?;
    for item in items {
        w.write(item)?;
    }
    w.flush()
}
