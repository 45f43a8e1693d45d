//! Artifact writers. Every file starts with a header naming the tool
//! version, the config hash and the seed(s) it covers; nothing in it depends
//! on wall-clock time or thread count.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const TOOL: &str = "zeno-cli";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
}

impl Header {
    pub fn for_seeds(&self, seeds: &[u64]) -> Self {
        Self {
            seeds: seeds.to_vec(),
            ..self.clone()
        }
    }

    fn comment_block(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "# tool: {}\n# version: {}\n# command: {}\n# config_sha256: {}\n# seeds: {}\n",
            self.tool,
            self.version,
            self.command,
            self.config_sha256,
            seeds.join(",")
        )
    }
}

/// SHA-256 of the resolved configuration (seeds after offset, output path
/// excluded), as canonical JSON.
pub fn config_hash(config: &RunConfig, seeds: &[u64]) -> String {
    #[derive(Serialize)]
    struct Resolved<'a> {
        config: &'a RunConfig,
        seeds: &'a [u64],
    }
    let bytes = serde_json::to_vec(&Resolved { config, seeds }).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&root).map_err(|e| io_error(&root, e))?;
        Ok(Self { root })
    }

    pub fn path(&self, relative: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
        }
        Ok(path)
    }

    /// `{"header": ..., "data": ...}` followed by a newline.
    pub fn write_json<T: Serialize>(&self, relative: &str, header: &Header, data: &T) -> Result<PathBuf, CliError> {
        #[derive(Serialize)]
        struct Document<'a, T> {
            header: &'a Header,
            data: &'a T,
        }
        let path = self.path(relative)?;
        let mut bytes = serde_json::to_vec(&Document { header, data }).map_err(|e| io_error(&path, e))?;
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    /// A `#`-comment header block followed by CSV records with a header row.
    pub fn write_csv<R: Serialize>(&self, relative: &str, header: &Header, rows: &[R]) -> Result<PathBuf, CliError> {
        let path = self.path(relative)?;
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in rows {
            writer.serialize(row).map_err(|e| io_error(&path, e))?;
        }
        let data = writer.into_inner().map_err(|e| io_error(&path, e))?;
        let mut bytes = header.comment_block().into_bytes();
        bytes.extend_from_slice(&data);
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    /// CSV whose columns are only known at run time.
    pub fn write_table(
        &self,
        relative: &str,
        header: &Header,
        columns: &[String],
        rows: &[Vec<String>],
    ) -> Result<PathBuf, CliError> {
        let path = self.path(relative)?;
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(columns).map_err(|e| io_error(&path, e))?;
        for row in rows {
            writer.write_record(row).map_err(|e| io_error(&path, e))?;
        }
        let data = writer.into_inner().map_err(|e| io_error(&path, e))?;
        let mut bytes = header.comment_block().into_bytes();
        bytes.extend_from_slice(&data);
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }
}
