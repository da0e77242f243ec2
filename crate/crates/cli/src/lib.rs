//! Experiment driver for `entangle-core`: experiment documents, the preset
//! catalog and result files.

pub mod document;
pub mod presets;
pub mod runner;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use document::{ExperimentDocument, Overrides, RequestMode, TopologySource, Variant};
pub use runner::{run_document, RunOptions, RunReport, VariantOutcome};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_STEP_CAP: u8 = 3;
pub const EXIT_OVERWRITE: u8 = 4;
pub const EXIT_IO: u8 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0} exists; pass --force to overwrite")]
    WouldOverwrite(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("writing results: {0}")]
    Output(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::WouldOverwrite(_) => EXIT_OVERWRITE,
            CliError::Io { .. } | CliError::Output(_) => EXIT_IO,
        }
    }
}

/// Where a `run` or `validate` argument points.
#[derive(Debug, Clone)]
pub struct LoadedDocument {
    pub document: ExperimentDocument,
    /// Directory that relative topology paths resolve against.
    pub base_dir: PathBuf,
}

/// Resolves `arg` as a file path first, then as a preset name with or
/// without a `presets/` prefix.
pub fn load_document(arg: &str) -> Result<LoadedDocument, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {arg}: {e}")))?;
        return Ok(LoadedDocument {
            document: ExperimentDocument::from_json(&text)?,
            base_dir: path.parent().map(Path::to_owned).unwrap_or_default(),
        });
    }
    let name = arg.strip_prefix("presets/").unwrap_or(arg);
    let name = name.strip_suffix(".json").unwrap_or(name);
    match presets::get(name) {
        Some(document) => Ok(LoadedDocument {
            document,
            base_dir: PathBuf::from("."),
        }),
        None => Err(CliError::Config(format!(
            "{arg} is neither a readable file nor a preset ({})",
            presets::names().collect::<Vec<_>>().join(", ")
        ))),
    }
}
