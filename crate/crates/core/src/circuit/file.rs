//! TOML circuit descriptions: load, validate, save.
//!
//! The on-disk layout keys corner coefficients by label rather than by
//! position, so reordering tables in a file cannot silently reassign
//! process corners.

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperspace::{
    BackendConfig, BaseFunction, CircuitModel, CornerCoefficients, ExternalBackend,
    OperatingCondition, ProcessCorner, ResponseSpec, SpaceError, SpecDirection, SyntheticBackend,
};

#[derive(Debug, Error)]
pub enum CircuitFileError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("parsing circuit: {0}")]
    ParseText(#[from] toml::de::Error),
    #[error("{0}")]
    Layout(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Serialize, Deserialize)]
struct CircuitFile {
    name: String,
    #[serde(rename = "oc")]
    ocs: Vec<OcEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    corner: Option<CornerEntry>,
    #[serde(rename = "response")]
    responses: Vec<ResponseEntry>,
    backend: BackendEntry,
}

#[derive(Debug, Serialize, Deserialize)]
struct OcEntry {
    name: String,
    min: f64,
    max: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CornerEntry {
    name: String,
    labels: Vec<String>,
    codes: Vec<(u8, u8)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ResponseEntry {
    name: String,
    threshold: f64,
    direction: SpecDirection,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum BackendEntry {
    Synthetic {
        bases: Vec<BaseFunction>,
        #[serde(default, rename = "corner_coefficients")]
        corners: Vec<CornerCoeffEntry>,
    },
    External {
        #[serde(default)]
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct CornerCoeffEntry {
    label: String,
    /// One (gain, offset) pair per response, in response order.
    coefficients: Vec<(f64, f64)>,
}

fn default_timeout() -> f64 {
    600.0
}

fn build_model(file: CircuitFile) -> Result<CircuitModel, CircuitFileError> {
    let corner = file.corner.map(|c| ProcessCorner {
        name: c.name,
        labels: c.labels,
        codes: c.codes,
    });
    let backend = match file.backend {
        BackendEntry::Synthetic { bases, corners } => {
            let coefficients = match (&corner, corners.is_empty()) {
                (None, true) => None,
                (None, false) => {
                    return Err(CircuitFileError::Layout(
                        "corner_coefficients given but the circuit declares no corner".into(),
                    ));
                }
                (Some(c), _) => {
                    let mut per_label = Vec::with_capacity(c.labels.len());
                    for label in &c.labels {
                        let row = corners
                            .iter()
                            .find(|e| &e.label == label)
                            .ok_or_else(|| {
                                CircuitFileError::Layout(format!(
                                    "no corner_coefficients entry for label {label:?}"
                                ))
                            })?;
                        per_label.push(row.coefficients.clone());
                    }
                    for entry in &corners {
                        if !c.labels.contains(&entry.label) {
                            return Err(CircuitFileError::Layout(format!(
                                "corner_coefficients entry for unknown label {:?}",
                                entry.label
                            )));
                        }
                    }
                    Some(CornerCoefficients { per_label })
                }
            };
            BackendConfig::Synthetic(SyntheticBackend {
                bases,
                coefficients,
            })
        }
        BackendEntry::External {
            command,
            timeout_secs,
        } => BackendConfig::External(ExternalBackend {
            command,
            timeout_secs,
        }),
    };
    let model = CircuitModel {
        name: file.name,
        ocs: file
            .ocs
            .into_iter()
            .map(|oc| OperatingCondition {
                name: oc.name,
                min: oc.min,
                max: oc.max,
            })
            .collect(),
        corner,
        specs: file
            .responses
            .into_iter()
            .map(|r| ResponseSpec {
                name: r.name,
                threshold: r.threshold,
                direction: r.direction,
            })
            .collect(),
        backend,
    };
    model.validate()?;
    Ok(model)
}

pub fn parse_circuit(text: &str) -> Result<CircuitModel, CircuitFileError> {
    let file: CircuitFile = toml::from_str(text)?;
    build_model(file)
}

pub fn load_circuit(path: &Path) -> Result<CircuitModel, CircuitFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| CircuitFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: CircuitFile = toml::from_str(&text).map_err(|source| CircuitFileError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    build_model(file)
}

pub fn circuit_to_toml(model: &CircuitModel) -> String {
    let backend = match &model.backend {
        BackendConfig::Synthetic(synth) => BackendEntry::Synthetic {
            bases: synth.bases.clone(),
            corners: match (&model.corner, &synth.coefficients) {
                (Some(corner), Some(coeffs)) => corner
                    .labels
                    .iter()
                    .zip(&coeffs.per_label)
                    .map(|(label, row)| CornerCoeffEntry {
                        label: label.clone(),
                        coefficients: row.clone(),
                    })
                    .collect(),
                _ => Vec::new(),
            },
        },
        BackendConfig::External(ext) => BackendEntry::External {
            command: ext.command.clone(),
            timeout_secs: ext.timeout_secs,
        },
    };
    let file = CircuitFile {
        name: model.name.clone(),
        ocs: model
            .ocs
            .iter()
            .map(|oc| OcEntry {
                name: oc.name.clone(),
                min: oc.min,
                max: oc.max,
            })
            .collect(),
        corner: model.corner.as_ref().map(|c| CornerEntry {
            name: c.name.clone(),
            labels: c.labels.clone(),
            codes: c.codes.clone(),
        }),
        responses: model
            .specs
            .iter()
            .map(|s| ResponseEntry {
                name: s.name.clone(),
                threshold: s.threshold,
                direction: s.direction,
            })
            .collect(),
        backend,
    };
    toml::to_string(&file).expect("circuit serialize")
}

pub fn save_circuit(model: &CircuitModel, path: &Path) -> Result<(), CircuitFileError> {
    std::fs::write(path, circuit_to_toml(model)).map_err(|source| CircuitFileError::Io {
        path: path.to_path_buf(),
        source,
    })
}
