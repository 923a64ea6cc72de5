//! Circuit backends: the closed-form synthetic benchmark and the external
//! simulator client, behind one simulation interface.

pub mod external;
pub mod file;
pub mod oracle;
pub mod synthetic;

use thiserror::Error;

use crate::hyperspace::{BackendConfig, CircuitModel, ConfigurationPoint, SpaceError};

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("simulator timed out after {secs} s")]
    Timeout { secs: f64 },
    #[error("malformed simulator reply: {0}")]
    Malformed(String),
    #[error("simulator fault: {0}")]
    Fault(String),
    #[error("simulator channel closed")]
    ChannelClosed,
    #[error("no simulator command configured (set one in the circuit file or OCSEARCH_SIMULATOR_CMD)")]
    NoCommand,
    #[error("failed to start simulator: {0}")]
    Spawn(#[source] std::io::Error),
    #[error("simulator i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("response `{name}` came back non-finite ({value})")]
    NonFinite { name: String, value: f64 },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// One simulation backend. Implementations are strictly serial: one request
/// is in flight at a time, which the `&mut self` receiver enforces.
pub trait Simulator {
    /// Runs one configuration and returns the raw response vector in the
    /// circuit's spec order.
    fn simulate(&mut self, point: &ConfigurationPoint) -> Result<Vec<f64>, SimulatorError>;
}

/// Builds the simulator for a circuit. `command_override` takes precedence
/// over the file's configured command for external backends (wired to the
/// OCSEARCH_SIMULATOR_CMD environment variable by the callers).
pub fn make_simulator(
    model: &CircuitModel,
    command_override: Option<&[String]>,
) -> Result<Box<dyn Simulator>, SimulatorError> {
    match &model.backend {
        BackendConfig::Synthetic(synth) => Ok(Box::new(synthetic::SyntheticSimulator::new(
            model.clone(),
            synth.clone(),
        ))),
        BackendConfig::External(ext) => {
            let command: Vec<String> = match command_override {
                Some(cmd) if !cmd.is_empty() => cmd.to_vec(),
                _ => ext.command.clone(),
            };
            let sim = external::ExternalSimulator::spawn(model.clone(), &command, ext.timeout_secs)?;
            Ok(Box::new(sim))
        }
    }
}
