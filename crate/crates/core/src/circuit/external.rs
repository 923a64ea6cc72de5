//! Line-protocol client for external simulator processes.
//!
//! The simulator is any executable that reads one request per line on
//! stdin and answers one line on stdout. A request is the physical
//! operating-condition values in declaration order, space separated,
//! followed by the corner label when the circuit declares a corner. A
//! reply is the response values in spec order, space separated, or a line
//! starting with `ERR` followed by a message. Requests are strictly
//! serial: a new one is sent only after the previous reply arrived.
//!
//! Replies are drained by a reader thread so a hung simulator turns into
//! a timeout here instead of a stuck process; after a timeout the child
//! is killed and every later call fails fast.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use crate::hyperspace::{CircuitModel, ConfigurationPoint};

use super::{Simulator, SimulatorError};

const DEFAULT_TIMEOUT_SECS: f64 = 600.0;

pub struct ExternalSimulator {
    model: CircuitModel,
    child: Child,
    stdin: Option<ChildStdin>,
    replies: Receiver<String>,
    timeout: Duration,
    timeout_secs: f64,
    dead: bool,
}

impl ExternalSimulator {
    pub fn spawn(
        model: CircuitModel,
        command: &[String],
        timeout_secs: f64,
    ) -> Result<Self, SimulatorError> {
        let Some((program, args)) = command.split_first() else {
            return Err(SimulatorError::NoCommand);
        };
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(SimulatorError::Spawn)?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
            // Dropping the sender signals end of stream.
        });
        let timeout_secs = if timeout_secs.is_finite() && timeout_secs > 0.0 {
            timeout_secs
        } else {
            DEFAULT_TIMEOUT_SECS
        };
        Ok(Self {
            model,
            child,
            stdin: Some(stdin),
            replies: rx,
            timeout: Duration::from_secs_f64(timeout_secs),
            timeout_secs,
            dead: false,
        })
    }

    fn request_line(&self, point: &ConfigurationPoint) -> String {
        let mut parts: Vec<String> = point.oc_values.iter().map(|v| format!("{v}")).collect();
        if let Some(label) = self.model.corner_label(point) {
            parts.push(label.to_string());
        }
        parts.join(" ")
    }

    fn parse_reply(&self, line: &str) -> Result<Vec<f64>, SimulatorError> {
        let line = line.trim();
        if let Some(msg) = line.strip_prefix("ERR") {
            return Err(SimulatorError::Fault(msg.trim().to_string()));
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| SimulatorError::Malformed(format!("unparseable value {tok:?}")))
            })
            .collect::<Result<_, _>>()?;
        let expected = self.model.n_responses();
        if values.len() != expected {
            return Err(SimulatorError::Malformed(format!(
                "expected {expected} response values, got {} in {line:?}",
                values.len()
            )));
        }
        for (spec, &v) in self.model.specs.iter().zip(&values) {
            if !v.is_finite() {
                return Err(SimulatorError::NonFinite {
                    name: spec.name.clone(),
                    value: v,
                });
            }
        }
        Ok(values)
    }

    fn shutdown(&mut self) {
        self.dead = true;
        // Closing stdin lets a cooperative simulator exit; the kill covers
        // the rest.
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Simulator for ExternalSimulator {
    fn simulate(&mut self, point: &ConfigurationPoint) -> Result<Vec<f64>, SimulatorError> {
        if self.dead {
            return Err(SimulatorError::ChannelClosed);
        }
        self.model.validate_point(point)?;
        let line = self.request_line(point);
        let write_result = self.stdin.as_mut().expect("stdin open while alive").write_all(
            format!("{line}\n").as_bytes(),
        );
        if write_result.is_err() || self.stdin.as_mut().unwrap().flush().is_err() {
            self.shutdown();
            return Err(SimulatorError::ChannelClosed);
        }
        match self.replies.recv_timeout(self.timeout) {
            Ok(reply) => self.parse_reply(&reply),
            Err(RecvTimeoutError::Timeout) => {
                let secs = self.timeout_secs;
                self.shutdown();
                Err(SimulatorError::Timeout { secs })
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.shutdown();
                Err(SimulatorError::ChannelClosed)
            }
        }
    }
}

impl Drop for ExternalSimulator {
    fn drop(&mut self) {
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
