//! Error metrics against known extrema, per-seed summaries, and the two
//! run artifacts: a CSV simulation log and a versioned text summary.
//!
//! Everything here is pure aggregation over a finished [`RunReport`]. The
//! CSV log is complete enough to rebuild the states it came from, so a
//! summary can be regenerated later without re-simulation. Formatting uses
//! Rust's shortest round-trip float representation throughout, which makes
//! both artifacts byte-stable for identical run data.

use thiserror::Error;

use crate::circuit::oracle::ExtremaFile;
use crate::hyperspace::{CircuitModel, ConfigurationPoint, SpaceError, SpecDirection, WorstDirection};
use crate::planner::{FailedSeed, RunReport, RunState, SimulatedPoint, Stage};

pub const SUMMARY_HEADER: &str = "ocsearch summary v1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("empty input: {0}")]
    Empty(String),
    #[error("response {response} has degenerate true range {range}")]
    DegenerateRange { response: String, range: f64 },
    #[error("extrema file has no entry for response {response}")]
    MissingExtrema { response: String },
    #[error("log line {line}: {message}")]
    MalformedLog { line: usize, message: String },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Relative value error as a percentage of the response's true range.
pub fn rve(found: f64, true_worst: f64, true_range: f64) -> Result<f64, ReportError> {
    if !(true_range > 0.0) {
        return Err(ReportError::DegenerateRange {
            response: String::new(),
            range: true_range,
        });
    }
    Ok(100.0 * (found - true_worst).abs() / true_range)
}

pub fn arve(rves: &[f64]) -> Result<f64, ReportError> {
    if rves.is_empty() {
        return Err(ReportError::Empty("no relative value errors".into()));
    }
    Ok(rves.iter().sum::<f64>() / rves.len() as f64)
}

pub fn mrve(rves: &[f64]) -> Result<f64, ReportError> {
    if rves.is_empty() {
        return Err(ReportError::Empty("no relative value errors".into()));
    }
    Ok(rves.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
}

/// Min, max, and arithmetic mean of per-seed values.
pub fn summarize(values: &[f64]) -> Result<(f64, f64, f64), ReportError> {
    if values.is_empty() {
        return Err(ReportError::Empty("no values to summarize".into()));
    }
    let min = values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let max = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok((min, max, mean))
}

/// The true worst value and range for one response, read from an extrema
/// file in the direction the spec considers worst.
pub fn true_worst_and_range(
    model: &CircuitModel,
    extrema: &ExtremaFile,
    r: usize,
) -> Result<(f64, f64), ReportError> {
    let spec = &model.specs[r];
    let entry = extrema
        .responses
        .iter()
        .find(|e| e.name == spec.name)
        .ok_or_else(|| ReportError::MissingExtrema {
            response: spec.name.clone(),
        })?;
    let range = entry.max - entry.min;
    if !(range > 0.0) {
        return Err(ReportError::DegenerateRange {
            response: spec.name.clone(),
            range,
        });
    }
    let worst = match spec.worst_direction() {
        WorstDirection::Minimize => entry.min,
        WorstDirection::Maximize => entry.max,
    };
    Ok((worst, range))
}

#[derive(Debug, Clone)]
pub struct ResponseOutcome {
    pub response: String,
    /// Raw found-worst value up to the cut.
    pub found: f64,
    pub point: ConfigurationPoint,
    pub stage: Stage,
    /// Present when extrema were supplied.
    pub rve: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub responses: Vec<ResponseOutcome>,
}

/// Per-seed found worst cases, truncated at `cut` (None = whole run).
pub fn seed_outcomes(
    model: &CircuitModel,
    report: &RunReport,
    extrema: Option<&ExtremaFile>,
    cut: Option<Stage>,
) -> Result<Vec<SeedOutcome>, ReportError> {
    if report.completed.is_empty() {
        return Err(ReportError::Empty("no completed seeds".into()));
    }
    let cut = cut.unwrap_or(Stage::Ap(usize::MAX));
    let mut out = Vec::with_capacity(report.completed.len());
    for state in &report.completed {
        let mut responses = Vec::with_capacity(model.specs.len());
        for (r, spec) in model.specs.iter().enumerate() {
            let best = state
                .best_at_stage(r, cut, &model.specs)
                .ok_or_else(|| ReportError::Empty(format!("seed {} has no simulations", state.seed)))?;
            let rve_value = match extrema {
                Some(file) => {
                    let (worst, range) = true_worst_and_range(model, file, r)?;
                    Some(rve(best.value, worst, range)?)
                }
                None => None,
            };
            responses.push(ResponseOutcome {
                response: spec.name.clone(),
                found: best.value,
                point: best.point,
                stage: best.stage,
                rve: rve_value,
            });
        }
        out.push(SeedOutcome {
            seed: state.seed,
            responses,
        });
    }
    Ok(out)
}

/// All per-seed-per-response RVEs at one stage cut, flattened in seed-major
/// order; the inputs to arve and mrve.
pub fn stage_rves(
    model: &CircuitModel,
    report: &RunReport,
    extrema: &ExtremaFile,
    cut: Stage,
) -> Result<Vec<f64>, ReportError> {
    let outcomes = seed_outcomes(model, report, Some(extrema), Some(cut))?;
    Ok(outcomes
        .iter()
        .flat_map(|o| o.responses.iter())
        .map(|r| r.rve.expect("extrema supplied"))
        .collect())
}

/// Highest adaptive iteration present in any completed seed.
pub fn max_ap_iteration(report: &RunReport) -> usize {
    report
        .completed
        .iter()
        .flat_map(|s| s.simulated.iter())
        .filter_map(|s| match s.stage {
            Stage::Ap(i) => Some(i),
            Stage::Fp => None,
        })
        .max()
        .unwrap_or(0)
}

fn stage_cuts(report: &RunReport) -> Vec<Stage> {
    let mut cuts = vec![Stage::Fp];
    cuts.extend((1..=max_ap_iteration(report)).map(Stage::Ap));
    cuts
}

fn direction_name(direction: SpecDirection) -> &'static str {
    match direction {
        SpecDirection::LowerBound => "lower_bound",
        SpecDirection::UpperBound => "upper_bound",
    }
}

/// Human-readable point: named coordinates plus the corner label.
pub fn point_desc(model: &CircuitModel, point: &ConfigurationPoint) -> String {
    let mut parts: Vec<String> = model
        .ocs
        .iter()
        .zip(&point.oc_values)
        .map(|(oc, v)| format!("{}={v}", oc.name))
        .collect();
    if let Some(label) = model.corner_label(point) {
        parts.push(format!("corner={label}"));
    }
    parts.join(" ")
}

fn csv_header(model: &CircuitModel) -> String {
    let mut cols = vec!["seed".to_string(), "stage".to_string()];
    cols.extend(model.ocs.iter().map(|oc| oc.name.clone()));
    cols.push("corner".to_string());
    cols.extend(model.specs.iter().map(|s| s.name.clone()));
    cols.extend(model.specs.iter().map(|s| format!("{}_margin", s.name)));
    cols.join(",")
}

/// The full simulation log of every completed seed as CSV.
pub fn log_csv(model: &CircuitModel, report: &RunReport) -> String {
    let mut out = csv_header(model);
    out.push('\n');
    for state in &report.completed {
        for entry in &state.simulated {
            push_csv_row(&mut out, model, state.seed, entry);
        }
    }
    out
}

fn push_csv_row(out: &mut String, model: &CircuitModel, seed: u64, entry: &SimulatedPoint) {
    use std::fmt::Write;
    write!(out, "{seed},{}", entry.stage).unwrap();
    for v in &entry.point.oc_values {
        write!(out, ",{v}").unwrap();
    }
    match model.corner_label(&entry.point) {
        Some(label) => write!(out, ",{label}").unwrap(),
        None => out.push(','),
    }
    for v in &entry.responses {
        write!(out, ",{v}").unwrap();
    }
    for (spec, &v) in model.specs.iter().zip(&entry.responses) {
        let margin = spec.margin(v).expect("finite logged value");
        write!(out, ",{margin}").unwrap();
    }
    out.push('\n');
}

fn parse_stage(tok: &str) -> Option<Stage> {
    if tok == "FP" {
        return Some(Stage::Fp);
    }
    tok.strip_prefix("AP")
        .and_then(|rest| rest.parse::<usize>().ok())
        .filter(|&i| i >= 1)
        .map(Stage::Ap)
}

/// Rebuilds run states from a CSV log produced by [`log_csv`]. Seeds come
/// back in first-appearance order with worst cases and violations
/// recomputed; faults and failed seeds are not part of the log.
pub fn parse_log_csv(model: &CircuitModel, text: &str) -> Result<RunReport, ReportError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| ReportError::Empty("log is empty".into()))?;
    let expected = csv_header(model);
    if header != expected {
        return Err(ReportError::MalformedLog {
            line: 1,
            message: format!("header mismatch: expected {expected:?}, got {header:?}"),
        });
    }
    let d = model.n_ocs();
    let nr = model.n_responses();
    let n_cols = 2 + d + 1 + 2 * nr;

    let mut order: Vec<u64> = Vec::new();
    let mut states: Vec<RunState> = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_cols {
            return Err(ReportError::MalformedLog {
                line: line_no,
                message: format!("expected {n_cols} fields, got {}", fields.len()),
            });
        }
        let bad = |message: String| ReportError::MalformedLog {
            line: line_no,
            message,
        };
        let seed: u64 = fields[0]
            .parse()
            .map_err(|_| bad(format!("bad seed {:?}", fields[0])))?;
        let stage =
            parse_stage(fields[1]).ok_or_else(|| bad(format!("bad stage {:?}", fields[1])))?;
        let mut oc_values = Vec::with_capacity(d);
        for tok in &fields[2..2 + d] {
            oc_values.push(
                tok.parse::<f64>()
                    .map_err(|_| bad(format!("bad coordinate {tok:?}")))?,
            );
        }
        let corner_tok = fields[2 + d];
        let corner_code = match (&model.corner, corner_tok.is_empty()) {
            (Some(corner), false) => Some(corner.encode(corner_tok)?),
            (None, true) => None,
            (Some(_), true) => return Err(bad("missing corner label".into())),
            (None, false) => return Err(bad("unexpected corner label".into())),
        };
        let mut responses = Vec::with_capacity(nr);
        for tok in &fields[3 + d..3 + d + nr] {
            responses.push(
                tok.parse::<f64>()
                    .map_err(|_| bad(format!("bad response value {tok:?}")))?,
            );
        }
        let point = ConfigurationPoint {
            oc_values,
            corner_code,
        };
        model.validate_point(&point)?;
        let slot = match order.iter().position(|&s| s == seed) {
            Some(i) => i,
            None => {
                order.push(seed);
                states.push(RunState {
                    seed,
                    simulated: Vec::new(),
                    best_so_far: Vec::new(),
                    violations: Vec::new(),
                    faults: Vec::new(),
                });
                states.len() - 1
            }
        };
        states[slot].simulated.push(SimulatedPoint {
            point,
            responses,
            stage,
        });
    }
    if states.is_empty() {
        return Err(ReportError::Empty("log has no data rows".into()));
    }
    for state in &mut states {
        state.recompute(&model.specs);
    }
    Ok(RunReport {
        completed: states,
        failed: Vec::new(),
    })
}

/// The versioned text summary: per-response worst-case tables across
/// seeds, the violation list, and error metrics when extrema are known.
pub fn summary_text(
    model: &CircuitModel,
    report: &RunReport,
    extrema: Option<&ExtremaFile>,
) -> Result<String, ReportError> {
    use std::fmt::Write;
    if report.completed.is_empty() {
        return Err(ReportError::Empty("no completed seeds".into()));
    }
    let cuts = stage_cuts(report);
    let mut out = String::new();
    writeln!(out, "{SUMMARY_HEADER}").unwrap();
    writeln!(out, "circuit {}", model.name).unwrap();
    writeln!(
        out,
        "seeds {} completed {} failed {}",
        report.completed.len() + report.failed.len(),
        report.completed.len(),
        report.failed.len()
    )
    .unwrap();
    writeln!(out, "simulations {}", report.total_simulations()).unwrap();
    writeln!(out, "violations {}", report.any_violation()).unwrap();

    for (r, spec) in model.specs.iter().enumerate() {
        writeln!(out).unwrap();
        writeln!(out, "[response {}]", spec.name).unwrap();
        writeln!(
            out,
            "direction {} threshold {}",
            direction_name(spec.direction),
            spec.threshold
        )
        .unwrap();
        for &cut in &cuts {
            let per_seed: Vec<f64> = report
                .completed
                .iter()
                .map(|s| {
                    s.best_at_stage(r, cut, &model.specs)
                        .expect("completed seed has simulations")
                        .value
                })
                .collect();
            let (min, max, mean) = summarize(&per_seed)?;
            writeln!(out, "stage {cut}: min {min} max {max} average {mean}").unwrap();
        }
        let global = report
            .completed
            .iter()
            .map(|s| (s.seed, s.best_so_far[r].as_ref().expect("populated")))
            .min_by(|a, b| a.1.oriented.total_cmp(&b.1.oriented).then(a.0.cmp(&b.0)))
            .expect("non-empty");
        writeln!(
            out,
            "worst {} seed {} stage {} at {}",
            global.1.value,
            global.0,
            global.1.stage,
            point_desc(model, &global.1.point)
        )
        .unwrap();
        let total: usize = report.completed.iter().map(|s| s.violations[r].len()).sum();
        writeln!(out, "violations {total}").unwrap();
        for state in &report.completed {
            for v in &state.violations[r] {
                writeln!(
                    out,
                    "violation seed {} stage {} value {} margin {} at {}",
                    state.seed,
                    v.stage,
                    v.value,
                    v.margin,
                    point_desc(model, &v.point)
                )
                .unwrap();
            }
        }
    }

    if let Some(file) = extrema {
        writeln!(out).unwrap();
        writeln!(out, "[metrics]").unwrap();
        for (r, spec) in model.specs.iter().enumerate() {
            let entry = file
                .responses
                .iter()
                .find(|e| e.name == spec.name)
                .ok_or_else(|| ReportError::MissingExtrema {
                    response: spec.name.clone(),
                })?;
            let (worst, _) = true_worst_and_range(model, file, r)?;
            writeln!(
                out,
                "response {} true_worst {worst} true_min {} true_max {}",
                spec.name, entry.min, entry.max
            )
            .unwrap();
        }
        for &cut in &cuts {
            let rves = stage_rves(model, report, file, cut)?;
            writeln!(
                out,
                "stage {cut}: arve {:.2}% mrve {:.2}%",
                arve(&rves)?,
                mrve(&rves)?
            )
            .unwrap();
        }
    }

    if !report.failed.is_empty() {
        writeln!(out).unwrap();
        writeln!(out, "[failed]").unwrap();
        for FailedSeed {
            seed,
            message,
            partial_simulations,
        } in &report.failed
        {
            writeln!(
                out,
                "seed {seed} after {partial_simulations} simulations: {message}"
            )
            .unwrap();
        }
    }
    let any_fault = report.completed.iter().any(|s| !s.faults.is_empty());
    if any_fault {
        writeln!(out).unwrap();
        writeln!(out, "[faults]").unwrap();
        for state in &report.completed {
            for fault in &state.faults {
                writeln!(
                    out,
                    "seed {} iteration {} response {} message {}",
                    state.seed, fault.iteration, fault.response, fault.message
                )
                .unwrap();
            }
        }
    }
    Ok(out)
}
