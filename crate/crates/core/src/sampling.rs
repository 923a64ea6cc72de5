//! Design-of-experiments generators: full factorial, Latin hypercube and
//! two-level strength-2 orthogonal arrays, composed into the fixed-planning
//! training set and the large evaluation set.
//!
//! All generators work on the continuous dimensions in normalized [0, 1]
//! coordinates; when the circuit declares a process corner, codes are
//! assigned round-robin over the valid labels afterwards so every corner
//! shows up in every design.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::hyperspace::{CircuitModel, ConfigurationPoint, SpaceError};

/// Hard cap on full-factorial size.
pub const FULL_FACTORIAL_CAP: u64 = 1 << 20;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("empty design requested (n = 0)")]
    EmptyDesign,
    #[error("full factorial needs {requested} points, above the cap of {cap}")]
    FactorialTooLarge { requested: u64, cap: u64 },
    #[error("levels must be at least 2, got {0}")]
    TooFewLevels(usize),
    #[error(
        "no two-level strength-2 array with {requested} runs for {factors} factors; smallest constructible size is {suggestion}"
    )]
    NotConstructible {
        requested: usize,
        factors: usize,
        suggestion: usize,
    },
    #[error("budget {budget} is below the minimum of {minimum}")]
    BudgetTooSmall { budget: usize, minimum: usize },
    #[error("evaluation target {target} is below the full-factorial size {minimum}")]
    TargetTooSmall { target: usize, minimum: usize },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Which generator a design point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    FullFactorial,
    Lhs,
    Oa,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::FullFactorial => "FF",
            Provenance::Lhs => "LHS",
            Provenance::Oa => "OA",
        }
    }
}

/// A set of simulation inputs with per-point provenance. `normalized[i]` is
/// the unit-box representation of `points[i]` (continuous coordinates plus
/// the two corner coordinates when the circuit declares a corner).
#[derive(Debug, Clone)]
pub struct DesignSet {
    pub points: Vec<ConfigurationPoint>,
    pub provenance: Vec<Provenance>,
    pub normalized: Vec<DVector<f64>>,
}

impl DesignSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Continuous-space rows in [0, 1]^d paired with provenance, before corner
/// assignment.
struct RawDesign {
    rows: Vec<Vec<f64>>,
    provenance: Vec<Provenance>,
}

fn full_factorial_rows(d: usize, levels: usize) -> Result<Vec<Vec<f64>>, SamplingError> {
    if levels < 2 {
        return Err(SamplingError::TooFewLevels(levels));
    }
    let total = (levels as u64).checked_pow(d as u32).unwrap_or(u64::MAX);
    if total > FULL_FACTORIAL_CAP {
        return Err(SamplingError::FactorialTooLarge {
            requested: total,
            cap: FULL_FACTORIAL_CAP,
        });
    }
    let mut rows = Vec::with_capacity(total as usize);
    // Odometer enumeration, first dimension varying fastest.
    let mut idx = vec![0usize; d];
    loop {
        let row: Vec<f64> = idx
            .iter()
            .map(|&i| i as f64 / (levels - 1) as f64)
            .collect();
        rows.push(row);
        let mut carry = 0;
        while carry < d {
            idx[carry] += 1;
            if idx[carry] < levels {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
        if carry == d {
            break;
        }
    }
    Ok(rows)
}

fn latin_hypercube_rows<R: Rng>(
    d: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>, SamplingError> {
    if n == 0 {
        return Err(SamplingError::EmptyDesign);
    }
    let mut rows = vec![vec![0.0; d]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for dim in 0..d {
        strata.shuffle(rng);
        for (row, &stratum) in rows.iter_mut().zip(&strata) {
            let offset: f64 = rng.random();
            row[dim] = (stratum as f64 + offset) / n as f64;
        }
    }
    Ok(rows)
}

/// Smallest constructible run count for `d` two-level factors: the
/// Sylvester-Hadamard construction yields runs − 1 usable columns at every
/// power-of-two run count, so we need the next power of two at or above
/// d + 1 (and at least 4).
pub fn minimum_oa_runs(d: usize) -> usize {
    (d + 1).next_power_of_two().max(4)
}

fn orthogonal_array_rows(d: usize, runs: usize) -> Result<Vec<Vec<f64>>, SamplingError> {
    let minimal = minimum_oa_runs(d);
    if runs % 4 != 0 || !runs.is_power_of_two() || runs < minimal {
        let suggestion = if runs < minimal {
            minimal
        } else {
            runs.next_power_of_two()
        };
        return Err(SamplingError::NotConstructible {
            requested: runs,
            factors: d,
            suggestion,
        });
    }
    // Sylvester-Hadamard matrix H(runs): entry (i, j) = (−1)^popcount(i & j).
    // Column 0 is constant, so factors take columns 1..=d; +1 maps to the
    // upper level and −1 to the lower.
    let mut rows = Vec::with_capacity(runs);
    for i in 0..runs {
        let row: Vec<f64> = (1..=d)
            .map(|j| {
                if (i & j).count_ones() % 2 == 0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        rows.push(row);
    }
    Ok(rows)
}

/// Turns continuous rows into validated points, assigning corner codes
/// round-robin over the label order and dropping exact duplicates in
/// normalized space (first occurrence wins, so earlier generators keep
/// their tag).
fn finish(model: &CircuitModel, raw: RawDesign) -> Result<DesignSet, SamplingError> {
    let d = model.n_ocs();
    let mut set = DesignSet {
        points: Vec::with_capacity(raw.rows.len()),
        provenance: Vec::with_capacity(raw.rows.len()),
        normalized: Vec::with_capacity(raw.rows.len()),
    };
    let mut seen: std::collections::HashSet<Vec<u64>> = std::collections::HashSet::new();
    for (i, (row, tag)) in raw.rows.iter().zip(raw.provenance).enumerate() {
        let mut x = DVector::zeros(model.normalized_dim());
        for (dim, &u) in row.iter().enumerate() {
            x[dim] = u;
        }
        let corner_code = model.corner.as_ref().map(|corner| {
            let code = corner.codes[i % corner.codes.len()];
            let (m0, m1) = corner.code_maxima();
            x[d] = if m0 == 0 {
                0.0
            } else {
                f64::from(code.0) / f64::from(m0)
            };
            x[d + 1] = if m1 == 0 {
                0.0
            } else {
                f64::from(code.1) / f64::from(m1)
            };
            code
        });
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if !seen.insert(key) {
            continue;
        }
        let oc_values: Vec<f64> = model
            .ocs
            .iter()
            .zip(row)
            .map(|(oc, &u)| oc.min + u * oc.width())
            .collect();
        let point = ConfigurationPoint {
            oc_values,
            corner_code,
        };
        model.validate_point(&point)?;
        set.points.push(point);
        set.provenance.push(tag);
        set.normalized.push(x);
    }
    Ok(set)
}

pub fn full_factorial(model: &CircuitModel, levels: usize) -> Result<DesignSet, SamplingError> {
    let rows = full_factorial_rows(model.n_ocs(), levels)?;
    let provenance = vec![Provenance::FullFactorial; rows.len()];
    finish(model, RawDesign { rows, provenance })
}

pub fn latin_hypercube<R: Rng>(
    model: &CircuitModel,
    n: usize,
    rng: &mut R,
) -> Result<DesignSet, SamplingError> {
    let rows = latin_hypercube_rows(model.n_ocs(), n, rng)?;
    let provenance = vec![Provenance::Lhs; rows.len()];
    finish(model, RawDesign { rows, provenance })
}

pub fn orthogonal_array(model: &CircuitModel, runs: usize) -> Result<DesignSet, SamplingError> {
    let rows = orthogonal_array_rows(model.n_ocs(), runs)?;
    let provenance = vec![Provenance::Oa; rows.len()];
    finish(model, RawDesign { rows, provenance })
}

/// Training design for the fixed-planning stage: the smallest constructible
/// orthogonal array for the continuous dimensions, topped up to `budget`
/// with Latin hypercube samples.
pub fn fixed_planning_set<R: Rng>(
    model: &CircuitModel,
    budget: usize,
    rng: &mut R,
) -> Result<DesignSet, SamplingError> {
    let d = model.n_ocs();
    let oa_runs = minimum_oa_runs(d);
    let minimum = oa_runs.max(8);
    if budget < minimum {
        return Err(SamplingError::BudgetTooSmall { budget, minimum });
    }
    let mut rows = orthogonal_array_rows(d, oa_runs)?;
    let mut provenance = vec![Provenance::Oa; rows.len()];
    let remainder = budget - rows.len();
    if remainder > 0 {
        rows.extend(latin_hypercube_rows(d, remainder, rng)?);
        provenance.resize(budget, Provenance::Lhs);
    }
    finish(model, RawDesign { rows, provenance })
}

/// Candidate/evaluation pool: the two-level full factorial plus Latin
/// hypercube samples up to `target` (default 5000).
pub const DEFAULT_EVAL_TARGET: usize = 5000;

pub fn evaluation_set<R: Rng>(
    model: &CircuitModel,
    target: usize,
    rng: &mut R,
) -> Result<DesignSet, SamplingError> {
    let d = model.n_ocs();
    let ff = full_factorial_rows(d, 2)?;
    if target < ff.len() {
        return Err(SamplingError::TargetTooSmall {
            target,
            minimum: ff.len(),
        });
    }
    let remainder = target - ff.len();
    let mut rows = ff;
    let mut provenance = vec![Provenance::FullFactorial; rows.len()];
    if remainder > 0 {
        rows.extend(latin_hypercube_rows(d, remainder, rng)?);
        provenance.resize(target, Provenance::Lhs);
    }
    finish(model, RawDesign { rows, provenance })
}

/// CSV export: one row per point, OC values in declaration order, the corner
/// label when present, and the provenance tag.
pub fn design_csv(model: &CircuitModel, set: &DesignSet) -> String {
    let mut out = String::new();
    for oc in &model.ocs {
        out.push_str(&oc.name);
        out.push(',');
    }
    if model.corner.is_some() {
        out.push_str("corner,");
    }
    out.push_str("provenance\n");
    for (point, tag) in set.points.iter().zip(&set.provenance) {
        for v in &point.oc_values {
            out.push_str(&format!("{v},"));
        }
        if let Some(label) = model.corner_label(point) {
            out.push_str(label);
            out.push(',');
        }
        out.push_str(tag.tag());
        out.push('\n');
    }
    out
}
