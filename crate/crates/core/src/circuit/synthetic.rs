//! Closed-form benchmark responses with process-corner transforms.
//!
//! Three qualitatively different surfaces over the normalized unit box,
//! chosen to exercise the failure modes a surrogate search must survive:
//! a multimodal landscape with one sharp off-center basin, a plateaued
//! ridge along a linear projection, and a multilinear surface whose
//! extrema sit on box vertices. A process corner reshapes each response
//! by an affine map value ↦ a·value + b with per-corner, per-response
//! coefficients; the nominal corner is the identity.
//!
//! The formulas are frozen: regression tests pin their values at canonical
//! points, and the committed circuit files' thresholds and oracle extrema
//! depend on them. Any change here is a new benchmark.

use crate::hyperspace::{
    BaseFunction, CircuitModel, ConfigurationPoint, SpaceError, SyntheticBackend,
};

use super::{Simulator, SimulatorError};

/// Projection weights of the multimodal well response. Dimensions 4 and 6
/// share weights and centers, giving the surface one exactly symmetric
/// coordinate swap.
const WELL_W: [f64; 7] = [0.35, 0.55, 0.45, 0.65, 0.50, 0.40, 0.50];
const WELL_C: [f64; 7] = [0.23, 0.71, 0.41, 0.87, 0.33, 0.57, 0.33];
const WELL_PHASE: f64 = 0.721;

/// Ridge projection; dimensions 2 and 5 share a coefficient.
const RIDGE_V: [f64; 7] = [0.8, -0.5, 0.6, 0.7, -0.4, 0.6, 0.65];

/// Linear coefficients of the vertex response.
const VERTEX_A: [f64; 7] = [0.9, -1.1, 0.7, -0.8, 1.0, -0.6, 0.75];
/// Pairwise interaction terms (i, j, weight); entries referencing a
/// dimension beyond the circuit's are dropped.
const VERTEX_PAIRS: [(usize, usize, f64); 5] = [
    (0, 1, 0.5),
    (2, 3, -0.45),
    (4, 5, 0.4),
    (1, 6, -0.35),
    (0, 4, 0.3),
];

fn smoothstep(u: f64, mid: f64, half_width: f64) -> f64 {
    let t = ((u - mid + half_width) / (2.0 * half_width)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

// Per-dimension terms and finalizers, split out so a grid scan can keep
// running sums instead of re-evaluating whole points. base_value composes
// exactly these pieces.

pub(crate) fn well_projection_term(k: usize, x: f64) -> f64 {
    WELL_W[k % 7] * x
}

pub(crate) fn well_cubic_term(x: f64) -> f64 {
    1.2 * x * (x - 1.0) * (2.0 * x - 1.0)
}

pub(crate) fn well_distance_term(k: usize, x: f64) -> f64 {
    let d = x - WELL_C[k % 7];
    d * d
}

pub(crate) fn well_from_parts(proj: f64, cubic: f64, dist2: f64) -> f64 {
    5.0 + 1.2 * (2.0 * std::f64::consts::PI * (proj + WELL_PHASE)).cos() + cubic
        - 3.5 / (1.0 + 6.0 * dist2)
}

pub(crate) fn ridge_projection_term(k: usize, x: f64) -> f64 {
    RIDGE_V[k % 7] * x
}

pub(crate) fn ridge_from_projection(raw: f64, d: usize) -> f64 {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for k in 0..d {
        let v = RIDGE_V[k % 7];
        lo += v.min(0.0);
        hi += v.max(0.0);
    }
    let u = (raw - lo) / (hi - lo);
    2.0 + 0.15 * u + 5.0 * smoothstep(u, 0.40, 0.10) - 3.0 * smoothstep(u, 0.75, 0.07)
}

pub(crate) fn vertex_linear_term(k: usize, x: f64) -> f64 {
    VERTEX_A[k % 7] * x
}

pub(crate) fn vertex_from_parts(linear: f64, x: &[f64]) -> f64 {
    let mut v = 1.0 + linear;
    for &(i, j, w) in &VERTEX_PAIRS {
        if i < x.len() && j < x.len() {
            v += w * x[i] * x[j];
        }
    }
    v
}

/// Evaluates one base response on normalized coordinates in [0, 1]^d.
/// Defined for any d ≥ 1; coefficient tables wrap past seven dimensions.
pub fn base_value(base: BaseFunction, x: &[f64]) -> f64 {
    match base {
        BaseFunction::Well => {
            let mut proj = 0.0;
            let mut cubic = 0.0;
            let mut dist2 = 0.0;
            for (k, &xi) in x.iter().enumerate() {
                proj += well_projection_term(k, xi);
                cubic += well_cubic_term(xi);
                dist2 += well_distance_term(k, xi);
            }
            well_from_parts(proj, cubic, dist2)
        }
        BaseFunction::Ridge => {
            let mut raw = 0.0;
            for (k, &xi) in x.iter().enumerate() {
                raw += ridge_projection_term(k, xi);
            }
            ridge_from_projection(raw, x.len())
        }
        BaseFunction::Vertex => {
            let mut linear = 0.0;
            for (k, &xi) in x.iter().enumerate() {
                linear += vertex_linear_term(k, xi);
            }
            vertex_from_parts(linear, x)
        }
    }
}

/// All base responses of a circuit at one normalized point.
pub fn base_responses(synth: &SyntheticBackend, x: &[f64]) -> Vec<f64> {
    synth.bases.iter().map(|b| base_value(*b, x)).collect()
}

/// Applies one corner's affine transform to a base response vector.
pub fn corner_transform(
    model: &CircuitModel,
    synth: &SyntheticBackend,
    values: &[f64],
    label: &str,
) -> Result<Vec<f64>, SpaceError> {
    let Some(corner) = &model.corner else {
        return Ok(values.to_vec());
    };
    let idx = corner
        .labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| SpaceError::UnknownCornerLabel(label.to_string()))?;
    let coeffs = synth
        .coefficients
        .as_ref()
        .expect("validated synthetic circuit with corner has coefficients");
    Ok(values
        .iter()
        .zip(&coeffs.per_label[idx])
        .map(|(v, (a, b))| a * v + b)
        .collect())
}

/// In-process simulator for synthetic circuits: pure, deterministic and
/// reentrant.
pub struct SyntheticSimulator {
    model: CircuitModel,
    synth: SyntheticBackend,
}

impl SyntheticSimulator {
    pub fn new(model: CircuitModel, synth: SyntheticBackend) -> Self {
        Self { model, synth }
    }

    /// Evaluates at normalized continuous coordinates plus an optional
    /// corner label, bypassing point validation. Shared with the oracle,
    /// which scans normalized space directly.
    pub fn eval_normalized(&self, x: &[f64], label: Option<&str>) -> Result<Vec<f64>, SpaceError> {
        let base = base_responses(&self.synth, x);
        match label {
            Some(label) => corner_transform(&self.model, &self.synth, &base, label),
            None => Ok(base),
        }
    }
}

impl Simulator for SyntheticSimulator {
    fn simulate(&mut self, point: &ConfigurationPoint) -> Result<Vec<f64>, SimulatorError> {
        self.model.validate_point(point)?;
        let x: Vec<f64> = self
            .model
            .ocs
            .iter()
            .zip(&point.oc_values)
            .map(|(oc, &v)| (v - oc.min) / oc.width())
            .collect();
        let label = self.model.corner_label(point).map(str::to_owned);
        let values = self.eval_normalized(&x, label.as_deref())?;
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
}
