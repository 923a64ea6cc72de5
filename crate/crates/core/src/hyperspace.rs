//! Mixed continuous/categorical input space of a circuit under verification.
//!
//! An operating-condition configuration (OCC) assigns one value to every
//! continuous operating condition plus, when the circuit declares one, a
//! process-corner setting encoded as a pair of small integers. Everything
//! downstream (designs, surrogates, acquisition) works on points normalized
//! into the unit box; this module owns that mapping and the response
//! specifications.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("operating condition `{name}`: value {value} outside [{min}, {max}]")]
    OutOfBounds {
        name: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("unknown corner label `{0}`")]
    UnknownCornerLabel(String),
    #[error("corner code ({0}, {1}) is not in the valid-combination list")]
    InvalidCornerCode(u8, u8),
    #[error("point has no corner code but the circuit declares a process corner")]
    MissingCornerCode,
    #[error("point carries a corner code but the circuit declares no process corner")]
    UnexpectedCornerCode,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value {value} for response `{response}`")]
    NonFiniteValue { response: String, value: f64 },
    #[error("invalid circuit model: {0}")]
    InvalidModel(String),
}

/// One continuous environmental input with its allowed range (physical units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCondition {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl OperatingCondition {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

/// Categorical process-corner dimension. Each label is encoded as a pair of
/// small non-negative integers; `codes[i]` is the encoding of `labels[i]` and
/// doubles as the valid-combination list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessCorner {
    pub name: String,
    pub labels: Vec<String>,
    pub codes: Vec<(u8, u8)>,
}

impl ProcessCorner {
    pub fn encode(&self, label: &str) -> Result<(u8, u8), SpaceError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.codes[i])
            .ok_or_else(|| SpaceError::UnknownCornerLabel(label.to_string()))
    }

    pub fn decode(&self, code: (u8, u8)) -> Result<&str, SpaceError> {
        self.codes
            .iter()
            .position(|&c| c == code)
            .map(|i| self.labels[i].as_str())
            .ok_or(SpaceError::InvalidCornerCode(code.0, code.1))
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    /// Per-component maxima over the valid codes, used to scale the two
    /// corner coordinates into [0, 1].
    pub fn code_maxima(&self) -> (u8, u8) {
        let m0 = self.codes.iter().map(|c| c.0).max().unwrap_or(0);
        let m1 = self.codes.iter().map(|c| c.1).max().unwrap_or(0);
        (m0, m1)
    }
}

/// Whether a response must stay above or below its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecDirection {
    /// Response must exceed the threshold.
    LowerBound,
    /// Response must stay below the threshold.
    UpperBound,
}

/// Search orientation implied by a specification: every search minimizes the
/// oriented response, so a response bounded from below is minimized directly
/// and a response bounded from above is sign-flipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorstDirection {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSpec {
    pub name: String,
    pub threshold: f64,
    pub direction: SpecDirection,
}

impl ResponseSpec {
    /// Signed distance to the threshold; positive iff the spec is satisfied
    /// strictly. Equality counts as a violation.
    pub fn margin(&self, value: f64) -> Result<f64, SpaceError> {
        if !value.is_finite() {
            return Err(SpaceError::NonFiniteValue {
                response: self.name.clone(),
                value,
            });
        }
        Ok(match self.direction {
            SpecDirection::LowerBound => value - self.threshold,
            SpecDirection::UpperBound => self.threshold - value,
        })
    }

    pub fn worst_direction(&self) -> WorstDirection {
        match self.direction {
            SpecDirection::LowerBound => WorstDirection::Minimize,
            SpecDirection::UpperBound => WorstDirection::Maximize,
        }
    }

    /// Signed response value in the internal convention where every search
    /// minimizes. Self-inverse: applying it twice restores the raw value.
    pub fn orient(&self, value: f64) -> f64 {
        match self.worst_direction() {
            WorstDirection::Minimize => value,
            WorstDirection::Maximize => -value,
        }
    }
}

/// Identifier of one of the built-in synthetic base response surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFunction {
    /// Multimodal trigonometric-polynomial blend with a single sharp
    /// off-center global minimum.
    Well,
    /// Plateaued function of a linear projection of the inputs.
    Ridge,
    /// Multilinear surface whose extrema sit at box vertices.
    Vertex,
}

/// Per-corner affine transform coefficients, one `(gain, offset)` pair per
/// response, aligned with the circuit's response order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerCoefficients {
    /// `per_label[corner_idx][response_idx] = (a, b)`, aligned with
    /// `ProcessCorner::labels` and `CircuitModel::specs`.
    pub per_label: Vec<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBackend {
    /// Base surface per response, aligned with `specs`.
    pub bases: Vec<BaseFunction>,
    /// Corner transform table; required iff the circuit declares a corner.
    pub coefficients: Option<CornerCoefficients>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalBackend {
    /// Command line of the simulator process (argv form). May be overridden
    /// by the `OCSEARCH_SIMULATOR_CMD` environment variable.
    pub command: Vec<String>,
    /// Per-request reply timeout in seconds.
    pub timeout_secs: f64,
}

impl Default for ExternalBackend {
    fn default() -> Self {
        Self {
            command: Vec::new(),
            timeout_secs: 600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BackendConfig {
    Synthetic(SyntheticBackend),
    External(ExternalBackend),
}

impl BackendConfig {
    pub fn is_synthetic(&self) -> bool {
        matches!(self, BackendConfig::Synthetic(_))
    }
}

/// One concrete simulation input: values for every operating condition plus
/// the corner code when the circuit declares a process corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationPoint {
    pub oc_values: Vec<f64>,
    pub corner_code: Option<(u8, u8)>,
}

/// Input-space, response and backend description of one circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitModel {
    pub name: String,
    pub ocs: Vec<OperatingCondition>,
    pub corner: Option<ProcessCorner>,
    pub specs: Vec<ResponseSpec>,
    pub backend: BackendConfig,
}

impl CircuitModel {
    pub fn n_ocs(&self) -> usize {
        self.ocs.len()
    }

    pub fn n_responses(&self) -> usize {
        self.specs.len()
    }

    /// Number of normalized coordinates contributed by the corner (0 or 2).
    pub fn corner_dims(&self) -> usize {
        if self.corner.is_some() {
            2
        } else {
            0
        }
    }

    /// Dimension of the normalized representation.
    pub fn normalized_dim(&self) -> usize {
        self.n_ocs() + self.corner_dims()
    }

    pub fn response_names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<(), SpaceError> {
        if self.ocs.is_empty() {
            return Err(SpaceError::InvalidModel(
                "at least one operating condition is required".into(),
            ));
        }
        for oc in &self.ocs {
            if !(oc.min.is_finite() && oc.max.is_finite()) || oc.min >= oc.max {
                return Err(SpaceError::InvalidModel(format!(
                    "operating condition `{}` needs min < max, got [{}, {}]",
                    oc.name, oc.min, oc.max
                )));
            }
        }
        let mut names: Vec<&str> = self.ocs.iter().map(|o| o.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(SpaceError::InvalidModel(
                "operating condition names must be unique".into(),
            ));
        }
        if self.specs.is_empty() {
            return Err(SpaceError::InvalidModel(
                "at least one response specification is required".into(),
            ));
        }
        let mut rnames: Vec<&str> = self.specs.iter().map(|s| s.name.as_str()).collect();
        rnames.sort_unstable();
        if rnames.windows(2).any(|w| w[0] == w[1]) {
            return Err(SpaceError::InvalidModel(
                "response names must be unique".into(),
            ));
        }
        if let Some(corner) = &self.corner {
            if corner.labels.is_empty() {
                return Err(SpaceError::InvalidModel(
                    "process corner declares no labels".into(),
                ));
            }
            if corner.labels.len() != corner.codes.len() {
                return Err(SpaceError::InvalidModel(
                    "corner labels and codes must align".into(),
                ));
            }
            let mut codes = corner.codes.clone();
            codes.sort_unstable();
            if codes.windows(2).any(|w| w[0] == w[1]) {
                return Err(SpaceError::InvalidModel(
                    "corner codes must be distinct (injective encoding)".into(),
                ));
            }
            let mut labels = corner.labels.clone();
            labels.sort_unstable();
            if labels.windows(2).any(|w| w[0] == w[1]) {
                return Err(SpaceError::InvalidModel(
                    "corner labels must be unique".into(),
                ));
            }
        }
        match &self.backend {
            BackendConfig::Synthetic(synth) => {
                if synth.bases.len() != self.specs.len() {
                    return Err(SpaceError::InvalidModel(
                        "synthetic backend needs one base function per response".into(),
                    ));
                }
                match (&self.corner, &synth.coefficients) {
                    (Some(corner), Some(coeffs)) => {
                        if coeffs.per_label.len() != corner.labels.len() {
                            return Err(SpaceError::InvalidModel(
                                "corner coefficient table must cover every label".into(),
                            ));
                        }
                        for (label, row) in corner.labels.iter().zip(&coeffs.per_label) {
                            if row.len() != self.specs.len() {
                                return Err(SpaceError::InvalidModel(format!(
                                    "corner `{label}` needs one (a, b) pair per response"
                                )));
                            }
                            if let Some((a, _)) = row.iter().find(|(a, _)| *a == 0.0) {
                                return Err(SpaceError::InvalidModel(format!(
                                    "corner `{label}` has zero gain a = {a}; transform must be invertible"
                                )));
                            }
                        }
                    }
                    (Some(_), None) => {
                        return Err(SpaceError::InvalidModel(
                            "synthetic circuit with a corner needs a coefficient table".into(),
                        ));
                    }
                    (None, Some(_)) => {
                        return Err(SpaceError::InvalidModel(
                            "coefficient table given but no corner declared".into(),
                        ));
                    }
                    (None, None) => {}
                }
            }
            BackendConfig::External(_) => {}
        }
        Ok(())
    }

    pub fn validate_point(&self, point: &ConfigurationPoint) -> Result<(), SpaceError> {
        if point.oc_values.len() != self.n_ocs() {
            return Err(SpaceError::DimensionMismatch {
                expected: self.n_ocs(),
                got: point.oc_values.len(),
            });
        }
        for (oc, &v) in self.ocs.iter().zip(&point.oc_values) {
            if !v.is_finite() || v < oc.min || v > oc.max {
                return Err(SpaceError::OutOfBounds {
                    name: oc.name.clone(),
                    value: v,
                    min: oc.min,
                    max: oc.max,
                });
            }
        }
        match (&self.corner, point.corner_code) {
            (Some(corner), Some(code)) => {
                corner.decode(code)?;
            }
            (Some(_), None) => return Err(SpaceError::MissingCornerCode),
            (None, Some(_)) => return Err(SpaceError::UnexpectedCornerCode),
            (None, None) => {}
        }
        Ok(())
    }

    /// Maps a valid point into the unit box: each continuous dimension
    /// affinely to [0, 1], then the corner code pair appended as two
    /// coordinates scaled by that component's maximum code value.
    pub fn normalize(&self, point: &ConfigurationPoint) -> Result<DVector<f64>, SpaceError> {
        self.validate_point(point)?;
        let mut out = DVector::zeros(self.normalized_dim());
        for (i, (oc, &v)) in self.ocs.iter().zip(&point.oc_values).enumerate() {
            out[i] = (v - oc.min) / oc.width();
        }
        if let (Some(corner), Some(code)) = (&self.corner, point.corner_code) {
            let (m0, m1) = corner.code_maxima();
            let d = self.n_ocs();
            out[d] = if m0 == 0 {
                0.0
            } else {
                f64::from(code.0) / f64::from(m0)
            };
            out[d + 1] = if m1 == 0 {
                0.0
            } else {
                f64::from(code.1) / f64::from(m1)
            };
        }
        Ok(out)
    }

    /// Inverse of [`normalize`](Self::normalize). Corner coordinates are
    /// snapped to the nearest valid code; coordinates that are not close to
    /// any valid code (within 1e-6) are rejected.
    pub fn denormalize(&self, x: &DVector<f64>) -> Result<ConfigurationPoint, SpaceError> {
        if x.len() != self.normalized_dim() {
            return Err(SpaceError::DimensionMismatch {
                expected: self.normalized_dim(),
                got: x.len(),
            });
        }
        let mut oc_values = Vec::with_capacity(self.n_ocs());
        for (i, oc) in self.ocs.iter().enumerate() {
            let u = x[i];
            if !(-1e-9..=1.0 + 1e-9).contains(&u) {
                return Err(SpaceError::OutOfBounds {
                    name: oc.name.clone(),
                    value: u,
                    min: 0.0,
                    max: 1.0,
                });
            }
            oc_values.push((oc.min + u.clamp(0.0, 1.0) * oc.width()).clamp(oc.min, oc.max));
        }
        let corner_code = match &self.corner {
            None => None,
            Some(corner) => {
                let (m0, m1) = corner.code_maxima();
                let d = self.n_ocs();
                let mut best: Option<((u8, u8), f64)> = None;
                for &code in &corner.codes {
                    let c0 = if m0 == 0 {
                        0.0
                    } else {
                        f64::from(code.0) / f64::from(m0)
                    };
                    let c1 = if m1 == 0 {
                        0.0
                    } else {
                        f64::from(code.1) / f64::from(m1)
                    };
                    let dist = (x[d] - c0).hypot(x[d + 1] - c1);
                    if best.map_or(true, |(_, b)| dist < b) {
                        best = Some((code, dist));
                    }
                }
                let (code, dist) = best.expect("validated corner has at least one code");
                if dist > 1e-6 {
                    return Err(SpaceError::InvalidCornerCode(
                        x[d].round().clamp(0.0, 255.0) as u8,
                        x[d + 1].round().clamp(0.0, 255.0) as u8,
                    ));
                }
                Some(code)
            }
        };
        Ok(ConfigurationPoint {
            oc_values,
            corner_code,
        })
    }

    /// Corner label of a point, when both the circuit and the point carry one.
    pub fn corner_label(&self, point: &ConfigurationPoint) -> Option<&str> {
        match (&self.corner, point.corner_code) {
            (Some(corner), Some(code)) => corner.decode(code).ok(),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_oc_model() -> CircuitModel {
        CircuitModel {
            name: "toy".into(),
            ocs: vec![
                OperatingCondition {
                    name: "vdd".into(),
                    min: 2.0,
                    max: 4.0,
                },
                OperatingCondition {
                    name: "temp".into(),
                    min: -40.0,
                    max: 125.0,
                },
            ],
            corner: Some(ProcessCorner {
                name: "pc".into(),
                labels: vec![
                    "slow_gain".into(),
                    "slow".into(),
                    "nominal".into(),
                    "slow_fast".into(),
                    "fast_slow".into(),
                    "fast".into(),
                ],
                codes: vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)],
            }),
            specs: vec![
                ResponseSpec {
                    name: "gm".into(),
                    threshold: 8.0,
                    direction: SpecDirection::LowerBound,
                },
                ResponseSpec {
                    name: "psrr".into(),
                    threshold: -26.0,
                    direction: SpecDirection::UpperBound,
                },
            ],
            backend: BackendConfig::External(ExternalBackend::default()),
        }
    }

    #[test]
    fn normalize_endpoints_and_midpoint() {
        let model = two_oc_model();
        let p = ConfigurationPoint {
            oc_values: vec![2.0, 125.0],
            corner_code: Some((0, 0)),
        };
        let x = model.normalize(&p).unwrap();
        assert_eq!(x[0], 0.0);
        assert_eq!(x[1], 1.0);
        let mid = ConfigurationPoint {
            oc_values: vec![3.0, 42.5],
            corner_code: Some((1, 2)),
        };
        let x = model.normalize(&mid).unwrap();
        assert_eq!(x[0], 0.5);
        assert_eq!(x[1], 0.5);
        assert_eq!(x[2], 1.0);
        assert_eq!(x[3], 1.0);
    }

    #[test]
    fn normalize_rejects_out_of_bounds_naming_dimension() {
        let model = two_oc_model();
        let p = ConfigurationPoint {
            oc_values: vec![4.5, 0.0],
            corner_code: Some((0, 0)),
        };
        let err = model.normalize(&p).unwrap_err();
        match err {
            SpaceError::OutOfBounds { name, .. } => assert_eq!(name, "vdd"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn margin_examples() {
        let gm = ResponseSpec {
            name: "gm".into(),
            threshold: 8.0,
            direction: SpecDirection::LowerBound,
        };
        // A value exactly on the threshold is a violation.
        let m = gm.margin(8.00).unwrap();
        assert_eq!(m, 0.0);
        assert!(m <= 0.0);
        let m = gm.margin(9.28).unwrap();
        assert!((m - 1.28).abs() < 1e-12);
        assert!(m > 0.0);

        let psrr = ResponseSpec {
            name: "psrr".into(),
            threshold: -26.0,
            direction: SpecDirection::UpperBound,
        };
        let m = psrr.margin(-33.72).unwrap();
        assert!((m - 7.72).abs() < 1e-12);
        assert!(m > 0.0);

        assert!(gm.margin(f64::NAN).is_err());
        assert!(psrr.margin(f64::INFINITY).is_err());
    }

    #[test]
    fn worst_direction_and_orientation() {
        let gm = ResponseSpec {
            name: "gm".into(),
            threshold: 8.0,
            direction: SpecDirection::LowerBound,
        };
        let psrr = ResponseSpec {
            name: "psrr".into(),
            threshold: -26.0,
            direction: SpecDirection::UpperBound,
        };
        assert_eq!(gm.worst_direction(), WorstDirection::Minimize);
        assert_eq!(psrr.worst_direction(), WorstDirection::Maximize);
        assert_eq!(psrr.orient(-33.60), 33.60);
        assert_eq!(gm.orient(9.28), 9.28);
    }

    #[test]
    fn corner_encode_decode_bijection() {
        let model = two_oc_model();
        let corner = model.corner.as_ref().unwrap();
        for label in &corner.labels {
            let code = corner.encode(label).unwrap();
            assert_eq!(corner.decode(code).unwrap(), label);
        }
        assert!(corner.encode("typical").is_err());
        assert!(corner.decode((9, 9)).is_err());
    }

    #[test]
    fn validate_catches_bad_models() {
        let mut m = two_oc_model();
        m.ocs[0].min = 5.0; // min above max
        assert!(m.validate().is_err());

        let mut m = two_oc_model();
        m.specs.clear();
        assert!(m.validate().is_err());

        let mut m = two_oc_model();
        m.corner.as_mut().unwrap().codes[1] = (0, 0); // duplicate code
        assert!(m.validate().is_err());
    }

    proptest! {
        #[test]
        fn normalize_roundtrip(v0 in 2.0f64..4.0, v1 in -40.0f64..125.0, corner_idx in 0usize..6) {
            let model = two_oc_model();
            let code = model.corner.as_ref().unwrap().codes[corner_idx];
            let p = ConfigurationPoint { oc_values: vec![v0, v1], corner_code: Some(code) };
            let x = model.normalize(&p).unwrap();
            let back = model.denormalize(&x).unwrap();
            prop_assert_eq!(back.corner_code, Some(code));
            for (a, b) in p.oc_values.iter().zip(&back.oc_values) {
                let scale = a.abs().max(1.0);
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn margin_monotone_in_value(v1 in -100.0f64..100.0, v2 in -100.0f64..100.0) {
            prop_assume!(v1 < v2);
            let lower = ResponseSpec { name: "r".into(), threshold: 1.5, direction: SpecDirection::LowerBound };
            let upper = ResponseSpec { name: "r".into(), threshold: 1.5, direction: SpecDirection::UpperBound };
            prop_assert!(lower.margin(v1).unwrap() < lower.margin(v2).unwrap());
            prop_assert!(upper.margin(v1).unwrap() > upper.margin(v2).unwrap());
        }
    }
}
