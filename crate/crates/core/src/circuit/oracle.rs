//! Ground-truth extrema for synthetic circuits.
//!
//! Dense grid scan over the normalized box (per-dimension term tables plus
//! an incremental odometer keep the inner loop to a handful of flops),
//! followed by compass-search polish from the best grid cells, with a
//! doubling-density agreement check before results are trusted.
//!
//! Because every corner transform is affine, the best grid cells for a
//! corner are the best base-response cells (gain > 0) or their mirror
//! (gain < 0); the polish itself always runs on the actual transformed
//! response, so reported per-corner extrema are measured, not inferred.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperspace::{
    BackendConfig, BaseFunction, CircuitModel, ConfigurationPoint, SpaceError, SyntheticBackend,
};

use super::synthetic::base_value;

/// Polish starts kept per response and direction.
const TOP_CELLS: usize = 8;
/// Compass search floor, as a fraction of the unit box.
const POLISH_STEP_FLOOR: f64 = 1e-7;
/// Agreement required between consecutive densities, relative to the range.
const STABILITY_REL: f64 = 1e-3;
/// Upper bound on grid points per scan before escalation gives up.
const POINT_BUDGET: f64 = 6e8;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle requires a synthetic backend")]
    NotSynthetic,
    #[error("grid density must be at least 2, got {0}")]
    DensityTooSmall(usize),
    #[error(
        "extrema did not stabilize: densities {density_a} and {density_b} disagree by {worst_rel:.4}% of range"
    )]
    Unstable {
        density_a: usize,
        density_b: usize,
        worst_rel: f64,
    },
    #[error("grid at density {density} needs {points:.2e} points, over the budget")]
    PointBudget { density: usize, points: f64 },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseExtrema {
    pub min: f64,
    pub max: f64,
    pub argmin: ConfigurationPoint,
    pub argmax: ConfigurationPoint,
}

impl ResponseExtrema {
    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Debug, Clone)]
pub struct CornerExtrema {
    pub label: Option<String>,
    pub responses: Vec<ResponseExtrema>,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Global extrema per response, over all corners.
    pub per_response: Vec<ResponseExtrema>,
    /// Extrema per corner label (single unlabeled entry when the circuit
    /// has no corner).
    pub per_corner: Vec<CornerExtrema>,
    /// Density whose polished results were confirmed by the next one.
    pub density: usize,
}

/// Default scan density by continuous dimension count, balancing basin
/// coverage against the density^d growth.
pub fn default_density(d: usize) -> usize {
    match d {
        0 | 1 | 2 => 201,
        3 => 61,
        4 => 31,
        5 => 17,
        6 => 11,
        7 => 9,
        _ => 5,
    }
}

/// Best grid cells for one response: coordinates of the lowest and highest
/// base values seen.
struct ScanCells {
    min_cells: Vec<(f64, Vec<f64>)>,
    max_cells: Vec<(f64, Vec<f64>)>,
}

fn push_cell(cells: &mut Vec<(f64, Vec<f64>)>, score: f64, coords: &[f64]) {
    if cells.len() == TOP_CELLS && score >= cells[TOP_CELLS - 1].0 {
        return;
    }
    let pos = cells
        .partition_point(|(s, _)| *s <= score);
    cells.insert(pos, (score, coords.to_vec()));
    cells.truncate(TOP_CELLS);
}

/// One pass over the full grid, tracking the best base-response cells.
fn scan(synth: &SyntheticBackend, d: usize, density: usize) -> Vec<ScanCells> {
    let b = density;
    let n_resp = synth.bases.len();
    // Per-dimension, per-level term tables for the additive parts of each
    // base function.
    let levels: Vec<f64> = (0..b).map(|i| i as f64 / (b - 1) as f64).collect();
    let per_resp_tables: Vec<Vec<Vec<f64>>> = synth
        .bases
        .iter()
        .map(|base| match base {
            // Well needs three accumulators; pack as consecutive tables.
            BaseFunction::Well => {
                let mut t = vec![vec![0.0; b]; 3 * d];
                for k in 0..d {
                    for (i, &x) in levels.iter().enumerate() {
                        t[3 * k][i] = crate::circuit::synthetic::well_projection_term(k, x);
                        t[3 * k + 1][i] = crate::circuit::synthetic::well_cubic_term(x);
                        t[3 * k + 2][i] = crate::circuit::synthetic::well_distance_term(k, x);
                    }
                }
                t
            }
            BaseFunction::Ridge => {
                let mut t = vec![vec![0.0; b]; d];
                for k in 0..d {
                    for (i, &x) in levels.iter().enumerate() {
                        t[k][i] = crate::circuit::synthetic::ridge_projection_term(k, x);
                    }
                }
                t
            }
            BaseFunction::Vertex => {
                let mut t = vec![vec![0.0; b]; d];
                for k in 0..d {
                    for (i, &x) in levels.iter().enumerate() {
                        t[k][i] = crate::circuit::synthetic::vertex_linear_term(k, x);
                    }
                }
                t
            }
        })
        .collect();

    let mut cells: Vec<ScanCells> = (0..n_resp)
        .map(|_| ScanCells {
            min_cells: Vec::new(),
            max_cells: Vec::new(),
        })
        .collect();

    let mut idx = vec![0usize; d];
    let mut x = vec![0.0f64; d];
    // Running sums per response over its additive tables (stride tables per
    // dimension: three for the well, one otherwise), seeded at level 0.
    let mut sums: Vec<Vec<f64>> = per_resp_tables
        .iter()
        .map(|tables| {
            let stride = tables.len() / d;
            let mut s = vec![0.0; stride];
            for k in 0..d {
                for j in 0..stride {
                    s[j] += tables[stride * k + j][0];
                }
            }
            s
        })
        .collect();

    loop {
        for (r, base) in synth.bases.iter().enumerate() {
            let v = match base {
                BaseFunction::Well => crate::circuit::synthetic::well_from_parts(
                    sums[r][0], sums[r][1], sums[r][2],
                ),
                BaseFunction::Ridge => {
                    crate::circuit::synthetic::ridge_from_projection(sums[r][0], d)
                }
                BaseFunction::Vertex => {
                    crate::circuit::synthetic::vertex_from_parts(sums[r][0], &x)
                }
            };
            let c = &mut cells[r];
            if c.min_cells.len() < TOP_CELLS || v < c.min_cells[TOP_CELLS - 1].0 {
                push_cell(&mut c.min_cells, v, &x);
            }
            if c.max_cells.len() < TOP_CELLS || -v < c.max_cells[TOP_CELLS - 1].0 {
                push_cell(&mut c.max_cells, -v, &x);
            }
        }
        // Odometer step, first dimension fastest; update the running sums
        // only for dimensions whose level changed.
        let mut k = 0;
        loop {
            if k == d {
                return cells;
            }
            let old = idx[k];
            if idx[k] + 1 < b {
                idx[k] += 1;
            } else {
                idx[k] = 0;
            }
            let new = idx[k];
            for (r, tables) in per_resp_tables.iter().enumerate() {
                let stride = tables.len() / d;
                for j in 0..stride {
                    let tbl = &tables[stride * k + j];
                    sums[r][j] += tbl[new] - tbl[old];
                }
            }
            x[k] = levels[new];
            if new != 0 {
                break;
            }
            k += 1;
        }
    }
}

/// Greedy compass search: probe ± step along every dimension, take the best
/// improving move, halve the step when none improves.
fn compass<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], step0: f64, minimize: bool) -> (Vec<f64>, f64) {
    let sign = if minimize { 1.0 } else { -1.0 };
    let mut x = start.to_vec();
    let mut fx = sign * f(&x);
    let mut step = step0;
    let mut moves = 0;
    while step > POLISH_STEP_FLOOR && moves < 2000 {
        let mut best: Option<(usize, f64, f64)> = None;
        for d in 0..x.len() {
            for s in [-1.0f64, 1.0] {
                let nx = (x[d] + s * step).clamp(0.0, 1.0);
                if nx == x[d] {
                    continue;
                }
                let old = x[d];
                x[d] = nx;
                let v = sign * f(&x);
                x[d] = old;
                if v < best.map_or(fx, |(_, _, bv)| bv) {
                    best = Some((d, nx, v));
                }
            }
        }
        match best {
            Some((d, nx, v)) => {
                x[d] = nx;
                fx = v;
                moves += 1;
            }
            None => step *= 0.5,
        }
    }
    (x, sign * fx)
}

fn to_point(model: &CircuitModel, coords: &[f64], code: Option<(u8, u8)>) -> ConfigurationPoint {
    ConfigurationPoint {
        oc_values: model
            .ocs
            .iter()
            .zip(coords)
            .map(|(oc, &u)| oc.min + u * oc.width())
            .collect(),
        corner_code: code,
    }
}

/// Polished per-corner extrema from one scan's candidate cells.
fn refine(model: &CircuitModel, synth: &SyntheticBackend, cells: &[ScanCells], density: usize) -> Vec<CornerExtrema> {
    let step0 = 1.0 / (density - 1) as f64;
    let corners: Vec<(Option<String>, Option<(u8, u8)>, Vec<(f64, f64)>)> = match &model.corner {
        Some(corner) => {
            let coeffs = synth
                .coefficients
                .as_ref()
                .expect("validated synthetic circuit with corner has coefficients");
            corner
                .labels
                .iter()
                .zip(&corner.codes)
                .zip(&coeffs.per_label)
                .map(|((label, code), row)| (Some(label.clone()), Some(*code), row.clone()))
                .collect()
        }
        None => vec![(None, None, vec![(1.0, 0.0); synth.bases.len()])],
    };

    let mut out = Vec::with_capacity(corners.len());
    for (label, code, row) in corners {
        let mut responses = Vec::with_capacity(synth.bases.len());
        for (r, base) in synth.bases.iter().enumerate() {
            let (a, bb) = row[r];
            let f = |x: &[f64]| a * base_value(*base, x) + bb;
            // A positive gain keeps the base orientation; a negative one
            // swaps which cells lead to the corner's min and max.
            let (min_starts, max_starts) = if a >= 0.0 {
                (&cells[r].min_cells, &cells[r].max_cells)
            } else {
                (&cells[r].max_cells, &cells[r].min_cells)
            };
            let mut best_min: Option<(Vec<f64>, f64)> = None;
            for (_, start) in min_starts {
                let (x, v) = compass(&f, start, step0, true);
                if best_min.as_ref().map_or(true, |(_, bv)| v < *bv) {
                    best_min = Some((x, v));
                }
            }
            let mut best_max: Option<(Vec<f64>, f64)> = None;
            for (_, start) in max_starts {
                let (x, v) = compass(&f, start, step0, false);
                if best_max.as_ref().map_or(true, |(_, bv)| v > *bv) {
                    best_max = Some((x, v));
                }
            }
            let (xmin, vmin) = best_min.expect("scan produced at least one cell");
            let (xmax, vmax) = best_max.expect("scan produced at least one cell");
            responses.push(ResponseExtrema {
                min: vmin,
                max: vmax,
                argmin: to_point(model, &xmin, code),
                argmax: to_point(model, &xmax, code),
            });
        }
        out.push(CornerExtrema { label, responses });
    }
    out
}

fn globalize(per_corner: &[CornerExtrema]) -> Vec<ResponseExtrema> {
    let n_resp = per_corner[0].responses.len();
    (0..n_resp)
        .map(|r| {
            let mut global = per_corner[0].responses[r].clone();
            for corner in &per_corner[1..] {
                let e = &corner.responses[r];
                if e.min < global.min {
                    global.min = e.min;
                    global.argmin = e.argmin.clone();
                }
                if e.max > global.max {
                    global.max = e.max;
                    global.argmax = e.argmax.clone();
                }
            }
            global
        })
        .collect()
}

fn run_at(model: &CircuitModel, synth: &SyntheticBackend, density: usize) -> Vec<CornerExtrema> {
    let cells = scan(synth, model.n_ocs(), density);
    refine(model, synth, &cells, density)
}

fn worst_disagreement(a: &[CornerExtrema], b: &[CornerExtrema]) -> f64 {
    let mut worst: f64 = 0.0;
    for (ca, cb) in a.iter().zip(b) {
        for (ea, eb) in ca.responses.iter().zip(&cb.responses) {
            let range = eb.range().max(1e-12);
            worst = worst
                .max((ea.min - eb.min).abs() / range)
                .max((ea.max - eb.max).abs() / range);
        }
    }
    worst * 100.0
}

/// True extrema of a synthetic circuit: scans at `density` (default chosen
/// by dimension), confirms against density 2b−1, escalating once before
/// giving up. The confirmed finer result is returned.
pub fn oracle_extrema(
    model: &CircuitModel,
    density: Option<usize>,
) -> Result<OracleResult, OracleError> {
    let BackendConfig::Synthetic(synth) = &model.backend else {
        return Err(OracleError::NotSynthetic);
    };
    let d = model.n_ocs();
    if d == 0 {
        return Err(OracleError::Space(SpaceError::InvalidModel(
            "circuit has no operating conditions".into(),
        )));
    }
    let mut b = density.unwrap_or_else(|| default_density(d));
    if b < 2 {
        return Err(OracleError::DensityTooSmall(b));
    }
    let budget_ok = |density: usize| (density as f64).powi(d as i32) <= POINT_BUDGET;
    if !budget_ok(b) {
        return Err(OracleError::PointBudget {
            density: b,
            points: (b as f64).powi(d as i32),
        });
    }
    let mut coarse = run_at(model, synth, b);
    for _ in 0..2 {
        let finer_density = 2 * b - 1;
        if !budget_ok(finer_density) {
            return Err(OracleError::PointBudget {
                density: finer_density,
                points: (finer_density as f64).powi(d as i32),
            });
        }
        let fine = run_at(model, synth, finer_density);
        let disagreement = worst_disagreement(&coarse, &fine);
        if disagreement <= STABILITY_REL * 100.0 {
            let per_response = globalize(&fine);
            return Ok(OracleResult {
                per_response,
                per_corner: fine,
                density: finer_density,
            });
        }
        coarse = fine;
        b = finer_density;
    }
    Err(OracleError::Unstable {
        density_a: b,
        density_b: 2 * b - 1,
        worst_rel: worst_disagreement(&coarse, &run_at(model, synth, 2 * b - 1)),
    })
}

/// Serialized extrema artifact, readable back for report generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtremaFile {
    pub version: u32,
    pub circuit: String,
    pub density: usize,
    #[serde(rename = "response")]
    pub responses: Vec<ExtremaEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtremaEntry {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub argmin_oc_values: Vec<f64>,
    pub argmin_corner: Option<String>,
    pub argmax_oc_values: Vec<f64>,
    pub argmax_corner: Option<String>,
}

impl ExtremaFile {
    pub fn from_result(model: &CircuitModel, result: &OracleResult) -> Self {
        let responses = model
            .specs
            .iter()
            .zip(&result.per_response)
            .map(|(spec, e)| ExtremaEntry {
                name: spec.name.clone(),
                min: e.min,
                max: e.max,
                argmin_oc_values: e.argmin.oc_values.clone(),
                argmin_corner: model.corner_label(&e.argmin).map(str::to_owned),
                argmax_oc_values: e.argmax.oc_values.clone(),
                argmax_corner: model.corner_label(&e.argmax).map(str::to_owned),
            })
            .collect();
        Self {
            version: 1,
            circuit: model.name.clone(),
            density: result.density,
            responses,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("extrema serialize")
    }

    pub fn from_toml(s: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(s)
    }
}
