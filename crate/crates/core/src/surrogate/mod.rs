//! Gaussian-process regression per response: exact inference through a
//! Cholesky factorization, hyperparameters picked by multi-restart gradient
//! ascent on the log marginal likelihood, analytic posterior-mean gradients
//! for downstream candidate refinement.

pub mod kernel;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use kernel::{Kernel, KernelFamily, KernelParams};

/// Observation noise is never allowed below this: keeps the Gram matrix
/// well-conditioned even for deterministic simulators.
pub const NOISE_FLOOR: f64 = 1e-8;

const LOG_LENGTHSCALE_BOUNDS: (f64, f64) = (-4.605170185988091, 4.605170185988091); // 1e-2..1e2
const LOG_SIGNAL_BOUNDS: (f64, f64) = (-9.210340371976182, 9.210340371976182); // 1e-4..1e4
const LOG_NOISE_BOUNDS: (f64, f64) = (-18.420680743952367, 0.0); // 1e-8..1
const JITTERS: [f64; 7] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-4];

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("need at least 2 training points, got {0}")]
    InsufficientData(usize),
    #[error("training inputs contain duplicate rows (indices {0} and {1})")]
    DuplicateInputs(usize, usize),
    #[error("target at index {0} is not finite")]
    NonFiniteTarget(usize),
    #[error("input dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Gram matrix not positive definite even at maximum jitter")]
    Conditioning,
    #[error("inputs and targets disagree in length: {inputs} vs {targets}")]
    LengthMismatch { inputs: usize, targets: usize },
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub kernel: KernelFamily,
    /// Total optimizer starts; the first is a fixed heuristic (or the warm
    /// start when given), the rest are drawn from the rng.
    pub restarts: usize,
    /// Budget of likelihood evaluations per start.
    pub max_evals: usize,
    pub warm_start: Option<KernelParams>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            kernel: KernelFamily::Matern52,
            restarts: 8,
            max_evals: 70,
            warm_start: None,
        }
    }
}

/// Immutable fitted model. `targets` is stored standardized (zero mean, unit
/// variance) and oriented; predictions are de-standardized on the way out.
#[derive(Debug, Clone)]
pub struct TrainedSurrogate {
    pub inputs: Vec<DVector<f64>>,
    pub targets: DVector<f64>,
    pub target_mean: f64,
    pub target_std: f64,
    pub family: KernelFamily,
    pub params: KernelParams,
    /// Lower-triangular factor of K + noise·I (empty when degenerate).
    pub chol: DMatrix<f64>,
    pub alpha: DVector<f64>,
    /// Constant-target short-circuit: predict returns (target_mean, 0).
    pub degenerate: bool,
}

fn standardize(targets: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std <= 1e-12 * mean.abs().max(1.0) {
        return (mean, 0.0, vec![0.0; targets.len()]);
    }
    let scaled = targets.iter().map(|y| (y - mean) / std).collect();
    (mean, std, scaled)
}

fn validate_training(
    inputs: &[DVector<f64>],
    targets: &[f64],
) -> Result<usize, SurrogateError> {
    if inputs.len() != targets.len() {
        return Err(SurrogateError::LengthMismatch {
            inputs: inputs.len(),
            targets: targets.len(),
        });
    }
    if inputs.len() < 2 {
        return Err(SurrogateError::InsufficientData(inputs.len()));
    }
    let d = inputs[0].len();
    for x in inputs {
        if x.len() != d {
            return Err(SurrogateError::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
    }
    for (i, y) in targets.iter().enumerate() {
        if !y.is_finite() {
            return Err(SurrogateError::NonFiniteTarget(i));
        }
    }
    let mut seen = std::collections::HashMap::new();
    for (i, x) in inputs.iter().enumerate() {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(&j) = seen.get(&key) {
            return Err(SurrogateError::DuplicateInputs(j, i));
        }
        seen.insert(key, i);
    }
    Ok(d)
}

/// Cholesky with escalating diagonal jitter; returns the factor and the
/// jitter that made it succeed.
fn chol_with_jitter(ky: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64), SurrogateError> {
    for &jitter in &JITTERS {
        let mut m = ky.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok((chol, jitter));
        }
    }
    Err(SurrogateError::Conditioning)
}

/// Precomputed per-dimension squared coordinate differences; the only part
/// of the Gram matrix that does not depend on the hyperparameters.
struct Workspace<'a> {
    dd: Vec<DMatrix<f64>>,
    y: &'a DVector<f64>,
    family: KernelFamily,
    n: usize,
    d: usize,
}

impl<'a> Workspace<'a> {
    fn new(family: KernelFamily, inputs: &[DVector<f64>], y: &'a DVector<f64>) -> Self {
        let n = inputs.len();
        let d = inputs[0].len();
        let mut dd = vec![DMatrix::zeros(n, n); d];
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..d {
                    let diff = inputs[i][k] - inputs[j][k];
                    let sq = diff * diff;
                    dd[k][(i, j)] = sq;
                    dd[k][(j, i)] = sq;
                }
            }
        }
        Self {
            dd,
            y,
            family,
            n,
            d,
        }
    }

    fn gram(&self, theta: &[f64]) -> DMatrix<f64> {
        let inv_l2: Vec<f64> = theta[..self.d].iter().map(|t| (-2.0 * t).exp()).collect();
        let sig2 = theta[self.d].exp();
        let noise = theta[self.d + 1].exp();
        let mut ky = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            ky[(i, i)] = sig2 + noise;
            for j in (i + 1)..self.n {
                let mut r2 = 0.0;
                for k in 0..self.d {
                    r2 += self.dd[k][(i, j)] * inv_l2[k];
                }
                let v = match self.family {
                    KernelFamily::Matern52 => {
                        let s = (5.0 * r2).sqrt();
                        sig2 * (1.0 + s + s * s / 3.0) * (-s).exp()
                    }
                    KernelFamily::SquaredExponential => sig2 * (-0.5 * r2).exp(),
                };
                ky[(i, j)] = v;
                ky[(j, i)] = v;
            }
        }
        ky
    }

    fn lml(&self, theta: &[f64]) -> Result<f64, SurrogateError> {
        let ky = self.gram(theta);
        let (chol, _) = chol_with_jitter(&ky)?;
        let alpha = chol.solve(self.y);
        let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
        Ok(-0.5 * self.y.dot(&alpha)
            - log_det_half
            - 0.5 * self.n as f64 * (2.0 * std::f64::consts::PI).ln())
    }

    /// Likelihood and its gradient with respect to
    /// [log lengthscales.., log signal variance, log noise variance].
    fn lml_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>), SurrogateError> {
        let inv_l2: Vec<f64> = theta[..self.d].iter().map(|t| (-2.0 * t).exp()).collect();
        let sig2 = theta[self.d].exp();
        let noise = theta[self.d + 1].exp();
        let ky = self.gram(theta);
        let (chol, _) = chol_with_jitter(&ky)?;
        let alpha = chol.solve(self.y);
        let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
        let lml = -0.5 * self.y.dot(&alpha)
            - log_det_half
            - 0.5 * self.n as f64 * (2.0 * std::f64::consts::PI).ln();

        let kinv = chol.inverse();
        let mut grad = vec![0.0; self.d + 2];
        // d(lml)/dθ = ½·tr((ααᵀ − K⁻¹)·∂K/∂θ); the sum runs over the upper
        // triangle with a factor 2, plus the diagonal once.
        let mut diag_w = 0.0;
        for i in 0..self.n {
            let w_ii = alpha[i] * alpha[i] - kinv[(i, i)];
            diag_w += w_ii;
            // ∂k/∂(log σ²) on the diagonal is σ² for both families.
            grad[self.d] += 0.5 * w_ii * sig2;
            for j in (i + 1)..self.n {
                let w = alpha[i] * alpha[j] - kinv[(i, j)];
                let mut r2 = 0.0;
                for k in 0..self.d {
                    r2 += self.dd[k][(i, j)] * inv_l2[k];
                }
                match self.family {
                    KernelFamily::Matern52 => {
                        let s = (5.0 * r2).sqrt();
                        let e = (-s).exp();
                        let ksig = sig2 * (1.0 + s + s * s / 3.0) * e;
                        let lfac = (5.0 / 3.0) * sig2 * e * (1.0 + s);
                        grad[self.d] += w * ksig;
                        for k in 0..self.d {
                            grad[k] += w * lfac * self.dd[k][(i, j)] * inv_l2[k];
                        }
                    }
                    KernelFamily::SquaredExponential => {
                        let ksig = sig2 * (-0.5 * r2).exp();
                        grad[self.d] += w * ksig;
                        for k in 0..self.d {
                            grad[k] += w * ksig * self.dd[k][(i, j)] * inv_l2[k];
                        }
                    }
                }
            }
        }
        // Off-diagonal accumulations above carried an implicit factor 2·½ = 1
        // already, so only the noise term still needs its ½.
        grad[self.d + 1] = 0.5 * noise * diag_w;
        Ok((lml, grad))
    }
}

fn clamp_theta(theta: &mut [f64], d: usize) {
    for t in theta[..d].iter_mut() {
        *t = t.clamp(LOG_LENGTHSCALE_BOUNDS.0, LOG_LENGTHSCALE_BOUNDS.1);
    }
    theta[d] = theta[d].clamp(LOG_SIGNAL_BOUNDS.0, LOG_SIGNAL_BOUNDS.1);
    theta[d + 1] = theta[d + 1].clamp(LOG_NOISE_BOUNDS.0, LOG_NOISE_BOUNDS.1);
}

/// Projected gradient ascent with a backtracking/expanding step. Returns the
/// best point and its likelihood; failures to factorize reject the step.
fn ascend(ws: &Workspace, theta0: Vec<f64>, max_evals: usize) -> (Vec<f64>, f64) {
    let d = ws.d;
    let mut theta = theta0;
    clamp_theta(&mut theta, d);
    let Ok((mut best, mut grad)) = ws.lml_grad(&theta) else {
        return (theta, f64::NEG_INFINITY);
    };
    let mut step = 0.1;
    let mut evals = 1usize;
    while evals < max_evals && step >= 1e-4 {
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax < 1e-8 {
            break;
        }
        let mut cand: Vec<f64> = theta
            .iter()
            .zip(&grad)
            .map(|(t, g)| t + step * g / gmax)
            .collect();
        clamp_theta(&mut cand, d);
        evals += 1;
        let improved = match ws.lml(&cand) {
            Ok(v) => v > best + 1e-7 * (1.0 + best.abs()),
            Err(_) => false,
        };
        if improved {
            theta = cand;
            match ws.lml_grad(&theta) {
                Ok((v, g)) => {
                    best = v;
                    grad = g;
                }
                Err(_) => break,
            }
            evals += 1;
            step = (step * 1.5).min(1.0);
        } else {
            step *= 0.5;
        }
    }
    (theta, best)
}

// Per-restart record, interesting to tests that pin optimizer behavior.
#[cfg_attr(not(test), allow(dead_code))]
struct RestartOutcome {
    initial_lml: f64,
    final_theta: Vec<f64>,
    final_lml: f64,
}

fn fit_inner<R: Rng>(
    inputs: &[DVector<f64>],
    targets: &[f64],
    opts: &FitOptions,
    rng: &mut R,
) -> Result<(TrainedSurrogate, Vec<RestartOutcome>), SurrogateError> {
    let d = validate_training(inputs, targets)?;
    let (target_mean, target_std, scaled) = standardize(targets);
    if target_std == 0.0 {
        let surrogate = TrainedSurrogate {
            inputs: inputs.to_vec(),
            targets: DVector::from_vec(scaled),
            target_mean,
            target_std,
            family: opts.kernel,
            params: KernelParams::new(&vec![1.0; d], 1.0, NOISE_FLOOR),
            chol: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
            degenerate: true,
        };
        return Ok((surrogate, Vec::new()));
    }

    let y = DVector::from_vec(scaled);
    let ws = Workspace::new(opts.kernel, inputs, &y);
    let restarts = opts.restarts.max(1);
    let mut outcomes = Vec::with_capacity(restarts);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for r in 0..restarts {
        let mut theta0 = if r == 0 {
            match &opts.warm_start {
                Some(p) => {
                    let mut t = p.log_lengthscales.clone();
                    t.push(p.log_signal_variance);
                    t.push(p.log_noise_variance);
                    if t.len() != d + 2 {
                        return Err(SurrogateError::DimensionMismatch {
                            expected: d,
                            got: t.len().saturating_sub(2),
                        });
                    }
                    t
                }
                None => {
                    let mut t = vec![0.5f64.ln(); d];
                    t.push(0.0);
                    t.push(1e-6f64.ln());
                    t
                }
            }
        } else {
            let mut t: Vec<f64> = (0..d)
                .map(|_| rng.random_range(0.1f64.ln()..2.0f64.ln()))
                .collect();
            t.push(rng.random_range(0.3f64.ln()..3.0f64.ln()));
            t.push(rng.random_range(1e-8f64.ln()..1e-3f64.ln()));
            t
        };
        clamp_theta(&mut theta0, d);
        let initial_lml = ws.lml(&theta0).unwrap_or(f64::NEG_INFINITY);
        let (theta, lml) = ascend(&ws, theta0, opts.max_evals);
        if best.as_ref().map_or(true, |(_, b)| lml > *b) {
            best = Some((theta.clone(), lml));
        }
        outcomes.push(RestartOutcome {
            initial_lml,
            final_theta: theta,
            final_lml: lml,
        });
    }
    let (theta, _) = best.expect("at least one restart");
    if !theta[..d].iter().all(|t| t.is_finite()) {
        return Err(SurrogateError::Conditioning);
    }

    let ky = ws.gram(&theta);
    let (chol, jitter) = chol_with_jitter(&ky)?;
    let mut params = KernelParams {
        log_lengthscales: theta[..d].to_vec(),
        log_signal_variance: theta[d],
        log_noise_variance: theta[d + 1],
    };
    if jitter > 0.0 {
        // Fold the stabilizing jitter into the stored noise so the factor
        // reconstructs K + noise·I exactly.
        params.log_noise_variance = (params.noise_variance() + jitter).ln();
    }
    let alpha = chol.solve(&y);
    let surrogate = TrainedSurrogate {
        inputs: inputs.to_vec(),
        targets: y,
        target_mean,
        target_std,
        family: opts.kernel,
        params,
        chol: chol.unpack(),
        alpha,
        degenerate: false,
    };
    Ok((surrogate, outcomes))
}

/// Fits hyperparameters by maximizing the log marginal likelihood over
/// multiple starts, keeping the best. Deterministic for a given rng state.
pub fn fit<R: Rng>(
    inputs: &[DVector<f64>],
    targets: &[f64],
    opts: &FitOptions,
    rng: &mut R,
) -> Result<TrainedSurrogate, SurrogateError> {
    let mut opts = opts.clone();
    if let Some(w) = &opts.warm_start {
        // Respect the noise floor even when warm-started from older params.
        if w.noise_variance() < NOISE_FLOOR {
            let mut w = w.clone();
            w.log_noise_variance = NOISE_FLOOR.ln();
            opts.warm_start = Some(w);
        }
    }
    fit_inner(inputs, targets, &opts, rng).map(|(s, _)| s)
}

/// Exact log marginal likelihood of raw `targets` under the given
/// hyperparameters (no standardization applied).
pub fn log_marginal_likelihood(
    family: KernelFamily,
    params: &KernelParams,
    inputs: &[DVector<f64>],
    targets: &[f64],
) -> Result<f64, SurrogateError> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(SurrogateError::LengthMismatch {
            inputs: inputs.len(),
            targets: targets.len(),
        });
    }
    let y = DVector::from_vec(targets.to_vec());
    let ws = Workspace::new(family, inputs, &y);
    let mut theta = params.log_lengthscales.clone();
    theta.push(params.log_signal_variance);
    theta.push(params.log_noise_variance);
    ws.lml(&theta)
}

/// Likelihood gradient with respect to the log hyperparameters, ordered
/// [lengthscales.., signal variance, noise variance].
pub fn log_marginal_likelihood_grad(
    family: KernelFamily,
    params: &KernelParams,
    inputs: &[DVector<f64>],
    targets: &[f64],
) -> Result<(f64, Vec<f64>), SurrogateError> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(SurrogateError::LengthMismatch {
            inputs: inputs.len(),
            targets: targets.len(),
        });
    }
    let y = DVector::from_vec(targets.to_vec());
    let ws = Workspace::new(family, inputs, &y);
    let mut theta = params.log_lengthscales.clone();
    theta.push(params.log_signal_variance);
    theta.push(params.log_noise_variance);
    ws.lml_grad(&theta)
}

impl TrainedSurrogate {
    /// Builds the model at fixed hyperparameters, skipping optimization.
    pub fn with_params(
        family: KernelFamily,
        inputs: &[DVector<f64>],
        targets: &[f64],
        params: KernelParams,
    ) -> Result<Self, SurrogateError> {
        let d = validate_training(inputs, targets)?;
        if params.dim() != d {
            return Err(SurrogateError::DimensionMismatch {
                expected: d,
                got: params.dim(),
            });
        }
        let (target_mean, target_std, scaled) = standardize(targets);
        if target_std == 0.0 {
            return Ok(Self {
                inputs: inputs.to_vec(),
                targets: DVector::from_vec(scaled),
                target_mean,
                target_std,
                family,
                params,
                chol: DMatrix::zeros(0, 0),
                alpha: DVector::zeros(0),
                degenerate: true,
            });
        }
        let y = DVector::from_vec(scaled);
        let ws = Workspace::new(family, inputs, &y);
        let mut theta = params.log_lengthscales.clone();
        theta.push(params.log_signal_variance);
        theta.push(params.log_noise_variance);
        let ky = ws.gram(&theta);
        let (chol, jitter) = chol_with_jitter(&ky)?;
        let mut params = params;
        if jitter > 0.0 {
            params.log_noise_variance = (params.noise_variance() + jitter).ln();
        }
        let alpha = chol.solve(&y);
        Ok(Self {
            inputs: inputs.to_vec(),
            targets: y,
            target_mean,
            target_std,
            family,
            params,
            chol: chol.unpack(),
            alpha,
            degenerate: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn n(&self) -> usize {
        self.inputs.len()
    }

    /// Fitted hyperparameters, reusable as a warm start for the next fit on
    /// grown data.
    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<(), SurrogateError> {
        if x.len() != self.dim() {
            return Err(SurrogateError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Posterior mean and standard deviation at `x`, in raw (de-standardized)
    /// oriented-response units. The variance is the latent (noise-free) one.
    pub fn predict(&self, x: &DVector<f64>) -> Result<(f64, f64), SurrogateError> {
        self.check_dim(x)?;
        if self.degenerate {
            return Ok((self.target_mean, 0.0));
        }
        let kernel = Kernel::new(self.family, &self.params);
        Ok(self.predict_with(&kernel, x))
    }

    fn predict_with(&self, kernel: &Kernel, x: &DVector<f64>) -> (f64, f64) {
        let n = self.n();
        let mut kv = DVector::zeros(n);
        for (i, xi) in self.inputs.iter().enumerate() {
            kv[i] = kernel.value(x, xi);
        }
        let mean_s = kv.dot(&self.alpha);
        let v = self
            .chol
            .solve_lower_triangular(&kv)
            .expect("Cholesky factor has positive diagonal");
        let var = (kernel.diag() - v.norm_squared()).max(0.0);
        (
            self.target_mean + self.target_std * mean_s,
            self.target_std * var.sqrt(),
        )
    }

    /// Posterior mean only: skips the triangular solve the variance needs,
    /// which matters inside gradient-descent backtracking loops.
    pub fn predict_mean(&self, x: &DVector<f64>) -> Result<f64, SurrogateError> {
        self.check_dim(x)?;
        if self.degenerate {
            return Ok(self.target_mean);
        }
        let kernel = Kernel::new(self.family, &self.params);
        let mut mean_s = 0.0;
        for (i, xi) in self.inputs.iter().enumerate() {
            mean_s += kernel.value(x, xi) * self.alpha[i];
        }
        Ok(self.target_mean + self.target_std * mean_s)
    }

    /// Batch prediction; same contract as [`predict`](Self::predict).
    pub fn predict_many(&self, xs: &[DVector<f64>]) -> Result<Vec<(f64, f64)>, SurrogateError> {
        if self.degenerate {
            for x in xs {
                self.check_dim(x)?;
            }
            return Ok(vec![(self.target_mean, 0.0); xs.len()]);
        }
        let kernel = Kernel::new(self.family, &self.params);
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            self.check_dim(x)?;
            out.push(self.predict_with(&kernel, x));
        }
        Ok(out)
    }

    /// Analytic gradient of the posterior mean at `x`, de-standardized.
    pub fn posterior_mean_grad(&self, x: &DVector<f64>) -> Result<DVector<f64>, SurrogateError> {
        self.check_dim(x)?;
        if self.degenerate {
            return Ok(DVector::zeros(x.len()));
        }
        let kernel = Kernel::new(self.family, &self.params);
        let mut grad = DVector::zeros(x.len());
        for (i, xi) in self.inputs.iter().enumerate() {
            grad.axpy(self.alpha[i], &kernel.grad_x(x, xi), 1.0);
        }
        Ok(grad * self.target_std)
    }

    /// Structured-text summary for reproducibility audits: hyperparameters,
    /// training size and a checksum of the training set.
    pub fn dump(&self) -> String {
        let mut hasher = Sha256::new();
        for x in &self.inputs {
            for v in x.iter() {
                hasher.update(v.to_le_bytes());
            }
        }
        for y in self.targets.iter() {
            hasher.update(y.to_le_bytes());
        }
        let checksum = hasher.finalize();
        let mut out = String::from("surrogate v1\n");
        out.push_str(&format!(
            "kernel {}\n",
            match self.family {
                KernelFamily::Matern52 => "matern52",
                KernelFamily::SquaredExponential => "squared_exponential",
            }
        ));
        out.push_str(&format!("n {}\n", self.n()));
        out.push_str(&format!("degenerate {}\n", self.degenerate));
        let ls = self
            .params
            .lengthscales()
            .iter()
            .map(|l| format!("{l}"))
            .collect::<Vec<_>>()
            .join(" ");
        out.push_str(&format!("lengthscales {ls}\n"));
        out.push_str(&format!("signal_variance {}\n", self.params.signal_variance()));
        out.push_str(&format!("noise_variance {}\n", self.params.noise_variance()));
        out.push_str(&format!("target_mean {}\n", self.target_mean));
        out.push_str(&format!("target_std {}\n", self.target_std));
        out.push_str(&format!("training_checksum {checksum:x}\n"));
        out
    }
}
