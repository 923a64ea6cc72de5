//! Candidate scoring and selection: refine a seed pool by gradient descent
//! on the surrogate's posterior mean, then pick the lowest Lower Confidence
//! Bound point that has not been simulated yet.
//!
//! Everything here works on oriented responses, where lower always means
//! closer to failure, so the minimizer of the LCB is the most promising
//! next simulation.

use nalgebra::DVector;
use thiserror::Error;

use crate::surrogate::TrainedSurrogate;

/// Default exclusion radius around already-simulated points (normalized
/// Euclidean distance).
pub const DEFAULT_DUPLICATE_RADIUS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum AcquisitionError {
    #[error("standard deviation must be non-negative, got {0}")]
    NegativeStd(f64),
    #[error("kappa must be non-negative, got {0}")]
    NegativeKappa(f64),
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("every pool point lies within {radius} of an already simulated point")]
    Exhausted { radius: f64 },
    #[error(transparent)]
    Surrogate(#[from] crate::surrogate::SurrogateError),
}

/// Lower Confidence Bound: the lowest score marks the candidate most likely
/// to produce a new worst case.
pub fn lcb(mean: f64, std: f64, kappa: f64) -> Result<f64, AcquisitionError> {
    if std < 0.0 {
        return Err(AcquisitionError::NegativeStd(std));
    }
    if kappa < 0.0 {
        return Err(AcquisitionError::NegativeKappa(kappa));
    }
    Ok(mean - kappa * std)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// Straight from the evaluation set.
    Evaluation,
    /// Produced by gradient refinement of an evaluation-set seed.
    Refined,
}

#[derive(Debug, Clone)]
pub struct ScoredPoint {
    pub x: DVector<f64>,
    pub mean: f64,
    pub std: f64,
    pub lcb: f64,
    pub origin: Origin,
}

#[derive(Debug, Clone, Default)]
pub struct CandidatePool {
    pub points: Vec<ScoredPoint>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct GdOptions {
    pub steps: usize,
    /// Initial step length in normalized space.
    pub step_size: f64,
    /// Minimum accepted improvement of the posterior mean; smaller gains end
    /// the descent.
    pub tol: f64,
}

impl Default for GdOptions {
    fn default() -> Self {
        Self {
            steps: 50,
            step_size: 0.05,
            tol: 1e-9,
        }
    }
}

/// Descends one point along the posterior mean. The trailing `corner_dims`
/// coordinates encode the process corner and are frozen: their gradient is
/// zeroed and their values copied through untouched, which also keeps them
/// exactly on the seed's valid code.
fn descend(
    surrogate: &TrainedSurrogate,
    seed: &DVector<f64>,
    corner_dims: usize,
    opts: &GdOptions,
) -> Result<DVector<f64>, AcquisitionError> {
    let free = seed.len() - corner_dims;
    let mut x = seed.clone();
    let mut current = surrogate.predict_mean(&x)?;
    for _ in 0..opts.steps {
        let mut grad = surrogate.posterior_mean_grad(&x)?;
        for d in free..x.len() {
            grad[d] = 0.0;
        }
        let gnorm = grad.norm();
        if gnorm < 1e-12 {
            break;
        }
        let mut eta = opts.step_size;
        let mut accepted = false;
        while eta >= opts.step_size / 1024.0 {
            let mut cand = x.clone();
            for d in 0..free {
                cand[d] = (x[d] - eta * grad[d] / gnorm).clamp(0.0, 1.0);
            }
            let value = surrogate.predict_mean(&cand)?;
            if value < current - opts.tol {
                x = cand;
                current = value;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(x)
}

/// Refines each seed by projected gradient descent and returns the union of
/// seeds and their refined versions, scored by mean, std and LCB. Descent
/// never worsens a point, so every refined mean is at or below its seed's.
pub fn refine_pool(
    surrogate: &TrainedSurrogate,
    seeds: &[DVector<f64>],
    corner_dims: usize,
    kappa: f64,
    opts: &GdOptions,
) -> Result<CandidatePool, AcquisitionError> {
    if kappa < 0.0 {
        return Err(AcquisitionError::NegativeKappa(kappa));
    }
    let mut pool = CandidatePool::default();
    for seed in seeds {
        let refined = descend(surrogate, seed, corner_dims, opts)?;
        let (mean, std) = surrogate.predict(seed)?;
        pool.points.push(ScoredPoint {
            x: seed.clone(),
            mean,
            std,
            lcb: lcb(mean, std, kappa)?,
            origin: Origin::Evaluation,
        });
        if refined != *seed {
            let (mean, std) = surrogate.predict(&refined)?;
            pool.points.push(ScoredPoint {
                x: refined,
                mean,
                std,
                lcb: lcb(mean, std, kappa)?,
                origin: Origin::Refined,
            });
        }
    }
    Ok(pool)
}

fn lexicographic(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(ord) => return ord,
        }
    }
    std::cmp::Ordering::Equal
}

fn near_history(x: &DVector<f64>, history: &[DVector<f64>], radius: f64) -> bool {
    history
        .iter()
        .any(|h| h.len() == x.len() && (x - h).norm() <= radius)
}

/// Picks the pool point with the lowest LCB among those at distance more
/// than `radius` from every history point. Ties fall back to the lower
/// predicted mean, then to lexicographic coordinate order, so selection is
/// a pure function of its inputs.
pub fn select_candidate<'a>(
    pool: &'a CandidatePool,
    history: &[DVector<f64>],
    radius: f64,
) -> Result<&'a ScoredPoint, AcquisitionError> {
    if pool.is_empty() {
        return Err(AcquisitionError::EmptyPool);
    }
    let mut best: Option<&ScoredPoint> = None;
    for p in &pool.points {
        if near_history(&p.x, history, radius) {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => match p.lcb.partial_cmp(&b.lcb) {
                Some(std::cmp::Ordering::Less) => true,
                Some(std::cmp::Ordering::Greater) => false,
                _ => match p.mean.partial_cmp(&b.mean) {
                    Some(std::cmp::Ordering::Less) => true,
                    Some(std::cmp::Ordering::Greater) => false,
                    _ => lexicographic(&p.x, &b.x) == std::cmp::Ordering::Less,
                },
            },
        };
        if better {
            best = Some(p);
        }
    }
    best.ok_or(AcquisitionError::Exhausted { radius })
}
