//! Stationary covariance kernels with per-dimension (ARD) lengthscales.
//!
//! Hyperparameters live on the log scale so the fit can optimize them
//! unconstrained; [`Kernel`] is the exponentiated, ready-to-evaluate form.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub const SQRT5: f64 = 2.23606797749979;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Matern52,
    SquaredExponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub log_lengthscales: Vec<f64>,
    pub log_signal_variance: f64,
    pub log_noise_variance: f64,
}

impl KernelParams {
    pub fn new(lengthscales: &[f64], signal_variance: f64, noise_variance: f64) -> Self {
        Self {
            log_lengthscales: lengthscales.iter().map(|l| l.ln()).collect(),
            log_signal_variance: signal_variance.ln(),
            log_noise_variance: noise_variance.ln(),
        }
    }

    pub fn lengthscales(&self) -> Vec<f64> {
        self.log_lengthscales.iter().map(|l| l.exp()).collect()
    }

    pub fn signal_variance(&self) -> f64 {
        self.log_signal_variance.exp()
    }

    pub fn noise_variance(&self) -> f64 {
        self.log_noise_variance.exp()
    }

    pub fn dim(&self) -> usize {
        self.log_lengthscales.len()
    }
}

/// Evaluation-ready kernel: lengthscales and signal variance exponentiated
/// once, so hot loops avoid repeated `exp` calls.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub family: KernelFamily,
    inv_l2: Vec<f64>,
    sig2: f64,
}

impl Kernel {
    pub fn new(family: KernelFamily, params: &KernelParams) -> Self {
        let inv_l2 = params
            .log_lengthscales
            .iter()
            .map(|l| (-2.0 * l).exp())
            .collect();
        Self {
            family,
            inv_l2,
            sig2: params.signal_variance(),
        }
    }

    pub fn dim(&self) -> usize {
        self.inv_l2.len()
    }

    /// k(x, x): both families have constant variance on the diagonal.
    pub fn diag(&self) -> f64 {
        self.sig2
    }

    fn scaled_sq_dist(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let mut r2 = 0.0;
        for ((a, b), w) in x.iter().zip(y.iter()).zip(&self.inv_l2) {
            let d = a - b;
            r2 += d * d * w;
        }
        r2
    }

    pub fn value(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let r2 = self.scaled_sq_dist(x, y);
        match self.family {
            KernelFamily::Matern52 => {
                let s = (5.0 * r2).sqrt();
                self.sig2 * (1.0 + s + s * s / 3.0) * (-s).exp()
            }
            KernelFamily::SquaredExponential => self.sig2 * (-0.5 * r2).exp(),
        }
    }

    /// Gradient of k(x, y) with respect to x. Smooth everywhere, including
    /// the x = y coincidence point (both families' radial profiles have a
    /// stationary point at zero distance).
    pub fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let r2 = self.scaled_sq_dist(x, y);
        // Radial factor g such that ∂k/∂x_d = g · (x_d − y_d) / l_d².
        let g = match self.family {
            KernelFamily::Matern52 => {
                let s = (5.0 * r2).sqrt();
                -(5.0 / 3.0) * self.sig2 * (-s).exp() * (1.0 + s)
            }
            KernelFamily::SquaredExponential => -self.sig2 * (-0.5 * r2).exp(),
        };
        let mut out = DVector::zeros(x.len());
        for (d, ((a, b), w)) in x.iter().zip(y.iter()).zip(&self.inv_l2).enumerate() {
            out[d] = g * (a - b) * w;
        }
        out
    }
}
