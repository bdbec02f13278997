use crate::error::{MvmfError, Result};

/// Training and protocol hyperparameters. `Default` holds the MovieLens
/// configuration (K = 6, Adam 0.5/0.99/1e-8, step 0.05, alpha 0.1,
/// lambda1 = 1, lambda2 = 10, rho = 1, 10 iterations, 20 epochs, 1024-bit keys).
///
/// One epoch is one communication round: every client uploads once and the
/// server takes one Adam step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub k: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Uncertainty weight on unrated items.
    pub alpha: f64,
    /// Adam step size for the server-side U and Q updates.
    pub gamma: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Sampled unrated items per rated item (may be fractional).
    pub rho: f64,
    /// Carried for configuration fidelity and logged in output headers; the
    /// simulator does not loop over it (one upload per epoch).
    pub iterations: usize,
    pub epochs: usize,
    /// Paillier modulus length in bits.
    pub keysize: usize,
    /// Plain gradient step of the client-side P update in SGD mode.
    pub sgd_step: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            k: 6,
            lambda1: 1.0,
            lambda2: 10.0,
            alpha: 0.1,
            gamma: 0.05,
            beta1: 0.5,
            beta2: 0.99,
            epsilon: 1e-8,
            rho: 1.0,
            iterations: 10,
            epochs: 20,
            keysize: 1024,
            sgd_step: 0.005,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MvmfError::InvalidHyperparameter(msg));
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} not in (0, 1)", self.alpha));
        }
        if !(self.lambda1 >= 0.0) || !(self.lambda2 >= 0.0) {
            return bad("regularization weights must be non-negative".into());
        }
        if !(self.gamma > 0.0) {
            return bad(format!("gamma = {} must be positive", self.gamma));
        }
        if !(self.sgd_step > 0.0) {
            return bad(format!("sgd_step = {} must be positive", self.sgd_step));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam decay rates must lie in [0, 1)".into());
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return bad(format!("rho = {} must be a non-negative number", self.rho));
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        Ok(())
    }
}
