use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SolverError};

/// Default residual tolerance in the max-norm.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Relative finite-difference step: `h_k = step * (1 + |z_k|)`.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// A square system `F: R^d -> R^d`.
pub trait System {
    fn dim(&self) -> usize;

    /// Writes `F(z)` into `out` (length `dim`).
    fn residual(&self, z: &DVector<f64>, out: &mut DVector<f64>);

    /// Analytic Jacobian, if the system has one. Solvers fall back to forward
    /// differences otherwise.
    fn jacobian(&self, _z: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

/// Adapts a closure returning `F(z)` to [`System`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&DVector<f64>) -> DVector<f64>> FnSystem<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&DVector<f64>) -> DVector<f64>> System for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn residual(&self, z: &DVector<f64>, out: &mut DVector<f64>) {
        out.copy_from(&(self.f)(z));
    }
}

/// System plus starting point and stopping rule.
pub struct RootProblem<S> {
    pub system: S,
    pub z0: DVector<f64>,
    /// Converged when `|F(z)|_inf <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
}

impl<S: System> RootProblem<S> {
    /// Defaults: `tol = 1e-8`, `max_iter = 200 d`.
    pub fn new(system: S, z0: DVector<f64>) -> Result<Self> {
        let d = system.dim();
        if d == 0 {
            return Err(SolverError::InvalidConfig("system dimension must be at least 1".into()));
        }
        if z0.len() != d {
            return Err(SolverError::Dimension(format!("z0 has {} entries for a {d}-dimensional system", z0.len())));
        }
        Ok(Self {
            system,
            z0,
            tol: DEFAULT_TOL,
            max_iter: 200 * d,
            fd_step: DEFAULT_FD_STEP,
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(SolverError::InvalidConfig(format!("tolerance {} must be positive", self.tol)));
        }
        if !(self.fd_step > 0.0) {
            return Err(SolverError::InvalidConfig(format!("finite-difference step {} must be positive", self.fd_step)));
        }
        if self.z0.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite { iteration: 0 });
        }
        Ok(())
    }
}

/// Counts residual evaluations and rejects non-finite outputs.
pub(crate) struct Evaluator<'a, S> {
    pub system: &'a S,
    pub evals: usize,
}

impl<'a, S: System> Evaluator<'a, S> {
    pub fn new(system: &'a S) -> Self {
        Self { system, evals: 0 }
    }

    /// `F(z)`; `None` when any entry is not finite.
    pub fn try_eval(&mut self, z: &DVector<f64>) -> Option<DVector<f64>> {
        let mut out = DVector::zeros(self.system.dim());
        self.system.residual(z, &mut out);
        self.evals += 1;
        out.iter().all(|v| v.is_finite()).then_some(out)
    }

    pub fn eval(&mut self, z: &DVector<f64>, iteration: usize) -> Result<DVector<f64>> {
        self.try_eval(z).ok_or(SolverError::NonFinite { iteration })
    }

    pub fn jacobian(&mut self, z: &DVector<f64>, f: &DVector<f64>, step: f64) -> DMatrix<f64> {
        if let Some(j) = self.system.jacobian(z) {
            return j;
        }
        self.evals += z.len();
        fd_jacobian_at(self.system, z, f, step)
    }
}

/// Forward-difference Jacobian with per-coordinate step `h (1 + |z_k|)`.
pub fn fd_jacobian<S: System>(system: &S, z: &DVector<f64>, h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(SolverError::InvalidConfig(format!("finite-difference step {h} must be positive")));
    }
    if z.len() != system.dim() {
        return Err(SolverError::Dimension(format!("z has {} entries for a {}-dimensional system", z.len(), system.dim())));
    }
    let mut f = DVector::zeros(system.dim());
    system.residual(z, &mut f);
    Ok(fd_jacobian_at(system, z, &f, h))
}

fn fd_jacobian_at<S: System>(system: &S, z: &DVector<f64>, f: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let d = z.len();
    let mut jac = DMatrix::zeros(system.dim(), d);
    let mut probe = z.clone();
    let mut out = DVector::zeros(system.dim());
    for k in 0..d {
        let step = h * (1.0 + z[k].abs());
        probe[k] = z[k] + step;
        // use the representable step to limit rounding error
        let actual = probe[k] - z[k];
        system.residual(&probe, &mut out);
        let mut col = jac.column_mut(k);
        col.copy_from(&((&out - f) / actual));
        probe[k] = z[k];
    }
    jac
}

/// Which iteration to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    PowellHybrid,
    BroydenBad,
    ScalarJacobian,
    Anderson { memory: usize },
}

pub const DEFAULT_ANDERSON_MEMORY: usize = 5;

impl Method {
    pub const ALL: [Method; 4] = [
        Method::PowellHybrid,
        Method::BroydenBad,
        Method::ScalarJacobian,
        Method::Anderson { memory: DEFAULT_ANDERSON_MEMORY },
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::PowellHybrid => "powell-hybrid",
            Method::BroydenBad => "broyden-bad",
            Method::ScalarJacobian => "scalar-jacobian",
            Method::Anderson { .. } => "anderson",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "powell-hybrid" | "hybr" | "powell" => Ok(Method::PowellHybrid),
            "broyden-bad" | "broyden2" | "broyden" => Ok(Method::BroydenBad),
            "scalar-jacobian" | "scalar" | "diagbroyden" => Ok(Method::ScalarJacobian),
            "anderson" => Ok(Method::Anderson { memory: DEFAULT_ANDERSON_MEMORY }),
            other => Err(SolverError::InvalidConfig(format!("unknown solver {other:?}"))),
        }
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: DVector<f64>,
    /// `|F(solution)|_inf`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub method: Method,
}
