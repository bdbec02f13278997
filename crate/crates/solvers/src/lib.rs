//! Root finders for square nonlinear systems `F(z) = 0`.
//!
//! All methods share [`RootProblem`] and return a [`SolveReport`]. Hitting the
//! iteration cap is not an error; a report with `converged == true` always
//! satisfies `|F(z)|_inf <= tol`.

mod anderson;
mod broyden;
mod error;
mod linear;
mod powell;
mod problem;
mod scalar;

pub use anderson::solve_anderson;
pub use broyden::solve_broyden_bad;
pub use error::{Result, SolverError};
pub use powell::solve_powell_hybrid;
pub use problem::{
    fd_jacobian, FnSystem, Method, RootProblem, SolveReport, System, DEFAULT_ANDERSON_MEMORY, DEFAULT_FD_STEP,
    DEFAULT_TOL,
};
pub use scalar::{solve_scalar_jacobian, DIVERGENCE_FACTOR};

/// Runs `method` on `problem`.
pub fn solve<S: System>(problem: &RootProblem<S>, method: Method) -> Result<SolveReport> {
    match method {
        Method::PowellHybrid => solve_powell_hybrid(problem),
        Method::BroydenBad => solve_broyden_bad(problem),
        Method::ScalarJacobian => solve_scalar_jacobian(problem),
        Method::Anderson { memory } => solve_anderson(problem, memory),
    }
}
