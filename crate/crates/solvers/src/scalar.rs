//! Fixed-point iteration `z <- z - sigma F(z)` with one scalar standing in for
//! the inverse Jacobian, re-estimated by the secant rule `sigma = s.s / s.y`.

use log::trace;
use nalgebra::DVector;

use crate::error::Result;
use crate::linear::{directional_inverse, inf_norm};
use crate::problem::{Evaluator, Method, RootProblem, SolveReport, System};

/// Residual growth over the best iterate that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// Halvings toward the best iterate tried before declaring divergence.
const MAX_BACKTRACK: usize = 30;

/// Divergence guard. A candidate whose residual exceeds `DIVERGENCE_FACTOR`
/// times the best so far (or is not finite) is pulled halfway back toward the
/// best iterate, repeatedly. `Ok(None)` means the guard gave up.
pub(crate) fn guarded_eval<S: System>(
    ev: &mut Evaluator<S>,
    best_z: &DVector<f64>,
    best_norm: f64,
    candidate: DVector<f64>,
    iteration: usize,
) -> Result<Option<(DVector<f64>, DVector<f64>)>> {
    let mut z = candidate;
    let mut finite_seen = false;
    for _ in 0..=MAX_BACKTRACK {
        if let Some(f) = ev.try_eval(&z) {
            finite_seen = true;
            if f.norm() <= DIVERGENCE_FACTOR * best_norm {
                return Ok(Some((z, f)));
            }
        }
        z = best_z + (&z - best_z) * 0.5;
    }
    if finite_seen {
        Ok(None)
    } else {
        Err(crate::error::SolverError::NonFinite { iteration })
    }
}

/// Initial scalar from one probe along `-F(z)`.
pub(crate) fn initial_sigma<S: System>(
    ev: &mut Evaluator<S>,
    z: &DVector<f64>,
    f: &DVector<f64>,
    h: f64,
) -> f64 {
    let fnorm = f.norm();
    if fnorm == 0.0 {
        return 1.0;
    }
    let e = h * (1.0 + z.norm()) / fnorm;
    match ev.try_eval(&(z - f * e)) {
        Some(fp) => directional_inverse(f, &fp, e),
        None => 1.0,
    }
}

pub fn solve_scalar_jacobian<S: System>(p: &RootProblem<S>) -> Result<SolveReport> {
    p.validate()?;
    let mut ev = Evaluator::new(&p.system);
    let mut z = p.z0.clone();
    let mut f = ev.eval(&z, 0)?;
    let mut best = (z.clone(), f.clone(), f.norm());
    let report = |z: DVector<f64>, f: &DVector<f64>, it: usize, evals: usize, converged: bool| SolveReport {
        residual_norm: inf_norm(f),
        solution: z,
        iterations: it,
        evaluations: evals,
        converged,
        method: Method::ScalarJacobian,
    };
    if inf_norm(&f) <= p.tol {
        return Ok(report(z, &f, 0, ev.evals, true));
    }
    let mut sigma = initial_sigma(&mut ev, &z, &f, p.fd_step);
    for it in 1..=p.max_iter {
        let s = &f * (-sigma);
        let Some((nz, nf)) = guarded_eval(&mut ev, &best.0, best.2, &z + &s, it)? else {
            trace!("scalar jacobian: diverged at iteration {it}");
            return Ok(report(best.0, &best.1, it, ev.evals, false));
        };
        let s = &nz - &z;
        let y = &nf - &f;
        let sy = s.dot(&y);
        if sy.abs() > f64::MIN_POSITIVE {
            let next = s.norm_squared() / sy;
            if next.is_finite() {
                sigma = next;
            }
        }
        z = nz;
        f = nf;
        let fnorm = f.norm();
        if inf_norm(&f) <= p.tol {
            return Ok(report(z, &f, it, ev.evals, true));
        }
        if fnorm < best.2 {
            best = (z.clone(), f.clone(), fnorm);
        }
    }
    Ok(report(best.0, &best.1, p.max_iter, ev.evals, false))
}
