//! Anderson mixing on the preconditioned fixed-point map `G(z) = z - sigma F(z)`,
//! with `sigma` estimated once at the start (see [`crate::solve_scalar_jacobian`]).

use std::collections::VecDeque;

use log::trace;
use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SolverError};
use crate::linear::inf_norm;
use crate::problem::{Evaluator, Method, RootProblem, SolveReport, System};
use crate::scalar::{guarded_eval, initial_sigma};

/// Relative singular-value floor below which the mixing problem counts as rank deficient.
const MIXING_RCOND: f64 = 1e-10;

fn mixing_coefficients(cols: &VecDeque<(DVector<f64>, DVector<f64>)>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let d = r.len();
    let dr = DMatrix::from_fn(d, cols.len(), |i, c| cols[c].0[i]);
    let svd = dr.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin < MIXING_RCOND * smax {
        return None;
    }
    svd.solve(r, 0.0).ok().filter(|g| g.iter().all(|v| v.is_finite()))
}

pub fn solve_anderson<S: System>(p: &RootProblem<S>, memory: usize) -> Result<SolveReport> {
    p.validate()?;
    if memory == 0 {
        return Err(SolverError::InvalidConfig("Anderson memory must be at least 1".into()));
    }
    let method = Method::Anderson { memory };
    let mut ev = Evaluator::new(&p.system);
    let mut z = p.z0.clone();
    let mut f = ev.eval(&z, 0)?;
    let report = |z: DVector<f64>, f: &DVector<f64>, it: usize, evals: usize, converged: bool| SolveReport {
        residual_norm: inf_norm(f),
        solution: z,
        iterations: it,
        evaluations: evals,
        converged,
        method,
    };
    if inf_norm(&f) <= p.tol {
        return Ok(report(z, &f, 0, ev.evals, true));
    }
    let sigma = initial_sigma(&mut ev, &z, &f, p.fd_step);
    let mut best = (z.clone(), f.clone(), f.norm());
    let mut history: VecDeque<(DVector<f64>, DVector<f64>)> = VecDeque::with_capacity(memory);
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    for it in 1..=p.max_iter {
        // fixed-point residual r = G(z) - z and image g = G(z)
        let r = &f * (-sigma);
        let g = &z + &r;
        if let Some((pr, pg)) = prev.take() {
            if history.len() == memory {
                history.pop_front();
            }
            history.push_back((&r - pr, &g - pg));
        }
        let next = if history.is_empty() {
            g.clone()
        } else {
            match mixing_coefficients(&history, &r) {
                Some(gamma) => {
                    let mut mixed = g.clone();
                    for (c, (_, dg)) in history.iter().enumerate() {
                        mixed.axpy(-gamma[c], dg, 1.0);
                    }
                    mixed
                }
                None => {
                    trace!("anderson: rank-deficient mixing at iteration {it}, plain step");
                    history.clear();
                    g.clone()
                }
            }
        };
        prev = Some((r, g));
        let Some((nz, nf)) = guarded_eval(&mut ev, &best.0, best.2, next, it)? else {
            trace!("anderson: diverged at iteration {it}");
            return Ok(report(best.0, &best.1, it, ev.evals, false));
        };
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
