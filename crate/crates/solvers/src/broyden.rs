//! Broyden's second ("bad") method: rank-one updates of the inverse Jacobian,
//! globalized by backtracking on the residual norm.

use log::trace;
use nalgebra::DVector;

use crate::error::Result;
use crate::linear::{inf_norm, pseudo_inverse};
use crate::problem::{Evaluator, Method, RootProblem, SolveReport, System};

const MIN_STEP: f64 = 1.0 / 1024.0;
const DECREASE: f64 = 1e-4;

pub fn solve_broyden_bad<S: System>(p: &RootProblem<S>) -> Result<SolveReport> {
    p.validate()?;
    let mut ev = Evaluator::new(&p.system);
    let mut z = p.z0.clone();
    let mut f = ev.eval(&z, 0)?;
    let report = |z: DVector<f64>, f: &DVector<f64>, it: usize, evals: usize, converged: bool| SolveReport {
        residual_norm: inf_norm(f),
        solution: z,
        iterations: it,
        evaluations: evals,
        converged,
        method: Method::BroydenBad,
    };
    if inf_norm(&f) <= p.tol {
        return Ok(report(z, &f, 0, ev.evals, true));
    }
    let init = |ev: &mut Evaluator<S>, z: &DVector<f64>, f: &DVector<f64>| {
        let jac = ev.jacobian(z, f, p.fd_step);
        pseudo_inverse(&jac).unwrap_or_else(|| nalgebra::DMatrix::identity(z.len(), z.len()))
    };
    let mut h = init(&mut ev, &z, &f);
    let mut fresh = true;
    for it in 1..=p.max_iter {
        let dir = -(&h * &f);
        let fnorm = f.norm();
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda >= MIN_STEP {
            let trial = &z + &dir * lambda;
            if let Some(tf) = ev.try_eval(&trial) {
                if tf.norm() <= (1.0 - DECREASE * lambda) * fnorm {
                    accepted = Some((trial, tf, lambda));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((nz, nf, lambda)) = accepted else {
            if fresh {
                trace!("broyden: line search failed on a fresh Jacobian at iteration {it}");
                return Ok(report(z, &f, it, ev.evals, false));
            }
            h = init(&mut ev, &z, &f);
            fresh = true;
            continue;
        };
        let s = dir * lambda;
        let y = &nf - &f;
        let yy = y.norm_squared();
        if yy > 0.0 {
            let r = &s - &h * &y;
            h.ger(1.0 / yy, &r, &y, 1.0);
        }
        z = nz;
        f = nf;
        fresh = false;
        if inf_norm(&f) <= p.tol {
            return Ok(report(z, &f, it, ev.evals, true));
        }
    }
    Ok(report(z, &f, p.max_iter, ev.evals, false))
}
