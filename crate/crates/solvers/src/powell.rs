//! Powell's hybrid method: dogleg steps inside a trust region, Broyden rank-one
//! Jacobian updates, and a fresh finite-difference Jacobian after repeated
//! failures.

use log::trace;
use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linear::{inf_norm, solve};
use crate::problem::{Evaluator, Method, RootProblem, SolveReport, System};

const ACCEPT: f64 = 1e-4;
const SHRINK_BELOW: f64 = 0.25;
const EXPAND_ABOVE: f64 = 0.75;
const INITIAL_FACTOR: f64 = 100.0;

fn dogleg(newton: Option<&DVector<f64>>, cauchy: &DVector<f64>, delta: f64) -> DVector<f64> {
    let cn = cauchy.norm();
    let Some(gn) = newton else {
        return if cn > delta { cauchy * (delta / cn) } else { cauchy.clone() };
    };
    if gn.norm() <= delta {
        return gn.clone();
    }
    if cn >= delta {
        return cauchy * (delta / cn);
    }
    // |c + t (n - c)| = delta for t in [0, 1]
    let dir = gn - cauchy;
    let a = dir.norm_squared();
    let b = 2.0 * cauchy.dot(&dir);
    let c = cn * cn - delta * delta;
    let t = (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a);
    cauchy + dir * t.clamp(0.0, 1.0)
}

fn broyden_update(jac: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let ss = s.norm_squared();
    if ss > 0.0 {
        let r = y - &*jac * s;
        jac.ger(1.0 / ss, &r, s, 1.0);
    }
}

pub fn solve_powell_hybrid<S: System>(p: &RootProblem<S>) -> Result<SolveReport> {
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
        method: Method::PowellHybrid,
    };
    if inf_norm(&f) <= p.tol {
        return Ok(report(z, &f, 0, ev.evals, true));
    }
    let mut jac = ev.jacobian(&z, &f, p.fd_step);
    let mut fresh = true;
    let mut delta = INITIAL_FACTOR * z.norm().max(1.0);
    let mut failures = 0usize;
    for it in 1..=p.max_iter {
        let fnorm2 = f.norm_squared();
        let newton = solve(&jac, &(-&f));
        let grad = jac.transpose() * &f;
        let jg = &jac * &grad;
        let jg2 = jg.norm_squared();
        let cauchy = if jg2 > 0.0 { &grad * (-grad.norm_squared() / jg2) } else { DVector::zeros(z.len()) };
        let step = dogleg(newton.as_ref(), &cauchy, delta);
        let step_norm = step.norm();
        let predicted = fnorm2 - (&f + &jac * &step).norm_squared();
        let trial_z = &z + &step;
        let trial_f = ev.try_eval(&trial_z);
        let ratio = match &trial_f {
            Some(tf) if predicted > 0.0 => (fnorm2 - tf.norm_squared()) / predicted,
            _ => -1.0,
        };
        if ratio < SHRINK_BELOW {
            delta = 0.5 * delta.min(step_norm);
        } else if ratio > EXPAND_ABOVE {
            delta = delta.max(2.0 * step_norm);
        }
        if let Some(tf) = &trial_f {
            broyden_update(&mut jac, &step, &(tf - &f));
        }
        if ratio > ACCEPT {
            z = trial_z;
            f = trial_f.expect("accepted step has a finite residual");
            fresh = false;
            failures = 0;
            if inf_norm(&f) <= p.tol {
                return Ok(report(z, &f, it, ev.evals, true));
            }
        } else {
            failures += 1;
        }
        let collapsed = delta <= 1e-15 * z.norm().max(1.0) || step_norm == 0.0;
        if (failures >= 2 || collapsed) && !fresh {
            trace!("powell: refreshing Jacobian at iteration {it}");
            jac = ev.jacobian(&z, &f, p.fd_step);
            fresh = true;
            failures = 0;
            if collapsed {
                delta = INITIAL_FACTOR * z.norm().max(1.0) * 1e-3;
            }
        } else if collapsed {
            trace!("powell: trust region collapsed at iteration {it}");
            return Ok(report(z, &f, it, ev.evals, false));
        }
    }
    Ok(report(z, &f, p.max_iter, ev.evals, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dogleg_regions() {
        let gn = DVector::from_vec(vec![3.0, 4.0]);
        let cauchy = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(dogleg(Some(&gn), &cauchy, 10.0), gn);
        let short = dogleg(Some(&gn), &cauchy, 0.5);
        assert!((short - DVector::from_vec(vec![0.5, 0.0])).amax() < 1e-15);
        let mid = dogleg(Some(&gn), &cauchy, 2.0);
        assert!((mid.norm() - 2.0).abs() < 1e-12);
        let fallback = dogleg(None, &cauchy, 0.25);
        assert!((fallback.norm() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn broyden_update_satisfies_secant() {
        let mut jac = DMatrix::identity(2, 2);
        let s = DVector::from_vec(vec![1.0, 2.0]);
        let y = DVector::from_vec(vec![-1.0, 0.5]);
        broyden_update(&mut jac, &s, &y);
        assert!((&jac * &s - y).amax() < 1e-14);
    }
}
