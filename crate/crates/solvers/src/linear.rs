use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff for the pseudo-inverse fallback.
const RCOND: f64 = 1e-13;

/// Solves `a x = b`; LU first, minimum-norm least squares if `a` is singular.
pub(crate) fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if a.is_square() {
        if let Some(x) = a.clone().lu().solve(b) {
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let cutoff = RCOND * svd.singular_values.max();
    let x = svd.solve(b, cutoff).ok()?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub(crate) fn pseudo_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if a.is_square() {
        if let Some(inv) = a.clone().try_inverse() {
            if inv.iter().all(|v| v.is_finite()) {
                return Some(inv);
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let cutoff = RCOND * svd.singular_values.max();
    svd.pseudo_inverse(cutoff).ok()
}

pub(crate) fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Estimate of `1 / (f^T J f / f^T f)`, the inverse Jacobian along `f`,
/// from one probe `F(z - e f)`. Falls back to 1 if the curvature vanishes.
pub(crate) fn directional_inverse(f: &DVector<f64>, f_probe: &DVector<f64>, e: f64) -> f64 {
    let num = e * f.norm_squared();
    let den = f.dot(&(f - f_probe));
    let sigma = num / den;
    if sigma.is_finite() && den.abs() > f64::MIN_POSITIVE {
        sigma
    } else {
        1.0
    }
}
