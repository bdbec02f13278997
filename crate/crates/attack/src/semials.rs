use mvmf_core::linalg::inverse_symmetric;
use mvmf_core::nalgebra::{DMatrix, DVector};
use mvmf_solvers::System;

use crate::error::{AttackError, Result};
use crate::observation::{ServerObservation, UserUploads};
use crate::scenario::WeightVariant;
use crate::smoothing::{smooth_weight, smooth_weight_slope, two_valued_rating};

#[derive(Debug, Clone, PartialEq)]
enum SlotWeights {
    /// Every slot is rated; the latent vector is linear in the unknowns.
    Unit { m_inv: DMatrix<f64> },
    /// Weights follow the smoothed indicator of each candidate rating.
    Smoothed { alpha: f64, base: DMatrix<f64> },
}

/// Residual system of the attack on one round of closed-form uploads.
///
/// Unknowns are `(r over slots, x over attributes)`. The user's latent vector
/// is the regularized least-squares fit implied by the unknowns, and each
/// residual compares component `factor` of the implied upload with the
/// observed one.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiAlsSystem {
    factor: usize,
    slots: Vec<usize>,
    /// `|slots| x K` item factors of the round.
    q: DMatrix<f64>,
    /// `l_x x K` attribute factors of the round.
    u: DMatrix<f64>,
    f_items: DVector<f64>,
    f_attrs: DVector<f64>,
    lambda1: f64,
    r_max: f64,
    weights: SlotWeights,
    uploads: UserUploads,
}

/// Latent vector and per-slot quantities at one point.
struct Implied {
    p: DVector<f64>,
    m_inv: DMatrix<f64>,
    c: DVector<f64>,
    dc: DVector<f64>,
}

impl SemiAlsSystem {
    pub fn new(obs: &ServerObservation, user: usize, factor: usize) -> Result<Self> {
        let k = obs.k();
        if factor >= k {
            return Err(AttackError::Invalid(format!("factor {factor} outside 0..{k}")));
        }
        let up = obs.uploads(user)?;
        let round = &obs.current;
        let h = obs.hyper;
        let slots = up.items.clone();
        if obs.scenario.variant == WeightVariant::InclUnc && slots.len() != obs.n_items() {
            return Err(AttackError::Observation(format!(
                "user {user} uploaded {} of {} items; the all-item attack needs every row",
                slots.len(),
                obs.n_items()
            )));
        }
        let q = DMatrix::from_fn(slots.len(), k, |s, c| round.q[(slots[s], c)]);
        let u = round.u.clone();
        let mut base = &u.transpose() * &u * h.lambda1;
        for d in 0..k {
            base[(d, d)] += h.lambda2;
        }
        let weights = match obs.scenario.variant {
            WeightVariant::ObsOnly => {
                let m = &base + q.transpose() * &q;
                SlotWeights::Unit { m_inv: inverse_symmetric(&m, "attack normal matrix")? }
            }
            WeightVariant::InclUnc => SlotWeights::Smoothed { alpha: h.alpha, base },
        };
        Ok(Self {
            factor,
            f_items: up.item_grads.column(factor).into_owned(),
            f_attrs: up.attr_grads.column(factor).into_owned(),
            slots,
            q,
            u,
            lambda1: h.lambda1,
            r_max: obs.r_max,
            weights,
            uploads: up,
        })
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    /// Item index of each rating unknown, in unknown order.
    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn n_attrs(&self) -> usize {
        self.u.nrows()
    }

    fn split<'a>(&self, z: &'a DVector<f64>) -> (mvmf_core::nalgebra::DVectorView<'a, f64>, mvmf_core::nalgebra::DVectorView<'a, f64>) {
        let s = self.slots.len();
        (z.rows(0, s), z.rows(s, self.u.nrows()))
    }

    fn implied(&self, z: &DVector<f64>) -> Option<Implied> {
        let (r, x) = self.split(z);
        let s = self.slots.len();
        let (c, dc, m_inv) = match &self.weights {
            SlotWeights::Unit { m_inv } => (DVector::from_element(s, 1.0), DVector::zeros(s), m_inv.clone()),
            SlotWeights::Smoothed { alpha, base } => {
                let c = r.map(|v| smooth_weight(*alpha, v));
                let dc = r.map(|v| smooth_weight_slope(*alpha, v));
                let scaled = DMatrix::from_fn(s, self.q.ncols(), |j, d| c[j] * self.q[(j, d)]);
                let m = base + self.q.transpose() * scaled;
                (c, dc, inverse_symmetric(&m, "attack normal matrix").ok()?)
            }
        };
        let cr = r.component_mul(&c);
        let rhs = self.q.transpose() * cr + self.u.transpose() * x * self.lambda1;
        let p = &m_inv * rhs;
        Some(Implied { p, m_inv, c, dc })
    }

    /// Latent vector implied by the unknowns.
    pub fn latent(&self, z: &DVector<f64>) -> Option<DVector<f64>> {
        self.implied(z).map(|i| i.p)
    }

    /// Starting point that knows nothing: ratings at mid-scale, attributes at 0.5.
    pub fn midscale_start(&self, r_max: f64) -> DVector<f64> {
        let s = self.slots.len();
        DVector::from_fn(s + self.u.nrows(), |i, _| if i < s { r_max / 2.0 } else { 0.5 })
    }

    /// Starting point from the stationarity of the closed-form update.
    ///
    /// At the client's optimum `sum_j f(j) q_j + lambda1 sum_d f(d) u_d` equals
    /// `lambda2 p_n p` row by row, so with the upload direction `v` the latent
    /// vector is `s v` with `s^2 = (v . sum) / lambda2`. Per-slot values then
    /// follow from the uploads; for the all-item variant each slot picks the
    /// rated or unrated explanation closer to a valid value.
    pub fn stationary_start(&self, lambda2: f64) -> DVector<f64> {
        let p = self.stationary_latent(lambda2);
        let s = self.slots.len();
        let mut z = DVector::zeros(s + self.u.nrows());
        z.rows_mut(0, s).copy_from(&self.slot_values(&p));
        z.rows_mut(s, self.u.nrows()).copy_from(&self.attr_values(&p));
        z
    }

    /// Rating per slot read off the uploads at latent vector `p`. With unit
    /// weights this is the error coefficient plus the prediction; otherwise
    /// each slot takes the rated or unrated explanation that fits.
    pub fn slot_values(&self, p: &DVector<f64>) -> DVector<f64> {
        let proj = self.uploads.project(p);
        let pred = &self.q * p;
        DVector::from_fn(self.slots.len(), |j, _| {
            let ce = proj.items[j];
            match &self.weights {
                SlotWeights::Unit { .. } => ce + pred[j],
                SlotWeights::Smoothed { alpha, .. } => {
                    two_valued_rating((ce + alpha * pred[j]).abs(), ce + pred[j], proj.spread, self.r_max)
                }
            }
        })
    }

    /// Attribute values read off the uploads at latent vector `p`.
    pub fn attr_values(&self, p: &DVector<f64>) -> DVector<f64> {
        self.uploads.project(p).attrs + &self.u * p
    }

    /// True when slot weights depend on the unknown ratings.
    pub fn is_all_item(&self) -> bool {
        matches!(self.weights, SlotWeights::Smoothed { .. })
    }

    /// Latent vector from the stationarity of the closed-form update.
    pub fn stationary_latent(&self, lambda2: f64) -> DVector<f64> {
        let up = &self.uploads;
        let v = up.direction();
        let pull = up.item_grads.transpose() * (&self.q * &v) + up.attr_grads.transpose() * (&self.u * &v) * self.lambda1;
        let scale = (pull.dot(&v) / lambda2).abs().sqrt().max(1e-6);
        v * scale
    }
}

impl System for SemiAlsSystem {
    fn dim(&self) -> usize {
        self.slots.len() + self.u.nrows()
    }

    fn residual(&self, z: &DVector<f64>, out: &mut DVector<f64>) {
        let Some(im) = self.implied(z) else {
            out.fill(f64::NAN);
            return;
        };
        let (r, x) = self.split(z);
        let pn = im.p[self.factor];
        let s = self.slots.len();
        for j in 0..s {
            let e = r[j] - self.q.row(j).transpose().dot(&im.p);
            out[j] = im.c[j] * e * pn - self.f_items[j];
        }
        for d in 0..self.u.nrows() {
            let e = x[d] - self.u.row(d).transpose().dot(&im.p);
            out[s + d] = e * pn - self.f_attrs[d];
        }
    }

    fn jacobian(&self, z: &DVector<f64>) -> Option<DMatrix<f64>> {
        let im = self.implied(z)?;
        let (r, x) = self.split(z);
        let s = self.slots.len();
        let l = self.u.nrows();
        let dim = s + l;
        let k = self.q.ncols();
        let n = self.factor;
        let pn = im.p[n];
        // Stacked factor rows, errors and weights over all residual rows.
        let mut w = DMatrix::zeros(dim, k);
        w.rows_mut(0, s).copy_from(&self.q);
        w.rows_mut(s, l).copy_from(&self.u);
        let e = &w * &im.p;
        let mut err = DVector::zeros(dim);
        let mut wt = DVector::from_element(dim, 1.0);
        for j in 0..s {
            err[j] = r[j] - e[j];
            wt[j] = im.c[j];
        }
        for d in 0..l {
            err[s + d] = x[d] - e[s + d];
        }
        // dp/dz, one column per unknown.
        let mut dp = &im.m_inv * w.transpose();
        for j in 0..s {
            let scale = im.c[j] + im.dc[j] * err[j];
            dp.column_mut(j).scale_mut(scale);
        }
        for d in 0..l {
            dp.column_mut(s + d).scale_mut(self.lambda1);
        }
        let wdp = &w * &dp;
        let dpn = dp.row(n).into_owned();
        let mut jac = DMatrix::zeros(dim, dim);
        for a in 0..dim {
            let we = wt[a] * err[a];
            for b in 0..dim {
                jac[(a, b)] = -wt[a] * pn * wdp[(a, b)] + we * dpn[b];
            }
            let own = if a < s { im.dc[a] * err[a] * pn } else { 0.0 };
            jac[(a, a)] += wt[a] * pn + own;
        }
        Some(jac)
    }
}
