use mvmf_core::nalgebra::{DMatrix, DVector};
use mvmf_solvers::System;

use crate::error::{AttackError, Result};
use crate::observation::{ServerObservation, UserUploads};
use crate::scenario::WeightVariant;
use crate::smoothing::{guard, smooth_weight, two_valued_rating};

/// Smallest magnitude allowed for a latent component used as a divisor.
pub const DIVISOR_FLOOR: f64 = 1e-9;

/// Server-side quantities of the two-round attack on plain-gradient clients.
///
/// Every upload of round `t-1` is parallel to the user's latent vector `p`, so
/// `pull[n] = sum_j f_n(j) q_j + lambda1 sum_d f_n(d) u_d` (previous round)
/// equals `p_n` times the data pull on `p`. Hence the client's next vector is
/// `p (1 - 2 step lambda2) + 2 step pull[n] / p_n` for any `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoRoundView {
    pub step: f64,
    pub lambda2: f64,
    /// `K x K`, row `n` is `pull[n]`.
    pub pull: DMatrix<f64>,
    pub prev: UserUploads,
    pub cur: UserUploads,
    pub q_prev: DMatrix<f64>,
    pub q_cur: DMatrix<f64>,
    pub u_prev: DMatrix<f64>,
}

impl TwoRoundView {
    pub fn new(obs: &ServerObservation, user: usize) -> Result<Self> {
        let prev = obs.previous_uploads(user)?;
        let cur = obs.uploads(user)?;
        let round = obs.previous.as_ref().expect("previous uploads exist");
        let q_rows = DMatrix::from_fn(prev.items.len(), obs.k(), |s, c| round.q[(prev.items[s], c)]);
        let pull = prev.item_grads.transpose() * q_rows + prev.attr_grads.transpose() * &round.u * obs.hyper.lambda1;
        Ok(Self {
            step: obs.hyper.sgd_step,
            lambda2: obs.hyper.lambda2,
            pull,
            q_prev: round.q.clone(),
            u_prev: round.u.clone(),
            q_cur: obs.current.q.clone(),
            prev,
            cur,
        })
    }

    pub fn decay(&self) -> f64 {
        1.0 - 2.0 * self.step * self.lambda2
    }

    /// Latent vector after the client's update, predicted from `p` through
    /// component `n` of the pull.
    pub fn next_latent(&self, p: &DVector<f64>, n: usize) -> DVector<f64> {
        let pn = guard(p[n], DIVISOR_FLOOR);
        p * self.decay() + self.pull.row(n).transpose() * (2.0 * self.step / pn)
    }

    /// Scales `s` of `p = s v`, `v` the previous upload direction, for which
    /// the predicted next latent vector is parallel to the current uploads.
    /// Empty when the two directions coincide or no real scale exists.
    pub fn aligned_scales(&self) -> Vec<f64> {
        let v = self.prev.direction();
        let vt = self.cur.direction();
        let n = v.iamax();
        let omega = self.pull.row(n).transpose() / v[n];
        let perp = |x: &DVector<f64>| x - &vt * vt.dot(x);
        let (pv, po) = (perp(&v), perp(&omega));
        let den = self.decay() * pv.norm_squared();
        if !(den.abs() > 1e-300) {
            return Vec::new();
        }
        let s2 = -2.0 * self.step * pv.dot(&po) / den;
        if s2 > 0.0 && s2.is_finite() {
            vec![s2.sqrt(), -s2.sqrt()]
        } else {
            Vec::new()
        }
    }

    /// Component that best conditions the divisions: the largest of `p`.
    pub fn pivot(p: &DVector<f64>) -> usize {
        p.iamax()
    }

    /// Rating of `item` implied by `p`, independent of its unknown weight.
    ///
    /// The two rounds' uploads give `c (r - a)` and `c (r - b)` with `a`, `b`
    /// the predictions before and after the client's update; the weight `c`
    /// cancels in their ratio. Returns `None` when the two coincide.
    pub fn implied_rating(&self, p: &DVector<f64>, item: usize) -> Option<f64> {
        let fp = self.prev.item_row(item)?;
        let fc = self.cur.item_row(item)?;
        let pt = self.next_latent(p, Self::pivot(p));
        let before = fp.dot(p) / p.norm_squared().max(f64::MIN_POSITIVE);
        let after = fc.dot(&pt) / pt.norm_squared().max(f64::MIN_POSITIVE);
        let a = p.dot(&self.q_prev.row(item).transpose());
        let b = pt.dot(&self.q_cur.row(item).transpose());
        let den = before - after;
        if !(den.abs() > 1e-12 * before.abs().max(after.abs()).max(f64::MIN_POSITIVE)) {
            return None;
        }
        Some((before * b - after * a) / den)
    }

    /// Rating of an item the user is known to have rated (weight one).
    pub fn rated_value(&self, p: &DVector<f64>, item: usize) -> Option<f64> {
        let fp = self.prev.item_row(item)?;
        Some(fp.dot(p) / p.norm_squared().max(f64::MIN_POSITIVE) + p.dot(&self.q_prev.row(item).transpose()))
    }

    /// Rating of `item` when its weight is known to be `alpha` (unrated, truth
    /// zero) or one (rated): both rounds are tested against each hypothesis
    /// as in [`two_valued_rating`].
    pub fn classified_rating(&self, p: &DVector<f64>, item: usize, alpha: f64, r_max: f64) -> Option<f64> {
        let fp = self.prev.item_row(item)?;
        let fc = self.cur.item_row(item)?;
        let pt = self.next_latent(p, Self::pivot(p));
        let before = fp.dot(p) / p.norm_squared().max(f64::MIN_POSITIVE);
        let after = fc.dot(&pt) / pt.norm_squared().max(f64::MIN_POSITIVE);
        let a = p.dot(&self.q_prev.row(item).transpose());
        let b = pt.dot(&self.q_cur.row(item).transpose());
        let spread = 0.5 * (self.prev.project(p).spread + self.cur.project(&pt).spread);
        let unrated_miss = 0.5 * ((before + alpha * a).abs() + (after + alpha * b).abs());
        let rated = 0.5 * ((before + a) + (after + b));
        Some(two_valued_rating(unrated_miss, rated, spread, r_max))
    }

    /// Attribute values implied by `p`.
    pub fn attr_values(&self, p: &DVector<f64>) -> DVector<f64> {
        let pp = p.norm_squared().max(f64::MIN_POSITIVE);
        &self.prev.attr_grads * p / pp + &self.u_prev * p
    }
}

/// Residual system for one fixed item: `K` equations in the previous-round
/// latent vector `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdSystem {
    item: usize,
    variant: WeightVariant,
    alpha: f64,
    r_max: f64,
    view: TwoRoundView,
    f_prev: DVector<f64>,
    f_cur: DVector<f64>,
    /// `2 step (lambda2 q_cur) - (q_cur - q_prev)` for the item.
    drift: DVector<f64>,
    /// `2 step pull[n] . q_cur` per component.
    pull_on_item: DVector<f64>,
}

impl SgdSystem {
    pub fn new(obs: &ServerObservation, user: usize, item: usize) -> Result<Self> {
        let view = TwoRoundView::new(obs, user)?;
        let missing = || AttackError::Invalid(format!("user {user} did not upload item {item} in both rounds"));
        let f_prev = view.prev.item_row(item).ok_or_else(missing)?;
        let f_cur = view.cur.item_row(item).ok_or_else(missing)?;
        let qc = view.q_cur.row(item).transpose();
        let qp = view.q_prev.row(item).transpose();
        let drift = &qc * (2.0 * view.step * view.lambda2) - (&qc - qp);
        let pull_on_item = &view.pull * &qc * (2.0 * view.step);
        Ok(Self {
            item,
            variant: obs.scenario.variant,
            alpha: obs.hyper.alpha,
            r_max: obs.r_max,
            view,
            f_prev,
            f_cur,
            drift,
            pull_on_item,
        })
    }

    pub fn item(&self) -> usize {
        self.item
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn view(&self) -> &TwoRoundView {
        &self.view
    }

    /// Starting point along the upload direction with norm `scale`.
    pub fn direction_start(&self, scale: f64) -> DVector<f64> {
        self.view.prev.direction() * scale
    }

    /// Best of the aligned scales and a log-spaced scan along the upload
    /// direction (both signs), by residual norm.
    pub fn informed_start(&self, lo: f64, hi: f64, steps: usize) -> DVector<f64> {
        let v = self.view.prev.direction();
        let steps = steps.max(2);
        let scan = (0..steps).flat_map(|i| {
            let s = lo * (hi / lo).powf(i as f64 / (steps - 1) as f64);
            [s, -s]
        });
        let mut out = DVector::zeros(self.dim());
        let mut best = (f64::INFINITY, &v * lo);
        for s in self.view.aligned_scales().into_iter().chain(scan) {
            let p = &v * s;
            self.residual(&p, &mut out);
            let norm = out.norm();
            if norm < best.0 {
                best = (norm, p);
            }
        }
        best.1
    }
}

impl System for SgdSystem {
    fn dim(&self) -> usize {
        self.f_prev.len()
    }

    fn residual(&self, p: &DVector<f64>, out: &mut DVector<f64>) {
        let decay = self.view.decay();
        let pg = p.dot(&self.drift);
        let c = match self.variant {
            WeightVariant::ObsOnly => 1.0,
            WeightVariant::InclUnc => match self.view.implied_rating(p, self.item) {
                Some(r) => smooth_weight(self.alpha, r),
                None => self.alpha,
            },
        };
        for n in 0..p.len() {
            let pn = guard(p[n], DIVISOR_FLOOR);
            let next = pn * decay + 2.0 * self.view.step * self.view.pull[(n, n)] / pn;
            let err = match self.variant {
                WeightVariant::ObsOnly => (self.f_prev[n] - self.pull_on_item[n]) / pn + pg,
                WeightVariant::InclUnc => (self.f_prev[n] - c * self.pull_on_item[n]) / pn + c * pg,
            };
            out[n] = err * next - self.f_cur[n];
        }
    }
}
