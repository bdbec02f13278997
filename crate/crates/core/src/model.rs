use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{MvmfError, Result};
use crate::scalar::Real;

/// The four latent factor matrices sharing latent dimension `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel<T: Real> {
    /// `n x K` user factors.
    pub p: DMatrix<T>,
    /// `m x K` item factors.
    pub q: DMatrix<T>,
    /// `l_x x K` user-attribute factors.
    pub u: DMatrix<T>,
    /// `l_y x K` item-feature factors.
    pub v: DMatrix<T>,
}

impl<T: Real> FactorModel<T> {
    pub fn new(p: DMatrix<T>, q: DMatrix<T>, u: DMatrix<T>, v: DMatrix<T>) -> Result<Self> {
        let k = p.ncols();
        if q.ncols() != k || u.ncols() != k || v.ncols() != k {
            return Err(MvmfError::Dimension(format!(
                "latent widths differ: P {}, Q {}, U {}, V {}",
                k,
                q.ncols(),
                u.ncols(),
                v.ncols()
            )));
        }
        let model = Self { p, q, u, v };
        if !model.is_finite() {
            return Err(MvmfError::NonFinite("factor model"));
        }
        Ok(model)
    }

    pub fn zeros(n: usize, m: usize, l_x: usize, l_y: usize, k: usize) -> Self {
        Self {
            p: DMatrix::zeros(n, k),
            q: DMatrix::zeros(m, k),
            u: DMatrix::zeros(l_x, k),
            v: DMatrix::zeros(l_y, k),
        }
    }

    /// I.i.d. uniform entries on `[0, 0.1]`.
    pub fn init_uniform<R: Rng + ?Sized>(
        n: usize,
        m: usize,
        l_x: usize,
        l_y: usize,
        k: usize,
        rng: &mut R,
    ) -> Self {
        let mut draw = |rows: usize| DMatrix::from_fn(rows, k, |_, _| T::of(rng.gen_range(0.0..=0.1)));
        let p = draw(n);
        let q = draw(m);
        let u = draw(l_x);
        let v = draw(l_y);
        Self { p, q, u, v }
    }

    pub fn k(&self) -> usize {
        self.p.ncols()
    }

    pub fn p_row(&self, i: usize) -> DVector<T> {
        self.p.row(i).transpose()
    }

    pub fn q_row(&self, j: usize) -> DVector<T> {
        self.q.row(j).transpose()
    }

    pub fn u_row(&self, d: usize) -> DVector<T> {
        self.u.row(d).transpose()
    }

    pub fn v_row(&self, d: usize) -> DVector<T> {
        self.v.row(d).transpose()
    }

    pub fn is_finite(&self) -> bool {
        [&self.p, &self.q, &self.u, &self.v]
            .iter()
            .all(|m| m.iter().all(|x| x.is_finite()))
    }

    /// Largest absolute entry difference over all four matrices.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let pairs = [
            (&self.p, &other.p),
            (&self.q, &other.q),
            (&self.u, &other.u),
            (&self.v, &other.v),
        ];
        let mut worst = T::zero();
        for (a, b) in pairs {
            for (x, y) in a.iter().zip(b.iter()) {
                let d = (*x - *y).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }
}
