//! Gradient messages exchanged between clients, the item server and the FL server.

use nalgebra::DVector;

/// Per-user upload: `f(i,j)` for each active item and `f(i,d_u)` for each attribute.
///
/// `V` is the payload form: a plaintext vector or a ciphertext vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle<V> {
    pub user: usize,
    pub q_grads: Vec<(usize, V)>,
    pub u_grads: Vec<(usize, V)>,
}

pub type PlainBundle<T> = GradientBundle<DVector<T>>;

impl<V> GradientBundle<V> {
    pub fn item_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.q_grads.iter().map(|(j, _)| *j)
    }
}

/// Item-server upload: `f(j,d_y)` for every `(item, feature)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemServerBundle<T: nalgebra::Scalar> {
    pub v_grads: Vec<(usize, usize, DVector<T>)>,
}
