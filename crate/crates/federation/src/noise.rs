use mvmf_core::PlainBundle;
use rand::Rng;

/// Laplace noise on uploaded gradients. `scale == 0` disables it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub scale: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self { scale: 0.0, seed: 0 }
    }

    pub fn is_active(&self) -> bool {
        self.scale > 0.0
    }
}

/// One draw from Laplace(0, b) by inverting the CDF.
pub fn laplace<R: Rng + ?Sized>(rng: &mut R, b: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    // u uniform on (-1/2, 1/2), excluding the endpoint that maps to infinity
    let u: f64 = loop {
        let u = rng.gen::<f64>() - 0.5;
        if u > -0.5 {
            break u;
        }
    };
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Adds i.i.d. Laplace(b) noise to every entry of every gradient in the bundle.
pub fn perturb_bundle<R: Rng + ?Sized>(bundle: &mut PlainBundle<f64>, b: f64, rng: &mut R) {
    if b == 0.0 {
        return;
    }
    for (_, g) in bundle.q_grads.iter_mut().chain(bundle.u_grads.iter_mut()) {
        for v in g.iter_mut() {
            *v += laplace(rng, b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn laplace_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = 1.5;
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| laplace(&mut rng, b)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let mad = xs.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02);
        // E|X| = b, Var = 2 b^2
        assert!((mad - b).abs() < 0.02);
        assert!((var - 2.0 * b * b).abs() < 0.1);
    }

    #[test]
    fn zero_scale_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(laplace(&mut rng, 0.0), 0.0);
    }
}
