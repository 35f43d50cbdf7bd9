//! Minimal building blocks for the solvers: dense and convolutional layers with hand-written
//! backward passes, the ranking and KL losses, and Adam. Everything is generic over the float
//! type so the same code is trained in `f32` and gradient-checked in `f64`.

mod adam;
pub mod gradcheck;
mod layers;
mod loss;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use ndarray::{ArrayViewD, ArrayViewMutD, LinalgScalar, ScalarOperand};
use num_traits::Float;
use rand::Rng as _;
use rand_distr::StandardNormal;

pub use adam::{Adam, AdamConfig};
pub use layers::{relu, relu_backward, Conv2d, ConvGeom, ConvTranspose2d, Linear};
pub use loss::{argmax, kl_standard_normal, margin_loss, max_margin, score, LOGVAR_MAX, LOGVAR_MIN};

use crate::seed::Rng;

pub trait Real:
    Float
    + LinalgScalar
    + ScalarOperand
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + 'static
{
    fn lit(x: f64) -> Self;
    fn f64(self) -> f64;
}

impl Real for f32 {
    fn lit(x: f64) -> f32 {
        x as f32
    }
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn lit(x: f64) -> f64 {
        x
    }
    fn f64(self) -> f64 {
        self
    }
}

/// A bundle of trainable tensors. Gradients use the same type as the parameters.
pub trait Params<T: Real>: Clone + Send + Sync {
    fn tensors(&self) -> Vec<ArrayViewD<'_, T>>;
    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>>;
    fn names(&self) -> Vec<String>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for mut t in z.tensors_mut() {
            t.fill(T::zero());
        }
        z
    }

    fn add_assign(&mut self, other: &Self) {
        for (mut a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a += &b;
        }
    }

    fn scale(&mut self, s: T) {
        for mut t in self.tensors_mut() {
            t.mapv_inplace(|x| x * s);
        }
    }

    fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn shapes(&self) -> Vec<Vec<usize>> {
        self.tensors().iter().map(|t| t.shape().to_vec()).collect()
    }

    fn flatten(&self) -> Vec<T> {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter().copied().collect::<Vec<_>>())
            .collect()
    }

    /// Overwrites every tensor from a flat buffer laid out as [`Params::flatten`] writes it.
    fn load_flat(&mut self, values: &[T]) -> bool {
        if values.len() != self.count() {
            return false;
        }
        let mut at = 0;
        for mut t in self.tensors_mut() {
            for x in t.iter_mut() {
                *x = values[at];
                at += 1;
            }
        }
        true
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Sum of per-shard gradients, in shard order.
pub fn reduce<T: Real, P: Params<T>>(mut parts: Vec<(T, P)>) -> (T, P) {
    let (mut loss, mut grad) = parts.remove(0);
    for (l, g) in parts {
        loss += l;
        grad.add_assign(&g);
    }
    (loss, grad)
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub fn uniform<T: Real>(rng: &mut Rng, bound: f64) -> T {
    T::lit(rng.random_range(-bound..=bound))
}

pub fn standard_normal<T: Real>(rng: &mut Rng) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Reparameterized draw `z = μ + exp(logσ²/2)·u`, `u ~ N(0, I)`; returns `(z, u)`.
pub fn sample_latent<T: Real>(mu: &[T], logvar: &[T], rng: &mut Rng) -> (Vec<T>, Vec<T>) {
    let u: Vec<T> = (0..mu.len()).map(|_| standard_normal(rng)).collect();
    let z = mu
        .iter()
        .zip(logvar)
        .zip(&u)
        .map(|((m, lv), e)| *m + (*lv * T::lit(0.5)).exp() * *e)
        .collect();
    (z, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn degenerate_variance_returns_the_mean() {
        let mut rng = seed::stream(1, "t");
        let (z, _) = sample_latent(&[0.3f64, -2.0], &[LOGVAR_MIN, LOGVAR_MIN], &mut rng);
        assert!((z[0] - 0.3).abs() < 1e-3 && (z[1] + 2.0).abs() < 1e-3);
    }

    #[test]
    fn samples_are_reproducible_and_centered() {
        let draw = |n: usize| {
            let mut rng = seed::stream(9, "sampling");
            (0..n)
                .map(|_| sample_latent(&[1.5f64], &[0.0], &mut rng).0[0])
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(10), draw(10));
        let n = 100_000;
        let mean = draw(n).iter().sum::<f64>() / n as f64;
        // σ = 1, so three standard errors
        assert!((mean - 1.5).abs() < 3.0 / (n as f64).sqrt(), "{mean}");
    }
}
