//! Gamma and Dirichlet variates for the allocation planner.
//!
//! Hand-rolled so the draw sequence is pinned by this crate, not by a
//! dependency's internals: allocation plans must replay byte-identically
//! across versions. Normal and uniform draws are taken as `f64` and converted,
//! so the sequence is identical for every `Real` instantiation.

use crate::scalar::Real;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Unit-scale Gamma(shape) via Marsaglia–Tsang (2000). Shapes below one use
/// the Gamma(shape + 1) * U^(1/shape) boost. Panics on non-positive shape;
/// callers guarantee positivity.
pub fn gamma<T: Real, R: Rng + ?Sized>(rng: &mut R, shape: T) -> T {
    assert!(shape > T::zero(), "gamma shape must be positive, got {shape}");
    let one = T::one();
    if shape < one {
        let u = positive_uniform(rng);
        let boost = (T::of(u.ln()) / shape).exp();
        return gamma(rng, shape + one) * boost;
    }
    let d = shape - T::of(1.0 / 3.0);
    let c = one / (T::of(9.0) * d).sqrt();
    loop {
        let x = T::of(<StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng));
        let v = (one + c * x).powi(3);
        if v <= T::zero() {
            continue;
        }
        let u = positive_uniform(rng);
        let x2 = x * x;
        if T::of(u) < one - T::of(0.0331) * x2 * x2 {
            return d * v;
        }
        if T::of(u.ln()) < T::of(0.5) * x2 + d * (one - v + v.ln()) {
            return d * v;
        }
    }
}

/// Uniform in (0, 1); rejects exact zero so logarithms stay finite.
fn positive_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Dirichlet(alphas) via independent Gamma draws in index order. If every
/// draw underflows to zero (pathologically tiny alphas) the normalized alpha
/// vector is returned, keeping the result a valid probability vector.
pub fn dirichlet<T: Real, R: Rng + ?Sized>(rng: &mut R, alphas: &[T]) -> Vec<T> {
    assert!(!alphas.is_empty(), "dirichlet needs at least one component");
    let draws: Vec<T> = alphas.iter().map(|&a| gamma(rng, a)).collect();
    let total: T = draws.iter().copied().sum();
    if total > T::zero() {
        draws.into_iter().map(|g| g / total).collect()
    } else {
        let wsum: T = alphas.iter().copied().sum();
        alphas.iter().map(|&a| a / wsum).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gamma_matches_moments() {
        // Gamma(shape, 1) has mean = shape and variance = shape.
        for &shape in &[0.4f64, 1.0, 2.5, 9.0] {
            let mut rng = seeds::rng(1, "gamma-moments", shape.to_bits());
            let n = 40_000;
            let draws: Vec<f64> = (0..n).map(|_| gamma(&mut rng, shape)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((mean - shape).abs() < 0.05 * shape.max(1.0), "shape {shape}: mean {mean}");
            assert!((var - shape).abs() < 0.12 * shape.max(1.0), "shape {shape}: var {var}");
            assert!(draws.iter().all(|d| *d > 0.0 && d.is_finite()));
        }
    }

    #[test]
    fn gamma_sequence_is_seed_reproducible() {
        let mut a = ChaCha8Rng::seed_from_u64(99);
        let mut b = ChaCha8Rng::seed_from_u64(99);
        let xs: Vec<f64> = (0..64).map(|_| gamma(&mut a, 1.7)).collect();
        let ys: Vec<f64> = (0..64).map(|_| gamma(&mut b, 1.7)).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn f32_and_f64_share_the_draw_sequence() {
        // Underlying uniform/normal draws are f64 in both instantiations, so
        // the accept/reject path and draw count match across scalar widths.
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..32 {
            let x32: f32 = gamma(&mut a, 0.7f32);
            let x64: f64 = gamma(&mut b, 0.7f64);
            assert!((f64::from(x32) - x64).abs() < 1e-5, "{x32} vs {x64}");
        }
    }

    #[test]
    fn dirichlet_is_a_probability_vector() {
        let mut rng = seeds::rng(3, "dirichlet", 0);
        for _ in 0..200 {
            let p = dirichlet(&mut rng, &[0.3f64, 1.0, 2.5, 4.0]);
            assert_eq!(p.len(), 4);
            assert!(p.iter().all(|x| *x >= 0.0 && x.is_finite()));
            let s: f64 = p.iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "sum {s}");
        }
    }

    #[test]
    fn dirichlet_mean_tracks_alpha_proportions() {
        let alphas = [2.0f64, 6.0];
        let mut rng = seeds::rng(4, "dirichlet-mean", 0);
        let n = 20_000;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += dirichlet(&mut rng, &alphas)[0];
        }
        let mean = acc / n as f64;
        assert!((mean - 0.25).abs() < 0.01, "mean {mean}");
    }

    #[test]
    #[should_panic(expected = "gamma shape must be positive")]
    fn gamma_rejects_nonpositive_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let _ = gamma(&mut rng, 0.0f64);
    }
}
