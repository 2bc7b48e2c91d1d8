//! Seeded generation of random systems, histories, and forcings.
//!
//! Everything is driven by an explicit [`ChaCha8Rng`] so that test and
//! verification runs are reproducible from a single `u64` seed.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::phase::PhaseVector;
use crate::system::KernelSystem;

/// Period of the time modulation applied to random kernels.
const MODULATION_PERIOD: usize = 8;

/// A deterministically seeded generator.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random bounded-delay system of exactly this order, with time-varying
/// coefficients `L(n, k) = A_k * w[(n + k) mod 8]` (`w` in `[1/2, 1]`),
/// rescaled so the weighted budget `sum_k e^k ||A_k||` lands in
/// `[0.3, 0.95)`.  Declares its order and an exact closed-form uniform
/// tail bound.
pub fn random_system_with_order(
    rng: &mut ChaCha8Rng,
    max_dim: usize,
    order: u64,
) -> KernelSystem {
    let dim = rng.gen_range(1..=max_dim.max(1));
    let mut coeffs: Vec<DMatrix<f64>> = (0..order)
        .map(|_| DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    let modulation: Vec<f64> = (0..MODULATION_PERIOD)
        .map(|_| rng.gen_range(0.5..1.0))
        .collect();
    let target = rng.gen_range(0.3..0.95);

    let budget: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(k, a)| (k as f64).exp() * crate::state::mat_norm(a))
        .sum();
    if budget < 1e-9 {
        coeffs[0] = DMatrix::identity(dim, dim) * 0.5;
    }
    let budget: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(k, a)| (k as f64).exp() * crate::state::mat_norm(a))
        .sum();
    let scale = target / budget;
    for a in &mut coeffs {
        *a *= scale;
    }

    let norms: Vec<f64> = coeffs.iter().map(crate::state::mat_norm).collect();
    let eval_coeffs = std::sync::Arc::new(coeffs);
    let eval_mod = modulation.clone();
    KernelSystem::from_fn(dim, move |n, k, buf| {
        if let Some(a) = eval_coeffs.get(k as usize) {
            let w = eval_mod[((n + k) as usize) % MODULATION_PERIOD];
            buf.copy_from(a);
            *buf *= w;
        }
    })
    .with_order(order)
    .with_uniform_tail(move |gamma, l| {
        // Modulation stays in [1/2, 1], so the unmodulated sum bounds
        // every time slice.
        let sum = norms
            .iter()
            .enumerate()
            .skip(l as usize)
            .map(|(k, &nk)| (gamma * k as f64).exp() * nk)
            .sum();
        Some(sum)
    })
}

/// Random bounded-delay system with dimension up to `max_dim` and order
/// drawn from `1..=max_order`.
pub fn random_system(rng: &mut ChaCha8Rng, max_dim: usize, max_order: u64) -> KernelSystem {
    let order = rng.gen_range(1..=max_order.max(1));
    random_system_with_order(rng, max_dim, order)
}

/// Random time-invariant bounded-delay system with entrywise nonnegative
/// coefficients, scaled so `sum_k ||A_k||` lands in `[0.3, 0.9)`.  On
/// such systems the constant all-ones forcing attains the uniform gain
/// exactly.
pub fn random_contractive_nonneg(
    rng: &mut ChaCha8Rng,
    max_dim: usize,
    max_order: u64,
) -> KernelSystem {
    let dim = rng.gen_range(1..=max_dim.max(1));
    let order = rng.gen_range(1..=max_order.max(1));
    let mut coeffs: Vec<DMatrix<f64>> = (0..order)
        .map(|_| DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(0.0..1.0)))
        .collect();
    let total: f64 = coeffs.iter().map(crate::state::mat_norm).sum();
    let target = rng.gen_range(0.3..0.9);
    if total < 1e-9 {
        coeffs[0] = DMatrix::identity(dim, dim) * target;
    } else {
        let scale = target / total;
        for a in &mut coeffs {
            *a *= scale;
        }
    }
    KernelSystem::from_bounded_delay(coeffs).expect("square nonempty coefficients")
}

/// Random history with a handful of nonzero coordinates at depths up to
/// `max_depth`.
pub fn random_phase(rng: &mut ChaCha8Rng, dim: usize, max_depth: u64) -> PhaseVector {
    let mut phi = PhaseVector::zero(dim);
    for _ in 0..rng.gen_range(1..=4u32) {
        let depth = rng.gen_range(0..=max_depth);
        let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let _ = phi.set_coord(depth, v);
    }
    phi
}

/// Random dense state forcing of the given length.
pub fn random_forcing(rng: &mut ChaCha8Rng, dim: usize, len: usize) -> Vec<DVector<f64>> {
    (0..len)
        .map(|_| DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Random sparse phase-space forcing: each step holds up to three nonzero
/// coordinates at depths up to `max_depth`.
pub fn random_phase_sequence(
    rng: &mut ChaCha8Rng,
    dim: usize,
    len: usize,
    max_depth: u64,
) -> Vec<PhaseVector> {
    (0..len)
        .map(|_| {
            let mut phase = PhaseVector::zero(dim);
            for _ in 0..rng.gen_range(0..=3u32) {
                let depth = rng.gen_range(0..=max_depth);
                let mut v = DVector::zeros(dim);
                v[rng.gen_range(0..dim)] = rng.gen_range(-1.0..1.0);
                let _ = phase.set_coord(depth, v);
            }
            phase
        })
        .collect()
}
