//! Monte Carlo checks of the 1-bit embedding properties of Gaussian
//! matrices.
//!
//! * Sign product embedding: `mu* <sign(Phi u), Phi v>` with
//!   `mu* = 1 / (q0 M)` approximates `<u, v>` uniformly over unit K-sparse
//!   pairs.
//! * Consistency proximity: unit K-sparse vectors whose sign patterns
//!   differ in at most `r` of `M` positions are close, and get closer as
//!   `M` grows.
//!
//! Reports are descriptive. Trials draw from per-trial seeds and are
//! merged in trial order, so results do not depend on how the work is
//! split across threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::linalg::{self, dot};
use crate::quantizer::q0;
use crate::signal_model::{
    derive_seed, disagreements, gen_gaussian_matrix, rng_from_seed, sample_sparse_signal,
    sample_unit_sphere, BitVector, Rng, SensingMatrix, SparseSignal,
};

/// Perturbation sizes cycled through by [`consistency_proximity`].
pub const PERTURBATION_SCALES: [f64; 4] = [0.01, 0.05, 0.1, 0.3];

const PAIR_STREAM: u64 = 0x5045_5254;

/// `mu* = 1 / (q0 M)`.
pub fn mu_star(measurements: usize) -> f64 {
    1.0 / (q0() * measurements as f64)
}

/// `mu* <sign(Phi u), Phi v>`.
pub fn sign_product(phi: &SensingMatrix, u: &[f64], v: &[f64]) -> Result<f64> {
    let pu = phi.apply(u)?;
    let pv = phi.apply(v)?;
    Ok(mu_star(phi.rows()) * signed_sum(&pu, &pv))
}

fn signed_sum(pu: &[f64], pv: &[f64]) -> f64 {
    pu.iter().zip(pv).map(|(a, b)| linalg::sign(*a) * b).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeReport {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub num_pairs: usize,
    /// Largest `|mu* <sign(Phi u), Phi v> - <u, v>|` over the sampled pairs.
    pub max_deviation: f64,
    pub mean_deviation: f64,
    pub mu_star: f64,
    /// Mean of `mu* <sign(Phi u), Phi u>`; its expectation is 1.
    pub self_product_mean: f64,
    /// Mean of `mu* <sign(Phi u), Phi v>` for `v` supported off `supp(u)`;
    /// its expectation is 0. `None` when `2K > N`.
    pub disjoint_product_mean: Option<f64>,
}

struct SpeSample {
    deviation: f64,
    self_product: f64,
    disjoint_product: Option<f64>,
}

/// Samples `num_pairs` pairs of unit K-sparse vectors and summarizes how far
/// the scaled sign product strays from the inner product.
///
/// Even-numbered pairs share one support, odd-numbered pairs draw their
/// supports independently.
pub fn spe_deviation(
    phi: &SensingMatrix,
    sparsity: usize,
    num_pairs: usize,
    seed: u64,
) -> Result<SpeReport> {
    let (m, n) = (phi.rows(), phi.cols());
    if sparsity == 0 || sparsity > n {
        return invalid(format!("sparsity must lie in 1..={n}, got {sparsity}"));
    }
    if num_pairs == 0 {
        return invalid("num_pairs must be positive");
    }
    let scale = mu_star(m);
    let samples: Vec<SpeSample> = (0..num_pairs)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng_from_seed(derive_seed(&[seed, p as u64]));
            let u = sample_sparse_signal(n, sparsity, &mut rng).expect("validated sparsity");
            let v = if p % 2 == 0 {
                on_support(n, &u.support(), &mut rng)
            } else {
                sample_sparse_signal(n, sparsity, &mut rng)
                    .expect("validated sparsity")
                    .into_values()
            };
            let pu = phi.apply(u.values()).expect("dimensions match");
            let pv = phi.apply(&v).expect("dimensions match");
            let deviation = (scale * signed_sum(&pu, &pv) - dot(u.values(), &v)).abs();
            let self_product = scale * signed_sum(&pu, &pu);
            let disjoint_product = (2 * sparsity <= n).then(|| {
                let w = disjoint_from(n, &u, &mut rng);
                let pw = phi.apply(&w).expect("dimensions match");
                scale * signed_sum(&pu, &pw)
            });
            SpeSample {
                deviation,
                self_product,
                disjoint_product,
            }
        })
        .collect();

    let count = num_pairs as f64;
    let max_deviation = samples.iter().map(|s| s.deviation).fold(0.0, f64::max);
    let mean_deviation = samples.iter().map(|s| s.deviation).sum::<f64>() / count;
    let self_product_mean = samples.iter().map(|s| s.self_product).sum::<f64>() / count;
    let disjoint_product_mean = (2 * sparsity <= n).then(|| {
        samples
            .iter()
            .filter_map(|s| s.disjoint_product)
            .sum::<f64>()
            / count
    });
    Ok(SpeReport {
        m,
        n,
        k: sparsity,
        num_pairs,
        max_deviation,
        mean_deviation,
        mu_star: scale,
        self_product_mean,
        disjoint_product_mean,
    })
}

/// Unit vector with a fresh uniform direction on `support`.
fn on_support(n: usize, support: &[usize], rng: &mut Rng) -> Vec<f64> {
    let coeffs = sample_unit_sphere(support.len(), rng);
    let mut v = vec![0.0; n];
    for (&i, c) in support.iter().zip(coeffs) {
        v[i] = c;
    }
    v
}

/// Unit K-sparse vector whose support avoids `supp(u)`.
fn disjoint_from(n: usize, u: &SparseSignal, rng: &mut Rng) -> Vec<f64> {
    let taken = u.support();
    let free: Vec<usize> = (0..n).filter(|i| taken.binary_search(i).is_err()).collect();
    let picks = crate::signal_model::sample_support(free.len(), u.sparsity(), rng);
    let support: Vec<usize> = picks.into_iter().map(|i| free[i]).collect();
    on_support(n, &support, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyProximityReport {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub num_pairs: usize,
    /// Pairs passing the filter `M d_H(sign(Phi a), sign(Phi b)) <= r`.
    pub kept_pairs: usize,
    /// Largest `||a - b||` among kept pairs; 0 when none were kept.
    pub max_distance_given_consistency: f64,
    pub mean_distance_given_consistency: f64,
    /// `(K + r) / K`.
    pub bound_factor: f64,
    pub empty: bool,
}

/// Number of positions where `sign(Phi a)` and `sign(Phi b)` differ.
pub fn sign_flips(phi: &SensingMatrix, a: &[f64], b: &[f64]) -> Result<usize> {
    let sa = BitVector::from_signs_of(&phi.apply(a)?);
    let sb = BitVector::from_signs_of(&phi.apply(b)?);
    Ok(disagreements(&sa, &sb))
}

/// Draws near pairs `(a, b)` of unit K-sparse vectors and records how far
/// apart the almost-consistent ones are.
///
/// Trial `t` draws `a` uniformly, a unit direction `e` on `supp(a)`, and
/// sets `b = (a + s e) / ||a + s e||` with `s` cycling through
/// [`PERTURBATION_SCALES`]. The pairs depend on `phi_seed` and `t` only,
/// so runs at different `M` see the same pairs.
pub fn consistency_proximity(
    phi_seed: u64,
    m: usize,
    n: usize,
    k: usize,
    r: usize,
    num_trials: usize,
) -> Result<ConsistencyProximityReport> {
    if 2 * r > m {
        return invalid(format!("r must satisfy r <= M/2 (r={r}, M={m})"));
    }
    if k == 0 || k > n {
        return invalid(format!("sparsity must lie in 1..={n}, got {k}"));
    }
    if num_trials == 0 {
        return invalid("num_trials must be positive");
    }
    let phi = gen_gaussian_matrix(m, n, phi_seed)?;
    let kept: Vec<Option<f64>> = (0..num_trials)
        .into_par_iter()
        .map(|t| {
            let (a, b) = near_pair(phi_seed, n, k, t);
            let flips = sign_flips(&phi, &a, &b).expect("dimensions match");
            (flips <= r).then(|| linalg::distance(&a, &b))
        })
        .collect();

    let distances: Vec<f64> = kept.into_iter().flatten().collect();
    let max = distances.iter().copied().fold(0.0, f64::max);
    let mean = if distances.is_empty() {
        0.0
    } else {
        distances.iter().sum::<f64>() / distances.len() as f64
    };
    Ok(ConsistencyProximityReport {
        m,
        n,
        k,
        r,
        num_pairs: num_trials,
        kept_pairs: distances.len(),
        max_distance_given_consistency: max,
        mean_distance_given_consistency: mean,
        bound_factor: (k + r) as f64 / k as f64,
        empty: distances.is_empty(),
    })
}

fn near_pair(seed: u64, n: usize, k: usize, trial: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = rng_from_seed(derive_seed(&[seed, PAIR_STREAM, trial as u64]));
    let a = sample_sparse_signal(n, k, &mut rng).expect("validated sparsity");
    let e = on_support(n, &a.support(), &mut rng);
    let s = PERTURBATION_SCALES[trial % PERTURBATION_SCALES.len()];
    let mut b: Vec<f64> = a.values().iter().zip(&e).map(|(x, d)| x + s * d).collect();
    let norm = linalg::norm2(&b);
    b.iter_mut().for_each(|v| *v /= norm);
    (a.into_values(), b)
}
