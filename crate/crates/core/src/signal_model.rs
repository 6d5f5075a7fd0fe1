//! Test signals, Gaussian sensing matrices and the primitive operators
//! shared by every solver: hard thresholding, angular SNR and the
//! normalized Hamming distance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, norm2};

/// PRNG used everywhere a seed appears. ChaCha8 output is stable across
/// platforms and crate versions.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One N(0,1) draw.
pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Folds a list of integers into one seed with the SplitMix64 finalizer.
///
/// The result depends only on the values and their order, so per-trial
/// seeds can be derived independently of execution order.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243f_6a88_85a3_08d3;
    for &p in parts {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A K-sparse vector in R^N.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    values: Vec<f64>,
    sparsity: usize,
}

impl SparseSignal {
    /// Wraps `values`, checking that at most `sparsity` entries are nonzero.
    pub fn new(values: Vec<f64>, sparsity: usize) -> Result<Self> {
        if sparsity == 0 || sparsity > values.len() {
            return invalid(format!(
                "sparsity {sparsity} must lie in 1..={}",
                values.len()
            ));
        }
        let nnz = linalg::count_nonzero(&values);
        if nnz > sparsity {
            return invalid(format!("{nnz} nonzero entries exceed sparsity {sparsity}"));
        }
        Ok(Self { values, sparsity })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ambient_dim(&self) -> usize {
        self.values.len()
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    /// Indices of the nonzero entries, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl AsRef<[f64]> for SparseSignal {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Draws a unit-norm K-sparse signal: support uniform over all K-subsets of
/// `0..N`, nonzero block uniform on the unit sphere of R^K.
pub fn gen_sparse_signal(ambient_dim: usize, sparsity: usize, seed: u64) -> Result<SparseSignal> {
    let mut rng = rng_from_seed(seed);
    sample_sparse_signal(ambient_dim, sparsity, &mut rng)
}

/// As [`gen_sparse_signal`], drawing from a caller-owned generator.
pub fn sample_sparse_signal(
    ambient_dim: usize,
    sparsity: usize,
    rng: &mut Rng,
) -> Result<SparseSignal> {
    if sparsity == 0 || sparsity > ambient_dim {
        return invalid(format!(
            "sparsity must satisfy 1 <= K <= N (got K={sparsity}, N={ambient_dim})"
        ));
    }
    let support = sample_support(ambient_dim, sparsity, rng);
    let coeffs = sample_unit_sphere(sparsity, rng);
    let mut values = vec![0.0; ambient_dim];
    for (&i, c) in support.iter().zip(coeffs) {
        values[i] = c;
    }
    Ok(SparseSignal { values, sparsity })
}

/// First `k` entries of a partial Fisher-Yates shuffle of `0..n`.
pub fn sample_support(n: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let (chosen, _) = pool.partial_shuffle(rng, k);
    chosen.to_vec()
}

/// Uniform point on the unit sphere of R^k (normalized Gaussian vector).
pub fn sample_unit_sphere(k: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm2(&v);
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
}

/// Dense M x N matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    seed: Option<u64>,
}

impl SensingMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return invalid("matrix dimensions must be positive");
        }
        if data.len() != rows * cols {
            return invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            ));
        }
        Ok(Self {
            rows,
            cols,
            data,
            seed: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Seed the matrix was drawn from, if it was generated.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// `Phi u`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.cols {
            return invalid(format!(
                "vector of length {} does not match {} columns",
                u.len(),
                self.cols
            ));
        }
        let mut out = vec![0.0; self.rows];
        self.apply_into(u, &mut out);
        Ok(out)
    }

    /// `Phi^T r`.
    pub fn apply_transpose(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.rows {
            return invalid(format!(
                "vector of length {} does not match {} rows",
                r.len(),
                self.rows
            ));
        }
        let mut out = vec![0.0; self.cols];
        self.apply_transpose_into(r, &mut out);
        Ok(out)
    }

    /// Unchecked `out = Phi u`; skips zero entries of `u`, which keeps the
    /// product cheap on sparse iterates.
    pub(crate) fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let nz: Vec<(usize, f64)> = u
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .collect();
        if nz.len() * 4 < self.cols {
            for (i, o) in out.iter_mut().enumerate() {
                let row = self.row(i);
                *o = nz.iter().map(|&(j, v)| row[j] * v).sum();
            }
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = linalg::dot(self.row(i), u);
            }
        }
    }

    pub(crate) fn apply_transpose_into(&self, r: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &ri) in r.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += ri * a;
            }
        }
    }
}

/// Draws an M x N matrix with i.i.d. N(0,1) entries, row-major.
pub fn gen_gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Result<SensingMatrix> {
    if rows == 0 || cols == 0 {
        return invalid(format!(
            "matrix dimensions must be positive (got {rows}x{cols})"
        ));
    }
    let mut rng = rng_from_seed(seed);
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    Ok(SensingMatrix {
        rows,
        cols,
        data,
        seed: Some(seed),
    })
}

/// Keeps the `k` entries of largest magnitude and zeroes the rest.
///
/// Ties in magnitude are broken in favour of the lower index, so the
/// result is deterministic.
pub fn hard_threshold(u: &[f64], k: usize) -> Vec<f64> {
    let mut out = u.to_vec();
    hard_threshold_in_place(&mut out, k);
    out
}

pub(crate) fn hard_threshold_in_place(u: &mut [f64], k: usize) {
    if k >= u.len() {
        return;
    }
    let mut order: Vec<usize> = (0..u.len()).collect();
    let by_magnitude =
        |a: &usize, b: &usize| u[*b].abs().total_cmp(&u[*a].abs()).then_with(|| a.cmp(b));
    if k == 0 {
        u.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    order.select_nth_unstable_by(k - 1, by_magnitude);
    for &i in &order[k..] {
        u[i] = 0.0;
    }
}

/// Angular reconstruction quality `-20 log10 ||x0 - x/||x|| ||` in dB.
///
/// Returns `f64::INFINITY` when the normalized estimate equals the
/// reference exactly, and [`Error::UndefinedSnr`] for a zero estimate.
pub fn snr_db(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return invalid(format!(
            "reference length {} differs from estimate length {}",
            reference.len(),
            estimate.len()
        ));
    }
    let scale = norm2(estimate);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::UndefinedSnr);
    }
    let dist = reference
        .iter()
        .zip(estimate)
        .map(|(r, e)| (r - e / scale).powi(2))
        .sum::<f64>()
        .sqrt();
    if dist == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(-20.0 * dist.log10())
    }
}

/// A vector over {-1, +1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVector(Vec<i8>);

impl BitVector {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(bad) = signs.iter().find(|s| **s != 1 && **s != -1) {
            return invalid(format!("sign entries must be -1 or +1, found {bad}"));
        }
        Ok(Self(signs))
    }

    /// Signs of `z` under the `sign(0) = -1` convention.
    pub fn from_signs_of(z: &[f64]) -> Self {
        Self(z.iter().map(|&x| if x > 0.0 { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }
}

impl std::ops::Neg for &BitVector {
    type Output = BitVector;

    fn neg(self) -> BitVector {
        BitVector(self.0.iter().map(|s| -s).collect())
    }
}

/// Fraction of positions where `a` and `b` disagree.
pub fn hamming_distance(a: &BitVector, b: &BitVector) -> Result<f64> {
    if a.len() != b.len() {
        return invalid(format!(
            "bit vectors have different lengths ({} and {})",
            a.len(),
            b.len()
        ));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(disagreements(a, b) as f64 / a.len() as f64)
}

pub(crate) fn disagreements(a: &BitVector, b: &BitVector) -> usize {
    a.0.iter().zip(&b.0).filter(|(x, y)| x != y).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sparse_signal_has_exact_support_and_unit_norm() {
        for seed in 0..20 {
            let x = gen_sparse_signal(1024, 16, seed).unwrap();
            assert_eq!(linalg::count_nonzero(x.values()), 16);
            assert!((norm2(x.values()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_sparse_signal_is_a_signed_basis_vector() {
        let x = gen_sparse_signal(8, 1, 3).unwrap();
        let nz: Vec<f64> = x.values().iter().copied().filter(|v| *v != 0.0).collect();
        assert_eq!(nz.len(), 1);
        assert_eq!(nz[0].abs(), 1.0);
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(
            gen_sparse_signal(1024, 16, 99).unwrap(),
            gen_sparse_signal(1024, 16, 99).unwrap()
        );
        assert_eq!(
            gen_gaussian_matrix(16, 32, 5).unwrap(),
            gen_gaussian_matrix(16, 32, 5).unwrap()
        );
    }

    #[test]
    fn invalid_sparsity_is_rejected() {
        assert!(matches!(
            gen_sparse_signal(8, 0, 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            gen_sparse_signal(8, 9, 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(gen_gaussian_matrix(0, 4, 1).is_err());
    }

    #[test]
    fn support_is_roughly_uniform() {
        // Each index should be selected with probability K/N = 1/4.
        let (n, k, trials) = (8usize, 2usize, 40_000u64);
        let mut hits = vec![0usize; n];
        for s in 0..trials {
            for i in gen_sparse_signal(n, k, s).unwrap().support() {
                hits[i] += 1;
            }
        }
        let expected = trials as f64 * k as f64 / n as f64;
        for h in hits {
            assert!((h as f64 - expected).abs() < 5.0 * expected.sqrt());
        }
    }

    #[test]
    fn gaussian_matrix_moments() {
        let (m, n) = (256usize, 1024usize);
        let phi = gen_gaussian_matrix(m, n, 2024).unwrap();
        let count = (m * n) as f64;
        let mean = phi.entries().iter().sum::<f64>() / count;
        let var = phi
            .entries()
            .iter()
            .map(|x| (x - mean).powi(2))
            .sum::<f64>()
            / (count - 1.0);
        assert!(mean.abs() < 4.0 / count.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn transpose_product_matches_explicit_sum() {
        let phi = gen_gaussian_matrix(5, 7, 1).unwrap();
        let r = [1.0, -2.0, 0.5, 0.0, 3.0];
        let got = phi.apply_transpose(&r).unwrap();
        for j in 0..7 {
            let want: f64 = (0..5).map(|i| phi.get(i, j) * r[i]).sum();
            assert!((got[j] - want).abs() < 1e-12);
        }
        assert!(phi.apply(&[1.0; 6]).is_err());
    }

    #[test]
    fn hard_threshold_examples() {
        assert_eq!(
            hard_threshold(&[3.0, -1.0, 0.5, 2.0], 2),
            vec![3.0, 0.0, 0.0, 2.0]
        );
        assert_eq!(hard_threshold(&[2.0, -2.0, 0.0], 1), vec![2.0, 0.0, 0.0]);
        assert_eq!(hard_threshold(&[0.0, 5.0, 0.0], 2), vec![0.0, 5.0, 0.0]);
        assert_eq!(hard_threshold(&[1.0, 2.0], 4), vec![1.0, 2.0]);
    }

    #[test]
    fn snr_examples() {
        let x0 = [0.6, 0.0, 0.8];
        assert_eq!(snr_db(&x0, &[1.2, 0.0, 1.6]).unwrap(), f64::INFINITY);
        let x0 = gen_sparse_signal(32, 4, 7).unwrap();
        let x0 = x0.values();
        let flipped: Vec<f64> = x0.iter().map(|v| -v).collect();
        assert!((snr_db(x0, &flipped).unwrap() + 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!(matches!(snr_db(x0, &[0.0; 32]), Err(Error::UndefinedSnr)));

        // Rotate x0 by an angle whose chord is exactly 0.1.
        let e = [1.0, 0.0];
        let theta = 2.0 * (0.05f64).asin();
        let est = [theta.cos(), theta.sin()];
        assert!((snr_db(&e, &est).unwrap() - 20.0).abs() < 1e-10);
    }

    #[test]
    fn hamming_examples() {
        let a = BitVector::new(vec![1, -1, 1, 1]).unwrap();
        let b = BitVector::new(vec![1, -1, -1, 1]).unwrap();
        assert_eq!(hamming_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(hamming_distance(&a, &b).unwrap(), 0.25);
        assert_eq!(hamming_distance(&a, &-&a).unwrap(), 1.0);
        let short = BitVector::new(vec![1]).unwrap();
        assert!(hamming_distance(&a, &short).is_err());
        assert!(BitVector::new(vec![0]).is_err());
    }

    #[test]
    fn hamming_is_a_metric_on_small_cubes() {
        for m in 1..=6usize {
            let all: Vec<BitVector> = (0..1u32 << m)
                .map(|bits| {
                    BitVector::new(
                        (0..m)
                            .map(|i| if bits >> i & 1 == 1 { 1 } else { -1 })
                            .collect(),
                    )
                    .unwrap()
                })
                .collect();
            for a in &all {
                for b in &all {
                    let dab = hamming_distance(a, b).unwrap();
                    assert_eq!(dab, hamming_distance(b, a).unwrap());
                    assert_eq!(dab == 0.0, a == b);
                    for c in &all {
                        let via = dab + hamming_distance(b, c).unwrap();
                        assert!(hamming_distance(a, c).unwrap() <= via + 1e-15);
                    }
                }
            }
        }
    }

    /// Brute-force best K-term approximation error over all supports.
    fn best_k_term_error(u: &[f64], k: usize) -> f64 {
        let n = u.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize > k {
                continue;
            }
            let err: f64 = (0..n)
                .filter(|i| mask >> i & 1 == 0)
                .map(|i| u[i] * u[i])
                .sum();
            best = best.min(err);
        }
        best.sqrt()
    }

    proptest! {
        #[test]
        fn hard_threshold_is_the_best_k_term_approximation(
            u in prop::collection::vec(-10.0f64..10.0, 1..=10),
            k in 1usize..=10,
        ) {
            let h = hard_threshold(&u, k);
            prop_assert!(linalg::count_nonzero(&h) <= k);
            for (a, b) in u.iter().zip(&h) {
                prop_assert!(*b == 0.0 || a == b);
            }
            let err = linalg::distance(&u, &h);
            prop_assert!(err <= best_k_term_error(&u, k) + 1e-12);
            prop_assert_eq!(hard_threshold(&h, k), h);
        }

        #[test]
        fn snr_is_scale_invariant(seed in 0u64..1000, c in 0.01f64..100.0) {
            let x0 = gen_sparse_signal(64, 4, seed).unwrap();
            let est: Vec<f64> = gen_sparse_signal(64, 6, seed + 1).unwrap()
                .values().iter().zip(x0.values()).map(|(a, b)| a + b).collect();
            let scaled: Vec<f64> = est.iter().map(|v| c * v).collect();
            let s1 = snr_db(x0.values(), &est).unwrap();
            let s2 = snr_db(x0.values(), &scaled).unwrap();
            prop_assert!((s1 - s2).abs() < 1e-9);
        }
    }
}
