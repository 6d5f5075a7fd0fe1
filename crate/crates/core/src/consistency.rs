//! Quantization-consistency cost.
//!
//! For a quantizer with interior thresholds `t_j` and weights
//! `w_j = q_{j+1} - q_j`, the scalar cost
//!
//! ```text
//! J(nu, lambda) = sum_j w_j |nu - t_j|   over thresholds t_j between nu and lambda
//! ```
//!
//! is convex and piecewise linear in `nu`, vanishes exactly when `nu` and
//! `lambda` share a bin, and tends to `(nu - lambda)^2 / 2` as the bit depth
//! grows. At one bit it is the one-sided l1 cost of binary IHT, scaled by
//! `2 q0`. Its slope in `nu` is `Q(nu) - Q(lambda)`, which is what QIHT
//! descends along.

use crate::error::{invalid, Result};
use crate::quantizer::Quantizer;
use crate::signal_model::SensingMatrix;

/// The consistency cost induced by a quantizer.
#[derive(Debug, Clone, Copy)]
pub struct ConsistencyCost<'q> {
    quantizer: &'q Quantizer,
}

impl<'q> ConsistencyCost<'q> {
    pub fn new(quantizer: &'q Quantizer) -> Self {
        Self { quantizer }
    }

    pub fn quantizer(&self) -> &'q Quantizer {
        self.quantizer
    }

    /// `J(nu, lambda)`; depends on `lambda` only through its bin.
    pub fn scalar_cost(&self, nu: f64, lambda: f64) -> Result<f64> {
        if nu.is_nan() || lambda.is_nan() {
            return invalid("consistency cost of NaN");
        }
        Ok(self.cost_against_bin(nu, self.quantizer.bin_of(lambda)))
    }

    /// `J(nu, .)` for a target already reduced to its bin index.
    #[inline]
    fn cost_against_bin(&self, nu: f64, target_bin: usize) -> f64 {
        let own = self.quantizer.bin_of(nu);
        let (lo, hi) = if own < target_bin {
            (own, target_bin)
        } else {
            (target_bin, own)
        };
        let cuts = self.quantizer.interior_thresholds();
        let weights = self.quantizer.weights();
        (lo..hi).map(|j| weights[j] * (nu - cuts[j]).abs()).sum()
    }

    /// `sum_k J(u_k, v_k)`.
    pub fn vector_cost(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        if u.len() != v.len() {
            return invalid(format!(
                "vector lengths differ ({} and {})",
                u.len(),
                v.len()
            ));
        }
        if u.iter().chain(v).any(|x| x.is_nan()) {
            return invalid("consistency cost of NaN");
        }
        Ok(self.vector_cost_unchecked(u, v))
    }

    pub(crate) fn vector_cost_unchecked(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter()
            .zip(v)
            .map(|(&a, &b)| self.cost_against_bin(a, self.quantizer.bin_of(b)))
            .sum()
    }

    /// The QIHT objective `J(Phi u, y)`.
    pub fn objective(&self, phi: &SensingMatrix, u: &[f64], y: &[f64]) -> Result<f64> {
        check_measurements(phi, y)?;
        let z = phi.apply(u)?;
        self.vector_cost(&z, y)
    }

    /// The subgradient `Phi^T (Q(Phi u) - y)` of [`Self::objective`].
    ///
    /// A component of `Phi u` lying exactly on a threshold takes the level
    /// below it (`sign(0) = -1`), matching binary IHT's `q0 sign(.)` at one
    /// bit.
    pub fn subgradient(&self, phi: &SensingMatrix, u: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        check_measurements(phi, y)?;
        let z = phi.apply(u)?;
        let mut diff = Vec::with_capacity(z.len());
        for (&zk, &yk) in z.iter().zip(y) {
            if zk.is_nan() || yk.is_nan() {
                return invalid("subgradient of NaN");
            }
            diff.push(self.quantizer.descent_level(zk) - yk);
        }
        phi.apply_transpose(&diff)
    }
}

fn check_measurements(phi: &SensingMatrix, y: &[f64]) -> Result<()> {
    if y.len() != phi.rows() {
        return invalid(format!(
            "measurement vector has length {} but the matrix has {} rows",
            y.len(),
            phi.rows()
        ));
    }
    Ok(())
}
