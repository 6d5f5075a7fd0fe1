//! Lloyd-Max scalar quantizer for a standard normal source.
//!
//! A `b`-bit quantizer has `2^b` bins `[t_i, t_{i+1})` with `t_0 = -inf`
//! and `t_{2^b} = +inf`, one level per bin, and weights
//! `w_j = q_j - q_{j-1}` attached to the interior thresholds. Bins and
//! levels are indexed from zero.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};

/// Largest supported bit depth; beyond it the outer bins carry too little
/// probability mass for double precision.
pub const MAX_BITS: u32 = 12;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// Absolute rounding error of [`distortion`]: its bin terms have magnitudes
/// summing to about `E[1 + g^2] = 2`.
const DISTORTION_ROUNDING: f64 = 1e-14;

/// The 1-bit level `sqrt(2/pi)`, i.e. `E|g|` for `g ~ N(0,1)`.
pub fn q0() -> f64 {
    (2.0 / PI).sqrt()
}

pub(crate) fn normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
    }
}

/// `P(a <= g < b)` for `g ~ N(0,1)`, evaluated on the side of zero that
/// avoids cancellation.
pub(crate) fn normal_mass(a: f64, b: f64) -> f64 {
    let upper_tail = |x: f64| 0.5 * erfc(x * FRAC_1_SQRT_2);
    if a >= 0.0 {
        upper_tail(a) - upper_tail(b)
    } else if b <= 0.0 {
        upper_tail(-b) - upper_tail(-a)
    } else {
        1.0 - upper_tail(b) - upper_tail(-a)
    }
}

/// `E[g | a <= g < b]` for `g ~ N(0,1)`.
pub(crate) fn normal_centroid(a: f64, b: f64) -> f64 {
    (normal_pdf(a) - normal_pdf(b)) / normal_mass(a, b)
}

/// A scalar quantizer with sorted thresholds and levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    bits: u32,
    thresholds: Vec<f64>,
    levels: Vec<f64>,
    weights: Vec<f64>,
}

impl Quantizer {
    /// Lloyd-Max quantizer with the default tolerance and iteration cap.
    pub fn optimal(bits: u32) -> Result<Self> {
        design_lloyd_max(bits, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERS)
    }

    /// Builds a quantizer from its interior thresholds and levels.
    ///
    /// `interior` must have one entry fewer than `levels`, both strictly
    /// increasing, with each level inside its bin.
    pub fn from_parts(interior: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        let count = levels.len();
        if count < 2 || !count.is_power_of_two() {
            return invalid(format!("level count {count} must be a power of two >= 2"));
        }
        if interior.len() + 1 != count {
            return invalid("need exactly one interior threshold between consecutive levels");
        }
        if interior.iter().chain(&levels).any(|v| !v.is_finite()) {
            return invalid("thresholds and levels must be finite");
        }
        let mut thresholds = Vec::with_capacity(count + 1);
        thresholds.push(f64::NEG_INFINITY);
        thresholds.extend_from_slice(&interior);
        thresholds.push(f64::INFINITY);
        for (i, &q) in levels.iter().enumerate() {
            if !(thresholds[i] <= q && q < thresholds[i + 1]) {
                return invalid(format!("level {q} lies outside its bin {i}"));
            }
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("thresholds must be strictly increasing");
        }
        let weights = levels.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self {
            bits: count.trailing_zeros(),
            thresholds,
            levels,
            weights,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// All `2^b + 1` thresholds including the infinite end points.
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// The `2^b - 1` finite thresholds.
    pub fn interior_thresholds(&self) -> &[f64] {
        &self.thresholds[1..self.thresholds.len() - 1]
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// `w[j] = levels[j + 1] - levels[j]`, attached to interior threshold `j`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the bin `[t_k, t_{k+1})` containing `value`.
    pub fn bin_index(&self, value: f64) -> Result<usize> {
        if value.is_nan() {
            return invalid("cannot quantize NaN");
        }
        Ok(self.bin_of(value))
    }

    pub fn quantize(&self, value: f64) -> Result<f64> {
        Ok(self.levels[self.bin_index(value)?])
    }

    pub fn quantize_vector(&self, z: &[f64]) -> Result<Vec<f64>> {
        z.iter().map(|&v| self.quantize(v)).collect()
    }

    /// Bin lookup without the NaN check.
    #[inline]
    pub(crate) fn bin_of(&self, value: f64) -> usize {
        self.interior_thresholds().partition_point(|&t| t <= value)
    }

    /// Level used by the consistency subgradient: a value lying exactly on a
    /// threshold counts as below it, following `sign(0) = -1`. Agrees with
    /// [`Self::quantize`] everywhere else.
    #[inline]
    pub(crate) fn descent_level(&self, value: f64) -> f64 {
        self.levels[self.interior_thresholds().partition_point(|&t| t < value)]
    }

    /// True when `value` is exactly one of the levels.
    pub fn is_level(&self, value: f64) -> bool {
        !value.is_nan() && self.levels[self.bin_of(value)] == value
    }

    /// Mean squared error `E[(g - Q(g))^2]` for `g ~ N(0,1)`.
    pub fn distortion(&self) -> f64 {
        distortion(&self.thresholds, &self.levels)
    }

    /// JSON description with infinite thresholds written as `"-inf"`/`"+inf"`.
    pub fn to_json(&self) -> Value {
        let thresholds: Vec<Value> = self
            .thresholds
            .iter()
            .map(|&t| {
                if t == f64::NEG_INFINITY {
                    json!("-inf")
                } else if t == f64::INFINITY {
                    json!("+inf")
                } else {
                    json!(t)
                }
            })
            .collect();
        json!({
            "bits": self.bits,
            "thresholds": thresholds,
            "levels": self.levels,
            "weights": self.weights,
            "distortion": self.distortion(),
        })
    }
}

fn distortion(thresholds: &[f64], levels: &[f64]) -> f64 {
    // Per bin: E[(g-q)^2; R] = E[g^2; R] - 2 q E[g; R] + q^2 P(R), with
    // E[g^2; [a,b)] = P + a pdf(a) - b pdf(b).
    let edge = |x: f64| {
        if x.is_finite() {
            x * normal_pdf(x)
        } else {
            0.0
        }
    };
    levels
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let (a, b) = (thresholds[i], thresholds[i + 1]);
            let mass = normal_mass(a, b);
            let first = normal_pdf(a) - normal_pdf(b);
            let second = mass + edge(a) - edge(b);
            second - 2.0 * q * first + q * q * mass
        })
        .sum()
}

/// Designs the optimal `bits`-bit quantizer for N(0,1) by Lloyd-Max
/// iteration. See [`design_lloyd_max_traced`].
pub fn design_lloyd_max(bits: u32, tolerance: f64, max_iters: usize) -> Result<Quantizer> {
    design_lloyd_max_traced(bits, tolerance, max_iters).map(|(q, _)| q)
}

/// Lloyd-Max design that also returns the distortion after every
/// iteration.
///
/// Thresholds start at the standard-normal quantiles `i / 2^b`. Each
/// iteration takes a Newton step on the midpoint condition
/// `t_i = (c_{i-1}(t) + c_i(t)) / 2`, where `c_i(t)` is the centroid of bin
/// `i`, backtracking until the distortion does not increase; a plain Lloyd
/// step (centroids, then midpoints) is the fallback. Levels are always the
/// centroids of the current bins, and both vectors are kept exactly
/// antisymmetric. Iteration stops once no level moves by more than
/// `tolerance`. The 1-bit quantizer is returned in closed form.
pub fn design_lloyd_max_traced(
    bits: u32,
    tolerance: f64,
    max_iters: usize,
) -> Result<(Quantizer, Vec<f64>)> {
    if !(1..=MAX_BITS).contains(&bits) {
        return invalid(format!("bits must lie in 1..={MAX_BITS}, got {bits}"));
    }
    if tolerance.is_nan() || tolerance <= 0.0 || max_iters == 0 {
        return invalid("tolerance and max_iters must be positive");
    }
    if bits == 1 {
        let q = Quantizer::from_parts(vec![0.0], vec![-q0(), q0()])?;
        let d = q.distortion();
        return Ok((q, vec![d]));
    }

    let count = 1usize << bits;
    let std_normal = Normal::standard();
    let mut thresholds = Vec::with_capacity(count + 1);
    thresholds.push(f64::NEG_INFINITY);
    thresholds.extend((1..count).map(|i| std_normal.inverse_cdf(i as f64 / count as f64)));
    thresholds.push(f64::INFINITY);
    antisymmetrize(&mut thresholds);

    let mut levels = centroids(&thresholds);
    let mut current = distortion(&thresholds, &levels);
    let mut trace = Vec::new();
    for _ in 0..max_iters {
        let mut direction = newton_direction(&thresholds, &levels);
        // The uniform-shift mode is poorly conditioned; only the odd part
        // of the step is meaningful for a symmetric source.
        antisymmetrize(&mut direction);
        let tiny_step = direction.iter().fold(0.0f64, |m, d| m.max(d.abs())) < tolerance;

        let mut accepted = None;
        let mut scale = 1.0;
        for _ in 0..40 {
            let mut candidate = thresholds.clone();
            for (t, d) in candidate[1..count].iter_mut().zip(&direction) {
                *t += scale * d;
            }
            antisymmetrize(&mut candidate);
            if candidate.windows(2).all(|w| w[0] < w[1]) {
                let cand_levels = centroids(&candidate);
                let d = distortion(&candidate, &cand_levels);
                // Near the optimum distortion changes fall below its own
                // rounding error, so allow that much slack.
                if d <= current + DISTORTION_ROUNDING || tiny_step {
                    accepted = Some((candidate, cand_levels, d, scale == 1.0));
                    break;
                }
            }
            scale *= 0.5;
        }
        let (next_t, next_levels, next_d, full_step) = accepted.unwrap_or_else(|| {
            let mut t = thresholds.clone();
            for i in 1..count {
                t[i] = 0.5 * (levels[i - 1] + levels[i]);
            }
            antisymmetrize(&mut t);
            let l = centroids(&t);
            let d = distortion(&t, &l);
            (t, l, d, false)
        });

        let change = next_levels
            .iter()
            .zip(&levels)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        thresholds = next_t;
        levels = next_levels;
        current = next_d;
        trace.push(current);
        // A damped step can be short without the iteration having settled.
        if full_step && change < tolerance {
            let q = Quantizer::from_parts(thresholds[1..count].to_vec(), levels)?;
            return Ok((q, trace));
        }
    }
    Err(Error::ConvergenceFailure {
        what: "Lloyd-Max design",
        iterations: max_iters,
        last_value: current,
    })
}

/// Newton direction for the interior thresholds on the residual
/// `G_i = t_i - (c_{i-1} + c_i) / 2`, whose Jacobian is tridiagonal.
fn newton_direction(thresholds: &[f64], levels: &[f64]) -> Vec<f64> {
    let bins = levels.len();
    // Centroid sensitivities to the left and right edge of each bin:
    // dc/da = pdf(a)(c - a)/P and dc/db = pdf(b)(b - c)/P.
    let mut d_left = vec![0.0; bins];
    let mut d_right = vec![0.0; bins];
    for i in 0..bins {
        let (a, b, c) = (thresholds[i], thresholds[i + 1], levels[i]);
        let mass = normal_mass(a, b);
        if a.is_finite() {
            d_left[i] = normal_pdf(a) * (c - a) / mass;
        }
        if b.is_finite() {
            d_right[i] = normal_pdf(b) * (b - c) / mass;
        }
    }
    let n = bins - 1;
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for k in 0..n {
        let j = k + 1;
        rhs[k] = -(thresholds[j] - 0.5 * (levels[j - 1] + levels[j]));
        diag[k] = 1.0 - 0.5 * (d_right[j - 1] + d_left[j]);
        if k > 0 {
            sub[k] = -0.5 * d_left[j - 1];
        }
        if k + 1 < n {
            sup[k] = -0.5 * d_right[j];
        }
    }
    solve_tridiagonal(&sub, &mut diag, &sup, &mut rhs);
    rhs
}

/// Thomas algorithm; `diag` and `rhs` are overwritten, the solution is
/// left in `rhs`.
fn solve_tridiagonal(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
}

fn centroids(thresholds: &[f64]) -> Vec<f64> {
    let mut levels: Vec<f64> = thresholds
        .windows(2)
        .map(|w| normal_centroid(w[0], w[1]))
        .collect();
    antisymmetrize(&mut levels);
    levels
}

/// Replaces `v[i]` by `(v[i] - v[n-1-i]) / 2`, forcing `v` to be odd about
/// its midpoint. Infinite end points are left alone.
fn antisymmetrize(v: &mut [f64]) {
    let n = v.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        if v[i].is_infinite() {
            continue;
        }
        let a = 0.5 * (v[i] - v[j]);
        v[i] = a;
        v[j] = -a;
    }
    if n % 2 == 1 {
        v[n / 2] = 0.0;
    }
}
