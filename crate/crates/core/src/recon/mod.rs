//! Sparse reconstruction from (quantized) compressive measurements.
//!
//! * [`iht`]: iterative hard thresholding on the quadratic fidelity.
//! * [`qiht`]: the same recursion driven by the quantization-consistency
//!   subgradient `Phi^T (Q(Phi x) - y)`; binary IHT at one bit.
//! * [`single_threshold_estimate`]: one back-projection and threshold,
//!   for 1-bit data.
//! * [`bpdn`]: l1 minimization under an l2 residual constraint.

mod bpdn;

pub use bpdn::{bpdn, BpdnSolution};

use serde::Serialize;

use crate::consistency::ConsistencyCost;
use crate::error::{invalid, Result};
use crate::linalg::{self, norm2};
use crate::quantizer::{q0, Quantizer};
use crate::signal_model::{hard_threshold_in_place, SensingMatrix};

pub const DEFAULT_REL_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITERS: usize = 1000;

/// `mu = (1 - sqrt(2K/M)) / M`, which assumes the restricted isometry
/// constant of order 2K behaves like `sqrt(2K/M)`.
pub fn default_step_size(measurements: usize, sparsity: usize) -> Result<f64> {
    if measurements == 0 || sparsity == 0 {
        return invalid("measurement count and sparsity must be positive");
    }
    if 2 * sparsity >= measurements {
        return invalid(format!(
            "default step size needs 2K < M (K={sparsity}, M={measurements}); supply the step size explicitly"
        ));
    }
    let m = measurements as f64;
    Ok((1.0 - (2.0 * sparsity as f64 / m).sqrt()) / m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconConfig {
    pub sparsity: usize,
    pub step_size: f64,
    /// Stop once `||x(n+1) - x(n)|| / ||x(n+1)||` drops below this.
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl ReconConfig {
    pub fn new(sparsity: usize, step_size: f64) -> Result<Self> {
        let cfg = Self {
            sparsity,
            step_size,
            rel_tol: DEFAULT_REL_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Configuration with the default step size for `measurements` rows.
    pub fn with_default_step(measurements: usize, sparsity: usize) -> Result<Self> {
        Self::new(sparsity, default_step_size(measurements, sparsity)?)
    }

    pub fn rel_tol(mut self, rel_tol: f64) -> Result<Self> {
        self.rel_tol = rel_tol;
        self.validate()?;
        Ok(self)
    }

    pub fn max_iters(mut self, max_iters: usize) -> Result<Self> {
        self.max_iters = max_iters;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sparsity == 0 {
            return invalid("sparsity must be positive");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return invalid(format!(
                "step size must be positive, got {}",
                self.step_size
            ));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return invalid(format!("rel_tol must lie in (0, 1), got {}", self.rel_tol));
        }
        if self.max_iters == 0 {
            return invalid("max_iters must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Tolerance,
    MaxIters,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Tolerance => "tolerance",
            Termination::MaxIters => "max_iters",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconResult {
    pub estimate: Vec<f64>,
    pub iterations: usize,
    pub terminated_by: Termination,
    /// Objective at `x(0), ..., x(iterations - 1)`.
    pub cost_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Fidelity<'q> {
    /// `0.5 ||y - Phi x||^2`, gradient step along `Phi^T (y - Phi x)`.
    Quadratic,
    /// Consistency cost, step along `Phi^T (y - Q(Phi x))`.
    Quantized(ConsistencyCost<'q>),
}

/// Projected (sub)gradient iteration `x <- H_K[x + mu Phi^T (y - A(Phi x))]`
/// started from zero, with `A` the identity (IHT) or the quantizer (QIHT).
///
/// [`iht`] and [`qiht`] run it to termination; stepping by hand exposes
/// the iterates.
#[derive(Debug, Clone)]
pub struct ThresholdedDescent<'a> {
    phi: &'a SensingMatrix,
    y: &'a [f64],
    fidelity: Fidelity<'a>,
    cfg: ReconConfig,
    x: Vec<f64>,
    next: Vec<f64>,
    phi_x: Vec<f64>,
    residual: Vec<f64>,
    iterations: usize,
    cost_trace: Vec<f64>,
}

impl<'a> ThresholdedDescent<'a> {
    pub fn iht(phi: &'a SensingMatrix, y: &'a [f64], cfg: ReconConfig) -> Result<Self> {
        Self::new(phi, y, Fidelity::Quadratic, cfg)
    }

    /// Fails if some entry of `y` is not a level of `quantizer`.
    pub fn qiht(
        phi: &'a SensingMatrix,
        y: &'a [f64],
        quantizer: &'a Quantizer,
        cfg: ReconConfig,
    ) -> Result<Self> {
        if let Some((k, v)) = y.iter().enumerate().find(|(_, v)| !quantizer.is_level(**v)) {
            return invalid(format!(
                "measurement {k} = {v} is not a level of the {}-bit quantizer",
                quantizer.bits()
            ));
        }
        Self::new(
            phi,
            y,
            Fidelity::Quantized(ConsistencyCost::new(quantizer)),
            cfg,
        )
    }

    fn new(
        phi: &'a SensingMatrix,
        y: &'a [f64],
        fidelity: Fidelity<'a>,
        cfg: ReconConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if y.len() != phi.rows() {
            return invalid(format!(
                "measurement vector has length {} but the matrix has {} rows",
                y.len(),
                phi.rows()
            ));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return invalid("measurements must be finite");
        }
        let (m, n) = (phi.rows(), phi.cols());
        Ok(Self {
            phi,
            y,
            fidelity,
            cfg,
            x: vec![0.0; n],
            next: vec![0.0; n],
            phi_x: vec![0.0; m],
            residual: vec![0.0; m],
            iterations: 0,
            cost_trace: Vec::new(),
        })
    }

    /// The current iterate `x(n)`.
    pub fn iterate(&self) -> &[f64] {
        &self.x
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Objective value at the current iterate.
    pub fn cost(&self) -> f64 {
        match self.fidelity {
            Fidelity::Quadratic => {
                0.5 * self
                    .y
                    .iter()
                    .zip(&self.phi_x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            }
            Fidelity::Quantized(cost) => cost.vector_cost_unchecked(&self.phi_x, self.y),
        }
    }

    /// Performs one update and returns `||x(n+1) - x(n)|| / ||x(n+1)||`,
    /// taken as zero when both norms vanish.
    pub fn step(&mut self) -> f64 {
        self.cost_trace.push(self.cost());
        match self.fidelity {
            Fidelity::Quadratic => {
                for ((r, y), z) in self.residual.iter_mut().zip(self.y).zip(&self.phi_x) {
                    *r = y - z;
                }
            }
            Fidelity::Quantized(cost) => {
                let q = cost.quantizer();
                for ((r, y), z) in self.residual.iter_mut().zip(self.y).zip(&self.phi_x) {
                    *r = y - q.descent_level(*z);
                }
            }
        }
        self.phi
            .apply_transpose_into(&self.residual, &mut self.next);
        let mu = self.cfg.step_size;
        for (n, x) in self.next.iter_mut().zip(&self.x) {
            *n = x + mu * *n;
        }
        hard_threshold_in_place(&mut self.next, self.cfg.sparsity);

        let change = linalg::distance(&self.next, &self.x);
        let size = norm2(&self.next);
        std::mem::swap(&mut self.x, &mut self.next);
        self.phi.apply_into(&self.x, &mut self.phi_x);
        self.iterations += 1;

        if change == 0.0 {
            0.0
        } else {
            change / size
        }
    }

    /// Iterates until the relative change falls below `rel_tol` or
    /// `max_iters` updates have been made.
    pub fn run(mut self) -> ReconResult {
        let terminated_by = loop {
            let ratio = self.step();
            if ratio < self.cfg.rel_tol {
                break Termination::Tolerance;
            }
            if self.iterations >= self.cfg.max_iters {
                break Termination::MaxIters;
            }
        };
        ReconResult {
            estimate: self.x,
            iterations: self.iterations,
            terminated_by,
            cost_trace: self.cost_trace,
        }
    }
}

/// Iterative hard thresholding for `y ~ Phi x` with `x` K-sparse.
pub fn iht(phi: &SensingMatrix, y: &[f64], cfg: ReconConfig) -> Result<ReconResult> {
    Ok(ThresholdedDescent::iht(phi, y, cfg)?.run())
}

/// Quantized iterative hard thresholding for `y = Q(Phi x)`.
pub fn qiht(
    phi: &SensingMatrix,
    y: &[f64],
    quantizer: &Quantizer,
    cfg: ReconConfig,
) -> Result<ReconResult> {
    Ok(ThresholdedDescent::qiht(phi, y, quantizer, cfg)?.run())
}

/// `H_K(Phi^T y) / (q0^2 M)` for 1-bit measurements `y in {-q0, +q0}^M`.
pub fn single_threshold_estimate(
    phi: &SensingMatrix,
    y: &[f64],
    quantizer: &Quantizer,
    sparsity: usize,
) -> Result<Vec<f64>> {
    if quantizer.bits() != 1 {
        return invalid(format!(
            "single thresholding needs a 1-bit quantizer, got {} bits",
            quantizer.bits()
        ));
    }
    if sparsity == 0 {
        return invalid("sparsity must be positive");
    }
    let level = q0();
    if y.iter().any(|v| v.abs() != level) {
        return invalid("1-bit measurements must equal -q0 or +q0");
    }
    let mut back = phi.apply_transpose(y)?;
    hard_threshold_in_place(&mut back, sparsity);
    let scale = 1.0 / (level * level * phi.rows() as f64);
    back.iter_mut().for_each(|v| *v *= scale);
    Ok(back)
}
