//! Basis pursuit denoise: `min ||u||_1  s.t.  ||Phi u - y||_2 <= epsilon`.
//!
//! Solved through the penalized form `0.5 ||Phi u - y||^2 + lambda ||u||_1`
//! with FISTA (function-value restart), searching `lambda` so the residual
//! lands on `epsilon`. The residual is nondecreasing in `lambda`, so the
//! search is a safeguarded root-find in `log lambda` on the Pareto curve.
//! For `epsilon` at the numerical floor the penalized problem cannot reach
//! an exact fit; there the support found by the continuation path is
//! refit by least squares.

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, norm2};
use crate::signal_model::SensingMatrix;

const POWER_ITERATIONS: usize = 100;
/// Margin on the power-iteration estimate, which approaches from below.
const LIPSCHITZ_MARGIN: f64 = 1.02;
const INNER_REL_TOL: f64 = 1e-8;
const MAX_INNER_ITERS: usize = 20_000;
const MAX_OUTER_ITERS: usize = 200;
const RESIDUAL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BpdnSolution {
    pub estimate: Vec<f64>,
    pub residual_norm: f64,
    /// Penalty weight of the final penalized problem (0 for the zero solution).
    pub lambda: f64,
    /// Total FISTA iterations across the search.
    pub iterations: usize,
}

/// Solves basis pursuit denoise for noise level `epsilon`.
///
/// The residual of the result satisfies `||Phi u - y|| <= epsilon (1 + tol)`;
/// the search stops once it is within `min(tol, 1e-3) * max(epsilon, 1e-6)`
/// of `epsilon`.
pub fn bpdn(phi: &SensingMatrix, y: &[f64], epsilon: f64, tol: f64) -> Result<BpdnSolution> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return invalid(format!(
            "epsilon must be finite and nonnegative, got {epsilon}"
        ));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return invalid(format!("tol must lie in (0, 1), got {tol}"));
    }
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

    let n = phi.cols();
    let y_norm = norm2(y);
    if epsilon >= y_norm {
        return Ok(BpdnSolution {
            estimate: vec![0.0; n],
            residual_norm: y_norm,
            lambda: 0.0,
            iterations: 0,
        });
    }

    let lipschitz = LIPSCHITZ_MARGIN * spectral_norm_squared(phi);
    let lambda_max = phi
        .apply_transpose(y)?
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let band = tol.min(1e-3) * epsilon.max(RESIDUAL_FLOOR);
    let exact_fit = epsilon < RESIDUAL_FLOOR;

    let mut solver = Fista::new(phi, y, lipschitz);
    // Bracket points (log lambda, residual - epsilon).
    let mut above = (lambda_max.ln(), y_norm - epsilon);
    let mut below: Option<(f64, f64)> = None;
    let mut last_kept = 0i8;
    let mut log_lambda = lambda_max.ln() - 2f64.ln();
    let mut residual = y_norm;

    for _ in 0..MAX_OUTER_ITERS {
        let lambda = log_lambda.exp();
        residual = solver.solve(lambda);
        let gap = residual - epsilon;
        if gap.abs() <= band {
            return Ok(solver.solution(lambda, residual));
        }
        if exact_fit {
            if let Some((refit, r)) = least_squares_refit(phi, y, &solver.x) {
                if r <= epsilon + band {
                    return Ok(BpdnSolution {
                        estimate: refit,
                        residual_norm: r,
                        lambda,
                        iterations: solver.iterations,
                    });
                }
            }
        }

        if gap > 0.0 {
            above = (log_lambda, gap);
            if last_kept == 1 {
                if let Some(b) = below.as_mut() {
                    b.1 *= 0.5;
                }
            }
            last_kept = 1;
        } else {
            below = Some((log_lambda, gap));
            if last_kept == -1 {
                above.1 *= 0.5;
            }
            last_kept = -1;
        }

        log_lambda = match below {
            None => log_lambda - 4f64.ln(),
            Some(lo) => {
                // Illinois regula falsi between the bracket ends.
                let (x0, f0) = lo;
                let (x1, f1) = above;
                let t = x0 - f0 * (x1 - x0) / (f1 - f0);
                if t.is_finite() && t > x0.min(x1) && t < x0.max(x1) {
                    t
                } else {
                    0.5 * (x0 + x1)
                }
            }
        };
        if log_lambda < lambda_max.ln() - 40.0 {
            break;
        }
    }
    Err(Error::ConvergenceFailure {
        what: "basis pursuit denoise",
        iterations: solver.iterations,
        last_value: residual,
    })
}

/// Largest eigenvalue of `Phi^T Phi` by power iteration from a constant
/// start vector.
pub(crate) fn spectral_norm_squared(phi: &SensingMatrix) -> f64 {
    let n = phi.cols();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut w = vec![0.0; phi.rows()];
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATIONS {
        phi.apply_into(&v, &mut w);
        phi.apply_transpose_into(&w, &mut v);
        estimate = norm2(&v);
        if estimate == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= estimate);
    }
    estimate
}

struct Fista<'a> {
    phi: &'a SensingMatrix,
    y: &'a [f64],
    lipschitz: f64,
    x: Vec<f64>,
    phi_x: Vec<f64>,
    iterations: usize,
}

impl<'a> Fista<'a> {
    fn new(phi: &'a SensingMatrix, y: &'a [f64], lipschitz: f64) -> Self {
        Self {
            phi,
            y,
            lipschitz,
            x: vec![0.0; phi.cols()],
            phi_x: vec![0.0; phi.rows()],
            iterations: 0,
        }
    }

    fn objective(&self, phi_x: &[f64], x: &[f64], lambda: f64) -> f64 {
        0.5 * linalg::distance(phi_x, self.y).powi(2) + lambda * linalg::norm1(x)
    }

    /// Minimizes the penalized objective from the current point and returns
    /// the residual norm of the minimizer.
    fn solve(&mut self, lambda: f64) -> f64 {
        let (m, n) = (self.phi.rows(), self.phi.cols());
        let step = 1.0 / self.lipschitz;
        let shrink = lambda * step;

        let mut z = self.x.clone();
        let mut phi_z = self.phi_x.clone();
        let mut next = vec![0.0; n];
        let mut phi_next = vec![0.0; m];
        let mut diff = vec![0.0; m];
        let mut grad = vec![0.0; n];
        let mut t = 1.0f64;
        let mut value = self.objective(&self.phi_x, &self.x, lambda);

        for _ in 0..MAX_INNER_ITERS {
            self.iterations += 1;
            for ((d, pz), y) in diff.iter_mut().zip(&phi_z).zip(self.y) {
                *d = pz - y;
            }
            self.phi.apply_transpose_into(&diff, &mut grad);
            for ((nx, zi), g) in next.iter_mut().zip(&z).zip(&grad) {
                let v = zi - step * g;
                *nx = v.signum() * (v.abs() - shrink).max(0.0);
            }
            self.phi.apply_into(&next, &mut phi_next);
            let next_value = self.objective(&phi_next, &next, lambda);

            if next_value > value {
                // Restart the momentum from the last accepted point.
                t = 1.0;
                z.copy_from_slice(&self.x);
                phi_z.copy_from_slice(&self.phi_x);
                continue;
            }

            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            for i in 0..n {
                z[i] = next[i] + beta * (next[i] - self.x[i]);
            }
            for i in 0..m {
                phi_z[i] = phi_next[i] + beta * (phi_next[i] - self.phi_x[i]);
            }
            t = t_next;
            std::mem::swap(&mut self.x, &mut next);
            std::mem::swap(&mut self.phi_x, &mut phi_next);

            let converged = (value - next_value).abs() <= INNER_REL_TOL * next_value.max(1e-300);
            value = next_value;
            if converged {
                break;
            }
        }
        linalg::distance(&self.phi_x, self.y)
    }

    fn solution(&self, lambda: f64, residual_norm: f64) -> BpdnSolution {
        BpdnSolution {
            estimate: self.x.clone(),
            residual_norm,
            lambda,
            iterations: self.iterations,
        }
    }
}

/// Least-squares fit of `y` on the columns in `supp(x)`; `None` when the
/// support is empty, at least as large as the row count, or rank deficient.
fn least_squares_refit(phi: &SensingMatrix, y: &[f64], x: &[f64]) -> Option<(Vec<f64>, f64)> {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    let s = support.len();
    if s == 0 || s >= phi.rows() {
        return None;
    }
    let mut gram = vec![0.0; s * s];
    let mut rhs = vec![0.0; s];
    for i in 0..phi.rows() {
        let row = phi.row(i);
        for (a, &ja) in support.iter().enumerate() {
            rhs[a] += row[ja] * y[i];
            for (b, &jb) in support.iter().enumerate().take(a + 1) {
                gram[a * s + b] += row[ja] * row[jb];
            }
        }
    }
    let coeffs = cholesky_solve(&mut gram, s, rhs)?;
    let mut u = vec![0.0; x.len()];
    for (&j, c) in support.iter().zip(coeffs) {
        u[j] = c;
    }
    let r = linalg::distance(&phi.apply(&u).ok()?, y);
    Some((u, r))
}

/// Solves `A z = b` for symmetric positive definite `A` given by its lower
/// triangle (row-major, overwritten by the factor).
fn cholesky_solve(a: &mut [f64], n: usize, mut b: Vec<f64>) -> Option<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / d;
        }
    }
    for i in 0..n {
        for k in 0..i {
            b[i] -= a[i * n + k] * b[k];
        }
        b[i] /= a[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            b[i] -= a[k * n + i] * b[k];
        }
        b[i] /= a[i * n + i];
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_model::{gen_gaussian_matrix, gen_sparse_signal, snr_db};

    // 6 x 8 instance with its optimal l1 norm computed by an interior-point
    // conic solver at 1e-12 tolerances.
    const SMALL_PHI: [f64; 48] = [
        0.0012, 0.2987, -0.2741, -0.8906, -0.4547, -0.9916, 0.0601, 1.3402, -0.4922, -0.6205,
        0.4898, 0.3569, 0.1054, -0.9305, -0.0293, 0.6953, -1.3442, -0.4576, -1.9012, -1.2895,
        -1.8417, -0.2351, -1.2674, 0.2713, 0.1568, -0.1869, -2.5168, -0.5387, -0.0485, 0.1133,
        -1.5301, -0.4778, -0.9785, -0.8088, 1.0609, -0.8075, -0.0325, 0.8844, -0.5836, -0.1117,
        0.1105, 0.0638, -1.2251, 0.0761, 1.3588, -1.5471, 0.8594, 0.1194,
    ];
    const SMALL_Y: [f64; 6] = [0.8018, 0.1619, -0.1869, -0.2775, -1.174, 1.0081];
    const SMALL_OPTIMUM: f64 = 1.288_959_193_2;

    #[test]
    fn small_instance_matches_conic_solver() {
        let phi = SensingMatrix::from_row_major(6, 8, SMALL_PHI.to_vec()).unwrap();
        let sol = bpdn(&phi, &SMALL_Y, 0.1, 1e-4).unwrap();
        assert!(sol.residual_norm <= 0.1 * (1.0 + 1e-4));
        let l1 = linalg::norm1(&sol.estimate);
        assert!((l1 - SMALL_OPTIMUM).abs() < 1e-4, "l1 {l1}");
    }

    #[test]
    fn large_epsilon_gives_zero() {
        let phi = SensingMatrix::from_row_major(6, 8, SMALL_PHI.to_vec()).unwrap();
        let sol = bpdn(&phi, &SMALL_Y, 10.0, 1e-3).unwrap();
        assert!(sol.estimate.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn argument_checks() {
        let phi = SensingMatrix::from_row_major(6, 8, SMALL_PHI.to_vec()).unwrap();
        assert!(bpdn(&phi, &SMALL_Y, -1.0, 1e-3).is_err());
        assert!(bpdn(&phi, &SMALL_Y[..5], 0.1, 1e-3).is_err());
        assert!(bpdn(&phi, &SMALL_Y, 0.1, 0.0).is_err());
    }

    #[test]
    fn power_iteration_matches_dense_bound() {
        let phi = SensingMatrix::from_row_major(2, 2, vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((spectral_norm_squared(&phi) - 9.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_recovery_is_exact() {
        let phi = gen_gaussian_matrix(128, 256, 4).unwrap();
        let x0 = gen_sparse_signal(256, 8, 5).unwrap();
        let y = phi.apply(x0.values()).unwrap();
        let sol = bpdn(&phi, &y, 0.0, 1e-3).unwrap();
        assert!(snr_db(x0.values(), &sol.estimate).unwrap() > 60.0);
    }

    #[test]
    fn noisy_solution_is_feasible() {
        let phi = gen_gaussian_matrix(100, 200, 8).unwrap();
        let x0 = gen_sparse_signal(200, 6, 9).unwrap();
        let mut y = phi.apply(x0.values()).unwrap();
        for (i, v) in y.iter_mut().enumerate() {
            *v += 0.05 * ((i * 7919) % 13) as f64 / 13.0 - 0.025;
        }
        let eps = 0.3;
        let sol = bpdn(&phi, &y, eps, 1e-3).unwrap();
        assert!(sol.residual_norm <= eps * (1.0 + 1e-3));
        assert!((sol.residual_norm - eps).abs() <= 1e-3 * eps);
        let again = bpdn(&phi, &y, eps, 1e-3).unwrap();
        assert_eq!(sol, again);
    }
}
