//! Masked manifold optimization of the analog precoder.
//!
//! The analog matrix lives on a product of complex circles: every entry on
//! the connectivity mask's support has fixed modulus `1 / sqrt(N_T)` and a
//! free phase, every entry off the support is zero. Ordering the support
//! entries column-major turns the matrix into a point `x` on the manifold
//! `{x : |x_t| = r}`, and the fitting objective
//!
//! `f(x) = || F_RF(x) * B - C ||_F^2`
//!
//! is quadratic in `x`, so its Euclidean gradient is the support restriction
//! of `2 (F_RF(x) B - C) Bᴴ`. The solver is Riemannian conjugate gradient:
//! project the gradient onto the tangent space of each circle, take a
//! Polak-Ribiere direction with projection-based transport, line-search with
//! Armijo backtracking, and retract by renormalizing each entry to its
//! radius.

use crate::geometry::ConnectivityMask;
use crate::linalg::{frob_sqr, CMat};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, RngExt};
use std::f64::consts::PI;

/// A point on the product-of-circles manifold: support entries of the
/// analog precoder in column-major support order, all of modulus `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint {
    values: Vec<Complex64>,
    radius: f64,
}

impl ManifoldPoint {
    /// Builds a point from explicit phases (radians).
    pub fn from_phases(radius: f64, phases: &[f64]) -> Self {
        assert!(radius > 0.0, "manifold radius must be positive");
        ManifoldPoint {
            values: phases.iter().map(|&p| Complex64::from_polar(radius, p)).collect(),
            radius,
        }
    }

    /// Draws uniformly random phases.
    pub fn random(radius: f64, len: usize, rng: &mut impl Rng) -> Self {
        let phases: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        ManifoldPoint::from_phases(radius, &phases)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Moves along `dir` by `step` and renormalizes each entry back to the
    /// radius. Entries that would land exactly on zero keep their old value,
    /// so the result always stays on the manifold.
    pub fn retract(&self, dir: &[Complex64], step: f64) -> ManifoldPoint {
        assert_eq!(dir.len(), self.values.len(), "direction length mismatch");
        let values = self
            .values
            .iter()
            .zip(dir.iter())
            .map(|(&x, &d)| {
                let z = x + d * step;
                let n = z.norm();
                if n == 0.0 {
                    x
                } else {
                    z * (self.radius / n)
                }
            })
            .collect();
        ManifoldPoint { values, radius: self.radius }
    }
}

/// Projects an ambient vector onto the tangent space at `x`: for each entry,
/// the radial component `Re(e_t * conj(x_t)) / |x_t|^2 * x_t` is removed, so
/// the result is orthogonal to each circle's radius under the real inner
/// product.
pub fn riemannian_gradient(x: &ManifoldPoint, euclidean: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(euclidean.len(), x.len(), "gradient length mismatch");
    let r2 = x.radius * x.radius;
    x.values
        .iter()
        .zip(euclidean.iter())
        .map(|(&xt, &et)| et - xt * ((et * xt.conj()).re / r2))
        .collect()
}

fn real_inner(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    real_inner(a, a).sqrt()
}

/// Least-squares instance `min_x || F_RF(x) B - C ||_F^2` over the masked
/// unit-modulus manifold.
pub struct ReducedProblem<'a> {
    mask: &'a ConnectivityMask,
    b: CMat,
    c: CMat,
    b_adjoint: CMat,
}

impl<'a> ReducedProblem<'a> {
    /// `b` stacks the baseband matrices (`N_RF x T_cols`), `c` the targets
    /// (`N_T x T_cols`); multiple subcarriers enter as horizontally stacked
    /// blocks, which leaves the objective value identical to summing
    /// per-subcarrier costs.
    pub fn new(mask: &'a ConnectivityMask, b: CMat, c: CMat) -> Result<Self> {
        if b.nrows() != mask.n_cols() || c.nrows() != mask.n_rows() || b.ncols() != c.ncols() {
            return Err(Error::DimensionMismatch {
                context: "ReducedProblem",
                detail: format!(
                    "mask {} x {}, baseband {} x {}, target {} x {}",
                    mask.n_rows(),
                    mask.n_cols(),
                    b.nrows(),
                    b.ncols(),
                    c.nrows(),
                    c.ncols()
                ),
            });
        }
        let b_adjoint = b.adjoint();
        Ok(ReducedProblem { mask, b, c, b_adjoint })
    }

    pub fn mask(&self) -> &ConnectivityMask {
        self.mask
    }

    /// Support dimension of the search space.
    pub fn dim(&self) -> usize {
        self.mask.support_len()
    }

    /// Natural radius for points of this problem: `1 / sqrt(N_T)`.
    pub fn radius(&self) -> f64 {
        1.0 / (self.mask.n_rows() as f64).sqrt()
    }

    /// Dense analog matrix for a manifold point.
    pub fn assemble(&self, x: &ManifoldPoint) -> CMat {
        self.mask.scatter(x.values())
    }

    fn residual(&self, x: &ManifoldPoint) -> CMat {
        self.assemble(x) * &self.b - &self.c
    }

    /// Objective value `|| F_RF(x) B - C ||_F^2`.
    pub fn cost(&self, x: &ManifoldPoint) -> f64 {
        frob_sqr(&self.residual(x))
    }

    /// Euclidean gradient with respect to the support entries (Wirtinger
    /// convention: `d/d(Re) + j d/d(Im)`), i.e. `2 (F_RF(x) B - C) Bᴴ`
    /// gathered on the support.
    pub fn euclidean_gradient(&self, x: &ManifoldPoint) -> Vec<Complex64> {
        let g_dense = self.residual(x) * &self.b_adjoint * Complex64::new(2.0, 0.0);
        self.mask.gather(&g_dense)
    }
}

/// Why the solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmoStatus {
    /// Riemannian gradient norm fell below the tolerance.
    GradientConverged,
    /// Iteration budget exhausted.
    IterationLimit,
    /// Neither the conjugate direction nor steepest descent produced an
    /// acceptable step.
    Stalled,
}

/// Solver trace.
#[derive(Debug, Clone)]
pub struct MmoReport {
    /// Objective after each accepted iterate, starting with the initial
    /// point. Non-increasing by construction.
    pub cost_trace: Vec<f64>,
    pub status: MmoStatus,
    /// Accepted iterations (one less than the trace length).
    pub iterations: usize,
}

/// Solver knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmoOptions {
    pub max_iters: usize,
    /// Stop once the Riemannian gradient norm falls below this.
    pub grad_tol: f64,
    pub armijo_initial_step: f64,
    pub armijo_contraction: f64,
    pub armijo_slope: f64,
    pub max_backtracks: usize,
}

impl Default for MmoOptions {
    fn default() -> Self {
        MmoOptions {
            max_iters: 20,
            grad_tol: 1e-6,
            armijo_initial_step: 1.0,
            armijo_contraction: 0.5,
            armijo_slope: 1e-4,
            max_backtracks: 50,
        }
    }
}

fn armijo_search(
    problem: &ReducedProblem,
    x: &ManifoldPoint,
    cost: f64,
    dir: &[Complex64],
    slope: f64,
    opts: &MmoOptions,
) -> Option<(ManifoldPoint, f64)> {
    let mut step = opts.armijo_initial_step;
    for _ in 0..opts.max_backtracks {
        let cand = x.retract(dir, step);
        let cand_cost = problem.cost(&cand);
        if cand_cost <= cost + opts.armijo_slope * step * slope {
            return Some((cand, cand_cost));
        }
        step *= opts.armijo_contraction;
    }
    None
}

/// Riemannian conjugate-gradient descent from `x0`.
///
/// Every accepted step strictly decreases the objective, so the reported
/// cost trace is non-increasing; if `x0` is already stationary the starting
/// point comes straight back.
pub fn optimize(
    problem: &ReducedProblem,
    x0: ManifoldPoint,
    opts: &MmoOptions,
) -> (ManifoldPoint, MmoReport) {
    assert_eq!(x0.len(), problem.dim(), "starting point does not match the mask support");
    let mut x = x0;
    let mut cost = problem.cost(&x);
    let mut trace = vec![cost];

    let mut grad = riemannian_gradient(&x, &problem.euclidean_gradient(&x));
    let mut dir: Vec<Complex64> = grad.iter().map(|g| -g).collect();
    let mut status = MmoStatus::IterationLimit;
    let mut iterations = 0usize;

    for _ in 0..opts.max_iters {
        let grad_norm = norm(&grad);
        if grad_norm <= opts.grad_tol {
            status = MmoStatus::GradientConverged;
            break;
        }

        // Guard against non-descent conjugate directions.
        let mut slope = real_inner(&grad, &dir);
        if slope >= 0.0 {
            dir = grad.iter().map(|g| -g).collect();
            slope = -grad_norm * grad_norm;
        }

        let accepted = match armijo_search(problem, &x, cost, &dir, slope, opts) {
            Some(hit) => Some(hit),
            None => {
                // Fall back to steepest descent before giving up.
                let steepest: Vec<Complex64> = grad.iter().map(|g| -g).collect();
                let slope = -grad_norm * grad_norm;
                armijo_search(problem, &x, cost, &steepest, slope, opts).inspect(|_| {
                    dir = steepest;
                })
            }
        };
        let Some((x_new, cost_new)) = accepted else {
            status = MmoStatus::Stalled;
            break;
        };

        let grad_new = riemannian_gradient(&x_new, &problem.euclidean_gradient(&x_new));
        // Polak-Ribiere+ with projection transport to the new tangent space.
        let grad_old_moved = riemannian_gradient(&x_new, &grad);
        let dir_moved = riemannian_gradient(&x_new, &dir);
        let denom = real_inner(&grad, &grad);
        let beta = if denom > 0.0 {
            let diff: Vec<Complex64> =
                grad_new.iter().zip(grad_old_moved.iter()).map(|(a, b)| a - b).collect();
            (real_inner(&grad_new, &diff) / denom).max(0.0)
        } else {
            0.0
        };
        dir = grad_new
            .iter()
            .zip(dir_moved.iter())
            .map(|(g, d)| -g + d * Complex64::new(beta, 0.0))
            .collect();

        x = x_new;
        cost = cost_new;
        grad = grad_new;
        trace.push(cost);
        iterations += 1;
    }
    if status == MmoStatus::IterationLimit && norm(&grad) <= opts.grad_tol {
        status = MmoStatus::GradientConverged;
    }

    (x, MmoReport { cost_trace: trace, status, iterations })
}
