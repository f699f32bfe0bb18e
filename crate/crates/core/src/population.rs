//! Population pseudo-true coefficients `b*(theta)` for synthetic models.
//!
//! `B* = H b*` solves the first-order condition
//!
//! ```text
//! G(B) = int { F(U(z)^T B | x + hz) - alpha } f(x + hz) U(z) K(z) dz = 0
//! ```
//!
//! whose Jacobian is `int f(U(z)^T B | x + hz) f(x + hz) U(z) U(z)^T K(z) dz`.
//! The integral is discretized once per `theta`; the system is solved by damped
//! Newton from `B = (Q(alpha|x), 0, ..., 0)`.

use nalgebra::{DMatrix, DVector};

use crate::basis::{BasisSpec, MultiIndex};
use crate::dgp::Dgp;
use crate::error::{Error, Result};
use crate::estimator::EvalPoint;
use crate::kernel::KernelSpec;
use crate::quadrature::GaussLegendre;

/// Nodes per axis for the population integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub nodes_1d: usize,
    pub nodes_2d: usize,
    pub nodes_higher: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            nodes_1d: 64,
            nodes_2d: 32,
            nodes_higher: 12,
        }
    }
}

impl QuadratureSpec {
    fn nodes_for(&self, d: usize) -> usize {
        match d {
            1 => self.nodes_1d,
            2 => self.nodes_2d,
            _ => self.nodes_higher,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationFit {
    pub theta: EvalPoint,
    pub b_star_standardized: Vec<f64>,
    pub b_star_natural: Vec<f64>,
    /// Sup-norm of the first-order condition at the solution.
    pub residual_norm: f64,
    /// Smallest eigenvalue of the Jacobian at the solution.
    pub jacobian_min_eigenvalue: f64,
    pub iterations: usize,
}

impl PopulationFit {
    /// `Q*_h(alpha | x) = b*_0`.
    pub fn quantile(&self) -> f64 {
        self.b_star_natural[0]
    }

    /// `Q*(x'; theta) = U(x' - x)^T b*(theta)`.
    pub fn pseudo_quantile_at(&self, basis: &BasisSpec, x_prime: &[f64]) -> f64 {
        let diff: Vec<f64> = x_prime.iter().zip(&self.theta.x).map(|(a, b)| a - b).collect();
        basis
            .eval(&diff)
            .iter()
            .zip(&self.b_star_natural)
            .map(|(u, b)| u * b)
            .sum()
    }
}

/// Discretized `int g(z) f(x + hz) K(z) dz` over the kernel support.
struct Integrator {
    /// Covariate `x + hz` per node.
    points: Vec<Vec<f64>>,
    /// `U(z)` per node.
    basis: Vec<Vec<f64>>,
    /// Quadrature weight times `f(x + hz) K(z)`.
    weights: Vec<f64>,
}

impl Integrator {
    fn new(dgp: &dyn Dgp, theta: &EvalPoint, basis: &BasisSpec, kernel: &KernelSpec, quad: &QuadratureSpec) -> Self {
        let d = basis.dim();
        let n = quad.nodes_for(d);
        let raw: Vec<(Vec<f64>, f64)> = if d == 1 {
            panels_1d(dgp, theta, n)
        } else {
            let rule = kernel.support_rule(n);
            rule.points.into_iter().zip(rule.weights).collect()
        };
        let mut points = Vec::with_capacity(raw.len());
        let mut us = Vec::with_capacity(raw.len());
        let mut weights = Vec::with_capacity(raw.len());
        for (z, w) in raw {
            let xp: Vec<f64> = z.iter().zip(&theta.x).map(|(zj, xj)| xj + theta.h * zj).collect();
            let omega = w * kernel.value(&z) * dgp.marginal_pdf(&xp);
            if omega > 0.0 {
                us.push(basis.eval(&z));
                points.push(xp);
                weights.push(omega);
            }
        }
        Integrator {
            points,
            basis: us,
            weights,
        }
    }

    fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn residual(&self, dgp: &dyn Dgp, alpha: f64, b: &DVector<f64>) -> DVector<f64> {
        let p = b.len();
        let mut g = DVector::zeros(p);
        for ((u, xp), w) in self.basis.iter().zip(&self.points).zip(&self.weights) {
            let fit: f64 = u.iter().zip(b.iter()).map(|(a, c)| a * c).sum();
            let c = w * (dgp.conditional_cdf(fit, xp) - alpha);
            for k in 0..p {
                g[k] += c * u[k];
            }
        }
        g
    }

    fn jacobian(&self, dgp: &dyn Dgp, b: &DVector<f64>) -> DMatrix<f64> {
        let p = b.len();
        let mut j = DMatrix::zeros(p, p);
        for ((u, xp), w) in self.basis.iter().zip(&self.points).zip(&self.weights) {
            let fit: f64 = u.iter().zip(b.iter()).map(|(a, c)| a * c).sum();
            let c = w * dgp.conditional_pdf(fit, xp);
            for r in 0..p {
                for s in r..p {
                    j[(r, s)] += c * u[r] * u[s];
                }
            }
        }
        for r in 0..p {
            for s in 0..r {
                j[(r, s)] = j[(s, r)];
            }
        }
        j
    }
}

/// One-dimensional panels on `[-1, 1]` split at kinks and support edges.
/// Panels touching a kink use `z = c + (e - c) t^2` so square-root type
/// singularities become smooth.
fn panels_1d(dgp: &dyn Dgp, theta: &EvalPoint, n: usize) -> Vec<(Vec<f64>, f64)> {
    let gl = GaussLegendre::new(n);
    let (x, h) = (theta.x[0], theta.h);
    let (lo, hi) = dgp.support();
    let inside = |z: f64| z > -1.0 && z < 1.0;
    let kinks: Vec<f64> = dgp.kinks().iter().map(|k| (k - x) / h).filter(|z| inside(*z)).collect();
    let mut cuts: Vec<f64> = vec![-1.0, 1.0];
    cuts.extend(&kinks);
    cuts.extend([(lo[0] - x) / h, (hi[0] - x) / h].into_iter().filter(|z| inside(*z)));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let is_kink = |z: f64| kinks.contains(&z);

    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        match (is_kink(a), is_kink(b)) {
            (false, false) => out.extend(gl.on_interval(a, b).map(|(z, wz)| (vec![z], wz))),
            (true, false) => out.extend(graded(&gl, a, b)),
            (false, true) => out.extend(graded(&gl, b, a)),
            (true, true) => {
                let mid = 0.5 * (a + b);
                out.extend(graded(&gl, a, mid));
                out.extend(graded(&gl, b, mid));
            }
        }
    }
    out
}

/// Nodes for `int_c^e g(z) dz` with `z = c + (e - c) t^2`, `t in [0, 1]`.
fn graded(gl: &GaussLegendre, c: f64, e: f64) -> impl Iterator<Item = (Vec<f64>, f64)> + '_ {
    let len = e - c;
    gl.on_interval(0.0, 1.0)
        .map(move |(t, wt)| (vec![c + len * t * t], wt * 2.0 * t * len.abs()))
}

const MAX_NEWTON_STEPS: usize = 100;

/// Solves the population first-order condition at `theta`.
pub fn solve_population_foc(
    dgp: &dyn Dgp,
    theta: &EvalPoint,
    basis: &BasisSpec,
    kernel: &KernelSpec,
    quad: &QuadratureSpec,
) -> Result<PopulationFit> {
    if dgp.dim() != basis.dim() || kernel.dim() != basis.dim() || theta.x.len() != basis.dim() {
        return Err(Error::domain("dimension mismatch between model, basis, kernel and point"));
    }
    let integ = Integrator::new(dgp, theta, basis, kernel, quad);
    let mass = integ.mass();
    if !(mass > 0.0) {
        return Err(Error::domain(format!(
            "kernel window at {theta} has no covariate mass"
        )));
    }
    let p = basis.len();
    let mut b = DVector::zeros(p);
    b[0] = dgp.quantile(theta.alpha, &theta.x);
    let mut g = integ.residual(dgp, theta.alpha, &b);
    let mut norm = g.amax();
    let target = 1e-14 * mass;
    let accept = 1e-10 * mass;
    let mut iterations = 0;

    while norm > target && iterations < MAX_NEWTON_STEPS {
        iterations += 1;
        let jac = integ.jacobian(dgp, &b);
        let step = match jac.cholesky() {
            Some(ch) => ch.solve(&g),
            None => break,
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let trial = &b - t * &step;
            let g_trial = integ.residual(dgp, theta.alpha, &trial);
            let n_trial = g_trial.amax();
            if n_trial < norm {
                b = trial;
                g = g_trial;
                norm = n_trial;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }

    if !(norm <= accept) {
        return Err(Error::NonConvergence {
            iterations,
            residual: norm,
            last_iterate: b.iter().copied().collect(),
        });
    }

    let jac = integ.jacobian(dgp, &b);
    if jac.clone().cholesky().is_none() {
        return Err(Error::Singular {
            context: format!("population jacobian at {theta}"),
            threshold: 0.0,
        });
    }
    let jacobian_min_eigenvalue = jac.symmetric_eigenvalues().min();
    let scale = basis.scaling(theta.h)?;
    let standardized: Vec<f64> = b.iter().copied().collect();
    let natural = standardized.iter().zip(&scale).map(|(v, s)| v / s).collect();
    Ok(PopulationFit {
        theta: theta.clone(),
        b_star_standardized: standardized,
        b_star_natural: natural,
        residual_norm: norm,
        jacobian_min_eigenvalue,
        iterations,
    })
}

/// `b*_v(theta) - b_v(alpha | x)` in natural scale.
pub fn population_bias(
    dgp: &dyn Dgp,
    theta: &EvalPoint,
    basis: &BasisSpec,
    kernel: &KernelSpec,
    v: &MultiIndex,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let k = basis
        .position(v)
        .ok_or_else(|| Error::domain(format!("multi-index {v} not in the order-{} basis", basis.order())))?;
    if (v.degree() as f64) > dgp.smoothness() {
        return Err(Error::domain(format!(
            "derivative {v} exceeds the smoothness {} of {}",
            dgp.smoothness(),
            dgp.name()
        )));
    }
    let truth = dgp
        .derivative(theta.alpha, &theta.x, v)
        .ok_or_else(|| Error::domain(format!("{} has no closed-form derivative {v}", dgp.name())))?;
    let fit = solve_population_foc(dgp, theta, basis, kernel, quad)?;
    Ok(fit.b_star_natural[k] - truth)
}
