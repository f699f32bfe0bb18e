//! Score, curvature, leading term and remainder of the Bahadur expansion
//! `(n h^d)^{1/2} H (b_hat - b*) = beta_n + e_n`.

use nalgebra::{DMatrix, DVector};

use crate::basis::BasisSpec;
use crate::dgp::Dgp;
use crate::error::{Error, Result};
use crate::estimator::{EvalPoint, LocalFit, Sample};
use crate::kernel::KernelSpec;
use crate::population::PopulationFit;

/// Eigenvalue floor below which `jbar` is treated as singular.
pub const JBAR_EIGENVALUE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BahadurParts {
    pub theta: EvalPoint,
    /// `sum_i S_i / (n h^d)^{1/2}`.
    pub score_sum: Vec<f64>,
    /// `sum_i J_i / (n h^d)`, row-major `P x P`.
    pub jbar: Vec<f64>,
    pub beta_n: Vec<f64>,
    pub e_n: Vec<f64>,
    pub jbar_min_eigenvalue: f64,
    /// `(n h^d)^{1/2} (B_hat - B*)`.
    pub scaled_error: Vec<f64>,
}

impl BahadurParts {
    pub fn beta_norm(&self) -> f64 {
        euclid(&self.beta_n)
    }

    pub fn remainder_norm(&self) -> f64 {
        euclid(&self.e_n)
    }
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn scaled_point(sample: &Sample, i: usize, theta: &EvalPoint) -> Vec<f64> {
    sample
        .row(i)
        .iter()
        .zip(&theta.x)
        .map(|(xi, x)| (xi - x) / theta.h)
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `S_i = 2 {1(Y_i <= Q*(X_i; theta)) - alpha} U(z_i) K(z_i)` with `z_i = (X_i - x) / h`.
///
/// Ties `Y_i = Q*` count as `1`.
pub fn score_terms(
    sample: &Sample,
    theta: &EvalPoint,
    pop: &PopulationFit,
    basis: &BasisSpec,
    kernel: &KernelSpec,
) -> Vec<Vec<f64>> {
    (0..sample.n())
        .map(|i| {
            let z = scaled_point(sample, i, theta);
            let k = kernel.value(&z);
            if k == 0.0 {
                return vec![0.0; basis.len()];
            }
            let u = basis.eval(&z);
            let q_star = dot(&u, &pop.b_star_standardized);
            let ind = if sample.y()[i] <= q_star { 1.0 } else { 0.0 };
            let c = 2.0 * (ind - theta.alpha) * k;
            u.iter().map(|uk| c * uk).collect()
        })
        .collect()
}

/// `J_i = 2 f(Q*(X_i; theta) | X_i) U(z_i) U(z_i)^T K(z_i)`, row-major.
pub fn j_terms(
    dgp: &dyn Dgp,
    sample: &Sample,
    theta: &EvalPoint,
    pop: &PopulationFit,
    basis: &BasisSpec,
    kernel: &KernelSpec,
) -> Vec<Vec<f64>> {
    let p = basis.len();
    (0..sample.n())
        .map(|i| {
            let z = scaled_point(sample, i, theta);
            let k = kernel.value(&z);
            let mut out = vec![0.0; p * p];
            if k == 0.0 {
                return out;
            }
            let u = basis.eval(&z);
            let q_star = dot(&u, &pop.b_star_standardized);
            let c = 2.0 * dgp.conditional_pdf(q_star, sample.row(i)) * k;
            for r in 0..p {
                for s in 0..p {
                    out[r * p + s] = c * u[r] * u[s];
                }
            }
            out
        })
        .collect()
}

/// `beta = -jbar^{-1} score_sum` through a Cholesky factorization.
fn leading_term(jbar: &DMatrix<f64>, score_sum: &DVector<f64>, theta: &EvalPoint) -> Result<(DVector<f64>, f64)> {
    let min_eig = jbar.clone().symmetric_eigenvalues().min();
    let singular = || Error::Singular {
        context: format!("jbar at {theta}"),
        threshold: JBAR_EIGENVALUE_FLOOR,
    };
    if !(min_eig > JBAR_EIGENVALUE_FLOOR) {
        return Err(singular());
    }
    let chol = jbar.clone().cholesky().ok_or_else(singular)?;
    Ok((-chol.solve(score_sum), min_eig))
}

/// Full decomposition at `theta` for a synthetic model with known `b*`.
pub fn decompose(
    dgp: &dyn Dgp,
    sample: &Sample,
    fit: &LocalFit,
    pop: &PopulationFit,
    basis: &BasisSpec,
    kernel: &KernelSpec,
) -> Result<BahadurParts> {
    let theta = &fit.theta;
    let p = basis.len();
    let nh = sample.n() as f64 * theta.h.powi(basis.dim() as i32);
    let root = nh.sqrt();

    let mut score_sum = DVector::zeros(p);
    for s in score_terms(sample, theta, pop, basis, kernel) {
        for k in 0..p {
            score_sum[k] += s[k];
        }
    }
    score_sum /= root;

    let mut jbar = DMatrix::zeros(p, p);
    for j in j_terms(dgp, sample, theta, pop, basis, kernel) {
        for r in 0..p {
            for s in 0..p {
                jbar[(r, s)] += j[r * p + s];
            }
        }
    }
    jbar /= nh;

    let (beta, min_eig) = leading_term(&jbar, &score_sum, theta)?;
    let scaled_error: Vec<f64> = fit
        .coeffs_standardized
        .iter()
        .zip(&pop.b_star_standardized)
        .map(|(bh, bs)| root * (bh - bs))
        .collect();
    let e_n = scaled_error.iter().zip(beta.iter()).map(|(s, b)| s - b).collect();
    Ok(BahadurParts {
        theta: theta.clone(),
        score_sum: score_sum.iter().copied().collect(),
        jbar: jbar.transpose().iter().copied().collect(),
        beta_n: beta.iter().copied().collect(),
        e_n,
        jbar_min_eigenvalue: min_eig,
        scaled_error,
    })
}

/// Leading term with `Q*` replaced by the fitted polynomial and `f(Q*|X_i)`
/// replaced by a single plug-in conditional density (for example `1 / q_hat`).
/// No oracle is involved, so this is the only variant available on real data.
pub fn plugin_leading_term(
    sample: &Sample,
    fit: &LocalFit,
    basis: &BasisSpec,
    kernel: &KernelSpec,
    cond_density: f64,
) -> Result<Vec<f64>> {
    if !(cond_density > 0.0 && cond_density.is_finite()) {
        return Err(Error::domain(format!(
            "plug-in conditional density must be positive, got {cond_density}"
        )));
    }
    let theta = &fit.theta;
    let p = basis.len();
    let nh = sample.n() as f64 * theta.h.powi(basis.dim() as i32);
    let mut score_sum = DVector::zeros(p);
    let mut jbar = DMatrix::zeros(p, p);
    for i in 0..sample.n() {
        let z = scaled_point(sample, i, theta);
        let k = kernel.value(&z);
        if k == 0.0 {
            continue;
        }
        let u = basis.eval(&z);
        let q_hat = dot(&u, &fit.coeffs_standardized);
        let ind = if sample.y()[i] <= q_hat { 1.0 } else { 0.0 };
        for r in 0..p {
            score_sum[r] += 2.0 * (ind - theta.alpha) * k * u[r];
            for s in 0..p {
                jbar[(r, s)] += 2.0 * cond_density * k * u[r] * u[s];
            }
        }
    }
    score_sum /= nh.sqrt();
    jbar /= nh;
    let (beta, _) = leading_term(&jbar, &score_sum, theta)?;
    Ok(beta.iter().copied().collect())
}
