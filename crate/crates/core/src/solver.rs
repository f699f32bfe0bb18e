//! Kernel-weighted check-loss minimization.
//!
//! The weighted problem `min_B sum_i w_i rho_alpha(Y_i - U_i^T B)` is solved as
//! the unweighted problem on rows `(w_i U_i, w_i Y_i)`, which is valid because
//! the pinball loss `rho_alpha(r) = r (alpha - 1{r < 0})` is positively
//! homogeneous. The symmetric form `|q| + (2 alpha - 1) q` equals
//! `2 rho_alpha(q)`, so both have the same minimizers.
//!
//! The interior-point method works on the bounded dual
//!
//! ```text
//! min -y^T a   s.t.  X^T a = (1 - alpha) X^T 1,   0 <= a <= 1
//! ```
//!
//! with Mehrotra predictor-corrector steps and `P x P` normal equations. The
//! equality multipliers are the regression coefficients. After convergence a
//! crossover step snaps to the basic solution interpolating the `P` best-fit
//! points when that does not increase the objective.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Check loss in the symmetric form `|q| + (2 alpha - 1) q`.
pub fn check_loss(alpha: f64, q: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("quantile level must lie in (0,1), got {alpha}")));
    }
    Ok(q.abs() + (2.0 * alpha - 1.0) * q)
}

/// Standard pinball loss `q (alpha - 1{q < 0})`; half of [`check_loss`].
#[inline]
pub fn pinball(alpha: f64, q: f64) -> f64 {
    if q < 0.0 {
        q * (alpha - 1.0)
    } else {
        q * alpha
    }
}

/// A local weighted quantile regression restricted to points with positive weight.
#[derive(Debug, Clone)]
pub struct WeightedQRProblem {
    /// Row-major `m x ncols` design.
    pub design: Vec<f64>,
    pub ncols: usize,
    pub responses: Vec<f64>,
    pub weights: Vec<f64>,
    pub alpha: f64,
}

impl WeightedQRProblem {
    pub fn rows(&self) -> usize {
        self.responses.len()
    }

    fn validate(&self) -> Result<()> {
        let m = self.responses.len();
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!(
                "quantile level must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if m == 0 {
            return Err(Error::domain("weighted problem has no rows"));
        }
        if self.ncols == 0 || self.design.len() != m * self.ncols || self.weights.len() != m {
            return Err(Error::domain("inconsistent weighted problem dimensions"));
        }
        if self.design.iter().chain(&self.responses).any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite design or response entry"));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::domain("weights must be finite and strictly positive"));
        }
        Ok(())
    }

    /// Objective `sum_i w_i rho_alpha(Y_i - U_i^T B)` in pinball scale.
    pub fn objective(&self, coefficients: &[f64]) -> f64 {
        self.design
            .chunks_exact(self.ncols)
            .zip(&self.responses)
            .zip(&self.weights)
            .map(|((row, y), w)| {
                let fit: f64 = row.iter().zip(coefficients).map(|(u, b)| u * b).sum();
                w * pinball(self.alpha, y - fit)
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative primal-dual gap required for `Optimal`.
    pub gap: f64,
    /// Relative primal and dual feasibility tolerance.
    pub feasibility: f64,
    pub max_iterations: usize,
    /// Iterations without progress before giving up.
    pub stall_window: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap: 1e-9,
            feasibility: 1e-10,
            max_iterations: 200,
            stall_window: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Optimal,
    RankDeficientRegularized,
    MaxIterations,
}

impl SolverStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::RankDeficientRegularized => "rank-deficient-regularized",
            SolverStatus::MaxIterations => "max-iterations",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub coefficients: Vec<f64>,
    pub status: SolverStatus,
    /// `(primal - dual) / (1 + |primal|)` at the returned point.
    pub duality_gap: f64,
    pub iterations: usize,
    pub active_points: usize,
    /// Weighted pinball objective at `coefficients`.
    pub objective: f64,
}

struct Scaled {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

pub fn solve_weighted_qr(problem: &WeightedQRProblem, opts: &SolverOptions) -> Result<SolverResult> {
    problem.validate()?;
    let m = problem.rows();
    let p = problem.ncols;
    let alpha = problem.alpha;

    let mut x = DMatrix::from_row_slice(m, p, &problem.design);
    let mut y = DVector::from_column_slice(&problem.responses);
    for i in 0..m {
        let w = problem.weights[i];
        x.row_mut(i).scale_mut(w);
        y[i] *= w;
    }
    let y_scale = y.amax();
    let y_scale = if y_scale > 0.0 { y_scale } else { 1.0 };
    y /= y_scale;
    let sc = Scaled { x, y };

    let gram = sc.x.transpose() * &sc.x;
    let trace = gram.trace();
    let rank_deficient = m < p || trace <= 0.0 || {
        let eig = gram.clone().symmetric_eigenvalues();
        eig.min() <= 1e-12 * trace
    };
    let ridge = if rank_deficient {
        1e-8 * trace.max(f64::MIN_POSITIVE) / p as f64
    } else {
        0.0
    };

    let ipm = interior_point(&sc, alpha, ridge, opts);

    let mut coefficients = ipm.b.clone();
    if !rank_deficient {
        if let Some(vertex) = crossover(&sc, &ipm.b) {
            let obj_v = scaled_objective(&sc, alpha, &vertex);
            let obj_b = scaled_objective(&sc, alpha, &ipm.b);
            if obj_v <= obj_b * (1.0 + 1e-12) + 1e-15 {
                coefficients = vertex;
            }
        }
    }

    let primal = scaled_objective(&sc, alpha, &coefficients);
    let gap = ((primal - ipm.dual_objective) / (1.0 + primal.abs())).max(0.0);
    let status = if rank_deficient {
        SolverStatus::RankDeficientRegularized
    } else if ipm.converged && gap <= opts.gap {
        SolverStatus::Optimal
    } else {
        SolverStatus::MaxIterations
    };

    let coefficients: Vec<f64> = coefficients.iter().map(|b| b * y_scale).collect();
    let objective = problem.objective(&coefficients);
    Ok(SolverResult {
        coefficients,
        status,
        duality_gap: gap,
        iterations: ipm.iterations,
        active_points: m,
        objective,
    })
}

fn scaled_objective(sc: &Scaled, alpha: f64, b: &DVector<f64>) -> f64 {
    let r = &sc.y - &sc.x * b;
    r.iter().map(|&ri| pinball(alpha, ri)).sum()
}

struct IpmOutcome {
    b: DVector<f64>,
    dual_objective: f64,
    iterations: usize,
    converged: bool,
}

const STEP_FRACTION: f64 = 0.99995;

fn interior_point(sc: &Scaled, alpha: f64, ridge: f64, opts: &SolverOptions) -> IpmOutcome {
    let m = sc.y.len();
    let p = sc.x.ncols();
    let x = &sc.x;
    let xt = x.transpose();
    let y = &sc.y;

    let rhs_b = (1.0 - alpha) * (&xt * DVector::from_element(m, 1.0));

    // Least-squares start; the primal point a = 1 - alpha is feasible.
    let mut gram = &xt * x;
    for k in 0..p {
        gram[(k, k)] += ridge.max(1e-14 * gram[(k, k)].abs().max(1e-300));
    }
    let mut b = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&(&xt * y)),
        None => DVector::zeros(p),
    };
    let r0 = y - x * &b;
    let mean_abs = r0.iter().map(|v| v.abs()).sum::<f64>() / m as f64;
    let shift = (0.1 * mean_abs).max(1e-6);
    let mut a = DVector::from_element(m, 1.0 - alpha);
    let mut s = DVector::from_element(m, alpha);
    let mut w = r0.map(|r| r.max(0.0) + shift);
    let mut z = r0.map(|r| (-r).max(0.0) + shift);

    let b_norm = rhs_b.amax().max(1.0);
    let y_norm = y.amax().max(1.0);

    let mut best_b = b.clone();
    let mut best_dual = f64::NEG_INFINITY;
    let mut best_merit = f64::INFINITY;
    let mut since_improvement = 0;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=opts.max_iterations {
        iterations = iter;
        let r_p = &rhs_b - &xt * &a;
        let r_d = y - x * &b - &w + &z;
        let comp = a.dot(&z) + s.dot(&w);
        let mu = comp / (2 * m) as f64;

        let primal_obj = scaled_objective(sc, alpha, &b);
        let dual_obj = y.dot(&a) - (1.0 - alpha) * y.sum();
        let gap_rel = comp / (1.0 + primal_obj.abs());
        let feas_p = r_p.amax() / b_norm;
        let feas_d = r_d.amax() / y_norm;
        let merit = gap_rel.max(feas_p).max(feas_d);
        if merit < best_merit * 0.999 {
            best_merit = merit;
            best_b = b.clone();
            best_dual = dual_obj;
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        if gap_rel <= 0.1 * opts.gap && feas_p <= opts.feasibility && feas_d <= opts.feasibility {
            best_b = b.clone();
            best_dual = dual_obj;
            converged = true;
            break;
        }
        if since_improvement >= opts.stall_window {
            break;
        }

        let q = DVector::from_iterator(m, (0..m).map(|i| z[i] / a[i] + w[i] / s[i]));
        let qinv = q.map(|v| 1.0 / v);
        let mut normal = DMatrix::<f64>::zeros(p, p);
        for i in 0..m {
            let row = x.row(i);
            let wi = qinv[i];
            for j in 0..p {
                let rj = row[j] * wi;
                for k in j..p {
                    normal[(j, k)] += rj * row[k];
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                normal[(j, k)] = normal[(k, j)];
            }
        }
        if ridge > 0.0 {
            let lam = 1e-8 * normal.trace() / p as f64;
            for k in 0..p {
                normal[(k, k)] += lam;
            }
        }
        let chol = match normal.clone().cholesky() {
            Some(c) => c,
            None => {
                let lam = 1e-8 * normal.trace().abs().max(1e-300) / p as f64;
                let mut n2 = normal.clone();
                for k in 0..p {
                    n2[(k, k)] += lam;
                }
                match n2.cholesky() {
                    Some(c) => c,
                    None => break,
                }
            }
        };

        let direction = |r_az: &DVector<f64>, r_sw: &DVector<f64>| {
            let rho = DVector::from_iterator(
                m,
                (0..m).map(|i| r_d[i] - r_sw[i] / s[i] + r_az[i] / a[i]),
            );
            let rhs = &xt * rho.component_mul(&qinv) - &r_p;
            let db = chol.solve(&rhs);
            let da = (rho - x * &db).component_mul(&qinv);
            let dz = DVector::from_iterator(m, (0..m).map(|i| (r_az[i] - z[i] * da[i]) / a[i]));
            let dw = DVector::from_iterator(m, (0..m).map(|i| (r_sw[i] + w[i] * da[i]) / s[i]));
            (db, da, dz, dw)
        };

        // predictor
        let r_az = -a.component_mul(&z);
        let r_sw = -s.component_mul(&w);
        let (_, da_aff, dz_aff, dw_aff) = direction(&r_az, &r_sw);
        let tp = primal_step(&a, &s, &da_aff, 1.0);
        let td = dual_step(&z, &w, &dz_aff, &dw_aff, 1.0);
        let mut mu_aff = 0.0;
        for i in 0..m {
            let ai = a[i] + tp * da_aff[i];
            let si = s[i] - tp * da_aff[i];
            mu_aff += ai * (z[i] + td * dz_aff[i]) + si * (w[i] + td * dw_aff[i]);
        }
        mu_aff /= (2 * m) as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let r_az = DVector::from_iterator(
            m,
            (0..m).map(|i| sigma * mu - a[i] * z[i] - da_aff[i] * dz_aff[i]),
        );
        let r_sw = DVector::from_iterator(
            m,
            (0..m).map(|i| sigma * mu - s[i] * w[i] + da_aff[i] * dw_aff[i]),
        );
        let (db, da, dz, dw) = direction(&r_az, &r_sw);
        let tp = primal_step(&a, &s, &da, STEP_FRACTION);
        let td = dual_step(&z, &w, &dz, &dw, STEP_FRACTION);

        a += tp * &da;
        s = DVector::from_element(m, 1.0) - &a;
        b += td * db;
        z += td * dz;
        w += td * dw;
        for i in 0..m {
            a[i] = a[i].clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON * 0.5);
            s[i] = s[i].max(f64::MIN_POSITIVE);
            z[i] = z[i].max(f64::MIN_POSITIVE);
            w[i] = w[i].max(f64::MIN_POSITIVE);
        }
    }

    IpmOutcome {
        b: best_b,
        dual_objective: best_dual,
        iterations,
        converged,
    }
}

fn primal_step(a: &DVector<f64>, s: &DVector<f64>, da: &DVector<f64>, fraction: f64) -> f64 {
    let mut t: f64 = 1.0 / fraction;
    for i in 0..a.len() {
        if da[i] < 0.0 {
            t = t.min(-a[i] / da[i]);
        } else if da[i] > 0.0 {
            t = t.min(s[i] / da[i]);
        }
    }
    (fraction * t).min(1.0)
}

fn dual_step(z: &DVector<f64>, w: &DVector<f64>, dz: &DVector<f64>, dw: &DVector<f64>, fraction: f64) -> f64 {
    let mut t: f64 = 1.0 / fraction;
    for i in 0..z.len() {
        if dz[i] < 0.0 {
            t = t.min(-z[i] / dz[i]);
        }
        if dw[i] < 0.0 {
            t = t.min(-w[i] / dw[i]);
        }
    }
    (fraction * t).min(1.0)
}

/// Basic solution through the `P` linearly independent rows with the smallest
/// absolute residual at `b`.
fn crossover(sc: &Scaled, b: &DVector<f64>) -> Option<DVector<f64>> {
    let m = sc.y.len();
    let p = sc.x.ncols();
    let r = &sc.y - &sc.x * b;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| r[i].abs().total_cmp(&r[j].abs()).then(i.cmp(&j)));

    let mut chosen = Vec::with_capacity(p);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(p);
    for &i in &order {
        let row = sc.x.row(i).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = row.clone();
        for _ in 0..2 {
            for q in &ortho {
                let c = q.dot(&v);
                v -= c * q;
            }
        }
        let vn = v.norm();
        if vn > 1e-9 * norm {
            ortho.push(v / vn);
            chosen.push(i);
            if chosen.len() == p {
                break;
            }
        }
    }
    if chosen.len() < p {
        return None;
    }
    let mut basis = DMatrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    for (k, &i) in chosen.iter().enumerate() {
        basis.row_mut(k).copy_from(&sc.x.row(i));
        rhs[k] = sc.y[i];
    }
    let sol = basis.lu().solve(&rhs)?;
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intercept_problem(y: &[f64], w: &[f64], alpha: f64) -> WeightedQRProblem {
        WeightedQRProblem {
            design: vec![1.0; y.len()],
            ncols: 1,
            responses: y.to_vec(),
            weights: w.to_vec(),
            alpha,
        }
    }

    #[test]
    fn check_loss_values() {
        assert_eq!(check_loss(0.5, -3.0).unwrap(), 3.0);
        assert_eq!(check_loss(0.3, 0.0).unwrap(), 0.0);
        assert_eq!(check_loss(0.25, 2.0).unwrap(), 1.0);
        assert!(check_loss(0.0, 1.0).is_err());
        assert!(check_loss(1.0, 1.0).is_err());
        assert_eq!(check_loss(0.7, 1.5).unwrap(), 2.0 * pinball(0.7, 1.5));
    }

    #[test]
    fn sample_median() {
        let pr = intercept_problem(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0; 5], 0.5);
        let r = solve_weighted_qr(&pr, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((r.coefficients[0] - 3.0).abs() < 1e-9, "{:?}", r);
    }

    #[test]
    fn heavily_weighted_top_point() {
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let w = [1.0, 1.0, 1.0, 1.0, 10.0];
        // brute force over candidate values
        let best = y
            .iter()
            .map(|&c| (c, y.iter().zip(&w).map(|(yi, wi)| wi * pinball(0.5, yi - c)).sum::<f64>()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert_eq!(best.0, 5.0);
        let r = solve_weighted_qr(&intercept_problem(&y, &w, 0.5), &SolverOptions::default()).unwrap();
        assert!((r.coefficients[0] - 5.0).abs() < 1e-9, "{:?}", r);
    }

    #[test]
    fn exact_linear_fit() {
        let xs: Vec<f64> = (0..20).map(|i| -1.0 + 0.1 * i as f64).collect();
        let design: Vec<f64> = xs.iter().flat_map(|&x| [1.0, x, 0.5 * x * x]).collect();
        let responses: Vec<f64> = xs.iter().map(|&x| 0.7 - 1.3 * x + 0.4 * x * x).collect();
        let pr = WeightedQRProblem {
            design,
            ncols: 3,
            responses,
            weights: xs.iter().map(|x| 1.0 - 0.5 * x * x).collect(),
            alpha: 0.3,
        };
        let r = solve_weighted_qr(&pr, &SolverOptions::default()).unwrap();
        for (got, want) in r.coefficients.iter().zip([0.7, -1.3, 0.8]) {
            assert!((got - want).abs() < 1e-10, "{:?}", r.coefficients);
        }
        assert!(r.objective.abs() < 1e-10);
    }

    #[test]
    fn too_few_points_is_regularized() {
        let pr = WeightedQRProblem {
            design: vec![1.0, 0.2, 0.02],
            ncols: 3,
            responses: vec![1.0],
            weights: vec![0.5],
            alpha: 0.5,
        };
        let r = solve_weighted_qr(&pr, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolverStatus::RankDeficientRegularized);
        assert!(r.coefficients.iter().all(|c| c.is_finite()));
        assert!(r.objective < 1e-6);
    }

    #[test]
    fn collinear_design_is_regularized() {
        let design: Vec<f64> = (0..6).flat_map(|i| [1.0, 2.0 * i as f64, i as f64]).collect();
        let pr = WeightedQRProblem {
            design,
            ncols: 3,
            responses: (0..6).map(|i| i as f64 + 0.1 * (i % 2) as f64).collect(),
            weights: vec![1.0; 6],
            alpha: 0.4,
        };
        let r = solve_weighted_qr(&pr, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolverStatus::RankDeficientRegularized);
        assert!(r.coefficients.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut pr = intercept_problem(&[1.0, f64::NAN], &[1.0, 1.0], 0.5);
        assert!(solve_weighted_qr(&pr, &SolverOptions::default()).is_err());
        pr.responses[1] = 2.0;
        pr.weights[0] = 0.0;
        assert!(solve_weighted_qr(&pr, &SolverOptions::default()).is_err());
        pr.weights[0] = 1.0;
        pr.alpha = 1.0;
        assert!(solve_weighted_qr(&pr, &SolverOptions::default()).is_err());
    }
}
