//! Local polynomial quantile estimator `b_hat(alpha; h, x)`.

use std::fmt;

use rayon::prelude::*;

use crate::basis::{BasisSpec, MultiIndex};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::solver::{solve_weighted_qr, SolverOptions, SolverResult, SolverStatus, WeightedQRProblem};

/// `n` observations `(X_i, Y_i)` with `d`-dimensional covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Row-major `n x d`.
    x: Vec<f64>,
    y: Vec<f64>,
    d: usize,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("sample dimension must be at least 1"));
        }
        if y.is_empty() {
            return Err(Error::domain("sample must contain at least one observation"));
        }
        if x.len() != y.len() * d {
            return Err(Error::domain(format!(
                "covariate matrix has {} entries, expected {} x {}",
                x.len(),
                y.len(),
                d
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite covariate in row {}", i / d)));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite response in row {i}")));
        }
        Ok(Sample { x, y, d })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// Per-dimension `(min, max)` of the covariates.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.d];
        let mut hi = vec![f64::NEG_INFINITY; self.d];
        for row in self.x.chunks_exact(self.d) {
            for j in 0..self.d {
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
        }
        (lo, hi)
    }

    pub fn with_responses(&self, y: Vec<f64>) -> Result<Self> {
        Sample::new(self.x.clone(), y, self.d)
    }
}

/// `theta = (alpha, h, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub alpha: f64,
    pub h: f64,
    pub x: Vec<f64>,
}

impl EvalPoint {
    pub fn new(alpha: f64, h: f64, x: Vec<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0,1), got {alpha}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::domain(format!("bandwidth must be positive, got {h}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("evaluation point must be finite"));
        }
        Ok(EvalPoint { alpha, h, x })
    }
}

impl fmt::Display for EvalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let xs: Vec<String> = self.x.iter().map(|v| v.to_string()).collect();
        write!(f, "(alpha={}, h={}, x=({}))", self.alpha, self.h, xs.join(","))
    }
}

/// Axis-aligned box standing in for the inner covariate region.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl InnerRegion {
    /// Sample bounding box shrunk by `margin` on every side.
    pub fn from_sample(sample: &Sample, margin: f64) -> Self {
        let (lo, hi) = sample.bounding_box();
        InnerRegion {
            lo: lo.iter().map(|v| v + margin).collect(),
            hi: hi.iter().map(|v| v - margin).collect(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    pub theta: EvalPoint,
    /// `B_hat = H b_hat`.
    pub coeffs_standardized: Vec<f64>,
    /// `b_hat`, with `b_hat_v = B_hat_v / h^{|v|}`.
    pub coeffs_natural: Vec<f64>,
    pub solver: SolverResult,
    /// Evaluation point lies outside the inner region.
    pub boundary: bool,
}

impl LocalFit {
    /// `Q_hat_h(alpha | x)`.
    pub fn quantile(&self) -> f64 {
        self.coeffs_natural[0]
    }

    /// Estimate of `d^{|v|} Q / dx^v`.
    pub fn derivative(&self, basis: &BasisSpec, v: &MultiIndex) -> Result<f64> {
        if v.dim() != basis.dim() || v.degree() as usize > basis.order() {
            return Err(Error::domain(format!(
                "multi-index {v} is not part of the order-{} basis",
                basis.order()
            )));
        }
        let k = basis
            .position(v)
            .ok_or_else(|| Error::domain(format!("multi-index {v} not in basis")))?;
        Ok(self.coeffs_natural[k])
    }

    pub fn status(&self) -> SolverStatus {
        self.solver.status
    }
}

/// One `(alpha, h, x)` cell of a grid run.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub theta: EvalPoint,
    pub fit: Result<LocalFit>,
}

/// Local polynomial quantile estimator of a fixed order and kernel.
#[derive(Debug, Clone)]
pub struct LocalQuantileEstimator {
    pub basis: BasisSpec,
    pub kernel: KernelSpec,
    pub solver: SolverOptions,
    /// Inner-region margin; defaults to the largest bandwidth in use.
    pub margin: Option<f64>,
}

impl LocalQuantileEstimator {
    pub fn new(basis: BasisSpec, kernel: KernelSpec) -> Result<Self> {
        if basis.dim() != kernel.dim() {
            return Err(Error::domain(format!(
                "basis dimension {} does not match kernel dimension {}",
                basis.dim(),
                kernel.dim()
            )));
        }
        Ok(LocalQuantileEstimator {
            basis,
            kernel,
            solver: SolverOptions::default(),
            margin: None,
        })
    }

    fn check_dims(&self, sample: &Sample, x: &[f64]) -> Result<()> {
        if sample.dim() != self.basis.dim() || x.len() != self.basis.dim() {
            return Err(Error::domain(format!(
                "dimension mismatch: basis {}, sample {}, point {}",
                self.basis.dim(),
                sample.dim(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Builds the kernel-weighted problem from the points inside the window.
    pub fn local_problem(&self, sample: &Sample, theta: &EvalPoint) -> Result<WeightedQRProblem> {
        self.check_dims(sample, &theta.x)?;
        let lw = self.kernel.local_weights(sample.x(), &theta.x, theta.h)?;
        if lw.active.is_empty() {
            return Err(Error::EmptyWindow {
                theta: theta.to_string(),
            });
        }
        let p = self.basis.len();
        let d = sample.dim();
        let mut design = vec![0.0; lw.active.len() * p];
        let mut z = vec![0.0; d];
        for (row, &i) in design.chunks_exact_mut(p).zip(&lw.active) {
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = (sample.row(i)[j] - theta.x[j]) / theta.h;
            }
            self.basis.eval_into(&z, row);
        }
        Ok(WeightedQRProblem {
            design,
            ncols: p,
            responses: lw.active.iter().map(|&i| sample.y()[i]).collect(),
            weights: lw.active.iter().map(|&i| lw.weights[i]).collect(),
            alpha: theta.alpha,
        })
    }

    pub fn fit_at(&self, sample: &Sample, theta: &EvalPoint) -> Result<LocalFit> {
        let margin = self.margin.unwrap_or(theta.h);
        self.fit_with_margin(sample, theta, margin)
    }

    fn fit_with_margin(&self, sample: &Sample, theta: &EvalPoint, margin: f64) -> Result<LocalFit> {
        let problem = self.local_problem(sample, theta)?;
        let solver = solve_weighted_qr(&problem, &self.solver)?;
        let scale = self.basis.scaling(theta.h)?;
        let coeffs_standardized = solver.coefficients.clone();
        let coeffs_natural = coeffs_standardized
            .iter()
            .zip(&scale)
            .map(|(b, s)| b / s)
            .collect();
        let boundary = !InnerRegion::from_sample(sample, margin).contains(&theta.x);
        Ok(LocalFit {
            theta: theta.clone(),
            coeffs_standardized,
            coeffs_natural,
            solver,
            boundary,
        })
    }

    /// Fits every `(alpha, h, x)` combination; `alpha` outermost, then `h`, then `x`.
    ///
    /// Cells are evaluated in parallel; the output order and contents are
    /// identical to a sequential run.
    pub fn fit_grid(
        &self,
        sample: &Sample,
        alphas: &[f64],
        hs: &[f64],
        xs: &[Vec<f64>],
    ) -> Result<Vec<GridCell>> {
        if alphas.is_empty() || hs.is_empty() || xs.is_empty() {
            return Err(Error::domain("grids must be nonempty"));
        }
        let margin = self
            .margin
            .unwrap_or_else(|| hs.iter().cloned().fold(0.0, f64::max));
        let mut thetas = Vec::with_capacity(alphas.len() * hs.len() * xs.len());
        for &alpha in alphas {
            for &h in hs {
                for x in xs {
                    thetas.push((alpha, h, x.clone()));
                }
            }
        }
        Ok(thetas
            .into_par_iter()
            .map(|(alpha, h, x)| {
                let raw = EvalPoint { alpha, h, x };
                let fit = EvalPoint::new(alpha, h, raw.x.clone())
                    .and_then(|theta| self.fit_with_margin(sample, &theta, margin));
                GridCell { theta: raw, fit }
            })
            .collect())
    }
}
