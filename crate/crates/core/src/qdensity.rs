//! Conditional quantile density `q(alpha|x) = dQ(alpha|x)/dalpha` by discrete
//! convolution of local quantile fits:
//!
//! ```text
//! q_hat(alpha|x) = (1 / h_q) sum_j kappa_j Q_hat_h(alpha + h_q t_j | x)
//! ```
//!
//! where the signed measure `{(t_j, kappa_j)}` has total mass 0, first moment
//! 1 and vanishing moments `2..=r`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimator::{EvalPoint, LocalFit, LocalQuantileEstimator, Sample};
use crate::kernel::KernelSpec;

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeKind {
    Forward,
    Backward,
    Central,
    Custom(Vec<f64>),
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Forward => "forward",
            SchemeKind::Backward => "backward",
            SchemeKind::Central => "central",
            SchemeKind::Custom(_) => "custom-nodes",
        }
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "forward" => Ok(SchemeKind::Forward),
            "backward" => Ok(SchemeKind::Backward),
            "central" => Ok(SchemeKind::Central),
            other => Err(Error::invalid(
                "qd scheme",
                format!("unknown kind '{other}', expected forward, backward, central or custom-nodes"),
            )),
        }
    }
}

/// A finite signed measure `{(t_j, kappa_j)}` with moment conditions up to `order`.
#[derive(Debug, Clone, PartialEq)]
pub struct QdScheme {
    nodes: Vec<(f64, f64)>,
    order: usize,
    kind: &'static str,
}

const MOMENT_TOL: f64 = 1e-12;

impl QdScheme {
    /// Validates the moment identities `sum kappa = 0`, `sum t kappa = 1` and
    /// `sum t^m kappa = 0` for `m = 2..=order`.
    pub fn new(nodes: Vec<(f64, f64)>, order: usize) -> Result<Self> {
        Self::with_kind(nodes, order, "custom-nodes")
    }

    fn with_kind(nodes: Vec<(f64, f64)>, order: usize, kind: &'static str) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("qd scheme", "order must be at least 1"));
        }
        if nodes.is_empty() || nodes.iter().any(|(t, k)| !t.is_finite() || !k.is_finite()) {
            return Err(Error::invalid("qd scheme", "nodes must be finite and nonempty"));
        }
        let mut ts: Vec<f64> = nodes.iter().map(|n| n.0).collect();
        ts.sort_by(f64::total_cmp);
        if ts.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("qd scheme", "nodes must be distinct"));
        }
        for m in 0..=order {
            let target = if m == 1 { 1.0 } else { 0.0 };
            let (sum, scale) = nodes.iter().fold((0.0, 0.0), |(s, a), (t, k)| {
                let term = t.powi(m as i32) * k;
                (s + term, a + term.abs())
            });
            if (sum - target).abs() > MOMENT_TOL * scale.max(1.0) {
                return Err(Error::invalid(
                    "qd scheme",
                    format!("moment {m} equals {sum}, expected {target}"),
                ));
            }
        }
        Ok(QdScheme { nodes, order, kind })
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    /// Levels `alpha + h_q t_j` at which quantile fits are needed.
    pub fn levels(&self, alpha: f64, h_q: f64) -> Vec<f64> {
        self.nodes.iter().map(|(t, _)| alpha + h_q * t).collect()
    }

    /// `(1 / h_q) sum_j kappa_j g(alpha + h_q t_j)`.
    pub fn apply(&self, alpha: f64, h_q: f64, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .map(|(t, k)| k * g(alpha + h_q * t))
            .sum::<f64>()
            / h_q
    }

    /// Errors when a level leaves `(0, 1)`, listing the offending levels.
    pub fn check_levels(&self, alpha: f64, h_q: f64) -> Result<()> {
        if !(h_q > 0.0 && h_q.is_finite()) {
            return Err(Error::domain(format!("level bandwidth must be positive, got {h_q}")));
        }
        let bad: Vec<String> = self
            .levels(alpha, h_q)
            .into_iter()
            .filter(|a| !(*a > 0.0 && *a < 1.0))
            .map(|a| a.to_string())
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "quantile levels outside (0,1) for alpha={alpha}, h_q={h_q}: {}",
                bad.join(", ")
            )))
        }
    }
}

impl fmt::Display for QdScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(r={})", self.kind, self.order)
    }
}

/// Weights for the given nodes by solving the moment system `sum t_j^m kappa_j = [m == 1]`
/// for `m = 0..=order` in the least-squares, minimum-norm sense, then validating.
pub fn weights_for_nodes(nodes: &[f64], order: usize) -> Result<Vec<f64>> {
    let rows = order + 1;
    let cols = nodes.len();
    let vander = DMatrix::from_fn(rows, cols, |m, j| nodes[j].powi(m as i32));
    let mut rhs = DVector::zeros(rows);
    rhs[1.min(rows - 1)] = if rows > 1 { 1.0 } else { 0.0 };
    let svd = vander.svd(true, true);
    let kappa = svd
        .solve(&rhs, 1e-13)
        .map_err(|e| Error::invalid("qd scheme", format!("moment system: {e}")))?;
    Ok(kappa.iter().copied().collect())
}

pub fn make_scheme(kind: SchemeKind, order: usize) -> Result<QdScheme> {
    if order == 0 {
        return Err(Error::invalid("qd scheme", "order must be at least 1"));
    }
    let name = kind.name();
    let nodes: Vec<f64> = match (&kind, order) {
        (SchemeKind::Central, 2) => return QdScheme::with_kind(vec![(-1.0, -0.5), (1.0, 0.5)], 2, name),
        (SchemeKind::Forward, 1) => return QdScheme::with_kind(vec![(0.0, -1.0), (1.0, 1.0)], 1, name),
        (SchemeKind::Backward, 1) => return QdScheme::with_kind(vec![(-1.0, -1.0), (0.0, 1.0)], 1, name),
        (SchemeKind::Forward, r) => (0..=r).map(|j| j as f64).collect(),
        (SchemeKind::Backward, r) => (0..=r).map(|j| -(j as f64)).rev().collect(),
        (SchemeKind::Central, r) => {
            // symmetric nodes without 0; odd moments only need r/2 of them when r is even
            let half = if r % 2 == 0 { r / 2 } else { r.div_ceil(2) };
            let mut t: Vec<f64> = (1..=half).map(|j| -(j as f64)).rev().collect();
            t.extend((1..=half).map(|j| j as f64));
            t
        }
        (SchemeKind::Custom(t), r) => {
            let mut sorted = t.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            // symmetric node sets may satisfy all r + 1 moments with fewer nodes;
            // the moment check after solving decides
            if sorted.len() != t.len() || sorted.len() < 2 {
                return Err(Error::invalid(
                    "qd scheme",
                    format!("custom scheme of order {r} needs distinct nodes, got {t:?}"),
                ));
            }
            t.clone()
        }
    };
    let kappa = weights_for_nodes(&nodes, order)?;
    QdScheme::with_kind(nodes.into_iter().zip(kappa).collect(), order, name)
}

/// Result of one quantile-density estimate.
#[derive(Debug, Clone)]
pub struct QdEstimate {
    pub q_hat: f64,
    pub fits: Vec<LocalFit>,
}

/// `q_hat(alpha|x)` from local quantile fits at `alpha + h_q t_j`.
pub fn estimate_qd(
    estimator: &LocalQuantileEstimator,
    sample: &Sample,
    alpha: f64,
    x: &[f64],
    h: f64,
    h_q: f64,
    scheme: &QdScheme,
) -> Result<QdEstimate> {
    scheme.check_levels(alpha, h_q)?;
    let mut fits = Vec::with_capacity(scheme.nodes().len());
    let mut acc = 0.0;
    for ((_, kappa), level) in scheme.nodes().iter().zip(scheme.levels(alpha, h_q)) {
        let fit = estimator.fit_at(sample, &EvalPoint::new(level, h, x.to_vec())?)?;
        acc += kappa * fit.quantile();
        fits.push(fit);
    }
    Ok(QdEstimate {
        q_hat: acc / h_q,
        fits,
    })
}

/// Keeps `scheme` when all its levels fit in `(0, 1)`; otherwise switches a
/// central scheme to the one-sided scheme of the same order pointing away
/// from the nearer end. Returns the scheme used and whether it was switched.
pub fn scheme_for_level(scheme: &QdScheme, alpha: f64, h_q: f64) -> Result<(QdScheme, bool)> {
    if scheme.check_levels(alpha, h_q).is_ok() {
        return Ok((scheme.clone(), false));
    }
    if scheme.kind() != "central" {
        scheme.check_levels(alpha, h_q)?;
    }
    let kind = if alpha < 0.5 { SchemeKind::Forward } else { SchemeKind::Backward };
    let alt = make_scheme(kind, scheme.order())?;
    alt.check_levels(alpha, h_q)?;
    Ok((alt, true))
}

/// Private-value quantile under independent private values with `bidders`
/// risk-neutral bidders: `Q_v = Q_b + alpha q_b / (I - 1)`.
pub fn auction_private_value(alpha: f64, q_b_hat: f64, big_q_b_hat: f64, bidders: u32) -> Result<f64> {
    if bidders < 2 {
        return Err(Error::domain(format!("need at least 2 bidders, got {bidders}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!("quantile level must lie in [0,1], got {alpha}")));
    }
    Ok(big_q_b_hat + alpha * q_b_hat / (bidders - 1) as f64)
}

/// Kernel density estimate `f_hat(x) = sum_i K((X_i - x)/h) / (n h^d)`.
pub fn kernel_density(sample: &Sample, kernel: &KernelSpec, x: &[f64], h: f64) -> Result<f64> {
    let lw = kernel.local_weights(sample.x(), x, h)?;
    let nh = sample.n() as f64 * h.powi(sample.dim() as i32);
    Ok(lw.weights.iter().sum::<f64>() / nh)
}

/// `alpha (1 - alpha) / (n h^d (1/q_hat)^2 f_hat(x))`, the asymptotic variance of
/// the quantile fit up to a kernel-dependent proportionality constant.
pub fn asymptotic_variance_proportional(alpha: f64, n: usize, h: f64, d: usize, q_hat: f64, fx_hat: f64) -> f64 {
    let nh = n as f64 * h.powi(d as i32);
    alpha * (1.0 - alpha) * q_hat * q_hat / (nh * fx_hat)
}
