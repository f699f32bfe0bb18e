//! Monte Carlo and oracle experiments that measure convergence orders by
//! log-log slope regression over bandwidth or sample-size grids.
//!
//! Replications are summarized by medians. Every experiment is a pure
//! function of its [`RateExperiment`], including the seed: cells and
//! replications run in parallel but are reduced in a fixed order, so results
//! are bitwise reproducible.

mod rng;
mod runs;
mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::config::KeyValues;
use crate::dgp::dgp_by_name;
use crate::error::{Error, Result};
use crate::kernel::KernelFamily;
use crate::population::QuadratureSpec;
use crate::qdensity::SchemeKind;

pub use rng::{auxiliary_rng, replication_rng, stream_id};
pub use runs::{
    run_bahadur_remainder, run_bias_order, run_global_sup_rate, run_qdensity_rate,
    run_random_bandwidth, run_sharp_divergence, sharp_limit_constant,
};
pub use stats::{median, median_iqr, ols_slope, SlopeFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    BiasOrder,
    SharpDivergence,
    BahadurRemainder,
    GlobalSupRate,
    RandomBandwidth,
    QdensityRate,
}

impl Target {
    pub const ALL: [Target; 6] = [
        Target::BiasOrder,
        Target::SharpDivergence,
        Target::BahadurRemainder,
        Target::GlobalSupRate,
        Target::RandomBandwidth,
        Target::QdensityRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Target::BiasOrder => "bias-order",
            Target::SharpDivergence => "sharp-divergence",
            Target::BahadurRemainder => "bahadur-remainder",
            Target::GlobalSupRate => "global-sup-rate",
            Target::RandomBandwidth => "random-bandwidth",
            Target::QdensityRate => "qdensity-rate",
        }
    }

    fn default_tolerance(self) -> f64 {
        match self {
            Target::BiasOrder => 0.3,
            Target::SharpDivergence => 0.05,
            Target::BahadurRemainder => 0.15,
            Target::GlobalSupRate => 0.15,
            Target::RandomBandwidth => 0.1,
            Target::QdensityRate => 0.2,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s.trim())
            .ok_or_else(|| Error::invalid("target", format!("unknown experiment target '{s}'")))
    }
}

/// Norm of the error curve over the covariate grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorNorm {
    Sup,
    /// `(mean |err|^m)^{1/m}` over the grid.
    Lm(f64),
}

impl FromStr for ErrorNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "sup" {
            return Ok(ErrorNorm::Sup);
        }
        s.strip_prefix('l')
            .and_then(|m| m.parse::<f64>().ok())
            .filter(|m| *m > 0.0)
            .map(ErrorNorm::Lm)
            .ok_or_else(|| Error::invalid("norm", format!("expected 'sup' or 'l<m>', got '{s}'")))
    }
}

/// Configuration of one rate experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RateExperiment {
    pub dgp: String,
    pub target: Target,
    /// Sample sizes (sampling targets).
    pub ns: Vec<usize>,
    /// Bandwidths (oracle targets), or explicit per-`n` bandwidths.
    pub hs: Vec<f64>,
    pub alphas: Vec<f64>,
    pub xs: Vec<Vec<f64>>,
    /// Oracle targets only: evaluate at `h * x` instead of `x`, so the grid
    /// shrinks with the window around a fixed point.
    pub scale_x_by_h: bool,
    /// Derivative multi-index components.
    pub v: Vec<u32>,
    pub order: usize,
    pub kernel: KernelFamily,
    pub replications: usize,
    pub seed: u64,
    /// Smoothness used for rates and bandwidth exponents.
    pub smoothness: Option<f64>,
    /// `c` in the bandwidth rule.
    pub bandwidth_constant: f64,
    /// `h_q = ratio * h` for quantile density experiments.
    pub level_bandwidth_ratio: f64,
    pub qd_scheme: SchemeKind,
    pub qd_order: usize,
    pub expected_slope: Option<f64>,
    pub tolerance: Option<f64>,
    /// Half-width `w` of `xi ~ U[-w, w]`, `h_hat = h exp(xi)`.
    pub xi_halfwidth: f64,
    pub norm: ErrorNorm,
    pub max_bandwidth: f64,
    /// Relative tolerance on the sharp-divergence limit constant.
    pub limit_tolerance: f64,
    pub quadrature: QuadratureSpec,
}

impl RateExperiment {
    /// Defaults: order 1, Epanechnikov kernel, one replication, seed 0,
    /// `alpha = 0.5`, `x = 0`.
    pub fn new(dgp: &str, target: Target) -> Self {
        RateExperiment {
            dgp: dgp.to_string(),
            target,
            ns: Vec::new(),
            hs: Vec::new(),
            alphas: vec![0.5],
            xs: Vec::new(),
            scale_x_by_h: false,
            v: Vec::new(),
            order: 1,
            kernel: KernelFamily::EpanechnikovProduct,
            replications: 1,
            seed: 0,
            smoothness: None,
            bandwidth_constant: 1.0,
            level_bandwidth_ratio: 1.0,
            qd_scheme: SchemeKind::Central,
            qd_order: 2,
            expected_slope: None,
            tolerance: None,
            xi_halfwidth: 0.5,
            norm: ErrorNorm::Sup,
            max_bandwidth: 1.0,
            limit_tolerance: 0.05,
            quadrature: QuadratureSpec::default(),
        }
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let dgp_name = kv.required("dgp")?;
        let dgp = dgp_by_name(dgp_name)?;
        let d = dgp.dim();
        let target: Target = kv.required("target")?.parse()?;
        let mut exp = RateExperiment::new(dgp_name, target);
        exp.ns = kv.list("n")?;
        exp.hs = kv.list("h")?;
        if kv.contains("alpha") {
            exp.alphas = kv.list("alpha")?;
        }
        exp.xs = kv.points("x", d)?;
        exp.scale_x_by_h = match kv.one("x_scale")? {
            None | Some("none") => false,
            Some("h") => true,
            Some(other) => {
                return Err(Error::invalid("x_scale", format!("expected 'none' or 'h', got '{other}'")))
            }
        };
        exp.v = kv.list("v")?;
        exp.order = kv.parsed_or("p", exp.order)?;
        if let Some(k) = kv.one("kernel")? {
            exp.kernel = k.parse()?;
        }
        exp.replications = kv.parsed_or("replications", exp.replications)?;
        exp.seed = kv.parsed_or("seed", exp.seed)?;
        exp.smoothness = kv.parsed("s")?;
        exp.bandwidth_constant = kv.parsed_or("c", exp.bandwidth_constant)?;
        exp.level_bandwidth_ratio = kv.parsed_or("hq_ratio", exp.level_bandwidth_ratio)?;
        if let Some(kind) = kv.one("qd_scheme")? {
            exp.qd_scheme = if kind == "custom-nodes" {
                SchemeKind::Custom(kv.list("qd_nodes")?)
            } else {
                kind.parse()?
            };
        }
        exp.qd_order = kv.parsed_or("qd_order", exp.qd_order)?;
        exp.expected_slope = kv.parsed("expected_slope")?;
        exp.tolerance = kv.parsed("tolerance")?;
        exp.xi_halfwidth = kv.parsed_or("xi_halfwidth", exp.xi_halfwidth)?;
        if let Some(norm) = kv.one("norm")? {
            exp.norm = norm.parse()?;
        }
        exp.max_bandwidth = kv.parsed_or("max_h", exp.max_bandwidth)?;
        exp.limit_tolerance = kv.parsed_or("limit_tolerance", exp.limit_tolerance)?;
        if let Some(nodes) = kv.parsed::<usize>("quad_nodes")? {
            exp.quadrature.nodes_1d = nodes;
            exp.quadrature.nodes_2d = nodes;
        }
        exp.validate()?;
        Ok(exp)
    }

    pub fn validate(&self) -> Result<()> {
        let dgp = dgp_by_name(&self.dgp)?;
        let d = dgp.dim();
        if self.replications < 1 {
            return Err(Error::invalid("replications", "must be at least 1"));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::invalid("alpha", "levels must be nonempty and in (0,1)"));
        }
        if self.hs.iter().any(|h| !(*h > 0.0 && *h <= self.max_bandwidth)) {
            return Err(Error::invalid(
                "h",
                format!("bandwidths must lie in (0, {}]", self.max_bandwidth),
            ));
        }
        if self.xs.iter().any(|x| x.len() != d) {
            return Err(Error::invalid("x", format!("points must have {d} coordinates")));
        }
        if !self.v.is_empty() && self.v.len() != d {
            return Err(Error::invalid("v", format!("multi-index must have {d} components")));
        }
        if self.v.iter().sum::<u32>() as usize > self.order {
            return Err(Error::invalid("v", "derivative order exceeds the polynomial order"));
        }
        match self.target {
            Target::BiasOrder | Target::SharpDivergence => {
                if self.hs.len() < 4 {
                    return Err(Error::invalid("h", "oracle targets need at least 4 bandwidths"));
                }
            }
            _ => {
                if self.ns.len() < 4 {
                    return Err(Error::invalid("n", "sampling targets need at least 4 sample sizes"));
                }
                if self.ns.iter().any(|n| *n < 1) {
                    return Err(Error::invalid("n", "sample sizes must be positive"));
                }
                if !self.hs.is_empty() && self.hs.len() != self.ns.len() {
                    return Err(Error::invalid("h", "explicit bandwidths must pair with the n grid"));
                }
            }
        }
        if self.target == Target::BiasOrder && self.xs.is_empty() {
            return Err(Error::invalid("x", "bias-order needs an x grid"));
        }
        if matches!(self.target, Target::GlobalSupRate | Target::RandomBandwidth) && self.xs.is_empty() {
            return Err(Error::invalid("x", "sup-rate targets need an x grid"));
        }
        if !(self.xi_halfwidth >= 0.0) {
            return Err(Error::invalid("xi_halfwidth", "must be nonnegative"));
        }
        Ok(())
    }

    pub(crate) fn v_index(&self, d: usize) -> Vec<u32> {
        if self.v.is_empty() {
            vec![0; d]
        } else {
            self.v.clone()
        }
    }

    pub(crate) fn points(&self, d: usize) -> Vec<Vec<f64>> {
        if self.xs.is_empty() {
            vec![vec![0.0; d]]
        } else {
            self.xs.clone()
        }
    }

    pub(crate) fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(self.target.default_tolerance())
    }

    pub(crate) fn smoothness_for(&self, dgp_smoothness: f64) -> Result<f64> {
        match self.smoothness {
            Some(s) if s > 0.0 => Ok(s),
            Some(s) => Err(Error::invalid("s", format!("smoothness must be positive, got {s}"))),
            None if dgp_smoothness.is_finite() => Ok(dgp_smoothness),
            None => Err(Error::invalid(
                "s",
                format!("model '{}' is analytic; set the smoothness s explicitly", self.dgp),
            )),
        }
    }
}

/// Summary of one grid cell over replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub n: Option<usize>,
    pub h: f64,
    /// Regression abscissa (log scale variable).
    pub abscissa: f64,
    pub median: f64,
    pub iqr: f64,
    /// Median of a companion statistic (e.g. `||beta_n||`).
    pub secondary_median: Option<f64>,
    pub ok: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateResult {
    pub target: Target,
    pub dgp: String,
    pub seed: u64,
    pub replications: usize,
    pub cells: Vec<CellSummary>,
    pub slope: Option<f64>,
    pub slope_std_error: Option<f64>,
    pub expected_slope: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: String,
    pub extras: BTreeMap<String, f64>,
}

/// 17 significant digits, round-trip safe for `f64`.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

impl RateResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,n,h,abscissa,median,iqr,secondary_median,ok,failed\n");
        for (k, c) in self.cells.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                k,
                c.n.map(|n| n.to_string()).unwrap_or_default(),
                format_number(c.h),
                format_number(c.abscissa),
                format_number(c.median),
                format_number(c.iqr),
                c.secondary_median.map(format_number).unwrap_or_default(),
                c.ok,
                c.failed
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("rate result serializes");
        s.push('\n');
        s
    }

    /// Medians in cell order.
    pub fn medians(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.median).collect()
    }
}

/// Runs the experiment selected by `exp.target`.
pub fn run_experiment(exp: &RateExperiment) -> Result<RateResult> {
    exp.validate()?;
    match exp.target {
        Target::BiasOrder => run_bias_order(exp),
        Target::SharpDivergence => run_sharp_divergence(exp),
        Target::BahadurRemainder => run_bahadur_remainder(exp),
        Target::GlobalSupRate => run_global_sup_rate(exp),
        Target::RandomBandwidth => run_random_bandwidth(exp),
        Target::QdensityRate => run_qdensity_rate(exp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_experiment_config() {
        let kv = KeyValues::parse(
            "dgp = location-sin\ntarget = global-sup-rate\nn = 100,200,400,800\nx = -0.5\nx = 0.5\ns = 2\nreplications = 3\nseed = 9\nnorm = l2\n",
        )
        .unwrap();
        let exp = RateExperiment::from_key_values(&kv).unwrap();
        assert_eq!(exp.ns, vec![100, 200, 400, 800]);
        assert_eq!(exp.xs, vec![vec![-0.5], vec![0.5]]);
        assert_eq!(exp.norm, ErrorNorm::Lm(2.0));
        assert_eq!(exp.smoothness, Some(2.0));
        assert_eq!(exp.seed, 9);
    }

    #[test]
    fn rejects_invalid_experiments() {
        let mut exp = RateExperiment::new("location-sin", Target::BiasOrder);
        exp.hs = vec![0.1, 0.2, 0.3];
        exp.xs = vec![vec![0.0]];
        assert!(exp.validate().is_err());
        exp.hs.push(0.4);
        assert!(exp.validate().is_ok());
        exp.replications = 0;
        assert!(exp.validate().is_err());
        exp.replications = 1;
        exp.hs.push(1.5);
        assert!(exp.validate().is_err());
        assert!("bogus".parse::<Target>().is_err());
        assert!("l0".parse::<ErrorNorm>().is_err());
    }

    fn tiny_sup(target: Target) -> RateExperiment {
        let mut exp = RateExperiment::new("location-sin", target);
        exp.ns = vec![150, 200, 300, 400];
        exp.xs = vec![vec![-0.2], vec![0.2]];
        exp.smoothness = Some(2.0);
        exp.replications = 3;
        exp.seed = 11;
        exp
    }

    #[test]
    fn identical_configs_give_identical_results() {
        let exp = tiny_sup(Target::GlobalSupRate);
        let a = run_experiment(&exp).unwrap();
        let b = run_experiment(&exp).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());
        let mut other = exp.clone();
        other.seed = 12;
        assert_ne!(run_experiment(&other).unwrap().to_csv(), a.to_csv());
    }

    #[test]
    fn zero_width_random_bandwidth_reduces_to_deterministic() {
        let mut exp = tiny_sup(Target::RandomBandwidth);
        exp.xi_halfwidth = 0.0;
        let random = run_experiment(&exp).unwrap();
        exp.target = Target::GlobalSupRate;
        let fixed = run_experiment(&exp).unwrap();
        assert_eq!(random.cells, fixed.cells);
        assert_eq!(random.extras["slope_difference"], 0.0);
    }

    #[test]
    fn exact_zero_bias_skips_the_slope() {
        let mut exp = RateExperiment::new("location-linear", Target::BiasOrder);
        exp.hs = vec![0.4, 0.2, 0.1, 0.05];
        exp.xs = vec![vec![0.0], vec![0.3]];
        exp.v = vec![1];
        let r = run_experiment(&exp).unwrap();
        assert!(r.pass);
        assert!(r.slope.is_none());
        assert!(r.cells.iter().all(|c| c.median < 1e-9));
    }

    #[test]
    fn sharp_limit_constants() {
        let uniform = sharp_limit_constant(KernelFamily::UniformBall, 1).unwrap();
        assert!((uniform - 1.2).abs() < 1e-12);
        let epa = sharp_limit_constant(KernelFamily::EpanechnikovProduct, 1).unwrap();
        assert!((epa - 4.0 / 3.0).abs() < 1e-12);
    }
}
