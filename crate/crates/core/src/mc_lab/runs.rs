use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use super::rng::{auxiliary_rng, replication_rng};
use super::stats::{median_iqr, ols_slope};
use super::{CellSummary, ErrorNorm, RateExperiment, RateResult, Target};
use crate::bahadur::decompose;
use crate::basis::{BasisSpec, MultiIndex};
use crate::dgp::{dgp_by_name, Dgp};
use crate::error::{Error, Result};
use crate::estimator::{EvalPoint, LocalQuantileEstimator};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::population::{population_bias, solve_population_foc};
use crate::qdensity::{estimate_qd, make_scheme, scheme_for_level};
use crate::quadrature::GaussLegendre;

/// Below this every oracle bias is treated as exactly zero.
const EXACT_ZERO: f64 = 1e-9;

struct Setup {
    dgp: std::sync::Arc<dyn Dgp>,
    basis: BasisSpec,
    kernel: KernelSpec,
    v: MultiIndex,
}

fn setup(exp: &RateExperiment) -> Result<Setup> {
    let dgp = dgp_by_name(&exp.dgp)?;
    let d = dgp.dim();
    Ok(Setup {
        basis: BasisSpec::new(d, exp.order)?,
        kernel: KernelSpec::new(exp.kernel, d)?,
        v: MultiIndex::new(exp.v_index(d)),
        dgp,
    })
}

/// One replication's outcome: primary statistic and optional companion.
type RepOutcome = Result<(f64, Option<f64>)>;

fn summarize(n: Option<usize>, h: f64, abscissa: f64, outcomes: &[RepOutcome]) -> CellSummary {
    let primary: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.as_ref().ok().map(|v| v.0))
        .collect();
    let secondary: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.as_ref().ok().and_then(|v| v.1))
        .collect();
    let (median, iqr) = median_iqr(&primary);
    CellSummary {
        n,
        h,
        abscissa,
        median,
        iqr,
        secondary_median: (!secondary.is_empty()).then(|| median_iqr(&secondary).0),
        ok: primary.len(),
        failed: outcomes.len() - primary.len(),
    }
}

/// Runs `job(cell, rep)` for every pair in parallel and returns outcomes
/// grouped by cell, in replication order.
fn run_grid<F>(cells: usize, reps: usize, job: F) -> Vec<Vec<RepOutcome>>
where
    F: Fn(usize, usize) -> RepOutcome + Sync,
{
    let flat: Vec<RepOutcome> = (0..cells * reps)
        .into_par_iter()
        .map(|k| job(k / reps, k % reps))
        .collect();
    let mut grouped = Vec::with_capacity(cells);
    let mut it = flat.into_iter();
    for _ in 0..cells {
        grouped.push(it.by_ref().take(reps).collect());
    }
    grouped
}

fn finish(
    exp: &RateExperiment,
    cells: Vec<CellSummary>,
    expected: f64,
    check: impl Fn(f64) -> bool,
) -> Result<RateResult> {
    let usable: Vec<&CellSummary> = cells
        .iter()
        .filter(|c| c.ok > 0 && c.median > 0.0 && c.median.is_finite())
        .collect();
    let (slope, se, pass, note) = if usable.len() < 4 {
        (
            None,
            None,
            false,
            format!("only {} cells have a positive finite median; need 4", usable.len()),
        )
    } else {
        let xs: Vec<f64> = usable.iter().map(|c| c.abscissa).collect();
        let ys: Vec<f64> = usable.iter().map(|c| c.median.ln()).collect();
        let fit = ols_slope(&xs, &ys)?;
        let pass = check(fit.slope);
        (Some(fit.slope), Some(fit.std_error), pass, String::new())
    };
    Ok(RateResult {
        target: exp.target,
        dgp: exp.dgp.clone(),
        seed: exp.seed,
        replications: exp.replications,
        cells,
        slope,
        slope_std_error: se,
        expected_slope: expected,
        tolerance: exp.tolerance(),
        pass,
        note,
        extras: BTreeMap::new(),
    })
}

fn within(expected: f64, tol: f64) -> impl Fn(f64) -> bool {
    move |s| (s - expected).abs() <= tol
}

/// Oracle bias `sup_{alpha, x} |b*_v - b_v|` against `log h`.
pub fn run_bias_order(exp: &RateExperiment) -> Result<RateResult> {
    let st = setup(exp)?;
    let points = exp.points(st.dgp.dim());
    // The smoothness is only needed once the exact-zero branch is ruled out.
    let expected = match exp.expected_slope {
        Some(e) => Ok(e),
        None => exp
            .smoothness_for(st.dgp.smoothness())
            .map(|s| s - st.v.degree() as f64),
    };
    let per_cell: Vec<Result<f64>> = exp
        .hs
        .par_iter()
        .map(|&h| {
            let mut worst: f64 = 0.0;
            for &alpha in &exp.alphas {
                for x in &points {
                    let x: Vec<f64> = if exp.scale_x_by_h {
                        x.iter().map(|c| c * h).collect()
                    } else {
                        x.clone()
                    };
                    let theta = EvalPoint::new(alpha, h, x)?;
                    let b = population_bias(&*st.dgp, &theta, &st.basis, &st.kernel, &st.v, &exp.quadrature)?;
                    worst = worst.max(b.abs());
                }
            }
            Ok(worst)
        })
        .collect();
    let cells: Vec<CellSummary> = exp
        .hs
        .iter()
        .zip(&per_cell)
        .map(|(&h, r)| {
            let outcome = match r {
                Ok(v) => Ok((*v, None)),
                Err(e) => Err(e.clone()),
            };
            summarize(None, h, h.ln(), &[outcome])
        })
        .collect();
    let all_zero = cells.iter().all(|c| c.ok == 1 && c.median < EXACT_ZERO);
    if all_zero {
        return Ok(RateResult {
            target: exp.target,
            dgp: exp.dgp.clone(),
            seed: exp.seed,
            replications: exp.replications,
            cells,
            slope: None,
            slope_std_error: None,
            expected_slope: expected.unwrap_or(f64::NAN),
            tolerance: exp.tolerance(),
            pass: true,
            note: format!("exact-zero bias: every cell below {EXACT_ZERO:e}, slope test skipped"),
            extras: BTreeMap::new(),
        });
    }
    let expected = expected?;
    finish(exp, cells, expected, within(expected, exp.tolerance()))
}

/// `int_0^1 z^a k(z) dz` for a one-dimensional kernel profile, with the
/// substitution `z = t^2` so the integrand is smooth at the origin.
fn half_line_moment(kernel: &KernelSpec, a: f64) -> f64 {
    GaussLegendre::new(64).integrate(0.0, 1.0, |t| {
        let z = t * t;
        z.powf(a) * kernel.value(&[z]) * 2.0 * t
    })
}

/// `int |z_1|^{3/2} K / int z_1^2 K`, the limit of `h^{1/2} b*_1` for the
/// signed square-root model at the kink.
pub fn sharp_limit_constant(family: KernelFamily, d: usize) -> Result<f64> {
    let kernel = KernelSpec::new(family, d)?;
    if d == 1 {
        return Ok(half_line_moment(&kernel, 1.5) / half_line_moment(&kernel, 2.0));
    }
    Ok(kernel.abs_moment(1.5, 64) / kernel.abs_moment(2.0, 64))
}

/// `|b*_1(alpha; h, x)|` against `log h`, plus the limit of `h^{1/2} b*_1`
/// at the smallest bandwidth.
pub fn run_sharp_divergence(exp: &RateExperiment) -> Result<RateResult> {
    let st = setup(exp)?;
    let d = st.dgp.dim();
    if exp.order < 1 {
        return Err(Error::invalid("p", "sharp divergence needs a slope coefficient"));
    }
    let unit = MultiIndex::unit(d, 0);
    let k = st.basis.position(&unit).expect("order >= 1 has first-order terms");
    let alpha = exp.alphas[0];
    let x = exp.points(d)[0].clone();
    let expected = exp.expected_slope.unwrap_or(-0.5);
    let slopes: Vec<Result<f64>> = exp
        .hs
        .par_iter()
        .map(|&h| {
            let theta = EvalPoint::new(alpha, h, x.clone())?;
            let pop = solve_population_foc(&*st.dgp, &theta, &st.basis, &st.kernel, &exp.quadrature)?;
            Ok(pop.b_star_natural[k])
        })
        .collect();
    let cells: Vec<CellSummary> = exp
        .hs
        .iter()
        .zip(&slopes)
        .map(|(&h, r)| {
            let outcome = match r {
                Ok(b) => Ok((b.abs(), Some(h.sqrt() * b))),
                Err(e) => Err(e.clone()),
            };
            summarize(None, h, h.ln(), &[outcome])
        })
        .collect();
    let limit = sharp_limit_constant(exp.kernel, d)?;
    let smallest = cells
        .iter()
        .filter(|c| c.ok == 1)
        .min_by(|a, b| a.h.total_cmp(&b.h))
        .and_then(|c| c.secondary_median);
    let mut result = finish(exp, cells, expected, within(expected, exp.tolerance()))?;
    result.extras.insert("limit_expected".into(), limit);
    match smallest {
        Some(est) => {
            let rel = (est - limit).abs() / limit;
            result.extras.insert("limit_estimate".into(), est);
            result.extras.insert("limit_relative_error".into(), rel);
            if rel > exp.limit_tolerance {
                result.pass = false;
                result.note = format!(
                    "limit estimate {est:.6} differs from {limit:.6} by {:.2}%",
                    100.0 * rel
                );
            }
        }
        None => {
            result.pass = false;
            result.note = "no bandwidth produced a population fit".into();
        }
    }
    Ok(result)
}

fn tied_bandwidth(exp: &RateExperiment, cell: usize, rate_exponent: f64) -> f64 {
    if exp.hs.len() == exp.ns.len() {
        exp.hs[cell]
    } else {
        (exp.bandwidth_constant * (exp.ns[cell] as f64).powf(-rate_exponent)).min(exp.max_bandwidth)
    }
}

/// Median `||e_n||` against `log(n h^d)` with `h = c n^{-1/(2p+d)}`.
/// The companion statistic is `||beta_n||`.
pub fn run_bahadur_remainder(exp: &RateExperiment) -> Result<RateResult> {
    let st = setup(exp)?;
    let d = st.dgp.dim();
    let alpha = exp.alphas[0];
    let x = exp.points(d)[0].clone();
    let exponent = 1.0 / (2.0 * exp.order as f64 + d as f64);
    let hs: Vec<f64> = (0..exp.ns.len()).map(|c| tied_bandwidth(exp, c, exponent)).collect();
    let thetas = hs
        .iter()
        .map(|&h| EvalPoint::new(alpha, h, x.clone()))
        .collect::<Result<Vec<_>>>()?;
    let pops = thetas
        .par_iter()
        .map(|t| solve_population_foc(&*st.dgp, t, &st.basis, &st.kernel, &exp.quadrature))
        .collect::<Result<Vec<_>>>()?;
    let estimator = LocalQuantileEstimator::new(st.basis.clone(), st.kernel.clone())?;
    let outcomes = run_grid(exp.ns.len(), exp.replications, |cell, rep| {
        let mut rng = replication_rng(exp.seed, cell, rep);
        let sample = st.dgp.sample(exp.ns[cell], &mut rng);
        let fit = estimator.fit_at(&sample, &thetas[cell])?;
        let parts = decompose(&*st.dgp, &sample, &fit, &pops[cell], &st.basis, &st.kernel)?;
        Ok((parts.remainder_norm(), Some(parts.beta_norm())))
    });
    let cells: Vec<CellSummary> = outcomes
        .iter()
        .enumerate()
        .map(|(c, o)| {
            let n = exp.ns[c];
            summarize(Some(n), hs[c], (n as f64 * hs[c].powi(d as i32)).ln(), o)
        })
        .collect();
    let ratios: Vec<f64> = cells
        .iter()
        .map(|c| c.median / c.secondary_median.unwrap_or(f64::NAN))
        .collect();
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    let expected = exp.expected_slope.unwrap_or(-0.25);
    let tol = exp.tolerance();
    let mut result = finish(exp, cells, expected, move |s| s <= expected + tol)?;
    for (c, r) in ratios.iter().enumerate() {
        result.extras.insert(format!("ratio_{c}"), *r);
    }
    result
        .extras
        .insert("ratio_strictly_decreasing".into(), if decreasing { 1.0 } else { 0.0 });
    let failed: usize = result.cells.iter().map(|c| c.failed).sum();
    if failed > 0 {
        result.note = format!("{failed} replications excluded (fit or decomposition failed)");
    }
    Ok(result)
}

fn error_norm(norm: ErrorNorm, errs: &[f64]) -> f64 {
    match norm {
        ErrorNorm::Sup => errs.iter().fold(0.0, |m: f64, e| m.max(e.abs())),
        ErrorNorm::Lm(m) => {
            let mean = errs.iter().map(|e| e.abs().powf(m)).sum::<f64>() / errs.len() as f64;
            mean.powf(1.0 / m)
        }
    }
}

/// Shared body of the global-rate experiments. `xi_halfwidth = 0` gives the
/// deterministic bandwidth.
fn sup_rate(exp: &RateExperiment, xi_halfwidth: f64) -> Result<RateResult> {
    let st = setup(exp)?;
    let d = st.dgp.dim();
    let s = exp.smoothness_for(st.dgp.smoothness())?;
    let exponent = 1.0 / (2.0 * s + d as f64);
    let log_scale = exp.norm == ErrorNorm::Sup;
    let hs: Vec<f64> = (0..exp.ns.len())
        .map(|c| {
            if exp.hs.len() == exp.ns.len() {
                return exp.hs[c];
            }
            let n = exp.ns[c] as f64;
            let base = if log_scale { n.ln() / n } else { 1.0 / n };
            (exp.bandwidth_constant * base.powf(exponent)).min(exp.max_bandwidth)
        })
        .collect();
    let points = exp.points(d);
    let estimator = LocalQuantileEstimator::new(st.basis.clone(), st.kernel.clone())?;
    let outcomes = run_grid(exp.ns.len(), exp.replications, |cell, rep| {
        let mut rng = replication_rng(exp.seed, cell, rep);
        let sample = st.dgp.sample(exp.ns[cell], &mut rng);
        let h = if xi_halfwidth > 0.0 {
            let xi: f64 = auxiliary_rng(exp.seed, cell, rep).random_range(-xi_halfwidth..=xi_halfwidth);
            hs[cell] * xi.exp()
        } else {
            hs[cell]
        };
        let mut errs = Vec::with_capacity(exp.alphas.len() * points.len());
        for &alpha in &exp.alphas {
            for x in &points {
                let truth = st
                    .dgp
                    .derivative(alpha, x, &st.v)
                    .ok_or_else(|| Error::domain(format!("no closed-form derivative {} for {}", st.v, exp.dgp)))?;
                let fit = estimator.fit_at(&sample, &EvalPoint::new(alpha, h, x.clone())?)?;
                errs.push(fit.derivative(&st.basis, &st.v)? - truth);
            }
        }
        Ok((error_norm(exp.norm, &errs), None))
    });
    let cells: Vec<CellSummary> = outcomes
        .iter()
        .enumerate()
        .map(|(c, o)| {
            let n = exp.ns[c] as f64;
            let abscissa = if log_scale { (n.ln() / n).ln() } else { (1.0 / n).ln() };
            summarize(Some(exp.ns[c]), hs[c], abscissa, o)
        })
        .collect();
    let expected = exp
        .expected_slope
        .unwrap_or((s - st.v.degree() as f64) / (2.0 * s + d as f64));
    finish(exp, cells, expected, within(expected, exp.tolerance()))
}

/// Global error norm of `Q_hat` (or a derivative) over the x grid against
/// `log(log n / n)` with `h = c (log n / n)^{1/(2s+d)}`; for `L_m` norms
/// against `log(1/n)` with `h = c n^{-1/(2s+d)}`.
pub fn run_global_sup_rate(exp: &RateExperiment) -> Result<RateResult> {
    sup_rate(exp, 0.0)
}

/// As [`run_global_sup_rate`] with `h_hat = h exp(xi)`; passes when the slope
/// is within tolerance of the deterministic-bandwidth slope.
pub fn run_random_bandwidth(exp: &RateExperiment) -> Result<RateResult> {
    let deterministic = sup_rate(exp, 0.0)?;
    let mut random = sup_rate(exp, exp.xi_halfwidth)?;
    random.target = Target::RandomBandwidth;
    random.tolerance = exp.tolerance();
    match (deterministic.slope, random.slope) {
        (Some(det), Some(rnd)) => {
            random.expected_slope = det;
            random.pass = (rnd - det).abs() <= random.tolerance;
            random.extras.insert("deterministic_slope".into(), det);
            random.extras.insert("slope_difference".into(), rnd - det);
        }
        _ => {
            random.pass = false;
            random.note = "slope unavailable for one of the bandwidth rules".into();
        }
    }
    Ok(random)
}

/// `|q_hat - q|` at a fixed `(alpha, x)` against `log(1/n)` with
/// `h = c n^{-1/(2s+d+1)}` and `h_q = ratio * h`.
pub fn run_qdensity_rate(exp: &RateExperiment) -> Result<RateResult> {
    let st = setup(exp)?;
    let d = st.dgp.dim();
    let s = exp.smoothness_for(st.dgp.smoothness())?;
    let alpha = exp.alphas[0];
    let x = exp.points(d)[0].clone();
    let truth = st
        .dgp
        .quantile_density(alpha, &x)
        .ok_or_else(|| Error::domain(format!("{} has no closed-form quantile density", exp.dgp)))?;
    let exponent = 1.0 / (2.0 * s + d as f64 + 1.0);
    let hs: Vec<f64> = (0..exp.ns.len()).map(|c| tied_bandwidth(exp, c, exponent)).collect();
    let base = make_scheme(exp.qd_scheme.clone(), exp.qd_order)?;
    let estimator = LocalQuantileEstimator::new(st.basis.clone(), st.kernel.clone())?;
    let outcomes = run_grid(exp.ns.len(), exp.replications, |cell, rep| {
        let mut rng = replication_rng(exp.seed, cell, rep);
        let sample = st.dgp.sample(exp.ns[cell], &mut rng);
        let h = hs[cell];
        let h_q = exp.level_bandwidth_ratio * h;
        let (scheme, _) = scheme_for_level(&base, alpha, h_q)?;
        let est = estimate_qd(&estimator, &sample, alpha, &x, h, h_q, &scheme)?;
        Ok(((est.q_hat - truth).abs(), Some(est.q_hat)))
    });
    let cells: Vec<CellSummary> = outcomes
        .iter()
        .enumerate()
        .map(|(c, o)| summarize(Some(exp.ns[c]), hs[c], (1.0 / exp.ns[c] as f64).ln(), o))
        .collect();
    let expected = exp.expected_slope.unwrap_or(s / (2.0 * s + d as f64 + 1.0));
    let mut result = finish(exp, cells, expected, within(expected, exp.tolerance()))?;
    result.extras.insert("q_true".into(), truth);
    Ok(result)
}
