//! Splits the scaled estimation error into the leading term beta_n and the
//! remainder e_n for one simulated sample.

use quantcurve::bahadur::decompose;
use quantcurve::basis::BasisSpec;
use quantcurve::dgp::dgp_by_name;
use quantcurve::estimator::{EvalPoint, LocalQuantileEstimator};
use quantcurve::kernel::{KernelFamily, KernelSpec};
use quantcurve::mc_lab::replication_rng;
use quantcurve::population::{solve_population_foc, QuadratureSpec};

fn main() -> quantcurve::Result<()> {
    let dgp = dgp_by_name("location-sin")?;
    let basis = BasisSpec::new(1, 1)?;
    let kernel = KernelSpec::new(KernelFamily::EpanechnikovProduct, 1)?;
    let estimator = LocalQuantileEstimator::new(basis.clone(), kernel.clone())?;
    let theta = EvalPoint::new(0.5, 0.2, vec![0.0])?;
    let pop = solve_population_foc(&*dgp, &theta, &basis, &kernel, &QuadratureSpec::default())?;

    for n in [500, 2000, 8000] {
        let sample = dgp.sample(n, &mut replication_rng(3, 0, n));
        let fit = estimator.fit_at(&sample, &theta)?;
        let parts = decompose(&*dgp, &sample, &fit, &pop, &basis, &kernel)?;
        println!(
            "n={n:<5} sqrt(nh)(B_hat-B*) = {:?}\n        beta_n = {:?}  |beta_n| = {:.4}\n        e_n    = {:?}  |e_n|    = {:.4}  (min eig of jbar {:.4})",
            rounded(&parts.scaled_error),
            rounded(&parts.beta_n),
            parts.beta_norm(),
            rounded(&parts.e_n),
            parts.remainder_norm(),
            parts.jbar_min_eigenvalue
        );
    }
    Ok(())
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}
