//! Local cubic quantile fit on simulated data, compared with the true
//! quantile and its first two derivatives.

use quantcurve::basis::{BasisSpec, MultiIndex};
use quantcurve::dgp::dgp_by_name;
use quantcurve::estimator::{EvalPoint, LocalQuantileEstimator};
use quantcurve::kernel::{KernelFamily, KernelSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> quantcurve::Result<()> {
    let dgp = dgp_by_name("location-sin")?;
    let sample = dgp.sample(20_000, &mut ChaCha8Rng::seed_from_u64(7));

    let basis = BasisSpec::new(1, 3)?;
    let kernel = KernelSpec::new(KernelFamily::EpanechnikovProduct, 1)?;
    let estimator = LocalQuantileEstimator::new(basis.clone(), kernel)?;

    let theta = EvalPoint::new(0.75, 0.35, vec![0.2])?;
    let fit = estimator.fit_at(&sample, &theta)?;
    println!("fit at {theta}: status {}, {} active points", fit.status().name(), fit.solver.active_points);
    for k in 0..=2 {
        let v = MultiIndex::new(vec![k]);
        let est = fit.derivative(&basis, &v)?;
        let truth = dgp.derivative(theta.alpha, &theta.x, &v).unwrap();
        println!("  d^{k}Q/dx^{k}: estimate {est:>9.5}   truth {truth:>9.5}");
    }
    Ok(())
}
