//! Quantile density q(alpha|x) = dQ/dalpha from local quantile fits at
//! neighbouring levels. Near the ends of (0,1) the central scheme switches to
//! a one-sided one.

use quantcurve::basis::BasisSpec;
use quantcurve::dgp::{dgp_by_name, norm_pdf};
use quantcurve::estimator::LocalQuantileEstimator;
use quantcurve::kernel::{KernelFamily, KernelSpec};
use quantcurve::qdensity::{estimate_qd, make_scheme, scheme_for_level, SchemeKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> quantcurve::Result<()> {
    let dgp = dgp_by_name("location-linear")?;
    let sample = dgp.sample(10_000, &mut ChaCha8Rng::seed_from_u64(11));
    let estimator = LocalQuantileEstimator::new(
        BasisSpec::new(1, 1)?,
        KernelSpec::new(KernelFamily::EpanechnikovProduct, 1)?,
    )?;
    let central = make_scheme(SchemeKind::Central, 2)?;
    let (h, h_q) = (0.16, 0.1);

    for alpha in [0.05, 0.25, 0.5, 0.75, 0.95] {
        let (scheme, switched) = scheme_for_level(&central, alpha, h_q)?;
        let est = estimate_qd(&estimator, &sample, alpha, &[0.0], h, h_q, &scheme)?;
        let q = dgp.quantile_density(alpha, &[0.0]).unwrap();
        println!(
            "alpha={alpha:<5} q_hat={:.4}  q={q:.4}  scheme {}{}",
            est.q_hat,
            scheme,
            if switched { " (switched)" } else { "" }
        );
    }
    let est = estimate_qd(&estimator, &sample, 0.5, &[0.0], h, h_q, &central)?;
    println!("1/q_hat(0.5) = {:.4}, conditional density at the median {:.4}", 1.0 / est.q_hat, norm_pdf(0.0));
    Ok(())
}
