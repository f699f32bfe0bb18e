//! Private-value quantiles from observed first-price bids:
//! Q_v = Q_b + alpha q_b / (I - 1), using estimated bid quantiles and
//! quantile densities.

use quantcurve::basis::BasisSpec;
use quantcurve::dgp::dgp_by_name;
use quantcurve::estimator::{EvalPoint, LocalQuantileEstimator};
use quantcurve::kernel::{KernelFamily, KernelSpec};
use quantcurve::qdensity::{auction_private_value, estimate_qd, make_scheme, scheme_for_level, SchemeKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> quantcurve::Result<()> {
    // Bids with a covariate (auction characteristic) and uniform noise.
    let bids = dgp_by_name("uniform-noise")?.sample(5000, &mut ChaCha8Rng::seed_from_u64(5));
    let estimator = LocalQuantileEstimator::new(
        BasisSpec::new(1, 1)?,
        KernelSpec::new(KernelFamily::EpanechnikovProduct, 1)?,
    )?;
    let central = make_scheme(SchemeKind::Central, 2)?;
    let (h, h_q, x) = (0.2, 0.1, vec![0.25]);

    for bidders in [2, 3, 5] {
        println!("I = {bidders}");
        for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let q_bid = estimator.fit_at(&bids, &EvalPoint::new(alpha, h, x.clone())?)?.quantile();
            let (scheme, _) = scheme_for_level(&central, alpha, h_q)?;
            let qd_bid = estimate_qd(&estimator, &bids, alpha, &x, h, h_q, &scheme)?.q_hat;
            let value = auction_private_value(alpha, qd_bid, q_bid, bidders)?;
            println!(
                "  alpha={alpha:.1}  bid {q_bid:.4}  bid q {qd_bid:.4}  private value {value:.4}{}",
                if qd_bid < 0.0 { "  (negative q_hat)" } else { "" }
            );
        }
    }
    Ok(())
}
