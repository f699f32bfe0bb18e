//! Pseudo-true local polynomial coefficients from the population first-order
//! condition, and how their bias shrinks with the bandwidth.

use quantcurve::basis::{BasisSpec, MultiIndex};
use quantcurve::dgp::dgp_by_name;
use quantcurve::estimator::EvalPoint;
use quantcurve::kernel::{KernelFamily, KernelSpec};
use quantcurve::population::{population_bias, solve_population_foc, QuadratureSpec};

fn main() -> quantcurve::Result<()> {
    let dgp = dgp_by_name("location-sin")?;
    let kernel = KernelSpec::new(KernelFamily::EpanechnikovProduct, 1)?;
    let quad = QuadratureSpec::default();
    let v = MultiIndex::zero(1);

    for p in [1, 3] {
        let basis = BasisSpec::new(1, p)?;
        println!("order p = {p}");
        let mut prev: Option<(f64, f64)> = None;
        for h in [0.4, 0.2, 0.1, 0.05] {
            let theta = EvalPoint::new(0.5, h, vec![0.3])?;
            let pop = solve_population_foc(&*dgp, &theta, &basis, &kernel, &quad)?;
            let bias = population_bias(&*dgp, &theta, &basis, &kernel, &v, &quad)?;
            let order = prev
                .map(|(h0, b0)| format!("{:.2}", (bias.abs() / b0.abs()).ln() / (h / h0).ln()))
                .unwrap_or_default();
            println!(
                "  h={h:<5} b*_0={:.10} bias={bias:+.3e} local order {order}  (newton steps {})",
                pop.b_star_natural[0], pop.iterations
            );
            prev = Some((h, bias));
        }
    }
    Ok(())
}
