//! At a square-root kink the pseudo-true slope coefficient diverges like
//! h^{-1/2}; h^{1/2} b*_1 settles at a kernel-dependent constant.

use quantcurve::kernel::KernelFamily;
use quantcurve::mc_lab::{run_experiment, sharp_limit_constant, RateExperiment, Target};

fn main() -> quantcurve::Result<()> {
    for family in [KernelFamily::UniformBall, KernelFamily::EpanechnikovProduct, KernelFamily::TriweightProduct] {
        let mut exp = RateExperiment::new("signed-sqrt", Target::SharpDivergence);
        exp.kernel = family;
        exp.hs = vec![0.1, 0.03, 0.01, 0.003, 0.001];
        let r = run_experiment(&exp)?;
        println!(
            "{:<22} slope {:+.4}  h^1/2 b1* at h=1e-3: {:.6}  limit {:.6}",
            family.name(),
            r.slope.unwrap_or(f64::NAN),
            r.extras["limit_estimate"],
            sharp_limit_constant(family, 1)?
        );
    }
    Ok(())
}
