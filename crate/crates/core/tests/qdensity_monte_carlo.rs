use quantcurve::basis::BasisSpec;
use quantcurve::dgp::dgp_by_name;
use quantcurve::estimator::LocalQuantileEstimator;
use quantcurve::kernel::{KernelFamily, KernelSpec};
use quantcurve::mc_lab::{median_iqr, replication_rng, run_experiment, RateExperiment, Target};
use quantcurve::qdensity::{estimate_qd, make_scheme, SchemeKind};

#[test]
fn constant_quantile_density_is_recovered_without_systematic_bias() {
    // Y = sin(2X) + U[0,1]: Q is linear in alpha, q = 1.
    let dgp = dgp_by_name("uniform-noise").unwrap();
    let est = LocalQuantileEstimator::new(
        BasisSpec::new(1, 1).unwrap(),
        KernelSpec::new(KernelFamily::EpanechnikovProduct, 1).unwrap(),
    )
    .unwrap();
    let scheme = make_scheme(SchemeKind::Central, 2).unwrap();
    let errors: Vec<f64> = (0..60)
        .map(|rep| {
            let sample = dgp.sample(3000, &mut replication_rng(5, 0, rep));
            estimate_qd(&est, &sample, 0.5, &[0.1], 0.2, 0.2, &scheme).unwrap().q_hat - 1.0
        })
        .collect();
    let (bias, iqr) = median_iqr(&errors);
    assert!(bias.abs() <= iqr, "median bias {bias} vs iqr {iqr}");
}

#[test]
fn central_scheme_beats_forward_at_equal_cost() {
    // Off the median: at alpha = 0.5 the Gaussian q has zero slope and the
    // one-sided scheme loses its first-order bias.
    let mut exp = RateExperiment::new("location-linear", Target::QdensityRate);
    exp.alphas = vec![0.3];
    exp.level_bandwidth_ratio = 0.5;
    exp.ns = vec![500, 1000, 2000, 4000, 8000];
    exp.replications = 20;
    exp.smoothness = Some(2.0);
    exp.seed = 8;
    let central = run_experiment(&exp).unwrap();
    exp.qd_scheme = SchemeKind::Forward;
    exp.qd_order = 1;
    let forward = run_experiment(&exp).unwrap();
    let wins = central
        .cells
        .iter()
        .zip(&forward.cells)
        .filter(|(c, f)| c.median <= f.median)
        .count();
    assert!(
        wins as f64 >= 0.6 * central.cells.len() as f64,
        "central wins {wins} cells: {:?} vs {:?}",
        central.medians(),
        forward.medians()
    );
}
