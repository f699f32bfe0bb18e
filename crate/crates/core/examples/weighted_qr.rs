//! The interior-point solver on its own: a weighted median-regression line.

use quantcurve::solver::{solve_weighted_qr, SolverOptions, WeightedQRProblem};

fn main() -> quantcurve::Result<()> {
    let xs = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let ys = [1.1, 1.9, 3.2, 3.9, 5.3, 5.8, 20.0];
    let weights = [1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 0.5];
    let problem = WeightedQRProblem {
        design: xs.iter().flat_map(|x| [1.0, *x]).collect(),
        ncols: 2,
        responses: ys.to_vec(),
        weights: weights.to_vec(),
        alpha: 0.5,
    };
    let sol = solve_weighted_qr(&problem, &SolverOptions::default())?;
    println!(
        "intercept {:.6}, slope {:.6}",
        sol.coefficients[0], sol.coefficients[1]
    );
    println!(
        "status {}, {} iterations, duality gap {:.2e}, objective {:.6}, {} observations",
        sol.status.name(),
        sol.iterations,
        sol.duality_gap,
        sol.objective,
        sol.active_points
    );
    Ok(())
}
