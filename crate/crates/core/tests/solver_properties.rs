use proptest::prelude::*;
use quantcurve::solver::{solve_weighted_qr, SolverOptions, SolverStatus, WeightedQRProblem};

/// Minimum objective over all basic solutions (fits interpolating `P` rows).
fn brute_force_objective(pr: &WeightedQRProblem) -> f64 {
    let m = pr.rows();
    let p = pr.ncols;
    let row = |i: usize| &pr.design[i * p..(i + 1) * p];
    let mut best = f64::INFINITY;
    match p {
        1 => {
            for i in 0..m {
                let b = pr.responses[i] / row(i)[0];
                best = best.min(pr.objective(&[b]));
            }
        }
        2 => {
            for i in 0..m {
                for j in (i + 1)..m {
                    let (a, b) = (row(i), row(j));
                    let det = a[0] * b[1] - a[1] * b[0];
                    if det.abs() < 1e-12 {
                        continue;
                    }
                    let (yi, yj) = (pr.responses[i], pr.responses[j]);
                    let c0 = (yi * b[1] - a[1] * yj) / det;
                    let c1 = (a[0] * yj - yi * b[0]) / det;
                    best = best.min(pr.objective(&[c0, c1]));
                }
            }
        }
        _ => unreachable!(),
    }
    best
}

fn problem_strategy() -> impl Strategy<Value = WeightedQRProblem> {
    (1usize..=2, 3usize..=12, 0.05f64..0.95).prop_flat_map(|(p, m, alpha)| {
        (
            prop::collection::vec(-1.0f64..1.0, m),
            prop::collection::vec(-3.0f64..3.0, m),
            prop::collection::vec(0.05f64..1.0, m),
        )
            .prop_map(move |(xs, ys, ws)| {
                let design = xs
                    .iter()
                    .flat_map(|&x| if p == 1 { vec![1.0] } else { vec![1.0, x] })
                    .collect();
                WeightedQRProblem {
                    design,
                    ncols: p,
                    responses: ys,
                    weights: ws,
                    alpha,
                }
            })
    })
}

fn directional_derivative(pr: &WeightedQRProblem, b: &[f64], dir: &[f64], zero_tol: f64) -> f64 {
    let p = pr.ncols;
    let mut total = 0.0;
    for i in 0..pr.rows() {
        let u = &pr.design[i * p..(i + 1) * p];
        let r = pr.responses[i] - u.iter().zip(b).map(|(a, c)| a * c).sum::<f64>();
        let delta = -u.iter().zip(dir).map(|(a, c)| a * c).sum::<f64>();
        let slope = if r > zero_tol {
            pr.alpha * delta
        } else if r < -zero_tol {
            (pr.alpha - 1.0) * delta
        } else {
            (pr.alpha * delta).max((pr.alpha - 1.0) * delta)
        };
        total += pr.weights[i] * slope;
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn matches_basic_solution_enumeration(pr in problem_strategy()) {
        let res = solve_weighted_qr(&pr, &SolverOptions::default()).unwrap();
        let brute = brute_force_objective(&pr);
        prop_assert_eq!(res.status, SolverStatus::Optimal);
        prop_assert!(res.duality_gap <= 1e-9);
        prop_assert!(res.objective <= brute + 1e-8 * brute.abs().max(1.0),
            "ipm {} brute {}", res.objective, brute);
        prop_assert!(res.objective >= brute - 1e-8 * brute.abs().max(1.0));
    }

    #[test]
    fn subgradient_certificate(pr in problem_strategy()) {
        let res = solve_weighted_qr(&pr, &SolverOptions::default()).unwrap();
        let scale = pr.weights.iter().zip(&pr.responses).map(|(w, y)| w * y.abs()).sum::<f64>().max(1.0);
        for k in 0..pr.ncols {
            for sign in [1.0, -1.0] {
                let mut dir = vec![0.0; pr.ncols];
                dir[k] = sign;
                let dd = directional_derivative(&pr, &res.coefficients, &dir, 1e-9 * scale);
                prop_assert!(dd >= -1e-7 * scale, "k={k} sign={sign} dd={dd}");
            }
        }
    }

    #[test]
    fn scale_equivariance(pr in problem_strategy(), c in 0.1f64..20.0) {
        let base = solve_weighted_qr(&pr, &SolverOptions::default()).unwrap();
        let mut scaled = pr.clone();
        scaled.responses.iter_mut().for_each(|y| *y *= c);
        let res = solve_weighted_qr(&scaled, &SolverOptions::default()).unwrap();
        prop_assert!((res.objective - c * base.objective).abs() <= 1e-8 * (c * base.objective).max(1.0));
        if base.status == SolverStatus::Optimal {
            for (a, b) in res.coefficients.iter().zip(&base.coefficients) {
                prop_assert!((a - c * b).abs() <= 1e-8 * (c * b).abs().max(1.0));
            }
        }
    }

    #[test]
    fn shift_equivariance(pr in problem_strategy(), d0 in -2.0f64..2.0, d1 in -2.0f64..2.0) {
        let delta = [d0, d1];
        let base = solve_weighted_qr(&pr, &SolverOptions::default()).unwrap();
        let mut shifted = pr.clone();
        let p = pr.ncols;
        for i in 0..pr.rows() {
            let u = &pr.design[i * p..(i + 1) * p];
            shifted.responses[i] += u.iter().zip(&delta).map(|(a, b)| a * b).sum::<f64>();
        }
        let res = solve_weighted_qr(&shifted, &SolverOptions::default()).unwrap();
        // objective is invariant; coefficients shift by delta on the optimal face
        prop_assert!((res.objective - base.objective).abs() <= 1e-8 * base.objective.max(1.0));
        let moved: Vec<f64> = base.coefficients.iter().zip(&delta).map(|(b, d)| b + d).collect();
        prop_assert!((shifted.objective(&moved) - res.objective).abs() <= 1e-8 * res.objective.max(1.0));
    }
}

#[test]
fn one_hundred_problems_under_ten_seconds() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let start = std::time::Instant::now();
    for _ in 0..100 {
        let p = rng.random_range(1..=2);
        let m = rng.random_range(2..=12);
        let xs: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pr = WeightedQRProblem {
            design: xs.iter().flat_map(|&x| if p == 1 { vec![1.0] } else { vec![1.0, x] }).collect(),
            ncols: p,
            responses: (0..m).map(|_| rng.random_range(-3.0..3.0)).collect(),
            weights: (0..m).map(|_| rng.random_range(0.05..1.0)).collect(),
            alpha: rng.random_range(0.05..0.95),
        };
        let res = solve_weighted_qr(&pr, &SolverOptions::default()).unwrap();
        let brute = brute_force_objective(&pr);
        assert!((res.objective - brute).abs() <= 1e-8 * brute.max(1.0));
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}
