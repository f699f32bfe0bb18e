//! Gauss–Legendre rules and tensor products over kernel supports.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Rule mapped to `[a, b]`, as `(node, weight)` pairs.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on_interval(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A cubature rule: points in `R^d` with weights.
#[derive(Debug, Clone)]
pub struct Cubature {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl Cubature {
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * f(z))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Tensor product of one-dimensional rules, one per axis.
    pub fn tensor(axes: &[Vec<(f64, f64)>]) -> Self {
        let mut points = vec![Vec::with_capacity(axes.len())];
        let mut weights = vec![1.0];
        for axis in axes {
            let mut next_p = Vec::with_capacity(points.len() * axis.len());
            let mut next_w = Vec::with_capacity(points.len() * axis.len());
            for (p, w) in points.iter().zip(&weights) {
                for &(x, wx) in axis {
                    let mut q = p.clone();
                    q.push(x);
                    next_p.push(q);
                    next_w.push(w * wx);
                }
            }
            points = next_p;
            weights = next_w;
        }
        Cubature {
            dim: axes.len(),
            points,
            weights,
        }
    }

    /// Tensor Gauss–Legendre rule on the cube `[-1, 1]^d`.
    pub fn cube(d: usize, n: usize) -> Self {
        let gl = GaussLegendre::new(n);
        let axis: Vec<(f64, f64)> = gl.on_interval(-1.0, 1.0).collect();
        Cubature::tensor(&vec![axis; d])
    }

    /// Rule on the closed unit ball. Polar coordinates in `d = 2`, spherical
    /// in `d = 3`, a masked cube rule otherwise.
    pub fn ball(d: usize, n: usize) -> Self {
        let gl = GaussLegendre::new(n);
        match d {
            1 => Cubature::cube(1, n),
            2 => {
                let mut points = Vec::new();
                let mut weights = Vec::new();
                for (r, wr) in gl.on_interval(0.0, 1.0) {
                    for k in 0..n {
                        let phi = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                        points.push(vec![r * phi.cos(), r * phi.sin()]);
                        weights.push(wr * r * 2.0 * PI / n as f64);
                    }
                }
                Cubature {
                    dim: 2,
                    points,
                    weights,
                }
            }
            3 => {
                let mut points = Vec::new();
                let mut weights = Vec::new();
                for (r, wr) in gl.on_interval(0.0, 1.0) {
                    for (u, wu) in gl.on_interval(-1.0, 1.0) {
                        let s = (1.0 - u * u).sqrt();
                        for k in 0..n {
                            let phi = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                            points.push(vec![r * s * phi.cos(), r * s * phi.sin(), r * u]);
                            weights.push(wr * r * r * wu * 2.0 * PI / n as f64);
                        }
                    }
                }
                Cubature {
                    dim: 3,
                    points,
                    weights,
                }
            }
            _ => {
                let cube = Cubature::cube(d, n);
                let (points, weights) = cube
                    .points
                    .into_iter()
                    .zip(cube.weights)
                    .filter(|(z, _)| z.iter().map(|t| t * t).sum::<f64>() <= 1.0)
                    .unzip();
                Cubature {
                    dim: d,
                    points,
                    weights,
                }
            }
        }
    }
}
