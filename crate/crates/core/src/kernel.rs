//! Compactly supported nonnegative kernels on the unit ball or unit cube.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quadrature::Cubature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// Constant on the closed unit ball. Not Lipschitz.
    UniformBall,
    /// `prod 3/4 (1 - z_j^2)` on `[-1, 1]^d`.
    EpanechnikovProduct,
    /// `prod 35/32 (1 - z_j^2)^3` on `[-1, 1]^d`.
    TriweightProduct,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 3] = [
        KernelFamily::UniformBall,
        KernelFamily::EpanechnikovProduct,
        KernelFamily::TriweightProduct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::UniformBall => "uniform-ball",
            KernelFamily::EpanechnikovProduct => "epanechnikov-product",
            KernelFamily::TriweightProduct => "triweight-product",
        }
    }

    pub fn is_lipschitz(self) -> bool {
        !matches!(self, KernelFamily::UniformBall)
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelFamily::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| {
                Error::invalid(
                    "kernel",
                    format!(
                        "unknown family '{s}', expected one of uniform-ball, epanechnikov-product, triweight-product"
                    ),
                )
            })
    }
}

/// A kernel family in a fixed dimension, normalized to integrate to one.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    d: usize,
    /// Value of the uniform-ball kernel inside the ball, `1 / vol(B_d)`.
    ball_height: f64,
}

/// Kernel weights of a sample around an evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalWeights {
    pub weights: Vec<f64>,
    /// Indices with strictly positive weight, ascending.
    pub active: Vec<usize>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("kernel dimension must be at least 1"));
        }
        let ball_volume = unit_ball_volume(d);
        let spec = KernelSpec {
            family,
            d,
            ball_height: 1.0 / ball_volume,
        };
        if d <= 3 {
            let mass = spec.support_rule(32).integrate(|z| spec.value(z));
            if (mass - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(
                    "kernel",
                    format!("{family} in d={d} integrates to {mass}, not 1"),
                ));
            }
        }
        Ok(spec)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Kernel density at `z`; exactly zero outside the support.
    pub fn value(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.d);
        match self.family {
            KernelFamily::UniformBall => {
                let r2: f64 = z.iter().map(|t| t * t).sum();
                if r2 <= 1.0 {
                    self.ball_height
                } else {
                    0.0
                }
            }
            KernelFamily::EpanechnikovProduct => z
                .iter()
                .map(|&t| if t.abs() < 1.0 { 0.75 * (1.0 - t * t) } else { 0.0 })
                .product(),
            KernelFamily::TriweightProduct => z
                .iter()
                .map(|&t| {
                    if t.abs() < 1.0 {
                        let u = 1.0 - t * t;
                        35.0 / 32.0 * u * u * u
                    } else {
                        0.0
                    }
                })
                .product(),
        }
    }

    /// `K((X_i - x) / h)` for every row of `sample_x` (row-major, `n x d`).
    pub fn local_weights(&self, sample_x: &[f64], x: &[f64], h: f64) -> Result<LocalWeights> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::domain(format!("bandwidth must be positive, got {h}")));
        }
        let d = self.d;
        let mut z = vec![0.0; d];
        let mut weights = Vec::with_capacity(sample_x.len() / d);
        let mut active = Vec::new();
        for (i, row) in sample_x.chunks_exact(d).enumerate() {
            for j in 0..d {
                z[j] = (row[j] - x[j]) / h;
            }
            let w = self.value(&z);
            if w > 0.0 {
                active.push(i);
            }
            weights.push(w);
        }
        Ok(LocalWeights { weights, active })
    }

    /// Cubature rule covering the kernel support with `n` nodes per axis.
    pub fn support_rule(&self, n: usize) -> Cubature {
        match self.family {
            KernelFamily::UniformBall => Cubature::ball(self.d, n),
            _ => Cubature::cube(self.d, n),
        }
    }

    /// `int |z_1|^a K(z) dz` over the support, by quadrature.
    pub fn abs_moment(&self, a: f64, n: usize) -> f64 {
        self.support_rule(n)
            .integrate(|z| z[0].abs().powf(a) * self.value(z))
    }
}

/// `V_d = 2 pi / d * V_{d-2}` with `V_0 = 1`, `V_1 = 2`.
fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / d as f64 * unit_ball_volume(d - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_values() {
        let u = KernelSpec::new(KernelFamily::UniformBall, 1).unwrap();
        assert_eq!(u.value(&[0.0]), 0.5);
        let e1 = KernelSpec::new(KernelFamily::EpanechnikovProduct, 1).unwrap();
        assert_eq!(e1.value(&[1.0]), 0.0);
        let e2 = KernelSpec::new(KernelFamily::EpanechnikovProduct, 2).unwrap();
        assert_eq!(e2.value(&[0.0, 0.0]), 0.5625);
    }

    #[test]
    fn integrates_to_one_with_64_nodes() {
        for family in KernelFamily::ALL {
            for d in 1..=3 {
                let k = KernelSpec::new(family, d).unwrap();
                let mass = k.support_rule(64).integrate(|z| k.value(z));
                assert!((mass - 1.0).abs() <= 1e-4, "{family} d={d} mass={mass}");
            }
        }
    }

    #[test]
    fn nonnegative_and_compact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for family in KernelFamily::ALL {
            for d in 1..=3 {
                let k = KernelSpec::new(family, d).unwrap();
                for _ in 0..(100_000 / 9) {
                    let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.6..1.6)).collect();
                    let v = k.value(&z);
                    assert!(v >= 0.0);
                    let outside = match family {
                        KernelFamily::UniformBall => z.iter().map(|t| t * t).sum::<f64>() > 1.0,
                        _ => z.iter().any(|t| t.abs() > 1.0),
                    };
                    if outside {
                        assert_eq!(v, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn weights_at_center_and_far_away() {
        let k = KernelSpec::new(KernelFamily::UniformBall, 1).unwrap();
        let xs = vec![0.3; 5];
        let lw = k.local_weights(&xs, &[0.3], 0.1).unwrap();
        assert!(lw.weights.iter().all(|&w| w == 0.5));
        assert_eq!(lw.active, vec![0, 1, 2, 3, 4]);

        let far = vec![2.0, -2.0, 5.0];
        let lw = k.local_weights(&far, &[0.0], 0.5).unwrap();
        assert!(lw.weights.iter().all(|&w| w == 0.0));
        assert!(lw.active.is_empty());
        assert!(k.local_weights(&far, &[0.0], 0.0).is_err());
    }

    #[test]
    fn weights_match_pointwise_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = KernelSpec::new(KernelFamily::EpanechnikovProduct, 2).unwrap();
        let xs: Vec<f64> = (0..400).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = [0.1, -0.2];
        let h = 0.4;
        let lw = k.local_weights(&xs, &x, h).unwrap();
        for (i, row) in xs.chunks_exact(2).enumerate() {
            let z = [(row[0] - x[0]) / h, (row[1] - x[1]) / h];
            assert_eq!(lw.weights[i], k.value(&z));
            assert_eq!(lw.active.contains(&i), k.value(&z) > 0.0);
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in KernelFamily::ALL {
            assert_eq!(f.name().parse::<KernelFamily>().unwrap(), f);
        }
        assert!("gaussian".parse::<KernelFamily>().is_err());
        assert!(!KernelFamily::UniformBall.is_lipschitz());
    }

    #[test]
    fn closed_form_moments() {
        // int |z|^{3/2} K and int z^2 K for the uniform and Epanechnikov kernels in d = 1
        let u = KernelSpec::new(KernelFamily::UniformBall, 1).unwrap();
        let e = KernelSpec::new(KernelFamily::EpanechnikovProduct, 1).unwrap();
        assert!((u.abs_moment(2.0, 16) - 1.0 / 3.0).abs() < 1e-14);
        assert!((e.abs_moment(2.0, 16) - 0.2).abs() < 1e-14);
        assert!((u.abs_moment(1.5, 400) - 0.4).abs() < 1e-6);
        assert!((e.abs_moment(1.5, 400) - 4.0 / 15.0).abs() < 1e-6);
    }
}
