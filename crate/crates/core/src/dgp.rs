//! Synthetic data-generating processes with closed-form conditional laws.
//!
//! Every shipped model has the location-scale form `Y = m(X) + s(X) e` with
//! `X ~ U[-1, 1]^d` independent of the noise `e`, so that
//! `Q(alpha | x) = m(x) + s(x) G^{-1}(alpha)` for the noise cdf `G`.

use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::basis::MultiIndex;
use crate::error::{Error, Result};
use crate::estimator::Sample;

/// Standard normal cdf.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile function.
pub fn norm_quantile(alpha: f64) -> f64 {
    let std = Normal::standard();
    let mut z = std.inverse_cdf(alpha);
    // one Newton polish step against norm_cdf
    if z.is_finite() {
        let pdf = norm_pdf(z);
        if pdf > 0.0 {
            z -= (norm_cdf(z) - alpha) / pdf;
        }
    }
    z
}

/// A model with known `F(y|x)`, `f(y|x)`, `f(x)` and `Q(alpha|x)`.
pub trait Dgp: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// Box support `[lo, hi]` of `X`.
    fn support(&self) -> (Vec<f64>, Vec<f64>);
    fn marginal_pdf(&self, x: &[f64]) -> f64;
    fn conditional_cdf(&self, y: f64, x: &[f64]) -> f64;
    fn conditional_pdf(&self, y: f64, x: &[f64]) -> f64;
    fn quantile(&self, alpha: f64, x: &[f64]) -> f64;
    /// `d^{|v|} Q(alpha | x) / dx^v`, when it exists in closed form.
    fn derivative(&self, alpha: f64, x: &[f64], v: &MultiIndex) -> Option<f64>;
    /// Holder smoothness of `x -> Q(alpha | x)`; infinite for analytic models.
    fn smoothness(&self) -> f64;
    /// `q(alpha | x) = dQ/dalpha`, when available.
    fn quantile_density(&self, alpha: f64, x: &[f64]) -> Option<f64>;
    /// Covariate values (first coordinate) where `Q` is not smooth.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
    /// One draw `(X, Y)`; `x` must have length `dim()`.
    fn draw(&self, rng: &mut dyn rand::RngCore, x: &mut [f64]) -> f64;

    fn sample(&self, n: usize, rng: &mut dyn rand::RngCore) -> Sample {
        let d = self.dim();
        let mut xs = vec![0.0; n * d];
        let mut ys = Vec::with_capacity(n);
        for row in xs.chunks_exact_mut(d) {
            ys.push(self.draw(rng, row));
        }
        Sample::new(xs, ys, d).expect("generated sample is finite")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanFn {
    /// `a + b x`
    Linear { a: f64, b: f64 },
    /// `sin(2x)`
    Sin2,
    /// `sign(x) |x|^{1/2}`
    SignedSqrt,
    /// `sin(2 x1) + x2^2`
    AdditiveSinSquare,
}

impl MeanFn {
    fn value(self, x: &[f64]) -> f64 {
        match self {
            MeanFn::Linear { a, b } => a + b * x[0],
            MeanFn::Sin2 => (2.0 * x[0]).sin(),
            MeanFn::SignedSqrt => x[0].signum() * x[0].abs().sqrt(),
            MeanFn::AdditiveSinSquare => (2.0 * x[0]).sin() + x[1] * x[1],
        }
    }

    fn derivative(self, x: &[f64], v: &MultiIndex) -> Option<f64> {
        let c = v.components();
        if v.degree() == 0 {
            return Some(self.value(x));
        }
        match self {
            MeanFn::Linear { b, .. } => Some(if c[0] == 1 { b } else { 0.0 }),
            MeanFn::Sin2 => Some(sin2_derivative(x[0], c[0])),
            MeanFn::SignedSqrt => None,
            MeanFn::AdditiveSinSquare => Some(match (c[0], c[1]) {
                (k, 0) => sin2_derivative(x[0], k),
                (0, 1) => 2.0 * x[1],
                (0, 2) => 2.0,
                _ => 0.0,
            }),
        }
    }
}

fn sin2_derivative(x: f64, k: u32) -> f64 {
    2f64.powi(k as i32) * (2.0 * x + k as f64 * FRAC_PI_2).sin()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleFn {
    One,
    /// `1 + x1^2`
    OnePlusSquare,
}

impl ScaleFn {
    fn value(self, x: &[f64]) -> f64 {
        match self {
            ScaleFn::One => 1.0,
            ScaleFn::OnePlusSquare => 1.0 + x[0] * x[0],
        }
    }

    fn derivative(self, x: &[f64], v: &MultiIndex) -> f64 {
        let c = v.components();
        let only_first = c[1..].iter().all(|&k| k == 0);
        match self {
            ScaleFn::One => (v.degree() == 0) as u8 as f64,
            ScaleFn::OnePlusSquare if !only_first => 0.0,
            ScaleFn::OnePlusSquare => match c[0] {
                0 => 1.0 + x[0] * x[0],
                1 => 2.0 * x[0],
                2 => 2.0,
                _ => 0.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Gaussian,
    /// `U[0, 1]`
    Uniform,
}

impl Noise {
    fn cdf(self, e: f64) -> f64 {
        match self {
            Noise::Gaussian => norm_cdf(e),
            Noise::Uniform => e.clamp(0.0, 1.0),
        }
    }

    fn pdf(self, e: f64) -> f64 {
        match self {
            Noise::Gaussian => norm_pdf(e),
            Noise::Uniform => {
                if (0.0..=1.0).contains(&e) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn quantile(self, alpha: f64) -> f64 {
        match self {
            Noise::Gaussian => norm_quantile(alpha),
            Noise::Uniform => alpha,
        }
    }

    fn draw(self, rng: &mut dyn rand::RngCore) -> f64 {
        match self {
            Noise::Gaussian => rng.sample(StandardNormal),
            Noise::Uniform => rng.random::<f64>(),
        }
    }
}

/// `Y = m(X) + s(X) e`, `X ~ U[-1, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationScale {
    pub name: String,
    pub d: usize,
    pub mean: MeanFn,
    pub scale: ScaleFn,
    pub noise: Noise,
}

impl Dgp for LocationScale {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn support(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-1.0; self.d], vec![1.0; self.d])
    }

    fn marginal_pdf(&self, x: &[f64]) -> f64 {
        if x.iter().all(|v| (-1.0..=1.0).contains(v)) {
            0.5f64.powi(self.d as i32)
        } else {
            0.0
        }
    }

    fn conditional_cdf(&self, y: f64, x: &[f64]) -> f64 {
        let s = self.scale.value(x);
        self.noise.cdf((y - self.mean.value(x)) / s)
    }

    fn conditional_pdf(&self, y: f64, x: &[f64]) -> f64 {
        let s = self.scale.value(x);
        self.noise.pdf((y - self.mean.value(x)) / s) / s
    }

    fn quantile(&self, alpha: f64, x: &[f64]) -> f64 {
        self.mean.value(x) + self.scale.value(x) * self.noise.quantile(alpha)
    }

    fn derivative(&self, alpha: f64, x: &[f64], v: &MultiIndex) -> Option<f64> {
        let dm = self.mean.derivative(x, v)?;
        Some(dm + self.noise.quantile(alpha) * self.scale.derivative(x, v))
    }

    fn smoothness(&self) -> f64 {
        match self.mean {
            MeanFn::SignedSqrt => 0.5,
            _ => f64::INFINITY,
        }
    }

    fn quantile_density(&self, alpha: f64, x: &[f64]) -> Option<f64> {
        let e = self.noise.quantile(alpha);
        Some(self.scale.value(x) / self.noise.pdf(e))
    }

    fn kinks(&self) -> Vec<f64> {
        match self.mean {
            MeanFn::SignedSqrt => vec![0.0],
            _ => Vec::new(),
        }
    }

    fn draw(&self, rng: &mut dyn rand::RngCore, x: &mut [f64]) -> f64 {
        for xj in x.iter_mut() {
            *xj = rng.random_range(-1.0..1.0);
        }
        self.mean.value(x) + self.scale.value(x) * self.noise.draw(rng)
    }
}

/// Names accepted by [`dgp_by_name`].
pub const DGP_NAMES: [&str; 6] = [
    "location-linear",
    "signed-sqrt",
    "location-sin",
    "heteroskedastic",
    "additive-2d",
    "uniform-noise",
];

/// Shipped models:
///
/// * `location-linear`: `Y = 0.5 + X + e`, Gaussian `e`.
/// * `signed-sqrt`: `Y = sign(X)|X|^{1/2} + e`, Gaussian `e`; Holder 1/2 at 0.
/// * `location-sin`: `Y = sin(2X) + e`, Gaussian `e`.
/// * `heteroskedastic`: `Y = sin(2X) + (1 + X^2) e`, Gaussian `e`.
/// * `additive-2d`: `Y = sin(2 X1) + X2^2 + e`, Gaussian `e`, `d = 2`.
/// * `uniform-noise`: `Y = sin(2X) + e`, `e ~ U[0, 1]`, so `q(alpha|x) = 1`.
pub fn dgp_by_name(name: &str) -> Result<Arc<dyn Dgp>> {
    let make = |d, mean, scale, noise| -> Arc<dyn Dgp> {
        Arc::new(LocationScale {
            name: name.to_string(),
            d,
            mean,
            scale,
            noise,
        })
    };
    Ok(match name {
        "location-linear" => make(1, MeanFn::Linear { a: 0.5, b: 1.0 }, ScaleFn::One, Noise::Gaussian),
        "signed-sqrt" => make(1, MeanFn::SignedSqrt, ScaleFn::One, Noise::Gaussian),
        "location-sin" => make(1, MeanFn::Sin2, ScaleFn::One, Noise::Gaussian),
        "heteroskedastic" => make(1, MeanFn::Sin2, ScaleFn::OnePlusSquare, Noise::Gaussian),
        "additive-2d" => make(2, MeanFn::AdditiveSinSquare, ScaleFn::One, Noise::Gaussian),
        "uniform-noise" => make(1, MeanFn::Sin2, ScaleFn::One, Noise::Uniform),
        other => {
            return Err(Error::invalid(
                "dgp",
                format!("unknown model '{other}', expected one of {}", DGP_NAMES.join(", ")),
            ))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quantile_inverts_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for name in DGP_NAMES {
            let dgp = dgp_by_name(name).unwrap();
            for _ in 0..200 {
                let alpha: f64 = rng.random_range(0.02..0.98);
                let x: Vec<f64> = (0..dgp.dim()).map(|_| rng.random_range(-0.9..0.9)).collect();
                let q = dgp.quantile(alpha, &x);
                let back = dgp.conditional_cdf(q, &x);
                assert!((back - alpha).abs() < 1e-10, "{name}: {back} vs {alpha}");
                assert!(dgp.conditional_pdf(q, &x) > 0.0);
                assert!(dgp.marginal_pdf(&x) > 0.0);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let eps = 1e-5;
        for name in ["location-linear", "location-sin", "heteroskedastic"] {
            let dgp = dgp_by_name(name).unwrap();
            let (alpha, x) = (0.3, 0.37);
            for k in 1..=3u32 {
                let v = MultiIndex::new(vec![k]);
                let lower = MultiIndex::new(vec![k - 1]);
                let fd = (dgp.derivative(alpha, &[x + eps], &lower).unwrap()
                    - dgp.derivative(alpha, &[x - eps], &lower).unwrap())
                    / (2.0 * eps);
                let exact = dgp.derivative(alpha, &[x], &v).unwrap();
                assert!((fd - exact).abs() < 1e-6, "{name} k={k}: {fd} vs {exact}");
            }
        }
        let dgp = dgp_by_name("additive-2d").unwrap();
        let x = [0.2, -0.4];
        let v = MultiIndex::new(vec![0, 1]);
        assert!((dgp.derivative(0.5, &x, &v).unwrap() + 0.8).abs() < 1e-12);
        let v = MultiIndex::new(vec![1, 1]);
        assert_eq!(dgp.derivative(0.5, &x, &v).unwrap(), 0.0);
    }

    #[test]
    fn quantile_density_closed_forms() {
        let lin = dgp_by_name("location-linear").unwrap();
        let q = lin.quantile_density(0.5, &[0.0]).unwrap();
        assert!((q - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        let uni = dgp_by_name("uniform-noise").unwrap();
        assert_eq!(uni.quantile_density(0.3, &[0.1]).unwrap(), 1.0);
    }

    #[test]
    fn signed_sqrt_is_rough() {
        let dgp = dgp_by_name("signed-sqrt").unwrap();
        assert_eq!(dgp.smoothness(), 0.5);
        assert_eq!(dgp.kinks(), vec![0.0]);
        assert!(dgp.derivative(0.5, &[0.1], &MultiIndex::new(vec![1])).is_none());
        assert!((dgp.quantile(0.5, &[-0.25]) + 0.5).abs() < 1e-15);
        assert!(dgp_by_name("nope").is_err());
    }

    #[test]
    fn sampling_is_reproducible() {
        let dgp = dgp_by_name("additive-2d").unwrap();
        let a = dgp.sample(50, &mut ChaCha8Rng::seed_from_u64(9));
        let b = dgp.sample(50, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert_eq!(a.dim(), 2);
        assert!(a.x().iter().all(|v| (-1.0..1.0).contains(v)));
    }
}
