//! Multivariate monomial basis `U(z) = (z^v / v!, |v| <= p)`.
//!
//! Multi-indices are kept in graded lexicographic order: ascending total
//! degree first, then ascending lexicographic order on the component vector.
//! Position 0 is always the zero multi-index, so coefficient 0 of any local
//! fit is the quantile level itself and each derivative order occupies a
//! contiguous block.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Largest polynomial order accepted by [`BasisSpec::new`].
pub const MAX_ORDER: usize = 10;

/// A vector of nonnegative per-dimension orders.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    components: Vec<u32>,
    degree: u32,
}

impl MultiIndex {
    pub fn new(components: Vec<u32>) -> Self {
        let degree = components.iter().sum();
        MultiIndex { components, degree }
    }

    pub fn zero(d: usize) -> Self {
        MultiIndex::new(vec![0; d])
    }

    /// Unit multi-index `e_k` in dimension `d`.
    pub fn unit(d: usize, k: usize) -> Self {
        let mut c = vec![0; d];
        c[k] = 1;
        MultiIndex::new(c)
    }

    pub fn components(&self) -> &[u32] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Total order `|v|`.
    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// `v! = prod v_i!`.
    pub fn factorial(&self) -> f64 {
        self.components.iter().map(|&c| factorial(c)).product()
    }

    /// Column name used in output files, e.g. `b_1_0`.
    pub fn column_name(&self) -> String {
        let parts: Vec<String> = self.components.iter().map(|c| c.to_string()).collect();
        format!("b_{}", parts.join("_"))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.components.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| self.components.cmp(&other.components))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k as u64).product::<u64>() as f64
}

/// The ordered index set `{v : |v| <= p}` in dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    d: usize,
    p: usize,
    indices: Vec<MultiIndex>,
    inv_factorials: Vec<f64>,
}

impl BasisSpec {
    /// Enumerates all multi-indices with `|v| <= p` in graded lexicographic order.
    pub fn new(d: usize, p: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("basis dimension must be at least 1"));
        }
        if p > MAX_ORDER {
            return Err(Error::domain(format!(
                "polynomial order {p} exceeds the maximum of {MAX_ORDER}"
            )));
        }
        let mut indices = Vec::new();
        let mut current = vec![0u32; d];
        collect_indices(&mut current, 0, p as u32, &mut indices);
        indices.sort();
        let inv_factorials = indices.iter().map(|v| 1.0 / v.factorial()).collect();
        Ok(BasisSpec {
            d,
            p,
            indices,
            inv_factorials,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.p
    }

    /// Number of basis functions, `C(d + p, d)`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, v: &MultiIndex) -> Option<usize> {
        self.indices.binary_search(v).ok()
    }

    /// Evaluates `U(z)`.
    pub fn eval(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(z, &mut out);
        out
    }

    /// Evaluates `U(z)` into a caller-provided buffer of length `len()`.
    pub fn eval_into(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.d);
        debug_assert_eq!(out.len(), self.len());
        // powers[j * (p + 1) + k] = z_j^k
        let stride = self.p + 1;
        let mut powers = vec![1.0; self.d * stride];
        for (j, &zj) in z.iter().enumerate() {
            for k in 1..stride {
                powers[j * stride + k] = powers[j * stride + k - 1] * zj;
            }
        }
        for ((slot, v), inv_fact) in out
            .iter_mut()
            .zip(&self.indices)
            .zip(&self.inv_factorials)
        {
            let mono: f64 = v
                .components
                .iter()
                .enumerate()
                .map(|(j, &c)| powers[j * stride + c as usize])
                .product();
            *slot = mono * inv_fact;
        }
    }

    /// Diagonal of the standardization matrix `H(h)`: entry `h^{|v|}`.
    pub fn scaling(&self, h: f64) -> Result<Vec<f64>> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::domain(format!("bandwidth must be positive, got {h}")));
        }
        Ok(self
            .indices
            .iter()
            .map(|v| h.powi(v.degree as i32))
            .collect())
    }

    /// Header line listing the index ordering, e.g. `(0,0);(0,1);(1,0)`.
    pub fn ordering_header(&self) -> String {
        let parts: Vec<String> = self.indices.iter().map(|v| v.to_string()).collect();
        parts.join(";")
    }
}

fn collect_indices(current: &mut Vec<u32>, dim: usize, budget: u32, out: &mut Vec<MultiIndex>) {
    if dim == current.len() {
        out.push(MultiIndex::new(current.clone()));
        return;
    }
    for k in 0..=budget {
        current[dim] = k;
        collect_indices(current, dim + 1, budget - k, out);
    }
    current[dim] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    fn comps(spec: &BasisSpec) -> Vec<Vec<u32>> {
        spec.indices().iter().map(|v| v.components().to_vec()).collect()
    }

    #[test]
    fn univariate_order_two() {
        let spec = BasisSpec::new(1, 2).unwrap();
        assert_eq!(comps(&spec), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(spec.eval(&[2.0]), vec![1.0, 2.0, 2.0]);
    }

    #[test]
    fn bivariate_linear_ordering() {
        let spec = BasisSpec::new(2, 1).unwrap();
        assert_eq!(comps(&spec), vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert_eq!(BasisSpec::new(2, 2).unwrap().len(), 6);
    }

    #[test]
    fn bivariate_quadratic_at_ones() {
        let spec = BasisSpec::new(2, 2).unwrap();
        // ordering (0,0),(0,1),(1,0),(0,2),(1,1),(2,0)
        assert_eq!(spec.eval(&[1.0, 1.0]), vec![1.0, 1.0, 1.0, 0.5, 1.0, 0.5]);
    }

    #[test]
    fn zero_point_is_intercept_only() {
        for (d, p) in [(1, 3), (2, 2), (3, 4)] {
            let spec = BasisSpec::new(d, p).unwrap();
            let u = spec.eval(&vec![0.0; d]);
            assert_eq!(u[0], 1.0);
            assert!(u[1..].iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn sizes_are_binomial() {
        for d in 1..=4 {
            for p in 0..=5 {
                let spec = BasisSpec::new(d, p).unwrap();
                assert_eq!(spec.len(), binomial(d + p, d), "d={d} p={p}");
                assert!(spec.indices().windows(2).all(|w| w[0] < w[1]));
                assert_eq!(spec.indices()[0], MultiIndex::zero(d));
            }
        }
    }

    #[test]
    fn scaling_entries() {
        let s = BasisSpec::new(1, 1).unwrap().scaling(0.5).unwrap();
        assert_eq!(s, vec![1.0, 0.5]);
        let s = BasisSpec::new(2, 2).unwrap().scaling(1.0).unwrap();
        assert!(s.iter().all(|&e| e == 1.0));
        let s = BasisSpec::new(1, 3).unwrap().scaling(0.1).unwrap();
        for (a, b) in s.iter().zip([1.0, 0.1, 0.01, 0.001]) {
            assert!((a - b).abs() <= 1e-15);
        }
        assert!(BasisSpec::new(1, 1).unwrap().scaling(0.0).is_err());
        assert!(BasisSpec::new(1, 1).unwrap().scaling(-1.0).is_err());
    }

    #[test]
    fn order_cap() {
        assert!(BasisSpec::new(1, MAX_ORDER).is_ok());
        assert!(BasisSpec::new(1, MAX_ORDER + 1).is_err());
        assert!(BasisSpec::new(0, 1).is_err());
    }

    #[test]
    fn position_lookup() {
        let spec = BasisSpec::new(2, 2).unwrap();
        assert_eq!(spec.position(&MultiIndex::new(vec![1, 1])), Some(4));
        assert_eq!(spec.position(&MultiIndex::new(vec![3, 0])), None);
        assert_eq!(spec.ordering_header(), "(0,0);(0,1);(1,0);(0,2);(1,1);(2,0)");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn standardization_identity(
                x in prop::collection::vec(-1.0f64..1.0, 2),
                xp in prop::collection::vec(-1.0f64..1.0, 2),
                h in 1e-3f64..1.0,
            ) {
                let spec = BasisSpec::new(2, 3).unwrap();
                let diff: Vec<f64> = xp.iter().zip(&x).map(|(a, b)| a - b).collect();
                let scaled: Vec<f64> = diff.iter().map(|t| t / h).collect();
                let lhs = spec.eval(&diff);
                let rhs = spec.eval(&scaled);
                let hs = spec.scaling(h).unwrap();
                for k in 0..spec.len() {
                    let r = hs[k] * rhs[k];
                    prop_assert!((lhs[k] - r).abs() <= 1e-12 * lhs[k].abs().max(1e-300));
                }
            }

            #[test]
            fn multiplicative_across_dimensions(z1 in -2.0f64..2.0, z2 in -2.0f64..2.0) {
                let spec2 = BasisSpec::new(2, 4).unwrap();
                let spec1 = BasisSpec::new(1, 4).unwrap();
                let u1 = spec1.eval(&[z1]);
                let u2 = spec1.eval(&[z2]);
                let u = spec2.eval(&[z1, z2]);
                for (k, v) in spec2.indices().iter().enumerate() {
                    let a = v.components()[0] as usize;
                    let b = v.components()[1] as usize;
                    let expected = u1[a] * u2[b];
                    prop_assert!((u[k] - expected).abs() <= 1e-13 * expected.abs().max(1.0));
                }
            }
        }
    }
}
