//! Coefficient algebra for the two closed function families of the theory.
//!
//! * [`WeightedPoly`] is `(1 + xi^2/N)^(-s/2) P(xi)`, i.e. `alpha^(-s) P`.
//!   Exact eigenstates and everything the ladder and Klein-Gordon operators
//!   produce from them live here.
//! * [`GaussPoly`] is `exp(-xi^2/2) P(xi)`, home of the perturbative states.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Dense real polynomial in `xi`; `coeffs[k]` multiplies `xi^k`.
///
/// Trailing zeros are trimmed so the zero polynomial is the empty vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// `c xi^k`.
    pub fn monomial(k: usize, c: f64) -> Self {
        let mut v = vec![0.0; k + 1];
        v[k] = c;
        Self::new(v)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `xi^k`, zero past the degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, xi: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * xi + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn nth_derivative(&self, order: usize) -> Self {
        (0..order).fold(self.clone(), |p, _| p.derivative())
    }

    /// Multiplication by `xi`.
    pub fn mul_xi(&self) -> Self {
        self.shift(1)
    }

    /// Multiplication by `xi^k`.
    pub fn shift(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut v = vec![0.0; k];
        v.extend_from_slice(&self.coeffs);
        Self::new(v)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.coeffs.iter().map(|x| x * c).collect())
    }

    /// Multiplication by `1 + xi^2 / scale`.
    pub fn mul_one_plus_sq(&self, scale: f64) -> Self {
        self + &self.shift(2).scale(1.0 / scale)
    }

    /// Exact division by `1 + xi^2 / scale`: returns quotient and remainder
    /// (remainder has degree < 2).
    pub fn div_one_plus_sq(&self, scale: f64) -> (Self, Self) {
        let Some(deg) = self.degree() else {
            return (Self::zero(), Self::zero());
        };
        if deg < 2 {
            return (Self::zero(), self.clone());
        }
        // divisor written as (xi^2 + scale) / scale
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; deg - 1];
        for k in (2..=deg).rev() {
            let q = rem[k] * scale;
            quot[k - 2] = q;
            rem[k] = 0.0;
            rem[k - 2] -= q;
        }
        rem.truncate(2);
        (Self::new(quot), Self::new(rem))
    }

    /// Parity-respecting check: every coefficient with `k % 2 != parity` is zero.
    pub fn has_parity(&self, parity: usize) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(k, &c)| k % 2 == parity % 2 || c == 0.0)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

/// `alpha^(-s) P(xi)` with `alpha = sqrt(1 + xi^2 / N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoly {
    /// Power of `alpha^(-1)` carried by the weight.
    pub s: f64,
    pub poly: Poly,
    /// The `N` in `1 + xi^2 / N`.
    pub scale: f64,
}

impl WeightedPoly {
    pub fn new(s: f64, poly: Poly, scale: f64) -> Self {
        Self { s, poly, scale }
    }

    /// `alpha^2` as a member of the family.
    pub fn alpha_sq(scale: f64) -> Self {
        Self::new(-2.0, Poly::one(), scale)
    }

    /// `(1 + xi^2/N)^(-s/2)`.
    pub fn weight(&self, xi: f64) -> f64 {
        (-0.5 * self.s * (xi * xi / self.scale).ln_1p()).exp()
    }

    pub fn eval(&self, xi: f64) -> f64 {
        self.weight(xi) * self.poly.eval(xi)
    }

    /// `d/dxi`: `(s + 2, (1 + xi^2/N) P' - (s/N) xi P)`.
    pub fn differentiate(&self) -> Self {
        let lead = self.poly.derivative().mul_one_plus_sq(self.scale);
        let tail = self.poly.mul_xi().scale(self.s / self.scale);
        Self::new(self.s + 2.0, &lead - &tail, self.scale)
    }

    /// Pointwise product.
    pub fn multiply(&self, other: &Self) -> Self {
        debug_assert!(same_scale(self.scale, other.scale));
        Self::new(self.s + other.s, &self.poly * &other.poly, self.scale)
    }

    pub fn scale_by(&self, c: f64) -> Self {
        Self::new(self.s, self.poly.scale(c), self.scale)
    }

    pub fn mul_xi(&self) -> Self {
        Self::new(self.s, self.poly.mul_xi(), self.scale)
    }

    /// Same function written with weight exponent `s + 2`.
    pub fn raise_weight(&self) -> Self {
        Self::new(self.s + 2.0, self.poly.mul_one_plus_sq(self.scale), self.scale)
    }

    /// Same function written with weight exponent `s - 2`, if `P` is divisible
    /// by `1 + xi^2/N`. Returns the rewritten function and the remainder.
    pub fn lower_weight(&self) -> (Self, Poly) {
        let (q, r) = self.poly.div_one_plus_sq(self.scale);
        (Self::new(self.s - 2.0, q, self.scale), r)
    }

    /// Rewrites at exponent `target`, which must exceed `s` by an even integer.
    pub fn at_weight(&self, target: f64) -> Option<Self> {
        let steps = (target - self.s) / 2.0;
        let rounded = steps.round();
        if (steps - rounded).abs() > 1e-9 || rounded < 0.0 {
            return None;
        }
        Some((0..rounded as usize).fold(self.clone(), |f, _| f.raise_weight()))
    }

    /// Sum, bringing both terms to the larger weight exponent.
    pub fn add(&self, other: &Self) -> Option<Self> {
        let s = self.s.max(other.s);
        let a = self.at_weight(s)?;
        let b = other.at_weight(s)?;
        Some(Self::new(s, &a.poly + &b.poly, self.scale))
    }
}

fn same_scale(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// `exp(-xi^2/2) P(xi)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GaussPoly {
    pub poly: Poly,
}

impl GaussPoly {
    pub fn new(poly: Poly) -> Self {
        Self { poly }
    }

    pub fn eval(&self, xi: f64) -> f64 {
        (-0.5 * xi * xi).exp() * self.poly.eval(xi)
    }

    /// `d/dxi`: `P' - xi P`.
    pub fn differentiate(&self) -> Self {
        Self::new(&self.poly.derivative() - &self.poly.mul_xi())
    }

    pub fn nth_derivative(&self, order: usize) -> Self {
        (0..order).fold(self.clone(), |f, _| f.differentiate())
    }

    pub fn mul_xi(&self) -> Self {
        Self::new(self.poly.mul_xi())
    }

    /// Multiplication by an arbitrary polynomial.
    pub fn mul_poly(&self, p: &Poly) -> Self {
        Self::new(&self.poly * p)
    }

    pub fn scale_by(&self, c: f64) -> Self {
        Self::new(self.poly.scale(c))
    }

    /// Normalized oscillator function `phi_k` as a member of the family.
    pub fn oscillator(k: usize) -> Self {
        Self::new(hermite_physicists(k).scale(oscillator_norm(k)))
    }

    /// Builds `sum_k c_k phi_k`.
    pub fn from_oscillator_coeffs(coeffs: &[f64]) -> Self {
        let mut acc = Poly::zero();
        for (k, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                acc = &acc + &hermite_physicists(k).scale(c * oscillator_norm(k));
            }
        }
        Self::new(acc)
    }
}

impl Add for &GaussPoly {
    type Output = GaussPoly;
    fn add(self, rhs: &GaussPoly) -> GaussPoly {
        GaussPoly::new(&self.poly + &rhs.poly)
    }
}

impl Sub for &GaussPoly {
    type Output = GaussPoly;
    fn sub(self, rhs: &GaussPoly) -> GaussPoly {
        GaussPoly::new(&self.poly - &rhs.poly)
    }
}

/// Physicists' Hermite polynomial `H_n` (leading coefficient `2^n`).
pub fn hermite_physicists(n: usize) -> Poly {
    let mut prev = Poly::one();
    if n == 0 {
        return prev;
    }
    let mut cur = Poly::monomial(1, 2.0);
    for k in 1..n {
        let next = &cur.mul_xi().scale(2.0) - &prev.scale(2.0 * k as f64);
        prev = cur;
        cur = next;
    }
    cur
}

/// `pi^(-1/4) / sqrt(2^k k!)`, the prefactor of `H_k` in `phi_k`.
pub fn oscillator_norm(k: usize) -> f64 {
    let ln = -0.25 * PI.ln() - 0.5 * (k as f64 * std::f64::consts::LN_2 + ln_factorial(k));
    ln.exp()
}

pub(crate) fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|j| (j as f64).ln()).sum()
}

/// Normalized oscillator function `phi_k(xi)` by the stable three-term recurrence.
pub fn oscillator_function(k: usize, xi: f64) -> f64 {
    let mut prev = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    if k == 0 {
        return prev;
    }
    let mut cur = std::f64::consts::SQRT_2 * xi * prev;
    for j in 1..k {
        let j = j as f64;
        let next = ((2.0 / (j + 1.0)).sqrt()) * xi * cur - (j / (j + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Expansion coefficients of `f` over the normalized oscillator functions:
/// `f = sum_k c_k phi_k`, exact and finite.
///
/// Monomials are converted with the positive inversion formula
/// `xi^j = j!/2^j sum_l H_{j-2l} / (l! (j-2l)!)`, which avoids cancellation.
pub fn hermite_expand(f: &GaussPoly) -> Vec<f64> {
    let Some(deg) = f.poly.degree() else {
        return Vec::new();
    };
    let mut c = vec![0.0; deg + 1];
    for (j, &p) in f.poly.coeffs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for l in 0..=j / 2 {
            let k = j - 2 * l;
            // j!/(2^j l! k!) in log form, then divide by the phi_k prefactor
            let ln_w = ln_factorial(j)
                - j as f64 * std::f64::consts::LN_2
                - ln_factorial(l)
                - ln_factorial(k);
            c[k] += p * (ln_w.exp() / oscillator_norm(k));
        }
    }
    c
}

/// Inverse of [`hermite_expand`].
pub fn hermite_reconstruct(coeffs: &[f64]) -> GaussPoly {
    GaussPoly::from_oscillator_coeffs(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn central_diff(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn poly_basics() {
        let p = Poly::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), Some(1));
        assert!(Poly::new(vec![0.0, 0.0]).is_zero());
        assert_eq!(p.eval(3.0), 7.0);
        let q = &p * &p;
        assert_eq!(q.coeffs(), &[1.0, 4.0, 4.0]);
        assert_eq!(q.derivative().coeffs(), &[4.0, 8.0]);
    }

    #[test]
    fn division_by_one_plus_square() {
        let scale = 3.0;
        let q = Poly::new(vec![1.0, -2.0, 0.5, 4.0]);
        let p = q.mul_one_plus_sq(scale);
        let (quot, rem) = p.div_one_plus_sq(scale);
        assert!(rem.max_abs_coeff() < 1e-14);
        assert!((&quot - &q).max_abs_coeff() < 1e-14);
        let (_, rem) = (&p + &Poly::monomial(1, 0.25)).div_one_plus_sq(scale);
        assert_relative_eq!(rem.coeff(1), 0.25, epsilon = 1e-14);
    }

    #[test]
    fn wp_derivative_of_constant_and_weight() {
        let f = WeightedPoly::new(0.0, Poly::one(), 5.0);
        let d = f.differentiate();
        assert_eq!(d.s, 2.0);
        assert!(d.poly.is_zero());

        let c0 = 3.7;
        let f = WeightedPoly::new(c0, Poly::one(), 5.0);
        let d = f.differentiate();
        assert_eq!(d.s, c0 + 2.0);
        assert_eq!(d.poly.coeffs(), &[0.0, -c0 / 5.0]);
        assert_relative_eq!(d.eval(0.7), central_diff(|x| f.eval(x), 0.7), max_relative = 1e-8);

        let f = WeightedPoly::new(2.0, Poly::monomial(1, 1.0), 5.0);
        let d = f.differentiate();
        assert_eq!(d.s, 4.0);
        assert_relative_eq!(d.poly.coeff(0), 1.0);
        assert_relative_eq!(d.poly.coeff(2), -1.0 / 5.0, epsilon = 1e-15);
        assert_relative_eq!(d.eval(0.7), central_diff(|x| f.eval(x), 0.7), max_relative = 1e-8);
    }

    #[test]
    fn wp_multiplication_rules() {
        let f = WeightedPoly::new(2.0, Poly::monomial(1, 1.0), 4.0);
        let one = WeightedPoly::new(0.0, Poly::one(), 4.0);
        assert_eq!(f.multiply(&one), f);
        let sq = f.multiply(&f);
        assert_eq!(sq.s, 4.0);
        assert_eq!(sq.poly.coeffs(), &[0.0, 0.0, 1.0]);
        let g = WeightedPoly::alpha_sq(4.0).multiply(&f);
        assert_eq!(g.s, 0.0);
        assert_eq!(g.poly, f.poly);
    }

    #[test]
    fn wp_weight_changes_preserve_values() {
        let f = WeightedPoly::new(1.3, Poly::new(vec![0.5, -1.0, 2.0]), 6.0);
        let g = f.raise_weight().raise_weight();
        let (h, rem) = g.lower_weight();
        assert!(rem.max_abs_coeff() < 1e-14);
        for x in [-2.0, 0.1, 3.3] {
            assert_relative_eq!(g.eval(x), f.eval(x), max_relative = 1e-13);
            assert_relative_eq!(h.eval(x), f.eval(x), max_relative = 1e-13);
        }
        assert!(f.at_weight(2.3).is_none());
        assert!(f.at_weight(-0.7).is_none());
    }

    #[test]
    fn gauss_family_rules() {
        let one = GaussPoly::new(Poly::one());
        assert_eq!(one.differentiate().poly.coeffs(), &[0.0, -1.0]);
        let xi = GaussPoly::new(Poly::monomial(1, 1.0));
        assert_eq!(xi.differentiate().poly.coeffs(), &[1.0, 0.0, -1.0]);
        assert_eq!(one.mul_xi(), xi);
    }

    #[test]
    fn standard_hermite_table() {
        assert_eq!(hermite_physicists(0).coeffs(), &[1.0]);
        assert_eq!(hermite_physicists(1).coeffs(), &[0.0, 2.0]);
        assert_eq!(hermite_physicists(2).coeffs(), &[-2.0, 0.0, 4.0]);
        assert_eq!(hermite_physicists(3).coeffs(), &[0.0, -12.0, 0.0, 8.0]);
    }

    #[test]
    fn oscillator_function_matches_polynomial_form() {
        for k in 0..12 {
            let g = GaussPoly::oscillator(k);
            for x in [-3.1, -0.4, 0.0, 1.7, 2.5] {
                assert_relative_eq!(
                    oscillator_function(k, x),
                    g.eval(x),
                    epsilon = 1e-12,
                    max_relative = 1e-10
                );
            }
        }
    }

    #[test]
    fn expansion_of_basis_elements() {
        let c = hermite_expand(&GaussPoly::oscillator(3));
        assert_eq!(c.len(), 4);
        for (k, v) in c.iter().enumerate() {
            let expect = if k == 3 { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-14, "k={k} v={v}");
        }
        assert!(hermite_expand(&GaussPoly::default()).is_empty());
    }

    #[test]
    fn expansion_of_xi_gaussian() {
        // xi e^{-xi^2/2} = (H_1/2) e^{-xi^2/2} = pi^{1/4} sqrt(2)/2 phi_1
        let c = hermite_expand(&GaussPoly::new(Poly::monomial(1, 1.0)));
        assert!(c[0].abs() < 1e-15);
        assert_relative_eq!(c[1], PI.powf(0.25) / std::f64::consts::SQRT_2, max_relative = 1e-15);
        // Gaussian-moment oracle: c_1 = int phi_1 xi e^{-xi^2/2} = pi^{-1/4}/sqrt2 * 2 * int xi^2 e^{-xi^2}
        let oracle = PI.powf(-0.25) / std::f64::consts::SQRT_2 * 2.0 * (PI.sqrt() / 2.0);
        assert_relative_eq!(c[1], oracle, max_relative = 1e-14);
    }

    fn small_wp() -> impl Strategy<Value = WeightedPoly> {
        (
            0.0f64..50.0,
            proptest::collection::vec(-2.0f64..2.0, 1..=11),
            1.0f64..40.0,
        )
            .prop_map(|(s, c, n)| WeightedPoly::new(s, Poly::new(c), n))
    }

    proptest! {
        #[test]
        fn wp_derivative_matches_finite_differences(f in small_wp(), x in -5.0f64..5.0) {
            let d = f.differentiate();
            let fd = central_diff(|t| f.eval(t), x);
            let scale = d.eval(x).abs().max(f.eval(x).abs()).max(1e-300);
            prop_assert!((d.eval(x) - fd).abs() <= 1e-8 * scale.max(
                // absolute floor tied to the size of the function's terms
                f.weight(x) * f.poly.max_abs_coeff() * (1.0 + x.abs()).powi(f.poly.degree().unwrap_or(0) as i32)
            ));
        }

        #[test]
        fn evaluation_is_a_homomorphism(f in small_wp(), g_c in proptest::collection::vec(-2.0f64..2.0, 1..6), x in -5.0f64..5.0) {
            let g = WeightedPoly::new(1.5, Poly::new(g_c), f.scale);
            let prod = f.multiply(&g).eval(x);
            let direct = f.eval(x) * g.eval(x);
            prop_assert!((prod - direct).abs() <= 1e-12 * (f.weight(x) * g.weight(x))
                * (f.poly.max_abs_coeff() * g.poly.max_abs_coeff()) * (1.0 + x.abs()).powi(20));
            let sx = f.mul_xi().eval(x);
            prop_assert!((sx - x * f.eval(x)).abs() <= 1e-12 * sx.abs().max(1e-300) + 1e-300);
        }

        #[test]
        fn gauss_derivative_homomorphism(c in proptest::collection::vec(-2.0f64..2.0, 1..12), x in -5.0f64..5.0) {
            let f = GaussPoly::new(Poly::new(c));
            let d = f.differentiate();
            let fd = central_diff(|t| f.eval(t), x);
            let size = (-0.5 * x * x).exp() * f.poly.max_abs_coeff() * (1.0 + x.abs()).powi(12);
            prop_assert!((d.eval(x) - fd).abs() <= 1e-7 * size);
        }

        #[test]
        fn expand_reconstruct_identity(c in proptest::collection::vec(-1.0f64..1.0, 1..=31)) {
            let g = hermite_reconstruct(&c);
            let back = hermite_expand(&g);
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            // monomial coefficients of degree > 26 carry an f64 conditioning floor above 1e-10
            let tol = if c.len() <= 27 { 1e-10 } else { 5e-9 };
            for k in 0..c.len().max(back.len()) {
                let a = c.get(k).copied().unwrap_or(0.0);
                let b = back.get(k).copied().unwrap_or(0.0);
                prop_assert!((a - b).abs() <= tol * norm, "k={} a={} b={}", k, a, b);
            }
        }
    }
}
