//! Relativistic Hermite polynomials `H_n^(N,lambda)`.
//!
//! They solve
//! `(1 + xi^2/N) H'' - (2/N)(N_lambda + n - 1/2) xi H' + (n/N)(2 N_lambda + n) H = 0`.
//! Series substitution gives the two-term recurrence
//! `a_{k+2} = -(k - n)(k - 2 N_lambda - n) a_k / (N (k+2)(k+1))`,
//! which we run downwards from the leading coefficient
//! `a_n = prod_{j=1..n} (2 N_lambda + j) / N`. That scale makes the
//! differential ladder operators act with the textbook amplitudes and tends
//! to `2^n` as `N -> infinity`.

use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::polyalg::Poly;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelHermite {
    pub n: usize,
    pub params: ModelParams,
    pub poly: Poly,
}

pub use crate::polyalg::hermite_physicists as hermite_std;

/// Leading coefficient `prod_{j=1..n} (2 N_lambda + j) / N`.
pub fn leading_coefficient(params: &ModelParams, n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, j| {
        acc * (2.0 * params.n_lambda + j as f64) / params.n
    })
}

/// Ratio `a_{k+2} / a_k` of the series recurrence.
pub fn recurrence_ratio(params: &ModelParams, n: usize, k: usize) -> f64 {
    let (k, nf) = (k as f64, n as f64);
    -(k - nf) * (k - 2.0 * params.n_lambda - nf) / (params.n * (k + 2.0) * (k + 1.0))
}

pub fn relhermite(params: &ModelParams, n: usize) -> RelHermite {
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = leading_coefficient(params, n);
    let mut k = n;
    while k >= 2 {
        k -= 2;
        coeffs[k] = coeffs[k + 2] / recurrence_ratio(params, n, k);
    }
    RelHermite {
        n,
        params: *params,
        poly: Poly::new(coeffs),
    }
}

/// Applies the defining differential operator and returns the residual polynomial.
pub fn ode_operator(params: &ModelParams, n: usize, h: &Poly) -> Poly {
    let nn = params.n;
    let d1 = h.derivative();
    let d2 = d1.derivative();
    let a = d2.mul_one_plus_sq(nn);
    let b = d1
        .mul_xi()
        .scale(2.0 / nn * (params.n_lambda + n as f64 - 0.5));
    let c = h.scale(n as f64 / nn * (2.0 * params.n_lambda + n as f64));
    &(&a - &b) + &c
}

/// Max |residual coefficient| over max |input coefficient|.
pub fn relhermite_ode_residual(params: &ModelParams, n: usize) -> f64 {
    let h = relhermite(params, n);
    let res = ode_operator(params, n, &h.poly);
    let scale = h.poly.max_abs_coeff();
    if scale == 0.0 {
        return res.max_abs_coeff();
    }
    res.max_abs_coeff() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn low_degrees() {
        let p = ModelParams::from_lambda(10.0, 0.0).unwrap();
        assert_eq!(relhermite(&p, 0).poly.coeffs(), &[1.0]);
        let h1 = relhermite(&p, 1);
        assert_eq!(h1.poly.degree(), Some(1));
        assert_relative_eq!(h1.poly.coeff(1), (2.0 * p.n_lambda + 1.0) / 10.0);
        assert_eq!(h1.poly.coeff(0), 0.0);
    }

    #[test]
    fn two_term_ratio_tends_to_standard() {
        let p = ModelParams::from_lambda(1e6, 0.0).unwrap();
        let h2 = relhermite(&p, 2);
        assert_relative_eq!(h2.poly.coeff(0) / h2.poly.coeff(2), -0.5, max_relative = 1e-5);
    }

    #[test]
    fn residual_certificates() {
        let p = ModelParams::from_lambda(5.0, 0.0).unwrap();
        assert!(relhermite_ode_residual(&p, 7) <= 1e-10);
        let p = ModelParams::from_lambda(1.0, 0.0).unwrap();
        assert_eq!(relhermite_ode_residual(&p, 0), 0.0);
        let p = ModelParams::from_lambda(10.0, 1.0).unwrap();
        assert!(relhermite_ode_residual(&p, 4) <= 1e-10);
    }

    #[test]
    fn termination_and_parity() {
        let p = ModelParams::from_lambda(3.0, 0.5).unwrap();
        for n in 0..14 {
            // factor (k - n) kills the term past the leading one
            assert_eq!(recurrence_ratio(&p, n, n), 0.0);
            let h = relhermite(&p, n);
            assert_eq!(h.poly.degree(), Some(n));
            assert!(h.poly.has_parity(n));
        }
    }

    #[test]
    fn wrong_polynomial_fails_certificate() {
        let p = ModelParams::from_lambda(5.0, 0.0).unwrap();
        let mut h = relhermite(&p, 4).poly;
        h = &h + &Poly::constant(1e-3 * h.max_abs_coeff());
        let r = ode_operator(&p, 4, &h).max_abs_coeff() / h.max_abs_coeff();
        assert!(r > 1e-6);
    }

    #[test]
    fn converges_to_standard_hermite_like_one_over_n() {
        let grid: Vec<f64> = (0..=400).map(|i| -4.0 + 0.02 * i as f64).collect();
        let sup = |n: usize, nn: f64| {
            let p = ModelParams::from_sigma(nn, 0.0).unwrap();
            let h = relhermite(&p, n).poly;
            let hs = hermite_std(n);
            grid.iter()
                .map(|&x| (h.eval(x) - hs.eval(x)).abs())
                .fold(0.0, f64::max)
        };
        for n in 1..=6 {
            let ratio = sup(n, 40.0) / sup(n, 80.0);
            assert!((ratio - 2.0).abs() <= 0.3, "n={n} ratio={ratio}");
        }
    }
}
