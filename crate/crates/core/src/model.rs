//! Physical parameters, the dimensionless reduction and both energy formulas.
//!
//! Internally everything is dimensionless: lengths are measured in
//! `sqrt(hbar / m omega)`, energies in `hbar omega` and times in `1 / omega`.
//! In these units `c^2 = N`, so the single relativistic knob is
//! `N = m c^2 / (hbar omega)`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Mass, angular frequency, action quantum and speed of light.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub m: f64,
    pub omega: f64,
    pub hbar: f64,
    pub c: f64,
}

impl PhysicalParams {
    pub fn new(m: f64, omega: f64, hbar: f64, c: f64) -> Result<Self> {
        let p = Self { m, omega, hbar, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("m", self.m),
            ("omega", self.omega),
            ("hbar", self.hbar),
            ("c", self.c),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(LabError::InvalidParams(format!(
                    "{name} must be a positive finite number, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// `N = m c^2 / (hbar omega)`.
    pub fn rest_energy_ratio(&self) -> f64 {
        self.m * self.c * self.c / (self.hbar * self.omega)
    }

    /// Scalar curvature `R = -2 omega^2 / c^2` in physical units.
    pub fn curvature(&self) -> f64 {
        -2.0 * self.omega * self.omega / (self.c * self.c)
    }

    /// Oscillator length `sqrt(hbar / m omega)`; `xi = x / length_unit`.
    pub fn length_unit(&self) -> f64 {
        (self.hbar / (self.m * self.omega)).sqrt()
    }
}

/// The dimensionless model: `N`, the coupling in both its `lambda` and
/// `sigma = N lambda` forms, and the derived spectral constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `N = m c^2 / (hbar omega)`.
    #[serde(rename = "N")]
    pub n: f64,
    pub lambda: f64,
    pub sigma: f64,
    /// `N_lambda = sqrt(1 + 4 N (N - lambda)) / 2`.
    #[serde(rename = "N_lambda")]
    pub n_lambda: f64,
    /// Gravitational coupling `chi = N lambda / 2`.
    pub chi: f64,
    /// `R = -2 omega^2 / c^2`, which is `-2 / N` in oscillator units.
    pub curvature: f64,
}

impl ModelParams {
    pub fn from_lambda(n: f64, lambda: f64) -> Result<Self> {
        Self::build(n, lambda, n * lambda)
    }

    pub fn from_sigma(n: f64, sigma: f64) -> Result<Self> {
        if !(n.is_finite() && n > 0.0) {
            return Err(LabError::InvalidParams(format!(
                "N must be positive and finite, got {n}"
            )));
        }
        Self::build(n, sigma / n, sigma)
    }

    fn build(n: f64, lambda: f64, sigma: f64) -> Result<Self> {
        if !(n.is_finite() && n > 0.0) {
            return Err(LabError::InvalidParams(format!(
                "N must be positive and finite, got {n}"
            )));
        }
        if !lambda.is_finite() || !sigma.is_finite() {
            return Err(LabError::InvalidParams(
                "coupling must be finite".to_string(),
            ));
        }
        let discriminant = 1.0 + 4.0 * n * (n - lambda);
        if !(discriminant > 0.0) {
            return Err(LabError::ComplexSpectrum { discriminant });
        }
        Ok(Self {
            n,
            lambda,
            sigma,
            n_lambda: 0.5 * discriminant.sqrt(),
            chi: 0.5 * sigma,
            curvature: -2.0 / n,
        })
    }

    /// Checks the stored derived fields against a fresh evaluation.
    pub fn validate(&self) -> Result<()> {
        let fresh = Self::build(self.n, self.lambda, self.sigma)?;
        let tol = 1e-12 * fresh.n_lambda.max(1.0);
        if (fresh.n_lambda - self.n_lambda).abs() > tol {
            return Err(LabError::InvalidParams(format!(
                "stored N_lambda {} disagrees with recomputed {}",
                self.n_lambda, fresh.n_lambda
            )));
        }
        let sigma_tol = 1e-12 * self.sigma.abs().max(1.0);
        if (self.sigma - self.n * self.lambda).abs() > sigma_tol {
            return Err(LabError::InvalidParams(format!(
                "sigma {} is not N * lambda = {}",
                self.sigma,
                self.n * self.lambda
            )));
        }
        Ok(())
    }

    /// Weight exponent (and time frequency) of level `n`: `c_n = 1/2 + N_lambda + n`.
    pub fn level_exponent(&self, level: usize) -> f64 {
        0.5 + self.n_lambda + level as f64
    }
}

/// Reduces physical parameters to the dimensionless model at coupling `lambda`.
pub fn derive_dimensionless(phys: &PhysicalParams, lambda: f64) -> Result<ModelParams> {
    phys.validate()?;
    ModelParams::from_lambda(phys.rest_energy_ratio(), lambda)
}

/// An energy with and without the rest mass, both in units of `hbar omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyPair {
    pub total: f64,
    pub rest_subtracted: f64,
}

/// Exact level `n`: `E_n / hbar omega = 1/2 + N_lambda + n`.
pub fn energy_exact(params: &ModelParams, level: usize) -> EnergyPair {
    let total = params.level_exponent(level);
    // 1/2 + (N_lambda - N) + n, with N_lambda - N evaluated without cancellation.
    let shift = (1.0 - 4.0 * params.n * params.lambda)
        / (2.0 * (2.0 * params.n_lambda + 2.0 * params.n));
    let rest_subtracted = 0.5 + shift + level as f64;
    EnergyPair {
        total,
        rest_subtracted,
    }
}

/// First-order perturbative level, rest mass subtracted: `(1/2 + n) + (1 - 4 sigma) / (8 N)`.
pub fn energy_perturbative(params: &ModelParams, level: usize) -> f64 {
    0.5 + level as f64 + (1.0 - 4.0 * params.sigma) / (8.0 * params.n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn n_lambda_closed_form_values() {
        let p = ModelParams::from_lambda(1.0, 0.0).unwrap();
        assert_relative_eq!(p.n_lambda, 1.118_033_988_749_895, max_relative = 1e-15);
        let p = ModelParams::from_lambda(10.0, 0.0).unwrap();
        assert_relative_eq!(p.n_lambda, 10.012_492_197_250_394, max_relative = 1e-15);
        for n in [0.3, 2.0, 17.5] {
            let p = ModelParams::from_lambda(n, n).unwrap();
            assert_eq!(p.n_lambda, 0.5);
        }
    }

    #[test]
    fn complex_spectrum_is_rejected() {
        let err = ModelParams::from_lambda(1.0, 2.0).unwrap_err();
        assert!(matches!(err, LabError::ComplexSpectrum { .. }));
        assert!(ModelParams::from_lambda(-1.0, 0.0).is_err());
        assert!(ModelParams::from_sigma(0.0, 0.0).is_err());
    }

    #[test]
    fn sigma_and_lambda_constructors_agree() {
        let a = ModelParams::from_sigma(8.0, 2.0).unwrap();
        let b = ModelParams::from_lambda(8.0, 0.25).unwrap();
        assert_eq!(a.n_lambda, b.n_lambda);
        assert_eq!(a.sigma, 8.0 * a.lambda);
        assert_eq!(a.chi, 1.0);
        a.validate().unwrap();
        let mut bad = a;
        bad.n_lambda += 1e-6;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn physical_reduction() {
        let phys = PhysicalParams::new(2.0, 0.5, 1.0, 3.0).unwrap();
        let p = derive_dimensionless(&phys, 0.0).unwrap();
        assert_relative_eq!(p.n, 36.0, max_relative = 1e-15);
        assert_relative_eq!(phys.curvature(), -2.0 * 0.25 / 9.0);
        assert!(PhysicalParams::new(1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn exact_energies() {
        let p = ModelParams::from_lambda(10.0, 0.0).unwrap();
        let e0 = energy_exact(&p, 0);
        assert_relative_eq!(e0.total, 10.512_492_197_250_394, max_relative = 1e-15);
        assert_relative_eq!(e0.rest_subtracted, 0.512_492_197_250_393_5, max_relative = 1e-14);
        assert!((e0.total - e0.rest_subtracted - p.n).abs() < 1e-14);
        let e1 = energy_exact(&p, 1);
        assert!((e1.total - e0.total - 1.0).abs() < 1e-14);
        let p = ModelParams::from_lambda(3.0, 3.0).unwrap();
        assert_eq!(energy_exact(&p, 0).total, 1.0);
    }

    #[test]
    fn perturbative_energies() {
        let p = ModelParams::from_sigma(10.0, 0.0).unwrap();
        assert_relative_eq!(energy_perturbative(&p, 0), 0.5125, max_relative = 1e-15);
        let p = ModelParams::from_sigma(7.0, 0.25).unwrap();
        for n in 0..5 {
            assert_eq!(energy_perturbative(&p, n), 0.5 + n as f64);
        }
    }

    #[test]
    fn third_order_gap() {
        let p = ModelParams::from_sigma(10.0, 0.0).unwrap();
        let gap = energy_perturbative(&p, 0) - energy_exact(&p, 0).rest_subtracted;
        assert_relative_eq!(gap, 1.0 / 128_000.0, max_relative = 2e-3);
    }

    #[test]
    fn n_lambda_series_by_richardson() {
        // N_lambda - N - (1-4s)/(8N) = -(1-4s)^2 / (128 N^3) + O(N^-5)
        let sigma = 0.7;
        let coeff = |n: f64| {
            let p = ModelParams::from_sigma(n, sigma).unwrap();
            let shift = energy_exact(&p, 0).rest_subtracted - 0.5;
            (shift - (1.0 - 4.0 * sigma) / (8.0 * n)) * n.powi(3)
        };
        let ns = [10.0, 20.0, 40.0, 80.0];
        let c: Vec<f64> = ns.iter().map(|&n| coeff(n)).collect();
        // leading error is O(N^-2): one Richardson step with factor 4
        let r1: Vec<f64> = c.windows(2).map(|w| (4.0 * w[1] - w[0]) / 3.0).collect();
        let expect = -(1.0 - 4.0 * sigma).powi(2) / 128.0;
        assert_relative_eq!(r1[2], expect, max_relative = 1e-6);
    }

    #[test]
    fn lambda_one_loses_vacuum_energy() {
        for n in [10.0, 100.0, 1000.0] {
            let p = ModelParams::from_lambda(n, 1.0).unwrap();
            assert!(energy_exact(&p, 0).rest_subtracted.abs() < 1e-12);
        }
    }
}
