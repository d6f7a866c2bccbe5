//! Closed-form moment integration for every weight that appears in the
//! theory, plus an adaptive Gauss-Kronrod oracle that shares none of the
//! moment machinery.
//!
//! Power-law moments are Beta functions:
//! `int xi^(2k) (1 + xi^2/N)^(-s/2) dxi = N^(k+1/2) B(k + 1/2, s/2 - k - 1/2)`.
//! The `k = 0` moment is built from a log-Gamma ratio and higher moments by
//! the exact ratio `M_{k+1} / M_k = N (k + 1/2) / (s/2 - k - 3/2)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::polyalg::{GaussPoly, Poly, WeightedPoly};

/// Integration weight on the `xi` line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum MeasureSpec {
    /// `dxi`
    Flat,
    /// `alpha^(-s) dxi`
    PowerWeight(f64),
    /// `(1 + a xi^2 / N) dxi`, meaningful to first order in `1/N`
    Perturbed(f64),
    /// `dxi` for integrands that already carry `exp(-xi^2)`
    GaussianNative,
}

impl MeasureSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Flat => "flat",
            Self::PowerWeight(_) => "power-weight",
            Self::Perturbed(_) => "perturbed",
            Self::GaussianNative => "gaussian-native",
        }
    }

    /// The deformed product `dxi alpha^-2` that makes exact states orthonormal.
    pub const ALPHA2: Self = Self::PowerWeight(2.0);
}

/// A product of two family members, ready for integration.
#[derive(Debug, Clone, PartialEq)]
pub enum Integrand {
    /// `alpha^(-s) P(xi)` at scale `N`.
    Alpha(WeightedPoly),
    /// `exp(-xi^2) P(xi)`.
    Gaussian(Poly),
}

impl Integrand {
    pub fn product_wp(f: &WeightedPoly, g: &WeightedPoly) -> Self {
        Self::Alpha(f.multiply(g))
    }

    pub fn product_gp(f: &GaussPoly, g: &GaussPoly) -> Self {
        Self::Gaussian(&f.poly * &g.poly)
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Alpha(_) => "power-law",
            Self::Gaussian(_) => "gaussian",
        }
    }

    /// Degree of the polynomial part.
    pub fn degree(&self) -> usize {
        match self {
            Self::Alpha(w) => w.poly.degree().unwrap_or(0),
            Self::Gaussian(p) => p.degree().unwrap_or(0),
        }
    }
}

/// `ln Gamma(z + 1/2) - ln Gamma(z)` for `z > 0`.
///
/// Evaluated as a Stirling-series difference after shifting the argument
/// above 30, so the result keeps full relative accuracy both for small `z`
/// and when `ln Gamma` itself is in the thousands.
pub fn ln_gamma_half_step(z: f64) -> f64 {
    if z < 30.0 {
        // Gamma(z + m) = Gamma(z) prod_{j<m} (z + j)
        let m = (30.0 - z).ceil() as usize;
        let shift: f64 = (0..m).map(|j| (0.5 / (z + j as f64)).ln_1p()).sum();
        return ln_gamma_half_step(z + m as f64) - shift;
    }
    fn tail(z: f64) -> f64 {
        let r = 1.0 / z;
        let r2 = r * r;
        r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 / 1680.0)))
    }
    0.5 * z.ln() + z * (0.5 / z).ln_1p() - 0.5 + tail(z + 0.5) - tail(z)
}

/// `int xi^(2k) (1 + xi^2/N)^(-s/2) dxi`.
pub fn alpha_moment(n_scale: f64, s: f64, k: usize) -> Result<f64> {
    let b = 0.5 * s - 0.5;
    if !(b - k as f64 > 0.0) {
        return Err(LabError::DivergentIntegral { s, power: 2 * k });
    }
    let mut m = (n_scale * PI).sqrt() * (-ln_gamma_half_step(b)).exp();
    for j in 0..k {
        let j = j as f64;
        m *= n_scale * (j + 0.5) / (b - j - 1.0);
    }
    Ok(m)
}

/// All even moments `k = 0..=kmax` at once (ascending).
pub fn alpha_moments(n_scale: f64, s: f64, kmax: usize) -> Result<Vec<f64>> {
    let b = 0.5 * s - 0.5;
    if !(b - kmax as f64 > 0.0) {
        return Err(LabError::DivergentIntegral { s, power: 2 * kmax });
    }
    let mut out = Vec::with_capacity(kmax + 1);
    let mut m = (n_scale * PI).sqrt() * (-ln_gamma_half_step(b)).exp();
    out.push(m);
    for j in 0..kmax {
        let j = j as f64;
        m *= n_scale * (j + 0.5) / (b - j - 1.0);
        out.push(m);
    }
    Ok(out)
}

/// `int xi^(2k) exp(-xi^2) dxi = Gamma(k + 1/2)`.
pub fn gaussian_moment(k: usize) -> f64 {
    (0..k).fold(PI.sqrt(), |m, j| m * (j as f64 + 0.5))
}

/// Integrates an integrand against a measure through the moment engine.
///
/// `n_scale` is the `N` entering `alpha` and the perturbed measure.
pub fn integrate(integrand: &Integrand, measure: &MeasureSpec, n_scale: f64) -> Result<f64> {
    match integrand {
        Integrand::Alpha(w) => {
            let (s, poly) = match *measure {
                MeasureSpec::Flat => (w.s, w.poly.clone()),
                MeasureSpec::PowerWeight(t) => (w.s + t, w.poly.clone()),
                MeasureSpec::Perturbed(a) => (w.s, perturb_poly(&w.poly, a, n_scale)),
                MeasureSpec::GaussianNative => {
                    return Err(LabError::IncompatibleMeasure {
                        measure: measure.name(),
                        integrand: integrand.kind(),
                    })
                }
            };
            power_law_sum(&poly, s, n_scale)
        }
        Integrand::Gaussian(p) => {
            let poly = match *measure {
                MeasureSpec::Flat | MeasureSpec::GaussianNative => p.clone(),
                MeasureSpec::Perturbed(a) => perturb_poly(p, a, n_scale),
                MeasureSpec::PowerWeight(_) => {
                    return Err(LabError::IncompatibleMeasure {
                        measure: measure.name(),
                        integrand: integrand.kind(),
                    })
                }
            };
            Ok(poly
                .coeffs()
                .iter()
                .step_by(2)
                .enumerate()
                .map(|(k, &c)| c * gaussian_moment(k))
                .sum())
        }
    }
}

fn perturb_poly(p: &Poly, a: f64, n_scale: f64) -> Poly {
    p + &p.shift(2).scale(a / n_scale)
}

fn power_law_sum(poly: &Poly, s: f64, n_scale: f64) -> Result<f64> {
    let Some(deg) = poly.degree() else {
        return Ok(0.0);
    };
    for (j, &c) in poly.coeffs().iter().enumerate() {
        if c != 0.0 && !(s - j as f64 - 1.0 > 0.0) {
            return Err(LabError::DivergentIntegral { s, power: j });
        }
    }
    let kmax = deg / 2;
    let moments = alpha_moments(n_scale, s, kmax)?;
    Ok(poly
        .coeffs()
        .iter()
        .step_by(2)
        .zip(&moments)
        .map(|(c, m)| c * m)
        .sum())
}

const REL_TOL: f64 = 1e-10;
const MAX_INTERVALS: usize = 20_000;

/// Independent oracle: adaptive Gauss-Kronrod quadrature.
///
/// Power-law integrands are mapped to `(-pi/2, pi/2)` by `xi = sqrt(N) tan(theta)`;
/// Gaussian integrands are integrated on `[-L, L]` with `L = max(10, 8 sqrt(deg))`.
pub fn integrate_numeric(
    integrand: &Integrand,
    measure: &MeasureSpec,
    n_scale: f64,
) -> Result<f64> {
    match integrand {
        Integrand::Alpha(w) => {
            let (s, poly) = match *measure {
                MeasureSpec::Flat => (w.s, w.poly.clone()),
                MeasureSpec::PowerWeight(t) => (w.s + t, w.poly.clone()),
                MeasureSpec::Perturbed(a) => (w.s, perturb_poly(&w.poly, a, n_scale)),
                MeasureSpec::GaussianNative => {
                    return Err(LabError::IncompatibleMeasure {
                        measure: measure.name(),
                        integrand: integrand.kind(),
                    })
                }
            };
            for (j, &c) in poly.coeffs().iter().enumerate() {
                if c != 0.0 && !(s - j as f64 - 1.0 > 0.0) {
                    return Err(LabError::DivergentIntegral { s, power: j });
                }
            }
            let root = n_scale.sqrt();
            // xi^j alpha^-s dxi = sqrt(N)^(j+1) sin^j cos^(s-j-2) dtheta
            let f = |theta: f64| {
                let (sn, cs) = theta.sin_cos();
                poly.coeffs()
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(j, &c)| {
                        c * root.powi(j as i32 + 1) * sn.powi(j as i32) * cs.powf(s - j as f64 - 2.0)
                    })
                    .sum::<f64>()
            };
            adaptive_gk(f, -0.5 * PI, 0.5 * PI)
        }
        Integrand::Gaussian(p) => {
            let poly = match *measure {
                MeasureSpec::Flat | MeasureSpec::GaussianNative => p.clone(),
                MeasureSpec::Perturbed(a) => perturb_poly(p, a, n_scale),
                MeasureSpec::PowerWeight(_) => {
                    return Err(LabError::IncompatibleMeasure {
                        measure: measure.name(),
                        integrand: integrand.kind(),
                    })
                }
            };
            let deg = poly.degree().unwrap_or(0) as f64;
            let l = (8.0 * deg.sqrt()).max(10.0);
            adaptive_gk(|x| (-x * x).exp() * poly.eval(x), -l, l)
        }
    }
}

// Kronrod 15-point nodes/weights with the embedded 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (f1, f2) = (f(center - dx), f(center + dx));
        kronrod += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
        abs: abs * half.abs(),
    }
}

fn adaptive_gk(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    // seed with a uniform partition so narrow peaks are not missed
    let seeds = 32;
    let h = (b - a) / seeds as f64;
    let mut panels: Vec<Panel> = (0..seeds)
        .map(|i| gk15(&f, a + i as f64 * h, a + (i + 1) as f64 * h))
        .collect();
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let abs: f64 = panels.iter().map(|p| p.abs).sum();
        let target = (REL_TOL * value.abs()).max(1e-15 * abs);
        if error <= target || abs == 0.0 {
            return Ok(value);
        }
        if panels.len() >= MAX_INTERVALS {
            return Err(LabError::NonConvergence {
                estimate: value,
                error,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            return Err(LabError::NonConvergence {
                estimate: value,
                error,
            });
        }
        panels.push(gk15(&f, p.a, mid));
        panels.push(gk15(&f, mid, p.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::function::beta::ln_beta;
    use statrs::function::gamma::ln_gamma;

    #[test]
    fn beta_identity_values() {
        assert_relative_eq!(alpha_moment(1.0, 3.0, 0).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(alpha_moment(1.0, 2.0, 0).unwrap(), PI, max_relative = 1e-14);
    }

    #[test]
    fn moments_match_direct_beta() {
        for &(n, s) in &[(1.0, 9.0), (10.0, 21.02), (100.0, 201.5), (7.3, 40.0)] {
            for k in 0..4 {
                let direct =
                    (n as f64).powf(k as f64 + 0.5) * ln_beta(k as f64 + 0.5, s / 2.0 - k as f64 - 0.5).exp();
                assert_relative_eq!(alpha_moment(n, s, k).unwrap(), direct, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn half_step_asymptotics_join_smoothly() {
        // 30-digit reference values
        let table = [
            (29.0, 1.679_337_783_642_099_2),
            (30.0, 1.696_432_217_001_399_3),
            (31.5, 1.721_025_685_532_536_4),
            (55.0, 2.001_393_896_645_187_7),
            (200.0, 2.648_533_683_925_055_1),
        ];
        for (z, expect) in table {
            assert!((ln_gamma_half_step(z) - expect).abs() < 1e-14, "z={z}");
        }
        // small arguments: Gamma(1)/Gamma(1/2) and Gamma(3/2)/Gamma(1)
        assert!((ln_gamma_half_step(0.5) + 0.5 * PI.ln()).abs() < 1e-14);
        assert!((ln_gamma_half_step(1.0) - (0.5 * PI.sqrt()).ln()).abs() < 1e-14);
        assert!((ln_gamma_half_step(3.3) - (ln_gamma(3.8) - ln_gamma(3.3))).abs() < 1e-12);
    }

    #[test]
    fn divergence_is_detected() {
        assert!(matches!(
            alpha_moment(1.0, 1.0, 0),
            Err(LabError::DivergentIntegral { .. })
        ));
        let w = WeightedPoly::new(3.0, Poly::monomial(2, 1.0), 2.0);
        assert!(integrate(&Integrand::Alpha(w), &MeasureSpec::Flat, 2.0).is_err());
    }

    #[test]
    fn odd_moments_vanish() {
        let w = WeightedPoly::new(8.0, Poly::new(vec![0.0, 1.0, 0.0, 3.0]), 4.0);
        assert_eq!(integrate(&Integrand::Alpha(w), &MeasureSpec::Flat, 4.0).unwrap(), 0.0);
        let g = Integrand::Gaussian(Poly::monomial(1, 1.0));
        assert_eq!(integrate(&g, &MeasureSpec::GaussianNative, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn reference_integrals() {
        let n = 10.0;
        let nl = 0.5 * (1.0f64 + 4.0 * n * n).sqrt();
        let w = WeightedPoly::new(2.0 * nl + 3.0, Poly::one(), n);
        let f = Integrand::Alpha(w);
        let expect = n.sqrt() * ln_beta(0.5, nl + 1.0).exp();
        assert_relative_eq!(integrate(&f, &MeasureSpec::Flat, n).unwrap(), expect, max_relative = 1e-13);
        assert_relative_eq!(integrate_numeric(&f, &MeasureSpec::Flat, n).unwrap(), expect, max_relative = 1e-10);

        let g = Integrand::Gaussian(Poly::one());
        assert_relative_eq!(integrate(&g, &MeasureSpec::GaussianNative, n).unwrap(), PI.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(integrate_numeric(&g, &MeasureSpec::GaussianNative, n).unwrap(), PI.sqrt(), max_relative = 1e-10);
        let odd = Integrand::Gaussian(Poly::monomial(1, 1.0));
        assert!(integrate_numeric(&odd, &MeasureSpec::Flat, n).unwrap().abs() < 1e-14);
    }

    #[test]
    fn perturbed_measure_on_gaussians() {
        // int (1 + a xi^2 / N) e^{-xi^2} = sqrt(pi)(1 + a / (2N))
        let g = Integrand::Gaussian(Poly::one());
        let v = integrate(&g, &MeasureSpec::Perturbed(-1.0), 4.0).unwrap();
        assert_relative_eq!(v, PI.sqrt() * (1.0 - 0.125), max_relative = 1e-15);
    }

    #[test]
    fn incompatible_measures() {
        let g = Integrand::Gaussian(Poly::one());
        assert!(matches!(
            integrate(&g, &MeasureSpec::ALPHA2, 1.0),
            Err(LabError::IncompatibleMeasure { .. })
        ));
        let w = Integrand::Alpha(WeightedPoly::new(4.0, Poly::one(), 1.0));
        assert!(integrate(&w, &MeasureSpec::GaussianNative, 1.0).is_err());
    }

    #[test]
    fn exact_state_gram_exponents_are_integrable() {
        for nn in [1.0, 2.0, 10.0, 100.0] {
            let nl = 0.5 * (1.0f64 + 4.0 * nn * nn).sqrt();
            for n in 0..=20usize {
                for m in 0..=20usize {
                    let cn = 0.5 + nl + n as f64;
                    let cm = 0.5 + nl + m as f64;
                    let margin = (cn + cm) / 2.0 + 1.0 - (n + m) as f64 / 2.0 - 0.5;
                    assert!(margin > 0.0);
                }
            }
        }
    }
}
