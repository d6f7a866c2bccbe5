//! The `O(1/N)` Schrodinger-like Hamiltonian, first-order perturbation
//! theory on it, the Hermiticity-driven measure solve and the
//! reconciliation with the exact states.
//!
//! In oscillator units (`xi`, `hbar omega`) the Hamiltonian with the rest
//! mass subtracted is
//!
//! ```text
//! H = -1/2 d^2 + 1/2 xi^2
//!   + (1/N) [ -1/8 d^4 - 3/4 xi^2 d^2 - 1/2 xi d - 1/8 xi^4 + 1/4 (1 - 2 sigma) ]
//! ```

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{Basis, OperatorMatrix};
use crate::error::{LabError, Result};
use crate::exact::exact_state;
use crate::measures::{integrate, Integrand, MeasureSpec};
use crate::model::{ModelParams, PhysicalParams};
use crate::polyalg::{
    hermite_expand, hermite_physicists, oscillator_function, oscillator_norm, GaussPoly, Poly,
};

/// `coeff(xi) * d^derivative / N^order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamTerm {
    pub derivative: usize,
    pub coeff: Poly,
    pub order: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedHamiltonian {
    pub params: ModelParams,
    pub terms: Vec<HamTerm>,
}

impl PerturbedHamiltonian {
    pub fn new(params: &ModelParams) -> Self {
        let t = |derivative, coeffs: Vec<f64>, order| HamTerm {
            derivative,
            coeff: Poly::new(coeffs),
            order,
        };
        let terms = vec![
            t(2, vec![-0.5], 0),
            t(0, vec![0.0, 0.0, 0.5], 0),
            t(4, vec![-0.125], 1),
            t(2, vec![0.0, 0.0, -0.75], 1),
            t(1, vec![0.0, -0.5], 1),
            t(
                0,
                vec![0.25 * (1.0 - 2.0 * params.sigma), 0.0, 0.0, 0.0, -0.125],
                1,
            ),
        ];
        Self {
            params: *params,
            terms,
        }
    }

    /// The `N -> infinity` truncation: the plain oscillator.
    pub fn oscillator_limit(params: &ModelParams) -> Self {
        let mut h = Self::new(params);
        h.terms.retain(|t| t.order == 0);
        h
    }

    /// Coefficient of `N^-order` applied to `f`.
    pub fn apply_order(&self, f: &GaussPoly, order: u32) -> GaussPoly {
        self.terms
            .iter()
            .filter(|t| t.order == order)
            .fold(GaussPoly::default(), |acc, t| {
                &acc + &f.nth_derivative(t.derivative).mul_poly(&t.coeff)
            })
    }

    pub fn max_order(&self) -> u32 {
        self.terms.iter().map(|t| t.order).max().unwrap_or(0)
    }

    /// Physical-unit coefficients `(derivative order, power of x, value)`:
    /// the operator is `sum value * x^power d^derivative/dx^derivative`, in energy units.
    pub fn physical_terms(&self, phys: &PhysicalParams) -> Vec<(usize, usize, f64)> {
        let energy = phys.hbar * phys.omega;
        // d/dxi = l d/dx and xi = x / l
        let len = phys.length_unit();
        let mut out = Vec::new();
        for t in &self.terms {
            for (k, &c) in t.coeff.coeffs().iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let value = energy * c / self.params.n.powi(t.order as i32)
                    * len.powi(t.derivative as i32 - k as i32);
                out.push((t.derivative, k, value));
            }
        }
        out
    }
}

/// `(H - m c^2) f`, exact within the Gaussian family.
pub fn apply_hamiltonian(h: &PerturbedHamiltonian, f: &GaussPoly) -> GaussPoly {
    (0..=h.max_order()).fold(GaussPoly::default(), |acc, order| {
        let part = h.apply_order(f, order);
        &acc + &part.scale_by(h.params.n.powi(-(order as i32)))
    })
}

fn measure_weight(measure: &MeasureSpec, n_scale: f64) -> Result<Poly> {
    match *measure {
        MeasureSpec::Flat | MeasureSpec::GaussianNative => Ok(Poly::one()),
        MeasureSpec::Perturbed(a) => Ok(Poly::new(vec![1.0, 0.0, a / n_scale])),
        MeasureSpec::PowerWeight(_) => Err(LabError::IncompatibleMeasure {
            measure: measure.name(),
            integrand: "gaussian",
        }),
    }
}

/// `<phi_m | w g>` for all `m <= nmax`, by projecting onto the oscillator basis.
fn project(g: &GaussPoly, weight: &Poly, nmax: usize) -> Vec<f64> {
    let c = hermite_expand(&g.mul_poly(weight));
    (0..=nmax).map(|m| c.get(m).copied().unwrap_or(0.0)).collect()
}

/// `M_mn = int phi_m (H phi_n) dmu` for `m, n <= nmax`.
pub fn hamiltonian_matrix(
    h: &PerturbedHamiltonian,
    nmax: usize,
    measure: &MeasureSpec,
) -> Result<OperatorMatrix> {
    let w = measure_weight(measure, h.params.n)?;
    let mut m = DMatrix::<f64>::zeros(nmax + 1, nmax + 1);
    for n in 0..=nmax {
        let col = project(&apply_hamiltonian(h, &GaussPoly::oscillator(n)), &w, nmax);
        for (i, v) in col.into_iter().enumerate() {
            m[(i, n)] = v;
        }
    }
    Ok(OperatorMatrix::from_real(m, Basis::Oscillator, *measure, Some(4)))
}

/// The matrix split by powers of `1/N`, with the measure's `1/N` factor kept
/// strictly to first order: returns `(M0, M1)` with `M = M0 + M1 / N + O(1/N^2)`.
pub fn hamiltonian_matrix_orders(
    h: &PerturbedHamiltonian,
    nmax: usize,
    measure: &MeasureSpec,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let a = match *measure {
        MeasureSpec::Flat | MeasureSpec::GaussianNative => 0.0,
        MeasureSpec::Perturbed(a) => a,
        MeasureSpec::PowerWeight(_) => {
            return Err(LabError::IncompatibleMeasure {
                measure: measure.name(),
                integrand: "gaussian",
            })
        }
    };
    let one = Poly::one();
    let xi2 = Poly::monomial(2, 1.0);
    let mut m0 = DMatrix::<f64>::zeros(nmax + 1, nmax + 1);
    let mut m1 = DMatrix::<f64>::zeros(nmax + 1, nmax + 1);
    for n in 0..=nmax {
        let phi = GaussPoly::oscillator(n);
        let h0 = h.apply_order(&phi, 0);
        let h1 = h.apply_order(&phi, 1);
        let c0 = project(&h0, &one, nmax);
        let c1 = project(&h1, &one, nmax);
        let cm = project(&h0, &xi2, nmax);
        for i in 0..=nmax {
            m0[(i, n)] = c0[i];
            m1[(i, n)] = c1[i] + a * cm[i];
        }
    }
    Ok((m0, m1))
}

/// Independent route for one entry: moments of the product `phi_m (H phi_n)`.
pub fn matrix_element_by_moments(
    h: &PerturbedHamiltonian,
    m: usize,
    n: usize,
    measure: &MeasureSpec,
) -> Result<f64> {
    let hphi = apply_hamiltonian(h, &GaussPoly::oscillator(n));
    integrate(
        &Integrand::product_gp(&GaussPoly::oscillator(m), &hphi),
        measure,
        h.params.n,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermiticityDefect {
    /// `M - M^T`.
    pub matrix: DMatrix<f64>,
    /// Max-abs entry.
    pub norm: f64,
}

pub fn hermiticity_defect(
    h: &PerturbedHamiltonian,
    nmax: usize,
    measure: &MeasureSpec,
) -> Result<HermiticityDefect> {
    let m = hamiltonian_matrix(h, nmax, measure)?.real_part();
    let matrix = &m - m.transpose();
    let norm = matrix.amax();
    Ok(HermiticityDefect { matrix, norm })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSolution {
    /// Coefficient in the measure `1 + a xi^2 / N`.
    pub a: f64,
    /// Max-abs residual of the order-`1/N` symmetry equations at the solution.
    pub residual: f64,
    pub equations: usize,
}

/// Least-squares residual above which the symmetry system is declared inconsistent.
pub const INCONSISTENCY_TOL: f64 = 1e-8;

/// Finds `a` such that `H` is symmetric at order `1/N` under `(1 + a xi^2/N) dxi`.
///
/// With `M1(a) = <H1> + a <xi^2 H0>` the conditions `M1 - M1^T = 0` for every
/// `m != n <= nmax` form an overdetermined linear system `u + a v = 0`.
pub fn solve_perturbed_measure(h: &PerturbedHamiltonian, nmax: usize) -> Result<MeasureSolution> {
    if nmax < 6 {
        return Err(LabError::InvalidParams(format!(
            "measure solve needs nmax >= 6, got {nmax}"
        )));
    }
    let (_, base) = hamiltonian_matrix_orders(h, nmax, &MeasureSpec::Flat)?;
    let (_, with_unit) = hamiltonian_matrix_orders(h, nmax, &MeasureSpec::Perturbed(1.0))?;
    let slope = &with_unit - &base;
    let mut u = Vec::new();
    let mut v = Vec::new();
    for i in 0..=nmax {
        for j in (i + 1)..=nmax {
            u.push(base[(i, j)] - base[(j, i)]);
            v.push(slope[(i, j)] - slope[(j, i)]);
        }
    }
    let system = DMatrix::from_column_slice(v.len(), 1, &v);
    let rhs = DMatrix::from_column_slice(u.len(), 1, &u.iter().map(|x| -x).collect::<Vec<_>>());
    let svd = system.clone().svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-14)
        .map_err(|_| LabError::InconsistentSystem { residual: f64::NAN })?;
    let a = sol[(0, 0)];
    let residual = (&system * &sol - &rhs).amax();
    if !(residual <= INCONSISTENCY_TOL) || !a.is_finite() {
        return Err(LabError::InconsistentSystem { residual });
    }
    Ok(MeasureSolution {
        a,
        residual,
        equations: u.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbativeState {
    pub n: usize,
    pub normalized: bool,
    pub gp: GaussPoly,
    /// Level -> coefficient over the normalized oscillator functions.
    pub basis_coeffs: BTreeMap<usize, f64>,
}

impl PerturbativeState {
    pub fn eval(&self, xi: f64) -> f64 {
        self.basis_coeffs
            .iter()
            .map(|(&k, &c)| c * oscillator_function(k, xi))
            .sum()
    }
}

/// Relative `H_k` weights of the first-order state, keyed by offset from `n`.
fn tilde_hermite_weights(n: usize) -> Vec<(isize, f64)> {
    let nf = n as f64;
    let lower2 = 4.0 * nf * (nf - 1.0);
    let lower4 = -2.0 * nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0);
    if n < 2 {
        assert_eq!(lower2, 0.0);
    }
    if n < 4 {
        assert_eq!(lower4, 0.0);
    }
    let mut w = vec![(4, 0.125), (2, 1.0)];
    if n >= 2 {
        w.push((-2, lower2));
    }
    if n >= 4 {
        w.push((-4, lower4));
    }
    w
}

/// First-order eigenfunction: the unnormalized `phi~_n` or the normalized `Phi_n`.
pub fn perturbative_state(params: &ModelParams, n: usize, normalized: bool) -> PerturbativeState {
    let nn = params.n;
    let mut coeffs = BTreeMap::new();
    if normalized {
        let nf = n as f64;
        let k = 1.0 / (16.0 * nn);
        coeffs.insert(n, 1.0 + k * 8.0 * (nf + 0.5));
        coeffs.insert(n + 4, k * ((nf + 1.0) * (nf + 2.0) * (nf + 3.0) * (nf + 4.0)).sqrt());
        coeffs.insert(n + 2, k * 4.0 * ((nf + 1.0) * (nf + 2.0)).sqrt());
        if n >= 2 {
            coeffs.insert(n - 2, k * 4.0 * (nf * (nf - 1.0)).sqrt());
        }
        if n >= 4 {
            coeffs.insert(n - 4, -k * (nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0)).sqrt());
        }
        let dense = dense_coeffs(&coeffs);
        return PerturbativeState {
            n,
            normalized,
            gp: GaussPoly::from_oscillator_coeffs(&dense),
            basis_coeffs: coeffs,
        };
    }
    // pi^{-1/4}/sqrt(2^n n!) [H_n + (1/8N) sum w_j H_{n+j}]
    let pre = oscillator_norm(n);
    let mut poly = hermite_physicists(n);
    coeffs.insert(n, 1.0);
    for (offset, w) in tilde_hermite_weights(n) {
        let k = (n as isize + offset) as usize;
        let weight = w / (8.0 * nn);
        poly = &poly + &hermite_physicists(k).scale(weight);
        coeffs.insert(k, pre * weight / oscillator_norm(k));
    }
    PerturbativeState {
        n,
        normalized,
        gp: GaussPoly::new(poly.scale(pre)),
        basis_coeffs: coeffs,
    }
}

/// `(1 + (2n + 1)/(4N)) phi~_n`, the normalized state before truncation to first order.
pub fn perturbative_state_product_form(params: &ModelParams, n: usize) -> PerturbativeState {
    let mut s = perturbative_state(params, n, false);
    let f = 1.0 + (2.0 * n as f64 + 1.0) / (4.0 * params.n);
    s.gp = s.gp.scale_by(f);
    for v in s.basis_coeffs.values_mut() {
        *v *= f;
    }
    s.normalized = true;
    s
}

fn dense_coeffs(map: &BTreeMap<usize, f64>) -> Vec<f64> {
    let len = map.keys().next_back().map_or(0, |k| k + 1);
    let mut v = vec![0.0; len];
    for (&k, &c) in map {
        v[k] = c;
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsFirstOrder {
    pub n: usize,
    /// `E_n - E_n^(0)` in units of `hbar omega`.
    pub shift: f64,
    /// `c_m = M_mn / (E_n^(0) - E_m^(0))` for `m != n`; `mixing[n] = 0`.
    pub mixing: Vec<f64>,
}

/// Rayleigh-Schrodinger first order on the flat-measure matrix.
pub fn rs_first_order(h: &PerturbedHamiltonian, nmax: usize, n: usize) -> Result<RsFirstOrder> {
    if n + 4 > nmax {
        return Err(LabError::InvalidParams(format!(
            "first-order mixing of level {n} needs nmax >= {}",
            n + 4
        )));
    }
    let m = hamiltonian_matrix(h, nmax, &MeasureSpec::Flat)?.real_part();
    let m0 = hamiltonian_matrix(&PerturbedHamiltonian::oscillator_limit(&h.params), nmax, &MeasureSpec::Flat)?
        .real_part();
    let e0 = |k: usize| m0[(k, k)];
    let mut mixing = vec![0.0; nmax + 1];
    for k in 0..=nmax {
        if k == n {
            continue;
        }
        let gap = e0(n) - e0(k);
        if gap.abs() < 1e-12 {
            return Err(LabError::DegenerateLevels(n, k));
        }
        mixing[k] = m[(k, n)] / gap;
    }
    Ok(RsFirstOrder {
        n,
        shift: m[(n, n)] - e0(n),
        mixing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactVsPerturbative {
    pub sup_diff: f64,
    /// `sup_diff * N^2`.
    pub scaled: f64,
}

/// Grid used for sup-norm comparisons: 801 points on `[-4, 4]`.
pub fn comparison_grid() -> Vec<f64> {
    (0..=800).map(|i| -4.0 + 0.01 * i as f64).collect()
}

/// Sup-norm distance between the exact minimal state and `Phi_n`.
pub fn compare_exact_vs_perturbative(params: &ModelParams, n: usize) -> Result<ExactVsPerturbative> {
    let exact = exact_state(params, n)?;
    let pert = perturbative_state(params, n, true);
    let sup_diff = comparison_grid()
        .into_iter()
        .map(|x| (exact.eval_minimal(x) - pert.eval(x)).abs())
        .fold(0.0, f64::max);
    Ok(ExactVsPerturbative {
        sup_diff,
        scaled: sup_diff * params.n * params.n,
    })
}

/// Low-order amplitude `1 + (n + 1/2)/(2N)` of the map between `Phi_n` and `phi_n`.
pub fn u_map_loworder(params: &ModelParams, n: usize) -> f64 {
    1.0 + (n as f64 + 0.5) / (2.0 * params.n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::u_map_factor;
    use crate::model::{energy_exact, energy_perturbative};
    use approx::assert_relative_eq;

    fn sig(n: f64, s: f64) -> ModelParams {
        ModelParams::from_sigma(n, s).unwrap()
    }

    #[test]
    fn ground_state_energy() {
        let p = sig(10.0, 0.0);
        let h0 = PerturbedHamiltonian::oscillator_limit(&p);
        let phi0 = GaussPoly::oscillator(0);
        let r = apply_hamiltonian(&h0, &phi0);
        assert!((&r - &phi0.scale_by(0.5)).poly.max_abs_coeff() < 1e-15);

        let h = PerturbedHamiltonian::new(&p);
        let c = hermite_expand(&apply_hamiltonian(&h, &phi0));
        assert_relative_eq!(c[0], 0.5 + 1.0 / 80.0, max_relative = 1e-14);
        assert!(c.len() <= 5);
        assert!(c[1].abs() < 1e-15 && c[3].abs() < 1e-15);
    }

    #[test]
    fn linearity() {
        let p = sig(3.0, 0.4);
        let h = PerturbedHamiltonian::new(&p);
        let f = GaussPoly::new(Poly::new(vec![0.3, -1.0, 2.0]));
        let g = GaussPoly::new(Poly::new(vec![0.0, 0.5, 0.0, 1.5]));
        let lhs = apply_hamiltonian(&h, &(&f + &g));
        let rhs = &apply_hamiltonian(&h, &f) + &apply_hamiltonian(&h, &g);
        assert!((&lhs - &rhs).poly.max_abs_coeff() < 1e-14);
    }

    #[test]
    fn physical_units_reproduce_the_x_space_display() {
        let phys = PhysicalParams::new(1.3, 0.7, 0.9, 2.1).unwrap();
        let sigma = 0.3;
        let p = ModelParams::from_sigma(phys.rest_energy_ratio(), sigma).unwrap();
        let terms = PerturbedHamiltonian::new(&p).physical_terms(&phys);
        let (m, w, hb, c) = (phys.m, phys.omega, phys.hbar, phys.c);
        let expect = [
            (2, 0, -hb * hb / (2.0 * m)),
            (0, 2, 0.5 * m * w * w),
            (4, 0, -hb.powi(4) / (8.0 * m.powi(3) * c * c)),
            (2, 2, -hb * hb / (2.0 * m) * 1.5 * w * w / (c * c)),
            (1, 1, -hb * hb * w * w / (2.0 * m * c * c)),
            (0, 0, hb * hb * w * w / (4.0 * m * c * c) * (1.0 - 2.0 * sigma)),
            (0, 4, -0.5 * m * w * w * w * w / (4.0 * c * c)),
        ];
        for (d, k, v) in expect {
            let got = terms.iter().find(|t| t.0 == d && t.1 == k).expect("term present").2;
            assert_relative_eq!(got, v, max_relative = 1e-13);
        }
    }

    #[test]
    fn flat_defect_and_symmetric_quartic_channel() {
        let p = sig(10.0, 0.0);
        let h = PerturbedHamiltonian::new(&p);
        let d = hermiticity_defect(&h, 8, &MeasureSpec::Flat).unwrap();
        assert_relative_eq!(d.matrix[(2, 0)], -(2f64.sqrt()) / 10.0, max_relative = 1e-12);
        for i in 0..=4 {
            assert!(d.matrix[(i, i + 4)].abs() < 1e-12);
        }
        let limit = hamiltonian_matrix(&PerturbedHamiltonian::oscillator_limit(&p), 6, &MeasureSpec::Flat)
            .unwrap()
            .real_part();
        for n in 0..=6 {
            assert_relative_eq!(limit[(n, n)], n as f64 + 0.5, max_relative = 1e-13);
        }
    }

    #[test]
    fn projection_agrees_with_moment_route() {
        let p = sig(7.0, 0.5);
        let h = PerturbedHamiltonian::new(&p);
        for measure in [MeasureSpec::Flat, MeasureSpec::Perturbed(-1.0)] {
            let m = hamiltonian_matrix(&h, 8, &measure).unwrap().real_part();
            for i in 0..=8 {
                for j in 0..=8 {
                    let alt = matrix_element_by_moments(&h, i, j, &measure).unwrap();
                    assert!((m[(i, j)] - alt).abs() < 1e-11, "{i},{j}: {} vs {alt}", m[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn measure_solution() {
        for sigma in [0.0, 0.25, 1.0] {
            let h = PerturbedHamiltonian::new(&sig(10.0, sigma));
            let s = solve_perturbed_measure(&h, 8).unwrap();
            assert!((s.a + 1.0).abs() < 1e-8, "sigma={sigma} a={}", s.a);
            assert!(s.residual <= 1e-10);
        }
        assert!(solve_perturbed_measure(&PerturbedHamiltonian::new(&sig(10.0, 0.0)), 5).is_err());
    }

    #[test]
    fn first_order_defect_vanishes_with_solved_measure() {
        let h = PerturbedHamiltonian::new(&sig(10.0, 0.0));
        let (_, m1) = hamiltonian_matrix_orders(&h, 10, &MeasureSpec::Perturbed(-1.0)).unwrap();
        assert!((&m1 - m1.transpose()).amax() <= 1e-10);
    }

    #[test]
    fn perturbative_state_coefficients() {
        let p = sig(10.0, 0.0);
        let phi = perturbative_state(&p, 0, true);
        let k = 1.0 / 160.0;
        assert_relative_eq!(phi.basis_coeffs[&0], 1.0 + 4.0 * k);
        assert_relative_eq!(phi.basis_coeffs[&2], 4.0 * 2f64.sqrt() * k);
        assert_relative_eq!(phi.basis_coeffs[&4], 24f64.sqrt() * k);
        let one = perturbative_state(&p, 1, false);
        assert!(one.basis_coeffs.keys().all(|&j| j == 1 || j == 3 || j == 5));
        let big = perturbative_state(&sig(1e12, 0.0), 0, true);
        assert!((big.eval(0.3) - oscillator_function(0, 0.3)).abs() < 1e-11);
    }

    #[test]
    fn tilde_state_matches_its_polynomial() {
        let p = sig(6.0, 0.0);
        for n in 0..8 {
            let s = perturbative_state(&p, n, false);
            let c = hermite_expand(&s.gp);
            for (k, v) in c.iter().enumerate() {
                let expect = s.basis_coeffs.get(&k).copied().unwrap_or(0.0);
                assert!((v - expect).abs() < 1e-12, "n={n} k={k}");
            }
            let offsets: Vec<isize> = s.basis_coeffs.keys().map(|&k| k as isize - n as isize).collect();
            assert!(offsets.iter().all(|o| [-4, -2, 0, 2, 4].contains(o)));
        }
    }

    #[test]
    fn normalized_under_perturbed_measure_to_second_order() {
        let norm_defect = |nn: f64, n: usize| {
            let s = perturbative_state(&sig(nn, 0.0), n, true);
            let v = integrate(
                &Integrand::product_gp(&s.gp, &s.gp),
                &MeasureSpec::Perturbed(-1.0),
                nn,
            )
            .unwrap();
            (v - 1.0).abs()
        };
        for n in 0..5 {
            let r = norm_defect(20.0, n) / norm_defect(40.0, n);
            assert!((r - 4.0).abs() < 0.8, "n={n} ratio {r}");
        }
    }

    #[test]
    fn rs_reproduces_printed_coefficients() {
        let p = sig(10.0, 0.0);
        let h = PerturbedHamiltonian::new(&p);
        let rs = rs_first_order(&h, 12, 0).unwrap();
        assert_relative_eq!(rs.shift, 1.0 / 80.0, max_relative = 1e-12);
        assert_relative_eq!(rs.mixing[2], 2f64.sqrt() / 40.0, max_relative = 1e-10);
        for n in 0..=6 {
            let rs = rs_first_order(&h, n + 4, n).unwrap();
            let printed = perturbative_state(&p, n, true);
            for (k, &c) in rs.mixing.iter().enumerate() {
                if k == n {
                    continue;
                }
                let expect = printed.basis_coeffs.get(&k).copied().unwrap_or(0.0);
                assert!((c - expect).abs() < 1e-9, "n={n} k={k}: {c} vs {expect}");
            }
        }
        let quarter = PerturbedHamiltonian::new(&sig(10.0, 0.25));
        for n in 0..=4 {
            assert!(rs_first_order(&quarter, n + 4, n).unwrap().shift.abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_shift_is_level_independent() {
        let p = sig(10.0, 0.6);
        let h = PerturbedHamiltonian::new(&p);
        let m = hamiltonian_matrix(&h, 8, &MeasureSpec::Flat).unwrap().real_part();
        for n in 0..=8 {
            let shift = m[(n, n)] - (n as f64 + 0.5);
            assert!((shift - (1.0 - 4.0 * 0.6) / 80.0).abs() < 1e-10);
            assert_relative_eq!(m[(n, n)], energy_perturbative(&p, n), max_relative = 1e-12);
        }
    }

    #[test]
    fn exact_and_perturbative_states_agree_to_second_order() {
        for n in 0..=3 {
            let a = compare_exact_vs_perturbative(&sig(20.0, 0.0), n).unwrap();
            let b = compare_exact_vs_perturbative(&sig(40.0, 0.0), n).unwrap();
            let ratio = a.sup_diff / b.sup_diff;
            assert!((ratio - 4.0).abs() < 1.0, "n={n} ratio {ratio}");
        }
        let n5 = compare_exact_vs_perturbative(&sig(5.0, 0.0), 3).unwrap();
        let n10 = compare_exact_vs_perturbative(&sig(10.0, 0.0), 3).unwrap();
        assert!(n10.sup_diff < n5.sup_diff);
    }

    #[test]
    fn u_map_low_order() {
        let p = sig(10.0, 0.0);
        assert_relative_eq!(u_map_loworder(&p, 1), 1.075);
        let d10 = (u_map_factor(&p, 1).amplitude - u_map_loworder(&p, 1)).abs();
        let p20 = sig(20.0, 0.0);
        let d20 = (u_map_factor(&p20, 1).amplitude - u_map_loworder(&p20, 1)).abs();
        assert_relative_eq!(d10, 2.706_7e-3, max_relative = 1e-3);
        assert!((d10 / d20 - 4.0).abs() < 0.5);
    }

    #[test]
    fn energy_gap_to_exact_is_third_order() {
        let p = sig(10.0, 0.0);
        let gap = energy_exact(&p, 0).rest_subtracted - energy_perturbative(&p, 0);
        assert_relative_eq!(gap.abs(), 7.8125e-6, max_relative = 0.02);
    }
}
