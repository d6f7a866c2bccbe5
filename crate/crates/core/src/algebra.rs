//! Truncated operator matrices, adjointness defects and the commutator
//! diagnostic for `[E, x] = -i p`, `[E, p] = i x`, `[x, p] = i (1 + E/N)`
//! (oscillator units).
//!
//! Matrix entries are exact matrix elements; truncation only bites in
//! products, so every product records the interior block whose entries
//! received no contribution from indices past `nmax`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exact::{
    apply_ladder_differential, closed_form_norm_tx, closed_form_norm_x, exact_state,
    exact_state_unchecked, gram_matrix, ladder_coeff, ExactState, LadderKind,
};
use crate::measures::{integrate, Integrand, MeasureSpec};
use crate::model::{energy_exact, energy_perturbative, ModelParams};
use crate::perturb::{hamiltonian_matrix, PerturbedHamiltonian};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// Covariant `Psi_n` under the t-x product (time average of the spatial integral).
    ExactCovariant,
    /// Minimal `Psi'_n`.
    ExactMinimal,
    /// Oscillator functions `phi_n`.
    Oscillator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    ERestSubtracted,
    Position,
    Ladder(LadderKind),
    HamiltonianPerturbed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub entries: DMatrix<Complex64>,
    pub basis: Basis,
    pub measure: MeasureSpec,
    pub nmax: usize,
    /// Inclusive index block free of truncation effects; `None` if empty.
    pub interior: Option<(usize, usize)>,
    /// Max `|i - j|` of a nonzero entry; `None` for dense matrices.
    pub bandwidth: Option<usize>,
}

impl OperatorMatrix {
    pub fn from_real(
        m: DMatrix<f64>,
        basis: Basis,
        measure: MeasureSpec,
        bandwidth: Option<usize>,
    ) -> Self {
        let nmax = m.nrows() - 1;
        Self {
            entries: m.map(|x| Complex64::new(x, 0.0)),
            basis,
            measure,
            nmax,
            interior: Some((0, nmax)),
            bandwidth,
        }
    }

    pub fn real_part(&self) -> DMatrix<f64> {
        self.entries.map(|z| z.re)
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.basis != other.basis || self.measure != other.measure || self.nmax != other.nmax {
            return Err(LabError::InvalidParams(format!(
                "operator mismatch: {:?}/{}/{} vs {:?}/{}/{}",
                self.basis,
                self.measure.name(),
                self.nmax,
                other.basis,
                other.measure.name(),
                other.nmax
            )));
        }
        Ok(())
    }

    fn with_entries(&self, entries: DMatrix<Complex64>, interior: Option<(usize, usize)>, bandwidth: Option<usize>) -> Self {
        Self {
            entries,
            basis: self.basis,
            measure: self.measure,
            nmax: self.nmax,
            interior,
            bandwidth,
        }
    }

    /// Truncated product. Entry `(i, j)` sums over `k <= min(i + a, j + b)`,
    /// so the block `0..=nmax - min(a, b)` is exact.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        let band = match (self.bandwidth, other.bandwidth) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        let reach = match (self.bandwidth, other.bandwidth) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) | (None, Some(a)) => Some(a),
            (None, None) => None,
        };
        let interior = intersect(
            intersect(self.interior, other.interior),
            reach.and_then(|r| self.nmax.checked_sub(r).map(|h| (0, h))),
        );
        Ok(self.with_entries(&self.entries * &other.entries, interior, band))
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = self.product(other)?;
        let ba = other.product(self)?;
        let interior = intersect(ab.interior, ba.interior);
        Ok(self.with_entries(&ab.entries - &ba.entries, interior, ab.bandwidth))
    }

    pub fn scale(&self, z: Complex64) -> Self {
        self.with_entries(self.entries.map(|x| x * z), self.interior, self.bandwidth)
    }

    /// Max-abs entry over the interior block.
    pub fn interior_max_abs(&self) -> f64 {
        block_max(&self.entries, self.interior, |z| z.norm())
    }
}

fn intersect(a: Option<(usize, usize)>, b: Option<(usize, usize)>) -> Option<(usize, usize)> {
    let (a, b) = (a?, b?);
    let (lo, hi) = (a.0.max(b.0), a.1.min(b.1));
    (lo <= hi).then_some((lo, hi))
}

fn block_max<F: Fn(Complex64) -> f64>(m: &DMatrix<Complex64>, block: Option<(usize, usize)>, f: F) -> f64 {
    let Some((lo, hi)) = block else { return 0.0 };
    let mut best = 0.0f64;
    for i in lo..=hi {
        for j in lo..=hi {
            best = best.max(f(m[(i, j)]));
        }
    }
    best
}

/// States with the closed-form norms. Past `n ~ 20` the moment sums behind
/// the numeric norms lose digits to cancellation, the closed forms do not.
fn exact_states(params: &ModelParams, nmax: usize) -> Result<Vec<ExactState>> {
    (0..=nmax)
        .map(|n| {
            if n <= 12 {
                return exact_state(params, n);
            }
            let mut s = exact_state_unchecked(params, n)?;
            s.norm_x = closed_form_norm_x(params, n);
            s.norm_tx = closed_form_norm_tx(params, n);
            Ok(s)
        })
        .collect()
}

fn diag(values: impl Iterator<Item = f64>, nmax: usize) -> DMatrix<f64> {
    let v: Vec<f64> = values.collect();
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v)).resize(nmax + 1, nmax + 1, 0.0)
}

/// Amplitude factor turning a ladder's action on `Psi'_n` into the primed one.
fn primed_factor(params: &ModelParams, kind: LadderKind, n: usize) -> f64 {
    let x = params.n_lambda + n as f64;
    match kind {
        LadderKind::Z | LadderKind::Zdag => 1.0,
        LadderKind::Zp => ((x - 0.5) / (x + 0.5)).sqrt(),
        LadderKind::Zpdag => ((x + 1.5) / (x + 0.5)).sqrt(),
    }
}

fn ladder_band_from_coeffs(params: &ModelParams, kind: LadderKind, nmax: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(nmax + 1, nmax + 1);
    for n in 0..=nmax {
        let c = ladder_coeff(params, kind, n);
        if let Some(t) = c.target.filter(|&t| t <= nmax) {
            m[(t, n)] = c.amplitude;
        }
    }
    m
}

pub fn build_operator(
    kind: OperatorKind,
    basis: Basis,
    measure: &MeasureSpec,
    nmax: usize,
    params: &ModelParams,
) -> Result<OperatorMatrix> {
    let incompatible = || LabError::IncompatibleMeasure {
        measure: measure.name(),
        integrand: match basis {
            Basis::ExactCovariant => "exact covariant",
            Basis::ExactMinimal => "exact minimal",
            Basis::Oscillator => "oscillator",
        },
    };
    let nn = params.n;
    let real = |m, band| Ok(OperatorMatrix::from_real(m, basis, *measure, band));
    match (basis, kind) {
        (Basis::ExactCovariant | Basis::ExactMinimal, OperatorKind::ERestSubtracted) => {
            real(diag((0..=nmax).map(|n| energy_exact(params, n).rest_subtracted), nmax), Some(0))
        }
        (Basis::ExactCovariant, OperatorKind::Ladder(k)) => {
            if *measure != MeasureSpec::Flat {
                return Err(incompatible());
            }
            real(ladder_band_from_coeffs(params, k, nmax), Some(1))
        }
        (Basis::ExactMinimal, OperatorKind::Position) => {
            let states = exact_states(params, nmax)?;
            let mut m = DMatrix::zeros(nmax + 1, nmax + 1);
            for (j, b) in states.iter().enumerate() {
                let xb = b.minimal().mul_xi();
                for (i, a) in states.iter().enumerate() {
                    if (i + j) % 2 == 1 {
                        m[(i, j)] = integrate(&Integrand::product_wp(&a.minimal(), &xb), measure, nn)?;
                    }
                }
            }
            real(m, None)
        }
        (Basis::ExactMinimal, OperatorKind::Ladder(k)) => {
            // differential Z / Zdag on Psi'_n, projected on Psi'_m; primed kinds rescale
            let states = exact_states(params, nmax)?;
            let diff_kind = match k {
                LadderKind::Z | LadderKind::Zp => LadderKind::Z,
                LadderKind::Zdag | LadderKind::Zpdag => LadderKind::Zdag,
            };
            let mut m = DMatrix::zeros(nmax + 1, nmax + 1);
            for (j, b) in states.iter().enumerate() {
                let image = apply_ladder_differential(&b.minimal(), diff_kind, b.rest_subtracted_energy())
                    .scale_by(primed_factor(params, k, j));
                for i in [j.wrapping_sub(1), j + 1] {
                    if let Some(a) = states.get(i) {
                        m[(i, j)] = integrate(&Integrand::product_wp(&a.minimal(), &image), measure, nn)?;
                    }
                }
            }
            real(m, Some(1))
        }
        (Basis::Oscillator, OperatorKind::ERestSubtracted) => {
            real(diag((0..=nmax).map(|n| energy_perturbative(params, n)), nmax), Some(0))
        }
        (Basis::Oscillator, OperatorKind::Position) => {
            let mut m = DMatrix::zeros(nmax + 1, nmax + 1);
            for n in 1..=nmax {
                let v = (n as f64 / 2.0).sqrt();
                m[(n - 1, n)] = v;
                m[(n, n - 1)] = v;
            }
            real(m, Some(1))
        }
        (Basis::Oscillator, OperatorKind::Ladder(k @ (LadderKind::Z | LadderKind::Zdag))) => {
            let mut m = DMatrix::zeros(nmax + 1, nmax + 1);
            for n in 1..=nmax {
                let v = (n as f64).sqrt();
                if k == LadderKind::Z {
                    m[(n - 1, n)] = v;
                } else {
                    m[(n, n - 1)] = v;
                }
            }
            real(m, Some(1))
        }
        (Basis::Oscillator, OperatorKind::HamiltonianPerturbed) => {
            hamiltonian_matrix(&PerturbedHamiltonian::new(params), nmax, measure)
        }
        _ => Err(LabError::InvalidParams(format!(
            "{kind:?} has no matrix in the {basis:?} basis"
        ))),
    }
}

/// Max-abs entry of `A - B^dagger` on the common interior block.
pub fn adjointness_defect(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<f64> {
    a.compatible(b)?;
    let d = &a.entries - b.entries.adjoint();
    Ok(block_max(&d, intersect(a.interior, b.interior), |z| z.norm()))
}

/// Gram matrix of the minimal states as an operator (identity under `alpha^-2`).
pub fn gram_operator(params: &ModelParams, nmax: usize, measure: &MeasureSpec) -> Result<OperatorMatrix> {
    let g = gram_matrix(params, nmax, measure)?;
    let m = DMatrix::from_fn(nmax + 1, nmax + 1, |i, j| g[i][j]);
    Ok(OperatorMatrix::from_real(m, Basis::ExactMinimal, *measure, None))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimedAdjointness {
    pub n: f64,
    /// `Zp - Zpdag^T` with the primed amplitudes placed directly on the band.
    pub naive: f64,
    /// Same pair realized on `Psi'_n` and projected under `alpha^-2`.
    pub minimal_basis: f64,
    /// Unprimed `Z, Zdag` projected likewise.
    pub unprimed_minimal_basis: f64,
}

pub fn primed_adjointness(params: &ModelParams, nmax: usize) -> Result<PrimedAdjointness> {
    let w = MeasureSpec::ALPHA2;
    let naive = adjointness_defect(
        &OperatorMatrix::from_real(ladder_band_from_coeffs(params, LadderKind::Zp, nmax), Basis::ExactMinimal, w, Some(1)),
        &OperatorMatrix::from_real(ladder_band_from_coeffs(params, LadderKind::Zpdag, nmax), Basis::ExactMinimal, w, Some(1)),
    )?;
    let pair = |a, b| -> Result<f64> {
        adjointness_defect(
            &build_operator(OperatorKind::Ladder(a), Basis::ExactMinimal, &w, nmax, params)?,
            &build_operator(OperatorKind::Ladder(b), Basis::ExactMinimal, &w, nmax, params)?,
        )
    };
    Ok(PrimedAdjointness {
        n: params.n,
        naive,
        minimal_basis: pair(LadderKind::Zp, LadderKind::Zpdag)?,
        unprimed_minimal_basis: pair(LadderKind::Z, LadderKind::Zdag)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutatorResiduals {
    pub n: f64,
    /// `max |[x, p] - i (1 + E/N)|` on the reported block.
    pub xp: f64,
    /// `max |[E, p] - i x|`.
    pub ep: f64,
    /// `max |[x, p] - i|`, the oscillator-algebra residual.
    pub xp_oscillator: f64,
    /// Diagonal-only versions of `xp` and `xp_oscillator`.
    pub xp_diagonal: f64,
    pub xp_diagonal_oscillator: f64,
    /// Change of the reported block when the internal truncation grows by 4.
    pub truncation_change: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutatorReport {
    pub nmax: usize,
    /// Reported block `2..=nmax-2`.
    pub block: (usize, usize),
    pub at_n: CommutatorResiduals,
    pub at_2n: CommutatorResiduals,
    /// `log2(residual(N) / residual(2N))` for the two relations.
    pub xp_exponent: f64,
    pub ep_exponent: f64,
}

/// Extra levels carried internally: `x` is dense in the minimal basis, so the
/// products are only approximately truncation free.
pub const COMMUTATOR_PADDING: usize = 12;

fn residuals_at(params: &ModelParams, nmax: usize, pad: usize) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>)> {
    let big = nmax + pad;
    let w = MeasureSpec::ALPHA2;
    let e = build_operator(OperatorKind::ERestSubtracted, Basis::ExactMinimal, &w, big, params)?;
    let x = build_operator(OperatorKind::Position, Basis::ExactMinimal, &w, big, params)?;
    let i = Complex64::new(0.0, 1.0);
    let p = e.commutator(&x)?.scale(i);
    let xp = x.commutator(&p)?.entries;
    let ep = e.commutator(&p)?.entries;
    let ident = DMatrix::<Complex64>::identity(big + 1, big + 1);
    let xp_res = &xp - (&ident + e.entries.map(|z| z / params.n)) * i;
    let ep_res = &ep - x.entries.map(|z| z * i);
    let xp_osc = &xp - ident * i;
    Ok((xp_res, ep_res, xp_osc))
}

fn commutator_residuals(params: &ModelParams, nmax: usize) -> Result<CommutatorResiduals> {
    let block = Some((2, nmax - 2));
    let abs = |z: Complex64| z.norm();
    let (a, b, c) = residuals_at(params, nmax, COMMUTATOR_PADDING)?;
    let (a2, b2, _) = residuals_at(params, nmax, COMMUTATOR_PADDING + 4)?;
    let sub = |m: &DMatrix<Complex64>, k: &DMatrix<Complex64>| {
        m.view((0, 0), (nmax + 1, nmax + 1)) - k.view((0, 0), (nmax + 1, nmax + 1))
    };
    let change = block_max(&sub(&a, &a2), block, abs).max(block_max(&sub(&b, &b2), block, abs));
    let diag_max = |m: &DMatrix<Complex64>| (2..=nmax - 2).map(|k| m[(k, k)].norm()).fold(0.0, f64::max);
    Ok(CommutatorResiduals {
        n: params.n,
        xp: block_max(&a, block, abs),
        ep: block_max(&b, block, abs),
        xp_oscillator: block_max(&c, block, abs),
        xp_diagonal: diag_max(&a),
        xp_diagonal_oscillator: diag_max(&c),
        truncation_change: change,
    })
}

/// Diagnostic: `p := i [E, x]` then the remaining two relations on `2..=nmax-2`,
/// at `N` and `2N` (same `sigma`).
pub fn commutator_check(nmax: usize, params: &ModelParams) -> Result<CommutatorReport> {
    if nmax < 8 {
        return Err(LabError::InvalidParams(format!(
            "commutator check needs nmax >= 8, got {nmax}"
        )));
    }
    let doubled = ModelParams::from_sigma(2.0 * params.n, params.sigma)?;
    let at_n = commutator_residuals(params, nmax)?;
    let at_2n = commutator_residuals(&doubled, nmax)?;
    Ok(CommutatorReport {
        nmax,
        block: (2, nmax - 2),
        at_n,
        at_2n,
        xp_exponent: (at_n.xp / at_2n.xp).log2(),
        ep_exponent: (at_n.ep / at_2n.ep).log2(),
    })
}

/// The `N -> infinity` surrogate: `[x, p]` residual against `i` alone.
pub fn oscillator_limit_residual(nmax: usize, n_scale: f64) -> Result<f64> {
    let params = ModelParams::from_sigma(n_scale, 0.0)?;
    Ok(commutator_residuals(&params, nmax)?.xp_oscillator)
}
