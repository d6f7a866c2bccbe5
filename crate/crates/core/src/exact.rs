//! Exact eigenstates `C alpha^(-c_n) H_n^(N,lambda)` of the covariant and
//! minimal realizations, their Klein-Gordon certificate, the ladder
//! operators in algebraic and differential form, and the spectral map
//! between the two realizations.
//!
//! Time dependence is handled analytically: a state of level `n` carries
//! `exp(-i b_n t)` (full energy) or `exp(-i (b_n - N) t)` (rest mass
//! subtracted), so every time derivative becomes a multiplication and all
//! operators act inside [`WeightedPoly`] algebra.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::measures::{integrate, Integrand, MeasureSpec};
use crate::model::{energy_exact, ModelParams};
use crate::polyalg::{ln_factorial, Poly, WeightedPoly};
use crate::relhermite::relhermite;

/// Relative tolerance between numeric and printed normalization constants.
pub const NORM_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactState {
    pub n: usize,
    pub params: ModelParams,
    /// Weight exponent `1/2 + N_lambda + n`.
    pub c_n: f64,
    /// Time frequency (full energy) in units of `omega`; equal to `c_n`.
    pub b_n: f64,
    /// `alpha^(-c_n) H_n^(N,lambda)`, unnormalized.
    pub wp: WeightedPoly,
    /// Normalization under `dxi alpha^-2` (minimal realization).
    pub norm_x: f64,
    /// Normalization under the t-x product (covariant realization).
    pub norm_tx: f64,
}

impl ExactState {
    /// `Psi'_n` as a function of `xi`.
    pub fn minimal(&self) -> WeightedPoly {
        self.wp.scale_by(self.norm_x)
    }

    /// Spatial part of `Psi_n`.
    pub fn covariant(&self) -> WeightedPoly {
        self.wp.scale_by(self.norm_tx)
    }

    pub fn eval_minimal(&self, xi: f64) -> f64 {
        self.norm_x * self.wp.eval(xi)
    }

    /// Rest-subtracted energy `b_n - N` in units of `hbar omega`.
    pub fn rest_subtracted_energy(&self) -> f64 {
        energy_exact(&self.params, self.n).rest_subtracted
    }
}

fn ln_common_prefactor(params: &ModelParams, n: usize) -> f64 {
    // pi^{-1/4} / sqrt(2^n n!) * sqrt((2N)^n Gamma(2N_l+1) / Gamma(2N_l+n+1))
    let ratio: f64 = (1..=n)
        .map(|j| ((2.0 * params.n_lambda + j as f64) / (2.0 * params.n)).ln())
        .sum();
    -0.25 * PI.ln()
        - 0.5 * (n as f64 * std::f64::consts::LN_2 + ln_factorial(n))
        - 0.5 * ratio
}

/// Printed `C_n` in `xi` units with the time average `sqrt(omega / 2 pi)` removed.
pub fn closed_form_norm_tx(params: &ModelParams, n: usize) -> f64 {
    use crate::measures::ln_gamma_half_step;
    // Gamma(N_l + 1/2) / (sqrt(N) Gamma(N_l))
    let tail = ln_gamma_half_step(params.n_lambda) - 0.5 * params.n.ln();
    (ln_common_prefactor(params, n) + 0.5 * tail).exp()
}

/// Printed `C'_n` in `xi` units with the time average `sqrt(omega / 2 pi)` removed.
pub fn closed_form_norm_x(params: &ModelParams, n: usize) -> f64 {
    use crate::measures::ln_gamma_half_step;
    let nl = params.n_lambda;
    let level = ((nl + n as f64 + 0.5) / (nl + 0.5)).ln();
    // Gamma(N_l + 3/2) / (sqrt(N) Gamma(N_l + 1))
    let tail = ln_gamma_half_step(nl + 1.0) - 0.5 * params.n.ln();
    (ln_common_prefactor(params, n) + 0.5 * level + 0.5 * tail).exp()
}

/// Builds level `n` and certifies the printed normalization against the
/// numerically integrated one.
pub fn exact_state(params: &ModelParams, n: usize) -> Result<ExactState> {
    let state = exact_state_unchecked(params, n)?;
    for (numeric, closed) in [
        (state.norm_x, closed_form_norm_x(params, n)),
        (state.norm_tx, closed_form_norm_tx(params, n)),
    ] {
        if (numeric - closed).abs() > NORM_MATCH_TOL * closed.abs() {
            return Err(LabError::ConventionMismatch {
                n,
                numeric,
                closed_form: closed,
            });
        }
    }
    Ok(state)
}

/// Builds level `n` with numerically integrated norms only.
pub fn exact_state_unchecked(params: &ModelParams, n: usize) -> Result<ExactState> {
    let c_n = params.level_exponent(n);
    let wp = WeightedPoly::new(c_n, relhermite(params, n).poly, params.n);
    let sq = Integrand::product_wp(&wp, &wp);
    let norm_x = integrate(&sq, &MeasureSpec::ALPHA2, params.n)?.powf(-0.5);
    let norm_tx = integrate(&sq, &MeasureSpec::Flat, params.n)?.powf(-0.5);
    Ok(ExactState {
        n,
        params: *params,
        c_n,
        b_n: c_n,
        wp,
        norm_x,
        norm_tx,
    })
}

/// `(omega / 2 pi) int_0^{2 pi / omega} exp(-i (m - n) omega t) dt`.
pub fn period_average(m: usize, n: usize) -> f64 {
    if m == n {
        1.0
    } else {
        0.0
    }
}

/// The t-x scalar product of two covariant states.
pub fn inner_tx(a: &ExactState, b: &ExactState) -> Result<f64> {
    let time = period_average(a.n, b.n);
    if time == 0.0 {
        return Ok(0.0);
    }
    let space = integrate(
        &Integrand::product_wp(&a.covariant(), &b.covariant()),
        &MeasureSpec::Flat,
        a.params.n,
    )?;
    Ok(time * space)
}

/// x-only product of two minimal states under the given measure.
pub fn inner_x(a: &ExactState, b: &ExactState, measure: &MeasureSpec) -> Result<f64> {
    integrate(
        &Integrand::product_wp(&a.minimal(), &b.minimal()),
        measure,
        a.params.n,
    )
}

/// Gram matrix of the minimal states `0..=nmax`, row-major.
pub fn gram_matrix(params: &ModelParams, nmax: usize, measure: &MeasureSpec) -> Result<Vec<Vec<f64>>> {
    let states = (0..=nmax)
        .map(|n| exact_state(params, n))
        .collect::<Result<Vec<_>>>()?;
    states
        .iter()
        .map(|a| states.iter().map(|b| inner_x(a, b, measure)).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KgForm {
    /// The Klein-Gordon-like equation for the rest-subtracted field.
    RestSubtracted,
    /// `c^2 (box + m^2 c^2 / hbar^2 + chi R)` on the rest-restored field.
    RestRestored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgResidual {
    pub residual: WeightedPoly,
    /// Max residual coefficient over the max coefficient of the individual terms.
    pub relative: f64,
}

/// Applies the Klein-Gordon operator to level `n`.
pub fn kg_residual(params: &ModelParams, n: usize, form: KgForm) -> KgResidual {
    kg_residual_with_frequency(params, n, params.level_exponent(n), form)
}

/// Same as [`kg_residual`] with the full time frequency `b` forced.
pub fn kg_residual_with_frequency(
    params: &ModelParams,
    n: usize,
    b: f64,
    form: KgForm,
) -> KgResidual {
    let nn = params.n;
    let f = WeightedPoly::new(params.level_exponent(n), relhermite(params, n).poly, nn);
    let inv_alpha_sq = WeightedPoly::new(2.0, Poly::one(), nn);
    let d1 = f.differentiate();
    let d2 = d1.differentiate();
    let alpha_sq_d2 = WeightedPoly::alpha_sq(nn).multiply(&d2);
    let f_over = inv_alpha_sq.multiply(&f);

    let mut terms = vec![d1.mul_xi().scale_by(-2.0), alpha_sq_d2.scale_by(-nn)];
    match form {
        KgForm::RestSubtracted => {
            // phi ~ exp(-i e t): d_t -> -i e, d_t^2 -> -e^2
            let e = b - nn;
            terms.push(f_over.scale_by(-e * e));
            terms.push(f_over.scale_by(-2.0 * nn * e));
            terms.push(f_over.scale_by(-nn * nn));
            terms.push(f.scale_by(-params.lambda * nn));
            terms.push(f.scale_by(nn * nn));
        }
        KgForm::RestRestored => {
            // c^2 [ (1/(c^2 alpha^2)) d_t^2 + m^2c^2/hbar^2 + chi R ] with c^2 = N
            let mass = nn;
            let chi_r = params.chi * params.curvature;
            terms.push(f_over.scale_by(-b * b));
            terms.push(f.scale_by(nn * (mass + chi_r)));
        }
    }
    let target = terms.iter().fold(f64::MIN, |s, t| s.max(t.s));
    let aligned: Vec<WeightedPoly> = terms
        .iter()
        .map(|t| t.at_weight(target).expect("terms differ by even powers of alpha"))
        .collect();
    let scale = aligned
        .iter()
        .map(|t| t.poly.max_abs_coeff())
        .fold(0.0, f64::max);
    let sum = aligned
        .iter()
        .fold(Poly::zero(), |acc, t| &acc + &t.poly);
    let relative = if scale > 0.0 {
        sum.max_abs_coeff() / scale
    } else {
        0.0
    };
    KgResidual {
        residual: WeightedPoly::new(target, sum, nn),
        relative,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LadderKind {
    Z,
    Zdag,
    Zp,
    Zpdag,
}

impl LadderKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Z => "Z",
            Self::Zdag => "Zdag",
            Self::Zp => "Zp",
            Self::Zpdag => "Zpdag",
        }
    }

    fn lowers(&self) -> bool {
        matches!(self, Self::Z | Self::Zp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderCoeff {
    pub amplitude: f64,
    /// `None` when the operator annihilates the state.
    pub target: Option<usize>,
}

/// Algebraic ladder action `K Psi_n = amplitude Psi_target`.
pub fn ladder_coeff(params: &ModelParams, kind: LadderKind, n: usize) -> LadderCoeff {
    let nl = params.n_lambda;
    let nf = n as f64;
    if kind.lowers() {
        if n == 0 {
            return LadderCoeff {
                amplitude: 0.0,
                target: None,
            };
        }
        let mut amp = (nf * (2.0 * nl + nf) / (2.0 * params.n)).sqrt();
        if kind == LadderKind::Zp {
            amp *= ((nl + nf - 0.5) / (nl + nf + 0.5)).sqrt();
        }
        LadderCoeff {
            amplitude: amp,
            target: Some(n - 1),
        }
    } else {
        let mut amp = ((nf + 1.0) * (2.0 * nl + nf + 1.0) / (2.0 * params.n)).sqrt();
        if kind == LadderKind::Zpdag {
            amp *= ((nl + nf + 1.5) / (nl + nf + 0.5)).sqrt();
        }
        LadderCoeff {
            amplitude: amp,
            target: Some(n + 1),
        }
    }
}

/// Differential `Z` (or `Zdag`) acting on a spatial profile whose time
/// dependence is `exp(-i e t)`, `e` rest subtracted, so that
/// `i hbar d_t -> e hbar omega`. In oscillator units
/// `Z = (alpha d_xi + (1 + e/N) xi / alpha) / sqrt(2)` and
/// `Zdag = (-alpha d_xi + (1 + e/N) xi / alpha) / sqrt(2)`; the result
/// carries `exp(-i (e -+ 1) t)`.
pub fn apply_ladder_differential(f: &WeightedPoly, kind: LadderKind, energy: f64) -> WeightedPoly {
    let nn = f.scale;
    let alpha = WeightedPoly::new(-1.0, Poly::one(), nn);
    let inv_alpha = WeightedPoly::new(1.0, Poly::one(), nn);
    let deriv = alpha.multiply(&f.differentiate());
    let mult = inv_alpha.multiply(&f.mul_xi()).scale_by(1.0 + energy / nn);
    let sign = match kind {
        LadderKind::Z | LadderKind::Zp => 1.0,
        LadderKind::Zdag | LadderKind::Zpdag => -1.0,
    };
    let sum = deriv
        .scale_by(sign)
        .add(&mult)
        .expect("both terms carry the same weight");
    sum.scale_by(FRAC_1_SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderAction {
    pub kind: LadderKind,
    pub n: usize,
    pub target: Option<usize>,
    /// Coefficient on `Psi_target`.
    pub amplitude: f64,
    /// Coefficients `d_j / C_j` over `alpha^(-s) H_j` at the result's weight.
    pub components: Vec<f64>,
    /// Largest non-target component, relative to `max(1, |amplitude|)`.
    pub stray: f64,
}

/// Threshold above which a second component makes the decomposition fail.
pub const STRAY_TOL: f64 = 1e-8;

/// Headroom over the rounding floor of the expansion when that floor
/// exceeds [`STRAY_TOL`] (large `N`, high levels).
pub const STRAY_FLOOR_FACTOR: f64 = 1e3;

/// Applies differential `Z` / `Zdag` to the covariant state `Psi_n` and
/// decomposes the result over the exact family.
pub fn ladder_apply_differential(
    params: &ModelParams,
    kind: LadderKind,
    n: usize,
) -> Result<LadderAction> {
    let state = exact_state(params, n)?;
    ladder_apply_with_energy(params, kind, n, state.rest_subtracted_energy())
}

/// As [`ladder_apply_differential`] with the substituted energy forced.
pub fn ladder_apply_with_energy(
    params: &ModelParams,
    kind: LadderKind,
    n: usize,
    energy: f64,
) -> Result<LadderAction> {
    if matches!(kind, LadderKind::Zp | LadderKind::Zpdag) {
        return Err(LabError::DecompositionFailure(
            "primed ladders have no differential form; use ladder_coeff".into(),
        ));
    }
    let state = exact_state(params, n)?;
    let image = apply_ladder_differential(&state.covariant(), kind, energy);
    let scale = image.poly.max_abs_coeff();
    if image.poly.is_zero() || scale <= 1e-12 * state.covariant().poly.max_abs_coeff() {
        return Ok(LadderAction {
            kind,
            n,
            target: None,
            amplitude: 0.0,
            components: Vec::new(),
            stray: scale,
        });
    }
    // the image sits at weight c_n + 1; lowering lands on c_{n-1}
    let image = if kind == LadderKind::Z {
        let (lowered, rem) = image.lower_weight();
        if rem.max_abs_coeff() > STRAY_TOL * scale {
            return Err(LabError::DecompositionFailure(format!(
                "image of level {n} is not divisible by alpha^2 (remainder {:e})",
                rem.max_abs_coeff() / scale
            )));
        }
        lowered
    } else {
        image
    };
    let level = image.s - params.level_exponent(0);
    let target = level.round();
    if (level - target).abs() > 1e-9 || target < 0.0 {
        return Err(LabError::DecompositionFailure(format!(
            "weight exponent {} is not a level exponent",
            image.s
        )));
    }
    let target = target as usize;
    let (components, floor) = expand_over_relhermite(params, &image.poly)?;
    let amplitude = components.get(target).copied().unwrap_or(0.0);
    let stray = components
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max)
        / amplitude.abs().max(1.0);
    let limit = STRAY_TOL.max(STRAY_FLOOR_FACTOR * floor / amplitude.abs().max(1.0));
    if stray > limit || amplitude == 0.0 {
        return Err(LabError::DecompositionFailure(format!(
            "{} on level {n}: stray component {stray:e}",
            kind.name()
        )));
    }
    Ok(LadderAction {
        kind,
        n,
        target: Some(target),
        amplitude,
        components,
        stray,
    })
}

/// Triangular expansion `Q = sum_j d_j H_j^(N,lambda)`, reported as `d_j / C_j`,
/// together with the rounding floor of those components: eliminating
/// against coefficients of size `|Q|` leaves `eps |Q| / (|h_jj| C_j)`.
fn expand_over_relhermite(params: &ModelParams, q: &Poly) -> Result<(Vec<f64>, f64)> {
    let Some(deg) = q.degree() else {
        return Ok((Vec::new(), 0.0));
    };
    let mut rest = q.clone();
    let mut out = vec![0.0; deg + 1];
    let mut floor = 0.0f64;
    for j in (0..=deg).rev() {
        let h = relhermite(params, j).poly;
        let scale = rest.max_abs_coeff().max(q.max_abs_coeff());
        let d = rest.coeff(j) / h.coeff(j);
        rest = &rest - &h.scale(d);
        let c = exact_state(params, j)?.norm_tx;
        out[j] = d / c;
        floor = floor.max(f64::EPSILON * scale * h.max_abs_coeff() / (h.coeff(j).abs() * c));
    }
    Ok((out, floor))
}

/// The map `U` between covariant and minimal states on level `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UMap {
    /// `sqrt(E_n / (hbar omega N_lambda))`
    pub amplitude: f64,
    /// Phase frequency `(E_n - m c^2) / hbar` in units of `omega`.
    pub phase_frequency: f64,
}

pub fn u_map_factor(params: &ModelParams, n: usize) -> UMap {
    let e = energy_exact(params, n);
    UMap {
        amplitude: (e.total / params.n_lambda).sqrt(),
        phase_frequency: e.rest_subtracted,
    }
}
