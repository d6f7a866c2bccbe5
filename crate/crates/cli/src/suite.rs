//! `verify-all`: the twelve acceptance criteria on their fixed parameter grids.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rho_lab::algebra::{commutator_check, oscillator_limit_residual, primed_adjointness};
use rho_lab::exact::LadderKind;
use rho_lab::measures::{integrate, integrate_numeric};
use rho_lab::perturb::{compare_exact_vs_perturbative, solve_perturbed_measure, PerturbedHamiltonian};
use rho_lab::{GaussPoly, Integrand, MeasureSpec, ModelParams, Poly, WeightedPoly};

use crate::checks::*;
use crate::config::{CliResult, Tolerances};
use crate::report::{Data, Provenance, Record, Report};

const GRID_N: [f64; 4] = [1.0, 5.0, 10.0, 100.0];

fn grid() -> CliResult<Vec<ModelParams>> {
    let mut out = Vec::new();
    for n in GRID_N {
        for lambda in [0.0, 1.0, 1.0 / n] {
            out.push(ModelParams::from_lambda(n, lambda)?);
        }
    }
    Ok(out)
}

fn sigma(n: f64, s: f64) -> CliResult<ModelParams> {
    Ok(ModelParams::from_sigma(n, s)?)
}

fn max_over<F>(ps: &[ModelParams], f: F) -> CliResult<f64>
where
    F: Fn(&ModelParams) -> CliResult<f64>,
{
    ps.iter().map(f).try_fold(0.0f64, |acc, v| Ok(acc.max(v?)))
}

fn c01(tol: &Tolerances) -> CliResult<Vec<Record>> {
    let v = max_over(&grid()?, |p| Ok(ode_max(p, 12)))?;
    Ok(vec![Record::abs("c01.ode_residual", v, 0.0, tol.get("ode"), Provenance::Paper)])
}

fn c02(tol: &Tolerances) -> CliResult<Vec<Record>> {
    let g = grid()?;
    let sums: Vec<KgSummary> = g.iter().map(|p| kg_summary(p, 10)).collect();
    let max = |f: fn(&KgSummary) -> f64| sums.iter().map(f).fold(0.0, f64::max);
    let probe = sums.iter().map(|s| s.probe).fold(f64::INFINITY, f64::min);
    Ok(vec![
        Record::abs("c02.kg_rest_subtracted", max(|s| s.subtracted), 0.0, tol.get("kg"), Provenance::Paper),
        Record::abs("c02.kg_rest_restored", max(|s| s.restored), 0.0, tol.get("kg"), Provenance::Paper),
        Record::at_least("c02.kg_wrong_energy_probe", probe, tol.get("kg_probe"), Provenance::Derived),
    ])
}

fn c03(tol: &Tolerances) -> CliResult<Vec<Record>> {
    let g = grid()?;
    Ok(vec![
        Record::abs(
            "c03.gram_identity",
            max_over(&g, |p| gram_identity_defect(p, 10, &MeasureSpec::ALPHA2))?,
            0.0,
            tol.get("gram"),
            Provenance::Derived,
        ),
        Record::abs(
            "c03.closed_form_norms",
            max_over(&g, |p| closed_norm_defect(p, 10))?,
            0.0,
            tol.get("norm"),
            Provenance::Paper,
        ),
    ])
}

fn c04(tol: &Tolerances) -> CliResult<Vec<Record>> {
    let g = grid()?;
    Ok(vec![
        Record::abs("c04.ladder_Z", max_over(&g, |p| ladder_defect(p, LadderKind::Z, 10))?, 0.0, tol.get("ladder"), Provenance::Paper),
        Record::abs("c04.ladder_Zdag", max_over(&g, |p| ladder_defect(p, LadderKind::Zdag, 10))?, 0.0, tol.get("ladder"), Provenance::Paper),
        Record::abs("c04.tx_adjointness", max_over(&g, |p| tx_adjointness(p, 10))?, 0.0, 0.0, Provenance::Paper),
    ])
}

fn c05(tol: &Tolerances) -> CliResult<Vec<Record>> {
    let mut out = Vec::new();
    for n in [10.0, 20.0, 40.0] {
        let (gap, reference) = energy_gap(&sigma(n, 0.0)?);
        out.push(Record::rel(format!("c05.energy_gap.N{n:03}"), gap, reference, tol.get("energy_gap"), Provenance::Derived));
    }
    let shift = [0.0, 0.25, 1.0]
        .into_iter()
        .map(|s| rs_shift_defect(&sigma(10.0, s)?, 8))
        .try_fold(0.0f64, |acc, v: CliResult<f64>| Ok::<_, crate::config::CliError>(acc.max(v?)))?;
    out.push(Record::abs("c05.rs_shift", shift, 0.0, tol.get("rs_shift"), Provenance::Paper));
    Ok(out)
}

fn c06(tol: &Tolerances) -> CliResult<Vec<Record>> {
    let a = flat_defect(&sigma(10.0, 0.0)?, 10)?;
    let b = flat_defect(&sigma(20.0, 0.0)?, 10)?;
    Ok(vec![
        Record::abs("c06.channel_n_n+2", a.channel, 0.0, tol.get("defect"), Provenance::Derived),
        Record::rel("c06.d20", a.d20, -(2f64.sqrt()) / 10.0, tol.get("defect"), Provenance::Derived),
        Record::abs("c06.quartic_symmetric", a.quartic, 0.0, tol.get("defect"), Provenance::Derived),
        Record::abs("c06.moment_route", a.moment_route, 0.0, tol.get("defect"), Provenance::Derived),
        Record::rel("c06.n_scaling", a.norm / b.norm, 2.0, tol.get("defect"), Provenance::Derived),
    ])
}

fn c07(tol: &Tolerances) -> CliResult<Vec<Record>> {
    let mut worst_a = 0.0f64;
    let mut worst_first = 0.0f64;
    for s in [0.0, 0.25, 1.0] {
        let p = sigma(10.0, s)?;
        for nmax in [6, 8, 12] {
            let sol = solve_perturbed_measure(&PerturbedHamiltonian::new(&p), nmax)?;
            worst_a = worst_a.max((sol.a + 1.0).abs());
            worst_first = worst_first.max(first_order_defect(&p, nmax)?);
        }
    }
    let p = sigma(20.0, 0.0)?;
    let ratio = perturbed_defect(&p, 8)? / perturbed_defect(&doubled(&p)?, 8)?;
    Ok(vec![
        Record::abs("c07.measure_a_offset", worst_a, 0.0, tol.get("measure"), Provenance::Paper),
        Record::abs("c07.first_order_defect", worst_first, 0.0, tol.get("defect"), Provenance::Paper),
        Record::rel("c07.second_order_ratio", ratio, 4.0, tol.get("defect_ratio"), Provenance::Derived),
    ])
}

fn c08(tol: &Tolerances) -> CliResult<Vec<Record>> {
    let mut out = vec![Record::abs(
        "c08.rs_mixing",
        rs_mixing_defect(&sigma(10.0, 0.0)?, 6)?,
        0.0,
        tol.get("rs_mixing"),
        Provenance::Paper,
    )];
    for n in 0..=5 {
        let a = compare_exact_vs_perturbative(&sigma(20.0, 0.0)?, n)?;
        let b = compare_exact_vs_perturbative(&sigma(40.0, 0.0)?, n)?;
        out.push(Record::rel(
            format!("c08.sup_ratio.n{n:02}"),
            a.sup_diff / b.sup_diff,
            4.0,
            tol.get("second_order_ratio"),
            Provenance::Paper,
        ));
    }
    Ok(out)
}

fn c09(tol: &Tolerances) -> CliResult<Vec<Record>> {
    (0..=5)
        .map(|n| {
            let r = u_map_gap(&sigma(20.0, 0.0)?, n) / u_map_gap(&sigma(40.0, 0.0)?, n);
            Ok(Record::rel(format!("c09.u_map_ratio.n{n:02}"), r, 4.0, tol.get("second_order_ratio"), Provenance::Paper))
        })
        .collect()
}

fn c10(tol: &Tolerances) -> CliResult<Vec<Record>> {
    let (a, b) = (sigma(40.0, 0.0)?, sigma(80.0, 0.0)?);
    let mut out = Vec::new();
    for n in 0..=5 {
        out.push(Record::rel(
            format!("c10.state_ratio.n{n:02}"),
            state_limit_sup(&a, n)? / state_limit_sup(&b, n)?,
            2.0,
            tol.get("limit_ratio"),
            Provenance::Derived,
        ));
        if n > 0 {
            out.push(Record::rel(
                format!("c10.hermite_ratio.n{n:02}"),
                hermite_limit_sup(&a, n) / hermite_limit_sup(&b, n),
                2.0,
                tol.get("limit_ratio"),
                Provenance::Derived,
            ));
        }
    }
    let vacuum = [10.0, 100.0, 1e4]
        .into_iter()
        .map(|n| Ok(rho_lab::model::energy_exact(&ModelParams::from_lambda(n, 1.0)?, 0).rest_subtracted.abs()))
        .collect::<CliResult<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.push(Record::abs("c10.vacuum_loss", vacuum, 0.0, 1e-12, Provenance::Paper));
    Ok(out)
}

/// A random square `f^2` so the integral is positive and the relative error meaningful.
pub fn random_integrand(rng: &mut StdRng) -> (Integrand, MeasureSpec, f64) {
    let n_scale = rng.random_range(1.0..100.0);
    let deg = rng.random_range(0..=6usize);
    let coeffs: Vec<f64> = (0..=deg).map(|_| rng.random_range(-1.0..1.0)).collect();
    let poly = Poly::new(coeffs);
    if rng.random_bool(0.5) {
        let s = deg as f64 + rng.random_range(1.0..20.0);
        let f = WeightedPoly::new(s, poly, n_scale);
        let measure = match rng.random_range(0..3) {
            0 => MeasureSpec::Flat,
            1 => MeasureSpec::ALPHA2,
            _ => MeasureSpec::PowerWeight(rng.random_range(0.0..4.0)),
        };
        (Integrand::product_wp(&f, &f), measure, n_scale)
    } else {
        let f = GaussPoly::new(poly);
        let measure = match rng.random_range(0..2) {
            0 => MeasureSpec::Flat,
            _ => MeasureSpec::Perturbed(rng.random_range(-1.0..1.0)),
        };
        (Integrand::product_gp(&f, &f), measure, n_scale.max(10.0))
    }
}

fn c11(tol: &Tolerances, seed: u64) -> CliResult<Vec<Record>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (f, m, n) = random_integrand(&mut rng);
        let a = integrate(&f, &m, n)?;
        let b = integrate_numeric(&f, &m, n)?;
        worst = worst.max((a - b).abs() / b.abs());
    }
    Ok(vec![Record::abs("c11.oracle_relative", worst, 0.0, tol.get("oracle"), Provenance::Derived)])
}

fn c12() -> CliResult<Vec<Record>> {
    let p = sigma(10.0, 0.0)?;
    let c = commutator_check(8, &p)?;
    let primed = primed_adjointness(&p, 8)?;
    let primed2 = primed_adjointness(&doubled(&p)?, 8)?;
    let d = Record::diagnostic;
    Ok(vec![
        d("c12.primed_naive_defect", primed.naive, 0.0, Provenance::Derived),
        d("c12.primed_naive_exponent", (primed.naive / primed2.naive).log2(), 1.0, Provenance::Derived),
        d("c12.primed_minimal_defect", primed.minimal_basis, 0.0, Provenance::Derived),
        d("c12.unprimed_minimal_defect", primed.unprimed_minimal_basis, 0.0, Provenance::Paper),
        d("c12.comm_xp", c.at_n.xp, 0.0, Provenance::Paper),
        d("c12.comm_ep", c.at_n.ep, 0.0, Provenance::Paper),
        d("c12.comm_xp_exponent", c.xp_exponent, 1.0, Provenance::Derived),
        d("c12.comm_ep_exponent", c.ep_exponent, 1.0, Provenance::Derived),
        Record::abs("c12.oscillator_limit_N1e4", oscillator_limit_residual(8, 1e4)?, 0.0, 1e-3, Provenance::Trivial)
            .advisory(),
    ])
}

pub fn verify_all(tol: &Tolerances, seed: u64) -> CliResult<Report> {
    type Job<'a> = Box<dyn Fn() -> CliResult<Vec<Record>> + Send + Sync + 'a>;
    let jobs: Vec<Job> = vec![
        Box::new(|| c01(tol)),
        Box::new(|| c02(tol)),
        Box::new(|| c03(tol)),
        Box::new(|| c04(tol)),
        Box::new(|| c05(tol)),
        Box::new(|| c06(tol)),
        Box::new(|| c07(tol)),
        Box::new(|| c08(tol)),
        Box::new(|| c09(tol)),
        Box::new(|| c10(tol)),
        Box::new(move || c11(tol, seed)),
        Box::new(c12),
    ];
    let results: Vec<CliResult<Vec<Record>>> = jobs.par_iter().map(|j| j()).collect();
    let mut r = Report::new(None);
    for res in results {
        r.extend(res?);
    }
    let mut summary = std::collections::BTreeMap::new();
    for rec in &r.records {
        let key = rec.name.split('.').next().unwrap_or_default().to_string();
        let ok = !rec.asserted || rec.passed() == Some(true);
        let e = summary.entry(key).or_insert(1.0);
        if !ok {
            *e = 0.0;
        }
    }
    r.insert("criteria_passed", Data::Scalars(summary));
    Ok(r)
}
