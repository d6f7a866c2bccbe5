use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rho_lab::model::derive_dimensionless;
use rho_lab::{LabError, MeasureSpec, ModelParams, PhysicalParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Rest energy over hbar omega (m c^2 / hbar omega).
    #[arg(long = "N")]
    pub n: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Tolerance override, KEY=VALUE; repeatable.
    #[arg(long = "tol", value_parser = parse_tol)]
    pub tol: Vec<(String, f64)>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    let v: f64 = v.parse().map_err(|e| format!("{k}: {e}"))?;
    if !(v >= 0.0) {
        return Err(format!("{k}: tolerance must be non-negative"));
    }
    Ok((k.to_string(), v))
}

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invalid(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Invalid(m) => write!(f, "invalid input: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::InvalidParams(_)
            | LabError::ComplexSpectrum { .. }
            | LabError::IncompatibleMeasure { .. } => Self::Invalid(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Exactly one of `--N` / physical quadruple and one of `--lambda` / `--sigma`.
pub fn resolve_params(a: &CommonArgs) -> CliResult<ModelParams> {
    let phys = [a.m, a.omega, a.hbar, a.c];
    let n_phys = phys.iter().filter(|x| x.is_some()).count();
    let n = match (a.n, n_phys) {
        (Some(n), 0) => Choice::Scale(n),
        (None, 4) => Choice::Physical(PhysicalParams::new(
            a.m.unwrap(),
            a.omega.unwrap(),
            a.hbar.unwrap(),
            a.c.unwrap(),
        )?),
        (None, 0) => return Err(CliError::Invalid("give --N or --m --omega --hbar --c".into())),
        (Some(_), _) => return Err(CliError::Invalid("--N excludes the physical parameters".into())),
        (None, _) => {
            return Err(CliError::Invalid(
                "physical parameters need all of --m --omega --hbar --c".into(),
            ))
        }
    };
    match (a.lambda, a.sigma, n) {
        (Some(_), Some(_), _) => Err(CliError::Invalid("--lambda excludes --sigma".into())),
        (None, None, _) => Err(CliError::Invalid("give --lambda or --sigma".into())),
        (Some(l), None, Choice::Scale(n)) => Ok(ModelParams::from_lambda(n, l)?),
        (Some(l), None, Choice::Physical(p)) => Ok(derive_dimensionless(&p, l)?),
        (None, Some(s), Choice::Scale(n)) => Ok(ModelParams::from_sigma(n, s)?),
        (None, Some(s), Choice::Physical(p)) => Ok(ModelParams::from_sigma(p.rest_energy_ratio(), s)?),
    }
}

enum Choice {
    Scale(f64),
    Physical(PhysicalParams),
}

pub fn parse_measure(s: &str) -> Result<MeasureSpec, String> {
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("{s}: {e}"));
    match s.split_once(':') {
        None => match s {
            "flat" => Ok(MeasureSpec::Flat),
            "alpha2" => Ok(MeasureSpec::ALPHA2),
            "gaussian" => Ok(MeasureSpec::GaussianNative),
            "perturbed" => Ok(MeasureSpec::Perturbed(-1.0)),
            _ => Err(format!("unknown measure {s:?}")),
        },
        Some(("power", v)) => Ok(MeasureSpec::PowerWeight(num(v)?)),
        Some(("perturbed", v)) => Ok(MeasureSpec::Perturbed(num(v)?)),
        _ => Err(format!("unknown measure {s:?}")),
    }
}

/// Named tolerances with their defaults.
const DEFAULT_TOLERANCES: &[(&str, f64)] = &[
    ("defect", 1e-10),
    ("defect_ratio", 0.2),
    ("energy_gap", 0.02),
    ("gram", 1e-10),
    ("kg", 1e-10),
    ("kg_probe", 1e-3),
    ("ladder", 1e-9),
    ("limit_ratio", 0.15),
    ("measure", 1e-8),
    ("norm", 1e-9),
    ("ode", 1e-10),
    ("oracle", 1e-9),
    ("rs_mixing", 1e-9),
    ("rs_shift", 1e-10),
    ("second_order_ratio", 0.25),
];

#[derive(Debug, Clone)]
pub struct Tolerances(BTreeMap<&'static str, f64>);

impl Tolerances {
    pub fn new(overrides: &[(String, f64)]) -> CliResult<Self> {
        let mut map: BTreeMap<&'static str, f64> = DEFAULT_TOLERANCES.iter().copied().collect();
        for (k, v) in overrides {
            let key = map
                .keys()
                .find(|known| **known == k.as_str())
                .copied()
                .ok_or_else(|| {
                    CliError::Invalid(format!(
                        "unknown tolerance {k:?}; known: {}",
                        DEFAULT_TOLERANCES.iter().map(|t| t.0).collect::<Vec<_>>().join(", ")
                    ))
                })?;
            map.insert(key, *v);
        }
        Ok(Self(map))
    }

    pub fn get(&self, key: &str) -> f64 {
        self.0[key]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measures_parse() {
        assert_eq!(parse_measure("alpha2").unwrap(), MeasureSpec::PowerWeight(2.0));
        assert_eq!(parse_measure("perturbed:-1").unwrap(), MeasureSpec::Perturbed(-1.0));
        assert!(parse_measure("power:x").is_err());
        assert!(parse_measure("weird").is_err());
    }

    #[test]
    fn unknown_tolerance_is_rejected() {
        assert!(Tolerances::new(&[("gram".into(), 1e-6)]).is_ok());
        assert!(matches!(
            Tolerances::new(&[("nope".into(), 1.0)]),
            Err(CliError::Invalid(_))
        ));
    }
}
