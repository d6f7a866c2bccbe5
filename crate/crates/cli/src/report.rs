use std::collections::BTreeMap;
use std::fmt::Write as _;

use rho_lab::ModelParams;
use serde_json::{Map, Number, Value};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Paper,
    Derived,
    Trivial,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Self::Paper => "paper",
            Self::Derived => "derived",
            Self::Trivial => "trivial",
        }
    }
}

/// How `value` is judged against `reference` and `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    /// `|value - reference| <= tolerance`
    Abs,
    /// `|value - reference| <= tolerance * |reference|`
    Rel,
    /// `value >= reference`
    AtLeast,
    /// Reported only.
    None,
}

impl Comparison {
    fn as_str(self) -> &'static str {
        match self {
            Self::Abs => "abs",
            Self::Rel => "rel",
            Self::AtLeast => "at_least",
            Self::None => "none",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Record {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub provenance: Provenance,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub asserted: bool,
}

impl Record {
    pub fn abs(name: impl Into<String>, value: f64, reference: f64, tolerance: f64, provenance: Provenance) -> Self {
        Self {
            name: name.into(),
            value,
            reference,
            provenance,
            tolerance,
            comparison: Comparison::Abs,
            asserted: true,
        }
    }

    pub fn rel(name: impl Into<String>, value: f64, reference: f64, tolerance: f64, provenance: Provenance) -> Self {
        Self {
            comparison: Comparison::Rel,
            ..Self::abs(name, value, reference, tolerance, provenance)
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64, provenance: Provenance) -> Self {
        Self {
            comparison: Comparison::AtLeast,
            ..Self::abs(name, value, bound, f64::NAN, provenance)
        }
    }

    pub fn diagnostic(name: impl Into<String>, value: f64, reference: f64, provenance: Provenance) -> Self {
        Self {
            comparison: Comparison::None,
            asserted: false,
            ..Self::abs(name, value, reference, f64::NAN, provenance)
        }
    }

    /// Keeps the comparison but stops the record from gating the run.
    pub fn advisory(mut self) -> Self {
        self.asserted = false;
        self
    }

    pub fn passed(&self) -> Option<bool> {
        let d = (self.value - self.reference).abs();
        match self.comparison {
            Comparison::Abs => Some(d <= self.tolerance),
            Comparison::Rel => Some(d <= self.tolerance * self.reference.abs()),
            Comparison::AtLeast => Some(self.value >= self.reference),
            Comparison::None => None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Data {
    Table { columns: Vec<String>, rows: Vec<Vec<f64>> },
    Matrix(Vec<Vec<f64>>),
    Scalars(BTreeMap<String, f64>),
}

impl Data {
    pub fn table(columns: &[&str], rows: Vec<Vec<f64>>) -> Self {
        Self::Table {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows,
        }
    }

    pub fn scalars<'a>(items: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Self::Scalars(items.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub command: String,
    pub args: Vec<String>,
    pub params: Option<ModelParams>,
    pub records: Vec<Record>,
    pub data: BTreeMap<String, Data>,
}

impl Report {
    pub fn new(params: Option<ModelParams>) -> Self {
        Self {
            params,
            ..Self::default()
        }
    }

    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn extend(&mut self, rs: impl IntoIterator<Item = Record>) {
        self.records.extend(rs);
    }

    pub fn insert(&mut self, key: &str, d: Data) {
        self.data.insert(key.to_string(), d);
    }

    /// Diagnostics never fail a run.
    pub fn passed(&self) -> bool {
        self.records
            .iter()
            .filter(|r| r.asserted)
            .all(|r| r.passed() == Some(true))
    }

    pub fn sort(&mut self) {
        self.records.sort_by(|a, b| a.name.cmp(&b.name));
    }
}

/// 17 significant digits; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let s = if x == 0.0 {
        "0.0000000000000000e0".to_string()
    } else {
        format!("{x:.16e}")
    };
    Value::Number(s.parse::<Number>().expect("formatted float is a JSON number"))
}

fn params_json(p: &ModelParams) -> Value {
    let mut m = Map::new();
    m.insert("N".into(), num(p.n));
    m.insert("N_lambda".into(), num(p.n_lambda));
    m.insert("chi".into(), num(p.chi));
    m.insert("curvature".into(), num(p.curvature));
    m.insert("lambda".into(), num(p.lambda));
    m.insert("sigma".into(), num(p.sigma));
    Value::Object(m)
}

fn data_json(d: &Data) -> Value {
    let rows = |rows: &[Vec<f64>]| {
        Value::Array(
            rows.iter()
                .map(|r| Value::Array(r.iter().map(|&x| num(x)).collect()))
                .collect(),
        )
    };
    let mut m = Map::new();
    match d {
        Data::Table { columns, rows: rs } => {
            m.insert("kind".into(), "table".into());
            m.insert(
                "columns".into(),
                Value::Array(columns.iter().map(|c| Value::String(c.clone())).collect()),
            );
            m.insert("rows".into(), rows(rs));
        }
        Data::Matrix(rs) => {
            m.insert("kind".into(), "matrix".into());
            m.insert("rows".into(), rows(rs));
        }
        Data::Scalars(items) => {
            m.insert("kind".into(), "scalars".into());
            m.insert(
                "values".into(),
                Value::Object(items.iter().map(|(k, &v)| (k.clone(), num(v))).collect()),
            );
        }
    }
    Value::Object(m)
}

pub fn to_json(r: &Report) -> String {
    let records = r
        .records
        .iter()
        .map(|rec| {
            let mut m = Map::new();
            m.insert("name".into(), Value::String(rec.name.clone()));
            m.insert("value".into(), num(rec.value));
            m.insert("reference".into(), num(rec.reference));
            m.insert("provenance".into(), rec.provenance.as_str().into());
            m.insert("tolerance".into(), num(rec.tolerance));
            m.insert("comparison".into(), rec.comparison.as_str().into());
            m.insert("asserted".into(), Value::Bool(rec.asserted));
            m.insert(
                "passed".into(),
                rec.passed().map_or(Value::Null, Value::Bool),
            );
            Value::Object(m)
        })
        .collect();
    let mut command = Map::new();
    command.insert("name".into(), Value::String(r.command.clone()));
    command.insert(
        "args".into(),
        Value::Array(r.args.iter().map(|a| Value::String(a.clone())).collect()),
    );
    let mut top = Map::new();
    top.insert("schema_version".into(), SCHEMA_VERSION.into());
    top.insert("command".into(), Value::Object(command));
    top.insert("params".into(), r.params.as_ref().map_or(Value::Null, params_json));
    top.insert("records".into(), Value::Array(records));
    top.insert(
        "status".into(),
        if r.passed() { "pass" } else { "fail" }.into(),
    );
    top.insert(
        "data".into(),
        Value::Object(r.data.iter().map(|(k, d)| (k.clone(), data_json(d))).collect()),
    );
    let mut s = serde_json::to_string_pretty(&Value::Object(top)).expect("report serializes");
    s.push('\n');
    s
}

/// CSV of the report's single matrix, or `None` when there is not exactly one.
pub fn to_csv(r: &Report) -> Option<String> {
    let mut mats = r.data.values().filter_map(|d| match d {
        Data::Matrix(m) => Some(m),
        _ => None,
    });
    let m = mats.next()?;
    if mats.next().is_some() {
        return None;
    }
    let mut out = String::new();
    for row in m {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Some(out)
}

fn human(x: f64) -> String {
    if !x.is_finite() {
        "-".into()
    } else if x == 0.0 || (1e-4..1e6).contains(&x.abs()) {
        format!("{x:.10}")
    } else {
        format!("{x:.6e}")
    }
}

pub fn to_table(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", r.command);
    if let Some(p) = &r.params {
        let _ = writeln!(
            out,
            "N = {}  lambda = {}  sigma = {}  N_lambda = {}",
            human(p.n),
            human(p.lambda),
            human(p.sigma),
            human(p.n_lambda)
        );
    }
    if !r.records.is_empty() {
        let w = r.records.iter().map(|x| x.name.len()).max().unwrap_or(4).max(5);
        let _ = writeln!(
            out,
            "\n{:<w$}  {:>18}  {:>18}  {:>12}  {:<8}  result",
            "check", "value", "reference", "tolerance", "source"
        );
        for rec in &r.records {
            let verdict = match (rec.passed(), rec.asserted) {
                (Some(true), true) => "PASS",
                (Some(false), true) => "FAIL",
                (Some(true), false) => "ok (info)",
                (Some(false), false) => "off (info)",
                (None, _) => "info",
            };
            let _ = writeln!(
                out,
                "{:<w$}  {:>18}  {:>18}  {:>12}  {:<8}  {verdict}",
                rec.name,
                human(rec.value),
                human(rec.reference),
                human(rec.tolerance),
                rec.provenance.as_str()
            );
        }
    }
    for (key, d) in &r.data {
        let _ = writeln!(out, "\n[{key}]");
        match d {
            Data::Table { columns, rows } => {
                let line: Vec<String> = columns.iter().map(|c| format!("{c:>18}")).collect();
                let _ = writeln!(out, "{}", line.join(" "));
                for row in rows {
                    let line: Vec<String> = row.iter().map(|&x| format!("{:>18}", human(x))).collect();
                    let _ = writeln!(out, "{}", line.join(" "));
                }
            }
            Data::Matrix(rows) => {
                for row in rows {
                    let line: Vec<String> = row.iter().map(|&x| format!("{:>14.6e}", x)).collect();
                    let _ = writeln!(out, "{}", line.join(" "));
                }
            }
            Data::Scalars(items) => {
                for (k, &v) in items {
                    let _ = writeln!(out, "{k} = {}", human(v));
                }
            }
        }
    }
    let _ = writeln!(out, "\nstatus: {}", if r.passed() { "pass" } else { "fail" });
    out
}
