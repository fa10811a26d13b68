//! Experiment reports and their JSON, CSV and terminal renderings.
//!
//! JSON output is canonical: object keys are sorted and every float is rounded to 12
//! significant digits, so equal reports render to identical bytes. The CSV form has one
//! row per result under the fixed header [`CSV_HEADER`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bounds::{self, BoundReport};
use crate::decoupling::{
    complete_decouple_capped, tangent_decouple_capped, verify_conditional_independence,
    verify_tangency,
};
use crate::error::{Error, Result};
use crate::moments::{self, MomentKind, MomentSummary};
use crate::outcome::OutcomeTree;

/// Significant digits kept for floats in JSON output.
pub const JSON_SIGNIFICANT_DIGITS: usize = 12;

pub const CSV_HEADER: &str =
    "record,id,parameter,lhs,rhs,slack,holds,tol,mean,second_moment,variance,std_error";

/// Thresholds used by the Chebyshev reports of a tree experiment.
pub const CHEBYSHEV_T: [f64; 3] = [0.5, 1.0, 2.0];
/// Levels used by the Paley–Zygmund reports of a tree experiment.
pub const PALEY_ZYGMUND_THETA: [f64; 3] = [0.1, 0.5, 0.9];

/// A named discrepancy that should vanish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub passed: bool,
}

impl Residual {
    pub fn new(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tol,
            passed: value.abs() <= tol,
        }
    }
}

/// Moments of one sum (`d_sum`, `z_sum`, `e_sum`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub name: String,
    #[serde(flatten)]
    pub summary: MomentSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment_id: String,
    /// The configuration that produced the report, echoed verbatim.
    pub model: Value,
    pub bounds: Vec<BoundReport>,
    pub residuals: Vec<Residual>,
    /// Named scalars that are informative but not checked.
    pub values: BTreeMap<String, f64>,
    pub moments: Vec<MomentRow>,
    pub seeds: Vec<u64>,
    /// Seconds since the Unix epoch, if requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl ExperimentReport {
    pub fn new(experiment_id: impl Into<String>, model: Value) -> Self {
        Self {
            experiment_id: experiment_id.into(),
            model,
            bounds: Vec::new(),
            residuals: Vec::new(),
            values: BTreeMap::new(),
            moments: Vec::new(),
            seeds: Vec::new(),
            timestamp: None,
        }
    }

    pub fn push_bound(&mut self, report: BoundReport) {
        self.bounds.push(report);
    }

    pub fn push_residual(&mut self, name: impl Into<String>, value: f64, tol: f64) {
        self.residuals.push(Residual::new(name, value, tol));
    }

    pub fn push_value(&mut self, name: impl Into<String>, value: f64) {
        self.values.insert(name.into(), value);
    }

    pub fn push_moments(&mut self, name: impl Into<String>, summary: MomentSummary) {
        self.moments.push(MomentRow {
            name: name.into(),
            summary,
        });
    }

    pub fn bound(&self, id: bounds::InequalityId) -> Option<&BoundReport> {
        self.bounds.iter().find(|b| b.inequality_id == id)
    }

    pub fn residual(&self, name: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.name == name)
    }

    pub fn moment(&self, name: &str) -> Option<&MomentSummary> {
        self.moments
            .iter()
            .find(|m| m.name == name)
            .map(|m| &m.summary)
    }

    /// Every bound holds and every residual is within its tolerance.
    pub fn all_pass(&self) -> bool {
        self.bounds.iter().all(|b| b.holds) && self.residuals.iter().all(|r| r.passed)
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        Ok(match format {
            Format::Json => self.to_json()?.into_bytes(),
            Format::Csv => self.to_csv().into_bytes(),
            Format::Table => self.to_table().into_bytes(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let value = canonicalize(serde_json::to_value(self)?);
        let mut out = serde_json::to_string_pretty(&value)?;
        out.push('\n');
        Ok(out)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let mut row = |cells: [String; 12]| {
            out.push_str(&cells.join(","));
            out.push('\n');
        };
        let e = String::new;
        for b in &self.bounds {
            row([
                "bound".into(),
                b.inequality_id.to_string(),
                b.parameter.map_or_else(e, num),
                num(b.lhs),
                num(b.rhs),
                num(b.slack),
                b.holds.to_string(),
                num(b.tol),
                e(),
                e(),
                e(),
                e(),
            ]);
        }
        for r in &self.residuals {
            row([
                "residual".into(),
                csv_field(&r.name),
                e(),
                num(r.value),
                e(),
                e(),
                r.passed.to_string(),
                num(r.tol),
                e(),
                e(),
                e(),
                e(),
            ]);
        }
        for (name, v) in &self.values {
            row([
                "value".into(),
                csv_field(name),
                e(),
                num(*v),
                e(),
                e(),
                e(),
                e(),
                e(),
                e(),
                e(),
                e(),
            ]);
        }
        for m in &self.moments {
            let se = match m.summary.kind {
                MomentKind::Estimated { std_error, .. } => num(std_error),
                MomentKind::Exact => e(),
            };
            row([
                "moments".into(),
                csv_field(&m.name),
                e(),
                e(),
                e(),
                e(),
                e(),
                e(),
                num(m.summary.mean),
                num(m.summary.second_moment),
                num(m.summary.variance),
                se,
            ]);
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "experiment {}", self.experiment_id);
        if !self.seeds.is_empty() {
            let (first, last) = (self.seeds[0], self.seeds[self.seeds.len() - 1]);
            let contiguous = self.seeds.windows(2).all(|w| w[1] == w[0] + 1);
            if contiguous && self.seeds.len() > 3 {
                let _ = writeln!(out, "seeds {first}..={last}");
            } else {
                let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
                let _ = writeln!(out, "seeds {}", seeds.join(" "));
            }
        }
        if !self.bounds.is_empty() {
            let _ = writeln!(
                out,
                "\n{:<24} {:>16} {:>16} {:>16} {:>6}",
                "inequality", "lhs", "rhs", "slack", "holds"
            );
            for b in &self.bounds {
                let _ = writeln!(
                    out,
                    "{:<24} {:>16} {:>16} {:>16} {:>6}",
                    label(b),
                    short(b.lhs),
                    short(b.rhs),
                    short(b.slack),
                    if b.holds { "yes" } else { "NO" }
                );
            }
        }
        if !self.residuals.is_empty() {
            let _ = writeln!(
                out,
                "\n{:<28} {:>16} {:>10} {:>6}",
                "residual", "value", "tol", "ok"
            );
            for r in &self.residuals {
                let _ = writeln!(
                    out,
                    "{:<28} {:>16} {:>10} {:>6}",
                    r.name,
                    short(r.value),
                    short(r.tol),
                    if r.passed { "yes" } else { "NO" }
                );
            }
        }
        if !self.moments.is_empty() {
            let _ = writeln!(
                out,
                "\n{:<20} {:>16} {:>16} {:>16} {:>12}",
                "sum", "mean", "second moment", "variance", "std error"
            );
            for m in &self.moments {
                let se = match m.summary.kind {
                    MomentKind::Estimated { std_error, .. } => short(std_error),
                    MomentKind::Exact => "exact".into(),
                };
                let _ = writeln!(
                    out,
                    "{:<20} {:>16} {:>16} {:>16} {:>12}",
                    m.name,
                    short(m.summary.mean),
                    short(m.summary.second_moment),
                    short(m.summary.variance),
                    se
                );
            }
        }
        if !self.values.is_empty() {
            let _ = writeln!(out);
            for (name, v) in &self.values {
                let _ = writeln!(out, "{name:<36} {}", short(*v));
            }
        }
        let _ = writeln!(
            out,
            "\n{}",
            if self.all_pass() {
                "all checks pass"
            } else {
                "SOME CHECKS FAILED"
            }
        );
        out
    }
}

/// Output format of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Table,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "table" | "text" | "text_table" => Ok(Self::Table),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

/// Renders with a format given by name.
pub fn render(report: &ExperimentReport, format: &str) -> Result<Vec<u8>> {
    report.render(format.parse()?)
}

/// Rounds `x` to [`JSON_SIGNIFICANT_DIGITS`] significant digits.
pub fn round_significant(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return x;
    }
    format!("{:.*e}", JSON_SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

fn canonicalize(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().unwrap_or(0.0));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, v)| (k, canonicalize(v))).collect())
        }
        other => other,
    }
}

fn label(b: &BoundReport) -> String {
    match b.parameter {
        Some(p) => format!("{}({})", b.inequality_id, short(p)),
        None => b.inequality_id.to_string(),
    }
}

fn num(x: f64) -> String {
    format!("{}", round_significant(x))
}

fn short(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e-4 && x.abs() < 1e7 {
        format!("{:.9}", x)
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    } else {
        format!("{x:.6e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Limits applied when enumerating a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub tol: f64,
    pub cap: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            tol: bounds::DEFAULT_TOL,
            cap: crate::outcome::DEFAULT_CAP,
        }
    }
}

/// Runs every applicable check on a tree: exact moments of the three sums, the
/// decoupling bounds, the tail bounds, and the structural residuals of the tangent
/// decoupled space.
pub fn analyze_tree(
    experiment_id: impl Into<String>,
    model: Value,
    tree: &OutcomeTree,
    opts: AnalysisOptions,
) -> Result<ExperimentReport> {
    let tol = opts.tol;
    let mut report = ExperimentReport::new(experiment_id, model);
    let space = tangent_decouple_capped(tree, opts.cap)?;
    let product = complete_decouple_capped(tree, opts.cap)?;

    let d = moments::d_sum_moments(&space);
    let e = moments::e_sum_moments(&space);
    let z = product.sum_moments();
    report.push_moments("d_sum", d);
    report.push_moments("z_sum", z);
    report.push_moments("e_sum", e);
    if z.second_moment > 0.0 {
        report.push_value(
            "second_moment_ratio_d_to_z",
            d.second_moment / z.second_moment,
        );
    }

    if tree.is_nonnegative() {
        report.push_bound(bounds::complete_lower_bound(tree, tol)?);
    }
    for b in bounds::tangent_reports(&space, tol) {
        report.push_bound(b);
    }
    for t in CHEBYSHEV_T {
        report.push_bound(bounds::chebyshev_report(&space, t, tol)?);
    }
    let nonnegative_sum = space.paths().iter().all(|p| p.sum() >= 0.0);
    if nonnegative_sum && d.mean > 0.0 && 2.0 * e.second_moment - d.mean * d.mean > 0.0 {
        for theta in PALEY_ZYGMUND_THETA {
            report.push_bound(bounds::paley_zygmund_report(&space, theta, tol)?);
        }
    }

    report.push_residual("tangency", verify_tangency(&space), tol);
    report.push_residual(
        "conditional_independence",
        verify_conditional_independence(&space),
        tol,
    );
    report.push_residual(
        "projection_decomposition",
        moments::check_decomposition(&space),
        tol,
    );
    let distance = moments::check_distance_equality(&space);
    report.push_residual("distance_equality", distance.residual(), tol);
    report.push_residual("cross_terms", moments::max_cross_term(&space), tol);
    report.push_residual(
        "e_sum_mean_matches_d_sum_mean",
        (e.mean - d.mean).abs(),
        tol,
    );
    Ok(report)
}
