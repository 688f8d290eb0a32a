//! Report serialization. Floats are written with 17 significant digits so
//! that every value round-trips; non-finite values become the strings
//! `"inf"`, `"-inf"` and `"nan"`.

use serde::ser::{Serialize, Serializer};
use serde::Serialize as DeriveSerialize;
use serde_json::value::RawValue;

use hullconc::verify::{CheckResult, Method, VerificationReport};

/// An `f64` serialized with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

/// Text form used in both JSON and CSV output.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw = RawValue::from_string(format_f64(self.0)).map_err(serde::ser::Error::custom)?;
            raw.serialize(s)
        } else {
            s.serialize_str(&format_f64(self.0))
        }
    }
}

#[derive(DeriveSerialize)]
struct CheckRow<'a> {
    name: &'a str,
    parameter: Option<Num>,
    lhs: Num,
    lhs_lower: Num,
    rhs: Num,
    margin: Num,
    certified_margin: Num,
    tolerance: Num,
    pass: bool,
    verdict: String,
    informational: bool,
    method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    std_error: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
}

impl<'a> From<&'a CheckResult> for CheckRow<'a> {
    fn from(c: &'a CheckResult) -> Self {
        let (method, std_error, samples) = match c.method {
            Method::Exact => ("exact", None, None),
            Method::MonteCarlo { std_error, samples, .. } => ("monte_carlo", Some(Num(std_error)), Some(samples)),
        };
        Self {
            name: &c.name,
            parameter: c.parameter.map(Num),
            lhs: Num(c.lhs),
            lhs_lower: Num(c.lhs_lower),
            rhs: Num(c.rhs),
            margin: Num(c.margin),
            certified_margin: Num(c.certified_margin),
            tolerance: Num(c.tolerance),
            pass: c.pass,
            verdict: c.verdict.to_string(),
            informational: c.informational,
            method,
            std_error,
            samples,
            note: c.note.as_deref(),
        }
    }
}

#[derive(DeriveSerialize)]
struct ScenarioBlock<'a> {
    label: &'a str,
    digest: &'a str,
    pass: bool,
    worst_margin: Option<Num>,
    checks: Vec<CheckRow<'a>>,
}

#[derive(DeriveSerialize)]
struct RunBlock<'a> {
    pass: bool,
    scenarios: Vec<ScenarioBlock<'a>>,
}

/// A verification report with the label of its input.
pub struct LabeledReport {
    pub label: String,
    pub report: VerificationReport,
}

fn worst_margin(r: &VerificationReport) -> Option<f64> {
    r.checks.iter().filter(|c| !c.informational).map(|c| c.margin).min_by(f64::total_cmp)
}

pub fn to_json(reports: &[LabeledReport]) -> anyhow::Result<String> {
    let run = RunBlock {
        pass: reports.iter().all(|r| r.report.pass),
        scenarios: reports
            .iter()
            .map(|r| ScenarioBlock {
                label: &r.label,
                digest: &r.report.scenario_digest,
                pass: r.report.pass,
                worst_margin: worst_margin(&r.report).map(Num),
                checks: r.report.checks.iter().map(CheckRow::from).collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&run)?;
    text.push('\n');
    Ok(text)
}

const CSV_HEADER: [&str; 16] = [
    "scenario",
    "name",
    "parameter",
    "lhs",
    "lhs_lower",
    "rhs",
    "margin",
    "certified_margin",
    "tolerance",
    "pass",
    "verdict",
    "informational",
    "method",
    "std_error",
    "samples",
    "note",
];

pub fn to_csv(reports: &[LabeledReport]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        for c in &r.report.checks {
            let (method, std_error, samples) = match c.method {
                Method::Exact => ("exact", String::new(), String::new()),
                Method::MonteCarlo { std_error, samples, .. } => {
                    ("monte_carlo", format_f64(std_error), samples.to_string())
                }
            };
            w.write_record([
                r.label.clone(),
                c.name.clone(),
                c.parameter.map(format_f64).unwrap_or_default(),
                format_f64(c.lhs),
                format_f64(c.lhs_lower),
                format_f64(c.rhs),
                format_f64(c.margin),
                format_f64(c.certified_margin),
                format_f64(c.tolerance),
                c.pass.to_string(),
                c.verdict.to_string(),
                c.informational.to_string(),
                method.to_string(),
                std_error,
                samples,
                c.note.clone().unwrap_or_default(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// `parameter,lhs,rhs,margin` rows for sweeps.
pub fn sweep_csv(rows: &[CheckResult]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["parameter", "lhs", "rhs", "margin"])?;
    for c in rows {
        w.write_record([
            c.parameter.map(format_f64).unwrap_or_default(),
            format_f64(c.lhs),
            format_f64(c.rhs),
            format_f64(c.margin),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
