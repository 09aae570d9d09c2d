//! Machine-readable and plain-text reports. Every number in the JSON form is
//! a decimal string: rationals as "p/q", floats in their shortest
//! round-tripping form.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use crate::calculus::{DiffOrder, WebSpec};
use crate::expr::Expr;
use crate::invariants::{Evidence, InvariantReport, Verdict, WebCheck, WebVerdict};
use crate::linearizer::LinearizationResult;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WebJson {
    pub f: String,
    pub g: Vec<String>,
}

impl WebJson {
    pub fn of(web: &WebSpec) -> WebJson {
        WebJson {
            f: web.f.to_string(),
            g: web.gs.iter().map(Expr::to_string).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceJson {
    pub point: [String; 2],
    pub params: BTreeMap<String, String>,
    pub residual: String,
    pub mode: &'static str,
}

impl EvidenceJson {
    pub fn of(e: &Evidence) -> EvidenceJson {
        EvidenceJson {
            point: [e.point.x.to_string(), e.point.y.to_string()],
            params: e
                .point
                .params
                .iter()
                .map(|(k, v)| (k.clone(), v.to_string()))
                .collect(),
            residual: e.residual.to_decimal(),
            mode: e.residual.mode_name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantJson {
    pub name: String,
    pub verdict: Verdict,
    pub dag_size: usize,
    pub evidence: Vec<EvidenceJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<DiffOrder>,
}

impl InvariantJson {
    pub fn of(r: &InvariantReport) -> InvariantJson {
        InvariantJson {
            name: r.name.to_string(),
            verdict: r.verdict,
            dag_size: r.dag_size,
            evidence: r.evidence.iter().map(EvidenceJson::of).collect(),
            reason: r.reason.clone(),
            order: r.order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoliationJson {
    pub name: String,
    pub residual: String,
    pub leaves: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearizationJson {
    pub grid: [usize; 2],
    pub rectangle: [String; 4],
    pub base: [String; 2],
    pub lambda0: [String; 2],
    pub flatness_residual: String,
    pub path_independence_residual: String,
    pub closedness_residual: String,
    pub min_jacobian: String,
    pub straightness: Vec<FoliationJson>,
}

pub fn num(v: f64) -> String {
    format!("{v:e}")
}

impl LinearizationJson {
    pub fn of(r: &LinearizationResult) -> LinearizationJson {
        let g = &r.grid;
        LinearizationJson {
            grid: [g.nx, g.ny],
            rectangle: [num(g.x0), num(g.x1), num(g.y0), num(g.y1)],
            base: [num(r.base.0), num(r.base.1)],
            lambda0: [num(r.lambda0.0), num(r.lambda0.1)],
            flatness_residual: num(r.flatness_residual),
            path_independence_residual: num(r.path_independence_residual),
            closedness_residual: num(r.closedness_residual),
            min_jacobian: num(r.min_jacobian),
            straightness: r
                .straightness
                .iter()
                .map(|s| FoliationJson {
                    name: s.name.clone(),
                    residual: num(s.residual),
                    leaves: s.leaves,
                    skipped: s.skipped,
                })
                .collect(),
        }
    }
}

/// The top-level document printed by `--json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub web: WebJson,
    pub config: serde_json::Value,
    pub invariants: Vec<InvariantJson>,
    pub verdict: WebVerdict,
    pub linearization: Option<LinearizationJson>,
}

impl Report {
    pub fn new(web: &WebSpec, config: serde_json::Value, check: &WebCheck) -> Report {
        Report {
            web: WebJson::of(web),
            config,
            invariants: check.reports.iter().map(InvariantJson::of).collect(),
            verdict: check.verdict,
            linearization: None,
        }
    }

    pub fn with_linearization(mut self, r: &LinearizationResult) -> Report {
        self.linearization = Some(LinearizationJson::of(r));
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One line per invariant: name, verdict, DAG size and, for a nonzero
/// result, the witness point.
pub fn invariant_summary(r: &InvariantReport) -> String {
    let mut line = format!(
        "{:<4} {:<12} dag={}",
        r.name.to_string(),
        r.verdict.to_string(),
        r.dag_size
    );
    if let Some(w) = r.witness() {
        let _ = write!(
            line,
            "  witness (x, y) = ({}, {}){}  residual = {}",
            w.point.x,
            w.point.y,
            params_suffix(&w.point.params),
            w.residual.to_decimal()
        );
    }
    if let Some(reason) = &r.reason {
        let _ = write!(line, "  ({reason})");
    }
    line
}

fn params_suffix(params: &BTreeMap<String, rug::Rational>) -> String {
    if params.is_empty() {
        return String::new();
    }
    let parts: Vec<String> = params.iter().map(|(k, v)| format!("{k} = {v}")).collect();
    format!(" [{}]", parts.join(", "))
}

/// Evidence table for one invariant.
pub fn evidence_table(r: &InvariantReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "  {:<14} {:<14} {:<6} residual", "x", "y", "mode");
    for e in &r.evidence {
        let _ = writeln!(
            out,
            "  {:<14} {:<14} {:<6} {}{}",
            e.point.x.to_string(),
            e.point.y.to_string(),
            e.residual.mode_name(),
            e.residual.to_decimal(),
            params_suffix(&e.point.params)
        );
    }
    out
}

pub fn linearization_table(r: &LinearizationResult) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "grid {}x{}  base ({:.6}, {:.6})  lambda0 ({}, {})",
        r.grid.nx, r.grid.ny, r.base.0, r.base.1, r.lambda0.0, r.lambda0.1
    );
    let _ = writeln!(
        out,
        "flatness residual          {:.3e}",
        r.flatness_residual
    );
    let _ = writeln!(
        out,
        "path independence residual {:.3e}",
        r.path_independence_residual
    );
    let _ = writeln!(
        out,
        "coframe closedness         {:.3e}",
        r.closedness_residual
    );
    let _ = writeln!(out, "min |jacobian|             {:.3e}", r.min_jacobian);
    let _ = writeln!(out, "straightness:");
    for s in &r.straightness {
        let _ = write!(out, "  {:<4} {:.3e}", s.name, s.residual);
        if s.skipped > 0 {
            let _ = write!(
                out,
                "  ({} of {} leaves skipped)",
                s.skipped,
                s.skipped + s.leaves
            );
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::case;
    use crate::invariants::{check_dweb, ZeroTestPolicy};

    #[test]
    fn json_has_the_stable_keys() {
        let web = case(7).unwrap().web();
        let check = check_dweb(&web, &ZeroTestPolicy::default()).unwrap();
        let report = Report::new(&web, serde_json::json!({"seed": "1"}), &check);
        let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        for key in ["web", "config", "invariants", "verdict", "linearization"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["verdict"], "NO");
        assert!(v["linearization"].is_null());
        let inv = &v["invariants"][0];
        assert!(inv["dag_size"].is_u64());
        let ev = &inv["evidence"][0];
        assert!(ev["point"][0].is_string());
        assert_eq!(ev["mode"], "exact");
        assert!(ev["residual"].is_string());
    }

    #[test]
    fn witness_is_printed_for_nonzero() {
        let web = case(7).unwrap().web();
        let check = check_dweb(&web, &ZeroTestPolicy::default()).unwrap();
        let j = check
            .reports
            .iter()
            .find(|r| r.verdict == Verdict::Nonzero)
            .unwrap();
        assert!(invariant_summary(j).contains("witness"));
    }
}
