//! JSON shapes for traces, run summaries and verification reports.
//!
//! Everything outside a `metadata` field is a pure function of the inputs
//! and the seed.

use serde::Serialize;
use serde_json::{Map, Value};
use tucker_core::search::{RunOutcome, TraceRecord};
use tucker_core::verify::LemmaReport;
use tucker_core::Tensor3;

use crate::config::RunConfig;

/// One line of `trace.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceLine {
    pub iteration: usize,
    pub step: String,
    pub f: f64,
    pub loss: f64,
    pub reg: f64,
    pub grad_norm: Option<f64>,
    pub min_curvature: Option<f64>,
    pub step_size: f64,
    pub improvement: f64,
    pub grad_evals: usize,
    pub seed: u64,
}

impl From<&TraceRecord> for TraceLine {
    fn from(r: &TraceRecord) -> Self {
        Self {
            iteration: r.iteration,
            step: r.step.label(),
            f: r.f,
            loss: r.loss,
            reg: r.reg,
            grad_norm: r.grad_norm,
            min_curvature: r.min_curvature,
            step_size: r.step_size,
            improvement: r.improvement,
            grad_evals: r.grad_evals,
            seed: r.seed,
        }
    }
}

/// JSON-lines encoding of a trace, one compact object per line.
pub fn trace_jsonl(records: &[TraceRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, &TraceLine::from(r)).expect("serializable");
        out.push(b'\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedDoc {
    pub lambda: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub sigma: f64,
    pub min_improvement: f64,
    pub samples_per_block: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub status: &'static str,
    pub error: Option<String>,
    pub f: f64,
    pub loss: f64,
    pub reg: f64,
    pub phi: f64,
    pub lambda: f64,
    /// Outer iterations (stationary point searches).
    pub iterations: usize,
    pub trace_records: usize,
    pub grad_evals: usize,
    pub seed: u64,
    pub restart: usize,
    pub dims: [usize; 3],
    pub rank: usize,
    pub k_max: f64,
    pub params: ResolvedDoc,
    pub config: RunConfig,
    pub metadata: Value,
}

impl Summary {
    pub fn new(out: &RunOutcome, t: &Tensor3, config: &RunConfig, restart: usize, seed: u64, wall_seconds: f64) -> Self {
        let p = &out.params;
        let mut metadata = Map::new();
        metadata.insert("wall_seconds".into(), Value::from(wall_seconds));
        metadata.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
        Self {
            status: out.status.label(),
            error: out.error.as_ref().map(|e| e.to_string()),
            f: out.report.f,
            loss: out.report.loss,
            reg: out.report.reg,
            phi: out.report.phi,
            lambda: out.report.lambda,
            iterations: out.outer_iterations,
            trace_records: out.trace.records.len(),
            grad_evals: out.grad_evals,
            seed,
            restart,
            dims: t.dims(),
            rank: out.point.r(),
            k_max: out.k_max,
            params: ResolvedDoc {
                lambda: p.lambda,
                tau1: p.tau1,
                tau2: p.tau2,
                sigma: p.sigma,
                min_improvement: p.min_improvement,
                samples_per_block: p.samples_per_block,
            },
            config: config.clone(),
            metadata: Value::Object(metadata),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckDoc {
    pub id: String,
    pub passed: bool,
    pub trials: usize,
    pub failures: usize,
    /// `null` when not finite.
    pub worst_margin: f64,
    pub tolerance: f64,
    pub metrics: Map<String, Value>,
}

impl From<&LemmaReport> for CheckDoc {
    fn from(r: &LemmaReport) -> Self {
        Self {
            id: r.id.clone(),
            passed: r.passed,
            trials: r.trials,
            failures: r.failures,
            worst_margin: r.worst_margin,
            tolerance: r.tolerance,
            metrics: r.metrics.iter().map(|(k, v)| (k.clone(), Value::from(*v))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckDoc>,
    pub metadata: Value,
}

impl VerifyReport {
    pub fn new(seed: u64, reports: &[LemmaReport], wall_seconds: f64) -> Self {
        let mut metadata = Map::new();
        metadata.insert("wall_seconds".into(), Value::from(wall_seconds));
        Self {
            seed,
            passed: reports.iter().all(|r| r.passed),
            checks: reports.iter().map(CheckDoc::from).collect(),
            metadata: Value::Object(metadata),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tucker_core::search::StepKind;

    #[test]
    fn trace_line_schema() {
        let rec = TraceRecord {
            iteration: 4,
            f: 0.5,
            loss: 0.25,
            reg: 0.0,
            grad_norm: None,
            min_curvature: Some(-1e-3),
            step: StepKind::Sampled([2, 1, 2]),
            step_size: 0.125,
            improvement: 1e-4,
            grad_evals: 12,
            seed: 7,
        };
        let text = String::from_utf8(trace_jsonl(&[rec.clone(), rec])).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let v: Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(v["step"], "sampled(2,1,2)");
        assert_eq!(v["grad_norm"], Value::Null);
        assert_eq!(v["iteration"], 4);
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys.len(), 11);
    }

    #[test]
    fn non_finite_margin_serializes_as_null() {
        let rep = LemmaReport {
            id: "x".into(),
            trials: 1,
            failures: 1,
            worst_margin: f64::NAN,
            tolerance: 0.0,
            passed: false,
            metrics: vec![("rate".into(), 0.5)],
        };
        let doc = VerifyReport::new(1, &[rep], 0.0);
        let v = serde_json::to_value(&doc).unwrap();
        assert_eq!(v["checks"][0]["worst_margin"], Value::Null);
        assert_eq!(v["checks"][0]["metrics"]["rate"], 0.5);
        assert_eq!(v["passed"], false);
    }
}
