//! JSON, JSON-lines and CSV renderings of results.

use aop_core::metrics::{MetricsReport, FIELDS};
use aop_core::tta::{AopOutcome, TtaConfig, TtaRecord, TtaTrace};
use aop_core::{AopResult, StageError};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::ToolError;

/// Serializes through `serde_json::Value`, so object keys come out sorted
/// and re-serializing parsed output reproduces it exactly.
pub fn to_value<T: Serialize>(v: &T) -> Value {
    // Every type passed here has string keys and finite-or-null numbers.
    serde_json::to_value(v).expect("report types serialize to JSON")
}

pub fn to_json_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(&to_value(v)).expect("JSON values always render");
    s.push('\n');
    s
}

pub fn aop_json(res: &AopResult) -> Value {
    to_value(res)
}

pub fn stage_error_json(err: &StageError) -> Value {
    json!({ "error": { "stage": err.stage.name(), "kind": err.error.kind(), "message": err.error.to_string() } })
}

pub fn tool_error_json(err: &ToolError) -> Value {
    json!({ "error": { "stage": Value::Null, "kind": err.kind(), "message": err.to_string() } })
}

pub fn outcome_json(res: &Result<AopResult, StageError>) -> Value {
    match res {
        Ok(r) => aop_json(r),
        Err(e) => stage_error_json(e),
    }
}

fn image_json(o: &AopOutcome) -> Value {
    json!({
        "c_aop": o.c_aop,
        "aop_deg": o.aop_deg,
        "loss": o.loss,
        "failure": o.failure.as_ref().map(|e| stage_error_json(e)["error"].clone()),
    })
}

/// One trace record; `weighted` holds each loss multiplied by its weight.
pub fn record_json(rec: &TtaRecord, config: &TtaConfig) -> Value {
    let l = &rec.losses;
    json!({
        "step": rec.step,
        "l_ent": l.l_ent,
        "l_tv": l.l_tv,
        "l_aop": l.l_aop,
        "l_tta": l.l_tta,
        "weighted": {
            "ent": config.lambda_ent * l.l_ent,
            "tv": config.lambda_tv * l.l_tv,
            "aop": config.lambda_aop * l.l_aop,
        },
        "images": l.images.iter().map(image_json).collect::<Vec<_>>(),
        "grad": rec.grad.0.to_vec(),
    })
}

/// One JSON object per step, newline-terminated.
pub fn trace_jsonl(trace: &TtaTrace) -> String {
    let mut out = String::new();
    for rec in &trace.records {
        out.push_str(&record_json(rec, &trace.config).to_string());
        out.push('\n');
    }
    out
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per case, then a `mean` row and a `std` row. Missing values
/// are empty cells.
pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from("case_id");
    for f in FIELDS {
        out.push(',');
        out.push_str(f);
    }
    out.push('\n');
    for case in &report.cases {
        out.push_str(&csv_field(&case.case_id));
        for v in case.values() {
            out.push(',');
            out.push_str(&cell(v));
        }
        out.push('\n');
    }
    for (label, pick) in [("mean", 0), ("std", 1)] {
        out.push_str(label);
        for s in &report.summary {
            out.push(',');
            out.push_str(&cell(if pick == 0 { s.mean } else { s.std }));
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use aop_core::metrics::{aggregate, CaseMetrics};
    use aop_core::{Error, Stage};

    #[test]
    fn stage_errors_carry_stage_and_kind() {
        let v = stage_error_json(&StageError::new(Stage::LargestComponent, Error::MissingStructure(aop_core::Class::Fh)));
        assert_eq!(v["error"]["stage"], "largest_component");
        assert_eq!(v["error"]["kind"], "MissingStructure");
        assert!(v["error"]["message"].as_str().unwrap().contains("FH") || v["error"]["message"].as_str().unwrap().contains("fh"));
    }

    #[test]
    fn csv_has_cases_then_summary() {
        let case = |id: &str, d: f64| CaseMetrics {
            case_id: id.into(),
            dice_psfh: Some(d),
            dice_ps: Some(d),
            dice_fh: None,
            asd_psfh: Some(0.0),
            asd_ps: None,
            asd_fh: None,
            hd100_psfh: None,
            hd100_ps: None,
            hd100_fh: None,
            aop_abs_err: Some(1.5),
        };
        let report = aggregate(vec![case("a", 1.0), case("b,c", 0.5)]).unwrap();
        let csv = metrics_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("case_id,dice_psfh,"));
        assert_eq!(lines[1], "a,1,1,,0,,,,,,1.5");
        assert!(lines[2].starts_with("\"b,c\",0.5,"));
        assert_eq!(lines[3], "mean,0.75,0.75,,0,,,,,,1.5");
        assert_eq!(lines[4], "std,0.25,0.25,,0,,,,,,0");
    }
}
