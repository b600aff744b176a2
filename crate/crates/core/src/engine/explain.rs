//! Human-readable diagnoses of violation reports.

use std::fmt::Write;

use crate::constraint::{CheckPoint, Verdict, ViolationReport};
use crate::value::Value;

fn value_text(v: &Value) -> String {
    match v {
        Value::Str(s) if s.len() == 64 && s.bytes().all(|b| b.is_ascii_hexdigit()) => format!("{}…", &s[..12]),
        other => other.to_string(),
    }
}

fn opening(r: &ViolationReport) -> String {
    let when = match r.at {
        CheckPoint::PreExecution => "before execution".to_string(),
        CheckPoint::Step(s) => match r.check_time {
            Some(t) => format!("at step {s} ({t}-check)"),
            None => format!("at step {s}"),
        },
        CheckPoint::Posthoc => "after the run, from preserved artifacts".to_string(),
    };
    match r.verdict {
        Verdict::Violated => format!("Constraint `{}` was violated {when}.", r.constraint),
        Verdict::Warned => format!("Constraint `{}` raised a warning {when} (run continued).", r.constraint),
        Verdict::Recovered => format!("Constraint `{}` failed {when} and was recovered.", r.constraint),
        Verdict::Unevaluable => format!("Constraint `{}` could not be evaluated {when}.", r.constraint),
    }
}

/// One paragraph describing a report.
pub fn explain_one(r: &ViolationReport) -> String {
    let m = &r.metadata;
    let entry = r.entry.entry();
    let mut s = opening(r);
    let _ = write!(s, " It requires `{}`", r.formula);
    match &r.observed {
        Some(v) => {
            let _ = write!(s, "; observed {}, bound {}.", value_text(v), value_text(&r.bound));
        }
        None => {
            let _ = write!(s, "; no value was observed.");
        }
    }
    let implicated = r.implicated();
    if !implicated.is_empty() {
        let _ = write!(s, " Implicated: {}.", implicated.join(", "));
    }
    if let Some(a) = r.attempt {
        let _ = write!(s, " Attempt {a}.");
    }
    if let Some(d) = &r.detail {
        let _ = write!(s, " Detail: {d}.");
    }
    let times: Vec<String> = m.time_of_check.iter().map(|t| t.to_string()).collect();
    let comps: Vec<String> = m.component.iter().map(|c| c.to_string()).collect();
    let _ = write!(
        s,
        " Catalog entry {}: severity {}, affects the {}, type {}, checked {} ({}), component {}, recoverable {}.",
        entry.name,
        m.severity,
        m.affected_object,
        m.vc_type,
        times.join("/"),
        m.discreteness(),
        comps.join("/"),
        m.recoverable,
    );
    for rec in &r.recovery {
        let _ = write!(s, " Recovery: {} ({}).", rec.action, rec.outcome);
    }
    let _ = write!(s, " Suggested fix: {}.", entry.remediation);
    s
}

/// A diagnosis of every report, one paragraph each.
pub fn explain(reports: &[ViolationReport]) -> String {
    if reports.is_empty() {
        return "No violations.\n".to_string();
    }
    let mut out = String::new();
    for r in reports {
        out.push_str(&explain_one(r));
        out.push_str("\n\n");
    }
    out.pop();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{
        instantiate_catalog, CatalogName, CatalogParams, CheckTime, Evaluation, PropertyName, Severity, Status,
    };
    use crate::value::ComparisonOp;

    fn report(entry: CatalogName, params: CatalogParams, observed: Value, at: CheckPoint) -> ViolationReport {
        let vc = instantiate_catalog(entry, params).unwrap();
        let e = Evaluation {
            status: Status::Violated,
            observed: Some(observed),
            task: vc.task.clone(),
            node: None,
            file: None,
            detail: None,
            check_time: None,
        };
        ViolationReport::from_evaluation(&vc, &e, at, vc.metadata.time_of_check.first().copied(), 0.0).unwrap()
    }

    #[test]
    fn soft_warnings_say_the_run_continued() {
        let r = report(
            CatalogName::FileFileProperties,
            CatalogParams {
                property: Some(PropertyName::FileSizeBytes),
                target: Some(crate::constraint::Target::Label {
                    label: "o".into(),
                    direction: Some(crate::constraint::Direction::Outgoing),
                }),
                op: Some(ComparisonOp::Gt),
                value: Some(Value::Int(0)),
                severity: Some(Severity::Soft),
                ..CatalogParams::for_task("t")
            },
            Value::Int(0),
            CheckPoint::Step(1),
        );
        let text = explain(&[r]);
        assert!(text.contains("warning") && text.contains("run continued"), "{text}");
        assert!(text.contains("severity soft"));
    }

    #[test]
    fn timeout_names_task_and_attempt() {
        let mut r = report(
            CatalogName::TaskEndsWithinLimits,
            CatalogParams {
                op: Some(ComparisonOp::Lt),
                value: Some(Value::Decimal(60.0)),
                ..CatalogParams::for_task("align")
            },
            Value::Decimal(60.0),
            CheckPoint::Step(2),
        );
        r.attempt = Some(2);
        let text = explain_one(&r);
        assert!(text.contains("task `align`") && text.contains("Attempt 2"), "{text}");
        assert!(text.contains(CheckTime::During.to_string().as_str()));
        assert!(text.contains("raise the runtime limit"));
    }

    #[test]
    fn empty_input() {
        assert_eq!(explain(&[]), "No violations.\n");
    }
}
