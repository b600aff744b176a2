use std::fmt::Write;

use super::{Atom, ContractClause, FailAction, TaskBlock, WorkflowDocument};
use crate::constraint::{PropertyName, Quantifier, Severity};
use crate::sim::SimProfile;
use crate::value::Value;

/// Prints a document in canonical form; `parse(serialize(d)) == d`.
pub fn serialize(doc: &WorkflowDocument) -> String {
    let mut out = String::new();
    writeln!(out, "workflow {} {{", word(&doc.name)).unwrap();
    for p in &doc.params {
        write!(out, "  param {} = {}", word(&p.name), literal(&p.default)).unwrap();
        if !p.range.is_empty() {
            let parts: Vec<String> = p.range.iter().map(|(op, v)| format!("{op} {}", literal(v))).collect();
            write!(out, " ({})", parts.join(", ")).unwrap();
        }
        out.push('\n');
    }
    if !doc.requires.is_empty() {
        out.push_str("  requires {\n");
        for a in &doc.requires {
            writeln!(out, "    {}", atom(a)).unwrap();
        }
        out.push_str("  }\n");
    }
    for t in &doc.tasks {
        task(&mut out, t);
    }
    for d in &doc.deps {
        writeln!(
            out,
            "  dep {}: {} -> {}",
            word(d.label.as_str()),
            word(d.from.as_str()),
            word(d.to.as_str())
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

fn task(out: &mut String, t: &TaskBlock) {
    writeln!(out, "  task {} {{", word(t.id.as_str())).unwrap();
    if let Some(c) = &t.command {
        writeln!(out, "    run: {}", quote(c)).unwrap();
    }
    let list = |ls: &[crate::ids::LabelId]| ls.iter().map(|l| word(l.as_str())).collect::<Vec<_>>().join(", ");
    if !t.inputs.is_empty() {
        writeln!(out, "    inputs: [{}]", list(&t.inputs)).unwrap();
    }
    if !t.outputs.is_empty() {
        writeln!(out, "    outputs: [{}]", list(&t.outputs)).unwrap();
    }
    let r = &t.resources;
    if !r.is_zero() {
        let mut parts = Vec::new();
        if r.memory_bytes > 0 {
            parts.push(format!("memory_bytes: {}", r.memory_bytes));
        }
        if r.cpu_cores > 0 {
            parts.push(format!("cpu_cores: {}", r.cpu_cores));
        }
        if r.gpu_count > 0 {
            parts.push(format!("gpu_count: {}", r.gpu_count));
        }
        if r.disk_bytes > 0 {
            parts.push(format!("disk_bytes: {}", r.disk_bytes));
        }
        writeln!(out, "    resources {{ {} }}", parts.join(" ")).unwrap();
    }
    if let Some(m) = t.max_runtime {
        writeln!(out, "    max_runtime: {}", decimal(m)).unwrap();
    }
    if !t.params.is_empty() {
        let parts: Vec<String> = t.params.iter().map(|(k, v)| format!("{}: {}", word(k), literal(v))).collect();
        writeln!(out, "    params {{ {} }}", parts.join(" ")).unwrap();
    }
    if let Some(s) = &t.sim {
        sim(out, s);
    }
    for (kw, block) in [("require", &t.require), ("promise", &t.promise)] {
        let Some(clauses) = block else { continue };
        if clauses.is_empty() {
            writeln!(out, "    {kw} {{}}").unwrap();
            continue;
        }
        writeln!(out, "    {kw} {{").unwrap();
        for c in clauses {
            writeln!(out, "      {}", clause(c)).unwrap();
        }
        out.push_str("    }\n");
    }
    out.push_str("  }\n");
}

fn sim(out: &mut String, s: &SimProfile) {
    out.push_str("    sim {\n");
    writeln!(out, "      runtime: {}", decimal(s.nominal_runtime_s)).unwrap();
    writeln!(out, "      memory: {}", s.memory_use_bytes).unwrap();
    if s.exit_code != 0 {
        writeln!(out, "      exit_code: {}", s.exit_code).unwrap();
    }
    if let Some(e) = &s.stderr {
        writeln!(out, "      stderr: {}", quote(e)).unwrap();
    }
    if s.mutates_inputs {
        out.push_str("      mutates_inputs\n");
    }
    for o in &s.outputs {
        let mut parts = vec![format!("size: {}", o.size_bytes)];
        if let Some(c) = &o.content {
            parts.push(format!("content: {}", word(c)));
        }
        for (flag, on) in [("corrupt", o.corrupt), ("empty", o.empty), ("missing", o.missing)] {
            if on {
                parts.push(flag.to_string());
            }
        }
        writeln!(out, "      output {} {{ {} }}", word(o.path.as_str()), parts.join(" ")).unwrap();
    }
    out.push_str("    }\n");
}

pub(crate) fn clause(c: &ContractClause) -> String {
    match c {
        ContractClause::Atom(a) => atom(a),
        ContractClause::ForAll { binder, pattern, body } => {
            format!("FOR_ALL({}, ITER({})) {{ {} }}", quote(binder), quote(pattern), clause(body))
        }
        ContractClause::IfThen { condition, action } => format!(
            "IF_THEN({}, {})",
            clause(condition),
            match action {
                FailAction::Fail => "fail",
                FailAction::Warn => "warn",
            }
        ),
        ContractClause::ShellProbe { command } => format!("COND({})", quote(command)),
        ContractClause::Builtin(b) => format!("{}()", b.keyword()),
    }
}

pub(crate) fn atom(a: &Atom) -> String {
    let mut s = format!("{}.{} {} {}", a.target, property(&a.property), a.op, literal(&a.value));
    match a.quantifier {
        Some(Quantifier::AllNodes) => s.push_str(" all_nodes"),
        Some(Quantifier::AtLeastOneNode) => s.push_str(" at_least_one_node"),
        None => {}
    }
    match a.severity {
        Some(Severity::Soft) => s.push_str(" soft"),
        Some(Severity::Hard) => s.push_str(" hard"),
        _ => {}
    }
    s
}

fn property(p: &PropertyName) -> String {
    match p {
        PropertyName::HasExecutable(a) => format!("has_executable({})", word(a)),
        PropertyName::LicenseAvailable(a) => format!("license_available({})", word(a)),
        PropertyName::ConfigParam(a) => format!("config_param({})", word(a)),
        PropertyName::RelationHolds(a) => format!("relation_holds({})", word(a)),
        other => other.to_string(),
    }
}

fn decimal(d: f64) -> String {
    format!("{d:?}")
}

pub(crate) fn literal(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Decimal(d) => decimal(*d),
        Value::Bool(b) => b.to_string(),
        Value::Str(s) => quote(s),
    }
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// A bare identifier when possible, else a quoted string.
pub(crate) fn word(s: &str) -> String {
    let mut chars = s.chars();
    let ident = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ident {
        s.to_string()
    } else {
        quote(s)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Builtin};
    use super::*;

    #[test]
    fn empty_workflow_round_trips() {
        let doc = WorkflowDocument::new("empty");
        assert_eq!(parse(&serialize(&doc)).unwrap(), doc);
    }

    #[test]
    fn quoting() {
        assert_eq!(word("genome.fa"), "\"genome.fa\"");
        assert_eq!(word("align_2"), "align_2");
        assert_eq!(quote("a\"b\\c"), r#""a\"b\\c""#);
    }

    #[test]
    fn clause_text() {
        let c = ContractClause::IfThen {
            condition: Box::new(ContractClause::ShellProbe { command: "test -s $f".into() }),
            action: FailAction::Warn,
        };
        assert_eq!(clause(&c), "IF_THEN(COND(\"test -s $f\"), warn)");
        assert_eq!(clause(&ContractClause::Builtin(Builtin::InputsNotChanged)), "INPUTS_NOT_CHANGED()");
    }
}
