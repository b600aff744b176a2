use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{Atom, AtomTarget, Builtin, ContractClause, Span, WorkflowDocument};
use crate::constraint::PropertyName;
use crate::ids::TaskId;
use crate::value::ComparisonOp;

/// A suspicious but legal construct.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LintWarning {
    pub task: Option<TaskId>,
    pub span: Span,
    pub message: String,
}

impl fmt::Display for LintWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: warning: ", self.span)?;
        if let Some(t) = &self.task {
            write!(f, "task `{t}`: ")?;
        }
        f.write_str(&self.message)
    }
}

/// How an atom's comparison relates to the property's smallest value.
fn bound_check(a: &Atom) -> Option<&'static str> {
    let lb = a.property.info().lower_bound?;
    let v = a.value.as_f64()?;
    match a.op {
        ComparisonOp::Ge if v <= lb => Some("always holds"),
        ComparisonOp::Gt if v < lb => Some("always holds"),
        ComparisonOp::Lt if v <= lb => Some("can never hold"),
        ComparisonOp::Le | ComparisonOp::Eq if v < lb => Some("can never hold"),
        _ => None,
    }
}

/// Properties only known once the task has run.
fn post_run(p: &PropertyName) -> bool {
    matches!(
        p,
        PropertyName::ExitCode | PropertyName::RuntimeSeconds | PropertyName::LoggedNoError | PropertyName::InputsUnchanged
    )
}

/// Flags tautologies, contradictions, requirements on outputs, post-run
/// properties in `require`, and outputs nobody reads.
pub fn lint(doc: &WorkflowDocument) -> Vec<LintWarning> {
    let mut out = Vec::new();
    for a in &doc.requires {
        if let Some(why) = bound_check(a) {
            out.push(LintWarning {
                task: None,
                span: doc.span,
                message: format!("requirement `{}` {why}", super::serialize::atom(a)),
            });
        }
    }

    let consumed: BTreeSet<_> = doc
        .tasks
        .iter()
        .flat_map(|t| t.inputs.iter())
        .chain(doc.deps.iter().map(|d| &d.label))
        .collect();

    for t in &doc.tasks {
        let mut warn = |message: String| {
            out.push(LintWarning {
                task: Some(t.id.clone()),
                span: t.span,
                message,
            })
        };
        let blocks = [("require", t.require.as_deref()), ("promise", t.promise.as_deref())];
        for (kw, clauses) in blocks {
            for c in clauses.unwrap_or_default() {
                for a in c.atoms() {
                    let text = super::serialize::atom(a);
                    if let Some(why) = bound_check(a) {
                        warn(format!("{kw} `{text}` {why}"));
                    }
                    if kw == "require" {
                        if let AtomTarget::Output(l) = &a.target {
                            warn(format!("require `{text}` reads output `{l}`, which does not exist before the task runs"));
                        } else if post_run(&a.property) {
                            warn(format!("require `{text}` reads `{}`, which is only known after the task runs", a.property));
                        }
                    }
                }
                if kw == "require" {
                    if let ContractClause::Builtin(b @ Builtin::CommandLoggedNoError) = c {
                        warn(format!("require `{}()` is only known after the task runs", b.keyword()));
                    }
                }
            }
        }
        let dangling: Vec<_> = t.outputs.iter().filter(|l| !consumed.contains(l)).collect();
        if dangling.len() == 1 && t.outputs.len() > 1 {
            warn(format!("output `{}` is not read by any task", dangling[0]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn messages(src: &str) -> Vec<String> {
        lint(&parse(src).unwrap()).into_iter().map(|w| w.message).collect()
    }

    #[test]
    fn tautology_and_contradiction() {
        let m = messages("workflow w { task t { promise { task.exit_code >= 0  output(o).file_size_bytes < 0 } outputs: [o] } }");
        assert!(m[0].contains("always holds"), "{m:?}");
        assert!(m[1].contains("can never hold"), "{m:?}");
    }

    #[test]
    fn require_on_output_and_post_run_property() {
        let m = messages("workflow w { task t { outputs: [o] require { output(o).file_exists = true  task.exit_code = 0 } } }");
        assert_eq!(m.len(), 2, "{m:?}");
        assert!(m[0].contains("reads output `o`"));
        assert!(m[1].contains("only known after"));
    }

    #[test]
    fn dangling_output() {
        let m = messages("workflow w { task a { outputs: [x, y] } task b { inputs: [x] } }");
        assert_eq!(m, vec!["output `y` is not read by any task"]);
    }

    #[test]
    fn clean_document() {
        assert!(messages("workflow w { task t { require { node.memory_bytes >= 1Gi } } }").is_empty());
    }
}
