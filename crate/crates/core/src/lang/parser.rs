use std::collections::BTreeSet;

use thiserror::Error;

use super::lexer::{tokenize, Span, Tok};
use super::{
    Atom, AtomTarget, Builtin, ContractClause, DepDecl, FailAction, ParamDef, TaskBlock,
    WorkflowDocument,
};
use crate::constraint::{PropertyName, Quantifier, Severity};
use crate::sim::{SimOutput, SimProfile};
use crate::value::{ComparisonOp, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: Span,
    pub message: String,
}

impl ParseError {
    /// `file:line:col: message`.
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{}:{}: {}", self.span.line, self.span.col, self.message)
    }
}

const COMBINATORS: &[&str] = &[
    "FOR_ALL",
    "ITER",
    "IF_THEN",
    "COND",
    "COMMAND_LOGGED_NO_ERROR",
    "INPUTS_NOT_CHANGED",
];

/// Parses a workflow document.
pub fn parse(text: &str) -> Result<WorkflowDocument, ParseError> {
    let toks = tokenize(text).map_err(|e| ParseError {
        span: e.span,
        message: e.message,
    })?;
    let mut p = Parser { toks, pos: 0 };
    let doc = p.document()?;
    p.expect(&Tok::Eof)?;
    Ok(doc)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn next(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError {
            span: self.span(),
            message: message.into(),
        })
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.error(format!("expected {wanted}, found {}", self.peek()))
    }

    fn expect(&mut self, t: &Tok) -> PResult<()> {
        if self.peek() == t {
            self.next();
            Ok(())
        } else {
            self.unexpected(&t.to_string())
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.next();
            true
        } else {
            false
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    /// An identifier or a quoted string.
    fn word(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) | Tok::Str(s) => {
                self.next();
                Ok(s)
            }
            _ => self.unexpected(what),
        }
    }

    fn string(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.next();
                Ok(s)
            }
            _ => self.unexpected(what),
        }
    }

    fn literal(&mut self) -> PResult<Value> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.next();
                Ok(v)
            }
            Tok::Str(s) => {
                self.next();
                Ok(Value::Str(s))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.next();
                Ok(Value::Bool(s == "true"))
            }
            _ => self.unexpected("a constant"),
        }
    }

    fn op(&mut self) -> PResult<ComparisonOp> {
        match self.peek().clone() {
            Tok::Op(o) => {
                self.next();
                Ok(ComparisonOp::from_symbol(o).expect("lexer only yields known operators"))
            }
            _ => self.unexpected("a comparison operator"),
        }
    }

    fn separator(&mut self) {
        while self.eat(&Tok::Semi) || self.eat(&Tok::Comma) {}
    }

    fn document(&mut self) -> PResult<WorkflowDocument> {
        let span = self.span();
        self.expect_kw("workflow")?;
        let name = self.word("a workflow name")?;
        let mut doc = WorkflowDocument::new(name);
        doc.span = span;
        self.expect(&Tok::LBrace)?;
        let mut task_ids = BTreeSet::new();
        loop {
            self.separator();
            if self.eat(&Tok::RBrace) {
                break;
            }
            let span = self.span();
            match self.peek().clone() {
                Tok::Ident(kw) if kw == "param" => {
                    let p = self.param()?;
                    if doc.params.iter().any(|q| q.name == p.name) {
                        return Err(ParseError {
                            span,
                            message: format!("duplicate parameter `{}`", p.name),
                        });
                    }
                    doc.params.push(p);
                }
                Tok::Ident(kw) if kw == "requires" => {
                    self.next();
                    self.expect(&Tok::LBrace)?;
                    loop {
                        self.separator();
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                        doc.requires.push(self.atom()?);
                    }
                }
                Tok::Ident(kw) if kw == "task" => {
                    let t = self.task()?;
                    if !task_ids.insert(t.id.clone()) {
                        return Err(ParseError {
                            span,
                            message: format!("duplicate task `{}`", t.id),
                        });
                    }
                    doc.tasks.push(t);
                }
                Tok::Ident(kw) if kw == "dep" => {
                    self.next();
                    let label = self.word("a label")?;
                    self.expect(&Tok::Colon)?;
                    let from = self.word("a task id")?;
                    self.expect(&Tok::Arrow)?;
                    let to = self.word("a task id")?;
                    doc.deps.push(DepDecl {
                        label: label.into(),
                        from: from.into(),
                        to: to.into(),
                        span,
                    });
                }
                _ => return self.unexpected("`param`, `requires`, `task`, `dep` or `}`"),
            }
        }
        Ok(doc)
    }

    fn param(&mut self) -> PResult<ParamDef> {
        let span = self.span();
        self.expect_kw("param")?;
        let name = self.word("a parameter name")?;
        self.expect(&Tok::Op("="))?;
        let default = self.literal()?;
        let mut range = Vec::new();
        if self.eat(&Tok::LParen) {
            loop {
                let op = self.op()?;
                let v = self.literal()?;
                range.push((op, v));
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(&Tok::Comma)?;
            }
        }
        for (op, bound) in &range {
            if op.apply(&default, bound) != Some(true) {
                return Err(ParseError {
                    span,
                    message: format!("default {default} of parameter `{name}` violates its range `{op} {bound}`"),
                });
            }
        }
        Ok(ParamDef {
            name,
            default,
            range,
            span,
        })
    }

    fn labels(&mut self) -> PResult<Vec<crate::ids::LabelId>> {
        self.expect(&Tok::LBracket)?;
        let mut out = Vec::new();
        loop {
            if self.eat(&Tok::RBracket) {
                break;
            }
            out.push(self.word("a label")?.into());
            if !self.eat(&Tok::Comma) {
                self.expect(&Tok::RBracket)?;
                break;
            }
        }
        Ok(out)
    }

    fn nonneg_int(&mut self, what: &str) -> PResult<u64> {
        let span = self.span();
        match self.literal()? {
            Value::Int(i) if i >= 0 => Ok(i as u64),
            v => Err(ParseError {
                span,
                message: format!("{what} must be a nonnegative integer, got {v}"),
            }),
        }
    }

    fn seconds(&mut self, what: &str) -> PResult<f64> {
        let span = self.span();
        match self.literal()?.as_f64() {
            Some(s) if s >= 0.0 && s.is_finite() => Ok(s),
            _ => Err(ParseError {
                span,
                message: format!("{what} must be a nonnegative duration"),
            }),
        }
    }

    fn task(&mut self) -> PResult<TaskBlock> {
        let span = self.span();
        self.expect_kw("task")?;
        let id = self.word("a task id")?;
        let mut t = TaskBlock::new(id);
        t.span = span;
        self.expect(&Tok::LBrace)?;
        let mut seen = BTreeSet::new();
        loop {
            self.separator();
            if self.eat(&Tok::RBrace) {
                break;
            }
            let span = self.span();
            let Tok::Ident(field) = self.peek().clone() else {
                return self.unexpected("a task field");
            };
            if !seen.insert(field.clone()) {
                return self.error(format!("duplicate field `{field}` in task `{}`", t.id));
            }
            self.next();
            match field.as_str() {
                "run" => {
                    self.expect(&Tok::Colon)?;
                    t.command = Some(self.string("a command string")?);
                }
                "inputs" => {
                    self.expect(&Tok::Colon)?;
                    t.inputs = self.labels()?;
                }
                "outputs" => {
                    self.expect(&Tok::Colon)?;
                    t.outputs = self.labels()?;
                }
                "max_runtime" => {
                    self.expect(&Tok::Colon)?;
                    let s = self.seconds("max_runtime")?;
                    if s <= 0.0 {
                        return Err(ParseError {
                            span,
                            message: "max_runtime must be positive".into(),
                        });
                    }
                    t.max_runtime = Some(s);
                }
                "resources" => {
                    self.expect(&Tok::LBrace)?;
                    loop {
                        self.separator();
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                        let key = self.word("a resource name")?;
                        self.expect(&Tok::Colon)?;
                        let n = self.nonneg_int(&key)?;
                        match key.as_str() {
                            "memory_bytes" => t.resources.memory_bytes = n,
                            "cpu_cores" => t.resources.cpu_cores = n as u32,
                            "gpu_count" => t.resources.gpu_count = n as u32,
                            "disk_bytes" => t.resources.disk_bytes = n,
                            other => return self.error(format!("unknown resource `{other}`")),
                        }
                    }
                }
                "params" => {
                    self.expect(&Tok::LBrace)?;
                    loop {
                        self.separator();
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                        let key = self.word("a parameter name")?;
                        self.expect(&Tok::Colon)?;
                        let v = self.literal()?;
                        if t.params.insert(key.clone(), v).is_some() {
                            return self.error(format!("duplicate parameter `{key}`"));
                        }
                    }
                }
                "sim" => t.sim = Some(self.sim()?),
                "require" => t.require = Some(self.clause_block()?),
                "promise" => t.promise = Some(self.clause_block()?),
                other => {
                    return Err(ParseError {
                        span,
                        message: format!("unknown task field `{other}`"),
                    })
                }
            }
        }
        Ok(t)
    }

    fn sim(&mut self) -> PResult<SimProfile> {
        let mut p = SimProfile::default();
        self.expect(&Tok::LBrace)?;
        loop {
            self.separator();
            if self.eat(&Tok::RBrace) {
                break;
            }
            let key = self.word("a simulation field")?;
            match key.as_str() {
                "runtime" => {
                    self.expect(&Tok::Colon)?;
                    p.nominal_runtime_s = self.seconds("runtime")?;
                }
                "memory" => {
                    self.expect(&Tok::Colon)?;
                    p.memory_use_bytes = self.nonneg_int("memory")?;
                }
                "exit_code" => {
                    self.expect(&Tok::Colon)?;
                    match self.literal()? {
                        Value::Int(i) => p.exit_code = i,
                        _ => return self.error("exit_code must be an integer"),
                    }
                }
                "stderr" => {
                    self.expect(&Tok::Colon)?;
                    p.stderr = Some(self.string("a string")?);
                }
                "mutates_inputs" => p.mutates_inputs = true,
                "output" => {
                    let mut o = SimOutput::new(self.word("an output label")?);
                    self.expect(&Tok::LBrace)?;
                    loop {
                        self.separator();
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                        let k = self.word("an output field")?;
                        match k.as_str() {
                            "size" => {
                                self.expect(&Tok::Colon)?;
                                o.size_bytes = self.nonneg_int("size")?;
                            }
                            "content" => {
                                self.expect(&Tok::Colon)?;
                                o.content = Some(self.word("a content tag")?);
                            }
                            "corrupt" => o.corrupt = true,
                            "empty" => o.empty = true,
                            "missing" => o.missing = true,
                            other => return self.error(format!("unknown output field `{other}`")),
                        }
                    }
                    p.outputs.push(o);
                }
                other => return self.error(format!("unknown simulation field `{other}`")),
            }
        }
        Ok(p)
    }

    fn clause_block(&mut self) -> PResult<Vec<ContractClause>> {
        self.expect(&Tok::LBrace)?;
        let mut out = Vec::new();
        loop {
            self.separator();
            if self.eat(&Tok::RBrace) {
                return Ok(out);
            }
            out.push(self.clause()?);
        }
    }

    fn clause(&mut self) -> PResult<ContractClause> {
        let Tok::Ident(name) = self.peek().clone() else {
            return self.unexpected("a contract clause");
        };
        let is_call = *self.peek_at(1) == Tok::LParen;
        let looks_combinator = name.chars().all(|c| c.is_ascii_uppercase() || c == '_');
        if is_call && looks_combinator && !COMBINATORS.contains(&name.as_str()) {
            return self.error(format!("unknown combinator `{name}`"));
        }
        match name.as_str() {
            "FOR_ALL" => {
                self.next();
                self.expect(&Tok::LParen)?;
                let binder = self.word("a binder name")?;
                if !binder.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') || binder.is_empty() {
                    return self.error(format!("binder `{binder}` must be an identifier"));
                }
                self.expect(&Tok::Comma)?;
                self.expect_kw("ITER")?;
                self.expect(&Tok::LParen)?;
                let pattern = self.string("a glob pattern")?;
                if let Err(e) = glob::Pattern::new(&pattern) {
                    return self.error(format!("invalid glob `{pattern}`: {e}"));
                }
                self.expect(&Tok::RParen)?;
                self.expect(&Tok::RParen)?;
                self.expect(&Tok::LBrace)?;
                self.separator();
                let body = self.clause()?;
                self.separator();
                self.expect(&Tok::RBrace)?;
                Ok(ContractClause::ForAll {
                    binder,
                    pattern,
                    body: Box::new(body),
                })
            }
            "IF_THEN" => {
                self.next();
                self.expect(&Tok::LParen)?;
                let condition = self.clause()?;
                self.expect(&Tok::Comma)?;
                let action = if self.eat_kw("fail") {
                    FailAction::Fail
                } else if self.eat_kw("warn") {
                    FailAction::Warn
                } else {
                    return self.unexpected("`fail` or `warn`");
                };
                self.expect(&Tok::RParen)?;
                Ok(ContractClause::IfThen {
                    condition: Box::new(condition),
                    action,
                })
            }
            "COND" => {
                self.next();
                self.expect(&Tok::LParen)?;
                let command = self.string("a shell command")?;
                self.expect(&Tok::RParen)?;
                Ok(ContractClause::ShellProbe { command })
            }
            "COMMAND_LOGGED_NO_ERROR" | "INPUTS_NOT_CHANGED" => {
                self.next();
                self.expect(&Tok::LParen)?;
                self.expect(&Tok::RParen)?;
                Ok(ContractClause::Builtin(if name == "INPUTS_NOT_CHANGED" {
                    Builtin::InputsNotChanged
                } else {
                    Builtin::CommandLoggedNoError
                }))
            }
            "ITER" => self.error("`ITER` may only appear as the second argument of `FOR_ALL`"),
            _ => Ok(ContractClause::Atom(self.atom()?)),
        }
    }

    fn atom(&mut self) -> PResult<Atom> {
        let span = self.span();
        let head = match self.peek().clone() {
            Tok::Ident(s) => s,
            _ => return self.unexpected("a property target"),
        };
        self.next();
        let arg = if self.eat(&Tok::LParen) {
            let a = self.word("an argument")?;
            self.expect(&Tok::RParen)?;
            Some(a)
        } else {
            None
        };
        let target = match (head.as_str(), arg) {
            ("task", a) => AtomTarget::Task(a.map(Into::into)),
            ("node", None) => AtomTarget::ScheduledNode,
            ("node", Some(n)) => AtomTarget::Node(n.into()),
            ("cluster", None) => AtomTarget::Cluster,
            ("input", Some(l)) => AtomTarget::Input(l.into()),
            ("output", Some(l)) => AtomTarget::Output(l.into()),
            ("data", Some(l)) => AtomTarget::Data(l.into()),
            (h, _) => {
                return Err(ParseError {
                    span,
                    message: format!("unknown property target `{h}`"),
                })
            }
        };
        self.expect(&Tok::Dot)?;
        let prop_span = self.span();
        let name = match self.next() {
            (Tok::Ident(s), _) => s,
            _ => {
                return Err(ParseError {
                    span: prop_span,
                    message: "expected a property name".into(),
                })
            }
        };
        let prop_arg = if self.eat(&Tok::LParen) {
            let a = self.word("an argument")?;
            self.expect(&Tok::RParen)?;
            Some(a)
        } else {
            None
        };
        let property = property_from(&name, prop_arg).ok_or_else(|| ParseError {
            span: prop_span,
            message: format!("unknown property `{name}`"),
        })?;
        let op = self.op()?;
        let value = self.literal()?;
        let mut atom = Atom {
            target,
            property,
            op,
            value,
            quantifier: None,
            severity: None,
        };
        loop {
            if self.eat_kw("all_nodes") {
                atom.quantifier = Some(Quantifier::AllNodes);
            } else if self.eat_kw("at_least_one_node") {
                atom.quantifier = Some(Quantifier::AtLeastOneNode);
            } else if self.eat_kw("soft") {
                atom.severity = Some(Severity::Soft);
            } else if self.eat_kw("hard") {
                atom.severity = Some(Severity::Hard);
            } else {
                break;
            }
        }
        Ok(atom)
    }
}

/// Registry property from its surface name and optional argument.
pub(crate) fn property_from(name: &str, arg: Option<String>) -> Option<PropertyName> {
    match (name, arg) {
        ("has_executable", Some(a)) => Some(PropertyName::HasExecutable(a)),
        ("license_available", Some(a)) => Some(PropertyName::LicenseAvailable(a)),
        ("config_param", Some(a)) => Some(PropertyName::ConfigParam(a)),
        ("relation_holds", Some(a)) => Some(PropertyName::RelationHolds(a)),
        (_, Some(_)) => None,
        // Clause outcomes are internal and cannot be written by hand.
        (n, None) if n.starts_with("clause_holds") => None,
        (n, None) => n.parse().ok(),
    }
}
