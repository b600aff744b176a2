use std::collections::BTreeSet;

use proptest::prelude::*;

use vcflow::constraint::{CatalogName, PropertyName, Quantifier, Severity};
use vcflow::daw::ResourceVector;
use vcflow::lang::{
    desugar, parse, serialize, Atom, AtomTarget, Builtin, ContractClause, DepDecl, FailAction, ParamDef, Span,
    TaskBlock, WorkflowDocument,
};
use vcflow::sim::{SimOutput, SimProfile};
use vcflow::value::{ComparisonOp, Value};

fn name() -> impl Strategy<Value = String> {
    prop_oneof!["[a-z][a-z0-9_]{0,6}", "[a-z]{1,4}\\.[a-z]{2,3}", "[A-Za-z0-9 _./-]{1,8}"]
}

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,6}"
}

fn text() -> impl Strategy<Value = String> {
    "[ -~\t\n]{0,20}"
}

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        any::<i64>().prop_map(Value::Int),
        (-1.0e9f64..1.0e9).prop_map(Value::Decimal),
        any::<bool>().prop_map(Value::Bool),
        text().prop_map(Value::Str),
    ]
}

fn op() -> impl Strategy<Value = ComparisonOp> {
    prop_oneof![
        Just(ComparisonOp::Lt),
        Just(ComparisonOp::Le),
        Just(ComparisonOp::Eq),
        Just(ComparisonOp::Ge),
        Just(ComparisonOp::Gt),
    ]
}

fn property() -> impl Strategy<Value = PropertyName> {
    use PropertyName::*;
    prop_oneof![
        prop_oneof![
            Just(MemoryBytes),
            Just(CpuCores),
            Just(GpuCount),
            Just(DiskFreeBytes),
            Just(NodeAlive),
            Just(HeartbeatAgeSeconds),
            Just(FileExists),
            Just(FileSizeBytes),
            Just(Checksum),
            Just(FormatOk),
        ],
        prop_oneof![
            Just(FolderExists),
            Just(ExitCode),
            Just(RuntimeSeconds),
            Just(ExecutablePresent),
            Just(LoggedNoError),
            Just(InputsUnchanged),
        ],
        name().prop_map(HasExecutable),
        name().prop_map(LicenseAvailable),
        name().prop_map(ConfigParam),
        name().prop_map(RelationHolds),
    ]
}

fn target() -> impl Strategy<Value = AtomTarget> {
    prop_oneof![
        Just(AtomTarget::Task(None)),
        name().prop_map(|t| AtomTarget::Task(Some(t.into()))),
        Just(AtomTarget::ScheduledNode),
        name().prop_map(|n| AtomTarget::Node(n.into())),
        Just(AtomTarget::Cluster),
        name().prop_map(|l| AtomTarget::Input(l.into())),
        name().prop_map(|l| AtomTarget::Output(l.into())),
        name().prop_map(|l| AtomTarget::Data(l.into())),
    ]
}

fn atom() -> impl Strategy<Value = Atom> {
    (
        target(),
        property(),
        op(),
        value(),
        prop::option::of(prop_oneof![Just(Quantifier::AllNodes), Just(Quantifier::AtLeastOneNode)]),
        prop::option::of(prop_oneof![Just(Severity::Soft), Just(Severity::Hard)]),
    )
        .prop_map(|(target, property, op, value, quantifier, severity)| Atom {
            target,
            property,
            op,
            value,
            quantifier,
            severity,
        })
}

fn clause() -> impl Strategy<Value = ContractClause> {
    let leaf = prop_oneof![
        atom().prop_map(ContractClause::Atom),
        text().prop_map(|command| ContractClause::ShellProbe { command }),
        Just(ContractClause::Builtin(Builtin::CommandLoggedNoError)),
        Just(ContractClause::Builtin(Builtin::InputsNotChanged)),
    ];
    leaf.prop_recursive(3, 8, 1, |inner| {
        prop_oneof![
            (ident(), name(), inner.clone()).prop_map(|(binder, pattern, body)| ContractClause::ForAll {
                binder,
                pattern,
                body: Box::new(body),
            }),
            (inner, any::<bool>()).prop_map(|(c, warn)| ContractClause::IfThen {
                condition: Box::new(c),
                action: if warn { FailAction::Warn } else { FailAction::Fail },
            }),
        ]
    })
}

fn sim_profile() -> impl Strategy<Value = SimProfile> {
    let output = (name(), 0u64..1 << 40, prop::option::of("[a-z]{1,6}"), any::<[bool; 3]>()).prop_map(|(p, size, content, f)| {
        let mut o = SimOutput::new(p);
        o.size_bytes = size;
        o.content = content;
        o.corrupt = f[0];
        o.empty = f[1];
        o.missing = f[2];
        o
    });
    (0.0f64..1.0e5, 0u64..1 << 40, -5i64..300, prop::option::of(text()), any::<bool>(), prop::collection::vec(output, 0..3)).prop_map(
        |(rt, mem, exit_code, stderr, mutates_inputs, outputs)| SimProfile {
            nominal_runtime_s: rt,
            memory_use_bytes: mem,
            exit_code,
            stderr,
            mutates_inputs,
            outputs,
        },
    )
}

fn task() -> impl Strategy<Value = TaskBlock> {
    (
        name(),
        prop::option::of(text()),
        prop::collection::vec(name(), 0..3),
        prop::collection::vec(name(), 0..3),
        (0u64..1 << 40, 0u32..64, 0u32..8, 0u64..1 << 40),
        prop::option::of(0.001f64..1.0e6),
        prop::collection::btree_map(name(), value(), 0..3),
        prop::option::of(sim_profile()),
        prop::option::of(prop::collection::vec(clause(), 0..3)),
        prop::option::of(prop::collection::vec(clause(), 0..3)),
    )
        .prop_map(|(id, command, inputs, outputs, (m, c, g, d), max_runtime, params, sim, require, promise)| {
            let mut t = TaskBlock::new(id);
            t.command = command;
            t.inputs = inputs.into_iter().map(Into::into).collect();
            t.outputs = outputs.into_iter().map(Into::into).collect();
            t.resources = ResourceVector {
                memory_bytes: m,
                cpu_cores: c,
                gpu_count: g,
                disk_bytes: d,
            };
            t.max_runtime = max_runtime;
            t.params = params;
            t.sim = sim;
            t.require = require;
            t.promise = promise;
            t
        })
}

fn document() -> impl Strategy<Value = WorkflowDocument> {
    // Range bounds are drawn so that the default satisfies them.
    let ranged = (-1000i64..1000, prop::collection::vec((any::<bool>(), any::<bool>(), 0i64..50), 0..3)).prop_map(|(d, bounds)| {
        let range = bounds
            .into_iter()
            .map(|(upper, strict, gap)| match (upper, strict) {
                (true, true) => (ComparisonOp::Lt, Value::Int(d + gap + 1)),
                (true, false) => (ComparisonOp::Le, Value::Int(d + gap)),
                (false, true) => (ComparisonOp::Gt, Value::Int(d - gap - 1)),
                (false, false) => (ComparisonOp::Ge, Value::Int(d - gap)),
            })
            .collect();
        (Value::Int(d), range)
    });
    let param = (name(), prop_oneof![value().prop_map(|v| (v, Vec::new())), ranged]).prop_map(|(name, (default, range))| ParamDef {
        name,
        default,
        range,
        span: Span::default(),
    });
    let dep = (name(), name(), name()).prop_map(|(l, a, b)| DepDecl {
        label: l.into(),
        from: a.into(),
        to: b.into(),
        span: Span::default(),
    });
    (
        name(),
        prop::collection::vec(param, 0..3),
        prop::collection::vec(atom(), 0..3),
        prop::collection::vec(task(), 0..4),
        prop::collection::vec(dep, 0..3),
    )
        .prop_map(|(n, params, requires, tasks, deps)| {
            let mut d = WorkflowDocument::new(n);
            let mut seen = BTreeSet::new();
            d.params = params.into_iter().filter(|p| seen.insert(p.name.clone())).collect();
            d.requires = requires;
            let mut seen = BTreeSet::new();
            d.tasks = tasks.into_iter().filter(|t| seen.insert(t.id.clone())).collect();
            d.deps = deps;
            d
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn parse_inverts_serialize(doc in document()) {
        let text = serialize(&doc);
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, doc, "{}", text);
    }

    #[test]
    fn serialize_is_canonical(doc in document()) {
        let once = serialize(&doc);
        prop_assert_eq!(serialize(&parse(&once).unwrap()), once);
    }
}

const FASTA: &str = include_str!("../demo/fasta/fasta.vcw");

#[test]
fn fasta_round_trips() {
    let doc = parse(FASTA).unwrap();
    assert_eq!(parse(&serialize(&doc)).unwrap(), doc);
}

/// Exercises every catalog entry once.
const ALL_KINDS: &str = r#"workflow kinds {
  requires {
    cluster.memory_bytes >= 1Gi at_least_one_node
    data("ref.fa").file_exists = true
    node(n0).node_alive = true
  }
  task a {
    run: "tool x"
    inputs: ["ref.fa"]
    outputs: ["out.txt", "dir"]
    resources { memory_bytes: 2Gi }
    max_runtime: 60
    params { threads: 4 }
    require {
      task.config_param(threads) <= 8
      task.license_available(matlab) = true
      node.has_executable(tool) = true
      input("ref.fa").format_ok = true
    }
    promise {
      task.relation_holds(monotone) = true
      COMMAND_LOGGED_NO_ERROR()
      output("out.txt").file_exists = true
      output("dir").folder_exists = true
    }
  }
  task b { run: "true" inputs: ["out.txt"] }
  task c { run: "true" inputs: ["dir"] }
}"#;

#[test]
fn every_catalog_kind_round_trips() {
    let doc = parse(ALL_KINDS).unwrap();
    assert_eq!(parse(&serialize(&doc)).unwrap(), doc);
    let wf = desugar(&doc).unwrap();
    let kinds: BTreeSet<CatalogName> = wf.all_vcs().iter().map(|v| v.entry).collect();
    assert_eq!(kinds.len(), 13, "{kinds:?}");
}
