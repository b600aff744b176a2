use vcflow::daw::{ClusterSpec, NodeDescriptor};
use vcflow::engine::{EngineConfig, RunStatus};
use vcflow::lang::{desugar, parse};
use vcflow::sim::{simulate, FaultScript};

const GIB: u64 = 1 << 30;

fn node(id: &str, mem: u64) -> NodeDescriptor {
    let mut n = NodeDescriptor::new(id, mem, 4);
    n.present_files.insert("reads.fq".into());
    n.installed_executables.insert("align".into());
    n
}

fn run(src: &str, nodes: Vec<NodeDescriptor>, faults: &str) -> vcflow::engine::RunOutcome {
    let wf = desugar(&parse(src).unwrap()).unwrap();
    let faults = FaultScript::from_toml(faults).unwrap();
    simulate(&wf, &ClusterSpec::new(nodes), &EngineConfig::simulated(), &faults).unwrap()
}

const PIPE: &str = r#"workflow p {
  task align {
    run: "align reads.fq"
    inputs: ["reads.fq"]
    outputs: ["aln.bam"]
    resources { memory_bytes: 2Gi }
    sim { runtime: 10 memory: 1Gi }
    promise { output("aln.bam").file_size_bytes > 0 }
  }
  task count {
    run: "true"
    inputs: ["aln.bam"]
    outputs: ["counts.tsv"]
    sim { runtime: 5 }
  }
}"#;

#[test]
fn clean_pipeline_is_correct() {
    let o = run(PIPE, vec![node("n0", 8 * GIB)], "");
    assert_eq!(o.status, RunStatus::Correct, "{:#?}", o.reports);
    assert_eq!(o.trace.steps.len(), 3);
    assert!((o.records.spend() - 15.0).abs() < 1e-9);
}

#[test]
fn static_abort_saves_compute() {
    let src = PIPE.replace("sim { runtime: 5 }", "resources { memory_bytes: 16Gi } sim { runtime: 5 }");
    let o = run(&src, vec![node("n0", 8 * GIB)], "");
    assert_eq!(o.status, RunStatus::AbortedStatic);
    assert_eq!(o.records.attempt_count(), 0);
    let s = o.savings.unwrap();
    assert_eq!(s.savings_s, 10.0, "{s:?}");
    assert_eq!(s.counterfactual, Some(RunStatus::Failed { first_erroneous_step: 2 }));
}

#[test]
fn crash_reschedules_after_heartbeats() {
    let o = run(
        PIPE,
        vec![node("n0", 8 * GIB), node("n1", 8 * GIB)],
        "[[events]]\nkind = \"node_crash\"\nnode = \"n0\"\nat = 3.0\n",
    );
    assert_eq!(o.status, RunStatus::Correct, "{:#?}\n{:#?}", o.reports, o.events);
}

