//! Simulated run with a node crash and a straggler, printing the event log.

use vcflow::daw::{ClusterSpec, NodeDescriptor};
use vcflow::engine::EngineConfig;
use vcflow::lang::{desugar, parse};
use vcflow::sim::{simulate, FaultScript};

const SRC: &str = r#"workflow p {
  task align { run: "true" outputs: ["aln.bam"] sim { runtime: 10 } }
  task count { run: "true" inputs: ["aln.bam"] outputs: ["c"] max_runtime: 12 sim { runtime: 5 } }
  task plot { run: "true" inputs: ["c"] sim { runtime: 1 } }
}"#;

const FAULTS: &str = r#"
[[events]]
kind = "node_crash"
node = "n0"
at = 4.0

[[events]]
kind = "straggle"
task = "count"
factor = 3.0
"#;

fn main() {
    let wf = desugar(&parse(SRC).unwrap()).unwrap();
    let cluster = ClusterSpec::new(vec![NodeDescriptor::new("n0", 8 << 30, 4), NodeDescriptor::new("n1", 8 << 30, 4)]);
    let faults = FaultScript::from_toml(FAULTS).unwrap();
    let config = EngineConfig { seed: 7, ..EngineConfig::simulated() };
    let o = simulate(&wf, &cluster, &config, &faults).unwrap();
    let mut out = std::io::stdout();
    o.write_events(&mut out).unwrap();
    println!("status: {}, spend {:.1}s", o.status, o.records.spend());
    print!("{}", vcflow::engine::explain(&o.reports));
}
