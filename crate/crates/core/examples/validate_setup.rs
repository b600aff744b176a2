//! Static checks only: a task asks for more memory than any node has.

use std::path::Path;

use vcflow::daw::{ClusterSpec, NodeDescriptor};
use vcflow::engine::{validate, EngineConfig};
use vcflow::lang::{desugar, parse};

const SRC: &str = r#"workflow big {
  task load { run: "true" outputs: ["m"] sim { runtime: 2 } }
  task train { run: "true" inputs: ["m"] resources { memory_bytes: 64Gi } sim { runtime: 30 } }
}"#;

fn main() {
    let wf = desugar(&parse(SRC).unwrap()).unwrap();
    let cluster = ClusterSpec::new(vec![NodeDescriptor::new("n0", 16 << 30, 8), NodeDescriptor::new("n1", 32 << 30, 8)]);
    let o = validate(&wf, &cluster, &EngineConfig::simulated(), Path::new(".")).unwrap();
    println!("status: {} (exit {})", o.status, o.exit_code);
    for r in &o.reports {
        println!("{} {} observed {:?} bound {}", r.entry, r.formula, r.observed, r.bound);
    }
}
