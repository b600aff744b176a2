//! Compute saved by rejecting an unsatisfiable workflow before it starts.

use vcflow::daw::{ClusterSpec, NodeDescriptor};
use vcflow::engine::EngineConfig;
use vcflow::lang::{desugar, parse};
use vcflow::sim::{simulate, FaultScript};

fn main() {
    let runtimes = [3.0, 7.0, 2.5, 11.0, 4.0];
    let mut src = String::from("workflow chain {\n");
    for (i, rt) in runtimes.iter().enumerate() {
        let input = if i == 0 { String::new() } else { format!("inputs: [\"d{}\"]", i - 1) };
        let mem = if i == runtimes.len() - 1 { "resources { memory_bytes: 64Gi }" } else { "" };
        src += &format!("  task s{i} {{ run: \"true\" {input} outputs: [\"d{i}\"] {mem} sim {{ runtime: {rt} }} }}\n");
    }
    src += "}\n";
    let wf = desugar(&parse(&src).unwrap()).unwrap();
    let cluster = ClusterSpec::new(vec![NodeDescriptor::new("n0", 16 << 30, 4), NodeDescriptor::new("n1", 32 << 30, 4)]);
    let o = simulate(&wf, &cluster, &EngineConfig::simulated(), &FaultScript::default()).unwrap();
    println!("status: {}", o.status);
    let s = o.savings.expect("simulated runs account for savings");
    println!("saved {:.1} compute-seconds; without checks: {:?}", s.savings_s, s.counterfactual);
}
