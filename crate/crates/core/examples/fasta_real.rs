//! Runs the FASTA demo for real on good and bad input.

use std::path::Path;

use vcflow::engine::{execute, explain, local_cluster, EngineConfig};
use vcflow::lang::{desugar, parse};

fn main() {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("demo/fasta");
    let wf = desugar(&parse(&std::fs::read_to_string(demo.join("fasta.vcw")).unwrap()).unwrap()).unwrap();
    for data in ["good", "bad"] {
        let config = EngineConfig { data_dir: Some(demo.join(data)), ..EngineConfig::default() };
        let o = execute(&wf, &local_cluster(), &config, &demo).unwrap();
        println!("== {data}: {} (exit {})", o.status, o.exit_code);
        print!("{}", explain(&o.reports));
    }
}
