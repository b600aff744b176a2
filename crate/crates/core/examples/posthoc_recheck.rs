//! Keeps the sandbox of a real run, rechecks it, then tampers with an output.

use std::path::Path;

use vcflow::engine::{execute, local_cluster, recheck, ArtifactStore, EngineConfig};
use vcflow::lang::{desugar, parse};

fn main() {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("demo/fasta");
    let wf = desugar(&parse(&std::fs::read_to_string(demo.join("fasta.vcw")).unwrap()).unwrap()).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let config = EngineConfig {
        data_dir: Some(demo.join("good")),
        sandbox_root: Some(tmp.path().to_path_buf()),
        keep_sandbox: true,
        ..EngineConfig::default()
    };
    let o = execute(&wf, &local_cluster(), &config, &demo).unwrap();
    println!("live run: {}", o.status);

    let store = ArtifactStore::open(tmp.path()).unwrap();
    let r = recheck(&o, &wf, &store);
    println!("recheck: {} checks replayed, agrees = {}", r.outcomes.len(), r.agrees());

    std::fs::write(tmp.path().join("count/attempt-1/outputs/counts.txt"), "999\n").unwrap();
    let store = ArtifactStore::open(tmp.path()).unwrap();
    let r = recheck(&o, &wf, &store);
    println!("after tampering: agrees = {}", r.agrees());
    for v in &r.reports {
        println!("  {} {:?}: {}", v.entry, v.file, v.detail.as_deref().unwrap_or(""));
    }
}
