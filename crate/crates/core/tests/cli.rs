use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value as Json;

fn vcflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vcflow")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn demo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("demo/fasta")
}

fn schema() -> jsonschema::Validator {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_schema(report: &Json) {
    let v = schema();
    let errors: Vec<String> = v.iter_errors(report).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

const CLUSTER_8G: &str = r#"
[[nodes]]
id = "n0"
memory_bytes = "8Gi"
cpu_cores = 4
installed_executables = ["align"]
present_files = ["reads.fq"]
"#;

const PIPE: &str = r#"workflow p {
  task align {
    run: "align reads.fq"
    inputs: ["reads.fq"]
    outputs: ["aln.bam"]
    resources { memory_bytes: MEM }
    sim { runtime: 10 memory: 1Gi }
  }
  task count { run: "true" inputs: ["aln.bam"] sim { runtime: 5 } }
}"#;

#[test]
fn validate_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let cluster = write(d.path(), "cluster.toml", CLUSTER_8G);
    let ok = write(d.path(), "ok.vcw", &PIPE.replace("MEM", "2Gi"));
    let big = write(d.path(), "big.vcw", &PIPE.replace("MEM", "16Gi"));
    let o = vcflow(&["validate", &ok, "--cluster", &cluster, "--simulated"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let o = vcflow(&["validate", &big, "--cluster", &cluster, "--simulated", "--format", "json"]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    let report: Json = serde_json::from_str(&stdout(&o)).unwrap();
    assert_schema(&report);
    assert_eq!(report["reports"][0]["task"], "align");
    assert_eq!(report["reports"][0]["entry"], "setup/resource-availability");
    assert_eq!(report["records"]["attempts"], serde_json::json!({}));
}

#[test]
fn malformed_workflow_is_a_usage_error_with_position() {
    let d = tempfile::tempdir().unwrap();
    let bad = write(d.path(), "bad.vcw", "workflow w {\n  task t { run: }\n}\n");
    let o = vcflow(&["validate", &bad]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("bad.vcw:2:"), "{}", stderr(&o));
}

#[test]
fn usage_errors() {
    assert_eq!(code(&vcflow(&["classify", "task/unknown"])), 4);
    assert_eq!(code(&vcflow(&["run"])), 4);
    let d = tempfile::tempdir().unwrap();
    let wf = write(d.path(), "w.vcw", "workflow w { task t { run: \"true\" sim { runtime: 1 } } }");
    assert_eq!(code(&vcflow(&["simulate", &wf])), 4, "simulate without a cluster");
    let corrupt = write(d.path(), "r.json", "{ not json");
    assert_eq!(code(&vcflow(&["explain", &corrupt])), 4);
}

#[test]
fn run_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let fail = write(d.path(), "f.vcw", "workflow f { task t { run: \"exit 3\" } }");
    let o = vcflow(&["run", &fail, "--format", "json"]);
    assert_eq!(code(&o), 1);
    let report: Json = serde_json::from_str(&stdout(&o)).unwrap();
    assert_schema(&report);
    assert_eq!(report["status"]["status"], "task_failed");

    let wf = demo().join("fasta.vcw").display().to_string();
    let good = demo().join("good").display().to_string();
    let bad = demo().join("bad").display().to_string();
    assert_eq!(code(&vcflow(&["run", &wf, "--data-dir", &good])), 0);
    let o = vcflow(&["run", &wf, "--data-dir", &bad]);
    assert_eq!(code(&o), 3);
    let text = stdout(&o);
    assert!(text.contains("FIRST ERRONEOUS STEP 1"), "{text}");
    assert!(text.contains("genome.fa"));
}

#[test]
fn simulate_reports_savings_and_soft_warnings_keep_exit_zero() {
    let d = tempfile::tempdir().unwrap();
    let cluster = write(d.path(), "cluster.toml", CLUSTER_8G);
    let big = write(d.path(), "big.vcw", &PIPE.replace("MEM", "2Gi").replace("sim { runtime: 5 }", "resources { memory_bytes: 16Gi } sim { runtime: 5 }"));
    let report = d.path().join("r.json").display().to_string();
    let o = vcflow(&["simulate", &big, "--cluster", &cluster, "--report", &report]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    assert!(stdout(&o).contains("savings"), "{}", stdout(&o));
    let r: Json = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_schema(&r);
    assert!(r["savings"]["savings_s"].as_f64().unwrap() > 0.0);

    let soft = write(
        d.path(),
        "soft.vcw",
        r#"workflow s { task t { run: "true" outputs: ["o"] sim { runtime: 1 output o { size: 0 } }
            promise { output(o).file_size_bytes > 0 soft } } }"#,
    );
    let o = vcflow(&["simulate", &soft, "--cluster", &cluster, "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let r: Json = serde_json::from_str(&stdout(&o)).unwrap();
    assert_schema(&r);
    assert_eq!(r["reports"][0]["verdict"], "warned");
}

#[test]
fn explain_stored_reports() {
    let d = tempfile::tempdir().unwrap();
    let cluster = write(d.path(), "cluster.toml", CLUSTER_8G);
    let slow = write(d.path(), "slow.vcw", r#"workflow s { task crunch { run: "true" max_runtime: 4 sim { runtime: 9 } } }"#);
    let report = d.path().join("r.json").display().to_string();
    let o = vcflow(&["simulate", &slow, "--cluster", &cluster, "--report", &report]);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    let o = vcflow(&["explain", &report]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("task `crunch`") && text.contains("Attempt 2") && text.contains("task/ends-within-limits"), "{text}");

    let empty = write(d.path(), "empty.json", "[]");
    let o = vcflow(&["explain", &empty]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "No violations.");
}

#[test]
fn classify_and_lint() {
    let o = vcflow(&["classify", "file/folder-exists"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("severity:        hard") && text.contains("recoverable:     maybe (±)"), "{text}");
    let d = tempfile::tempdir().unwrap();
    let wf = write(d.path(), "w.vcw", r#"workflow w { task t { run: "true" promise { task.exit_code >= 0 } } }"#);
    let o = vcflow(&["lint", &wf]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("warning"), "{}", stdout(&o));
}

#[test]
fn recheck_from_kept_sandbox() {
    let d = tempfile::tempdir().unwrap();
    let wf = demo().join("fasta.vcw").display().to_string();
    let good = demo().join("good").display().to_string();
    let sandbox = d.path().join("sb").display().to_string();
    let report = d.path().join("r.json").display().to_string();
    let o = vcflow(&["run", &wf, "--data-dir", &good, "--keep-sandbox", "--sandbox", &sandbox, "--report", &report]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let o = vcflow(&["recheck", &wf, &report]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("0 disagree"), "{}", stdout(&o));
    fs::write(Path::new(&sandbox).join("count/attempt-1/outputs/counts.txt"), "7\n").unwrap();
    let o = vcflow(&["recheck", &wf, &report]);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
}
