//! Parses the demo workflow, lints it, and prints its constraints.

use vcflow::lang::{desugar, lint, parse, serialize};

fn main() {
    let src = include_str!("../demo/fasta/fasta.vcw");
    let doc = parse(src).expect("demo parses");
    for w in lint(&doc) {
        println!("{w}");
    }
    let canonical = serialize(&doc);
    assert_eq!(parse(&canonical).unwrap(), doc);
    println!("{canonical}");

    let wf = desugar(&doc).expect("demo desugars");
    println!("workflow inputs: {:?}", wf.workflow_inputs);
    for vc in wf.all_vcs() {
        println!("{:<28} {:<26} {}", vc.id, vc.entry, vc.formula());
    }
}
