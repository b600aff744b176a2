//! Lists every execution of a diamond workflow and checks each one.

use vcflow::daw::{check_trace, enumerate_executions, LogicalDaw};

fn main() {
    let daw = LogicalDaw::from_edges(
        "ts",
        "te",
        &[
            ("ts", "a", "in_a"),
            ("ts", "b", "in_b"),
            ("a", "c", "ac"),
            ("b", "c", "bc"),
            ("c", "te", "out"),
        ],
    );
    let traces = enumerate_executions(&daw, 1000).expect("bounded");
    println!("{} executions", traces.len());
    for (i, t) in traces.iter().enumerate() {
        let steps: Vec<String> = t
            .steps
            .iter()
            .map(|s| format!("{{{}}}", s.finished.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")))
            .collect();
        check_trace(&daw, t).expect("enumerated traces are valid");
        println!("{:>2}: {}", i + 1, steps.join(" -> "));
    }
}
