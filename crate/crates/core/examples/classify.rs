//! Prints the catalog table, then one entry in detail.

use vcflow::constraint::catalog::{classify, render_table};

fn main() {
    print!("{}", render_table());
    let name = std::env::args().nth(1).unwrap_or_else(|| "task/ends-within-limits".into());
    match classify(&name) {
        Ok(m) => println!("\n{name}: {m:?}"),
        Err(e) => eprintln!("{e}"),
    }
}
