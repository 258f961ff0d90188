//! Locate the functions enclosing a set of changed lines, as the commit
//! miner does for patch hunks.
//!
//! cargo run --example function_spans -- file.php 12 40

use deeptective::frontend::{extract_functions, IntervalTree};

const DEMO: &str = include_str!("../fixtures/scan_project/lib/collection.php");

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let (source, lines): (String, Vec<usize>) = match args.next() {
        Some(p) => (std::fs::read_to_string(p)?, args.map(|a| a.parse()).collect::<Result<_, _>>()?),
        None => (DEMO.to_string(), vec![6, 11, 15, 21]),
    };
    let functions = extract_functions(&source)?;
    for f in &functions {
        println!("{:<32} lines {:>3}-{:<3}", f.name, f.start_line, f.end_line);
    }
    let tree = IntervalTree::new(functions.iter().map(|f| (f.lines(), f.name.as_str())));
    for l in lines {
        let hits: Vec<&str> = tree.stab(l).into_iter().map(|(_, n)| *n).collect();
        println!("line {l:>3}: {}", if hits.is_empty() { "top level".to_string() } else { hits.join(", ") });
    }
    Ok(())
}
