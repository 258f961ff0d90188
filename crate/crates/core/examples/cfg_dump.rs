//! Print the line-level control-flow graph of a file, or of each of its
//! functions with `--functions`.
//!
//! cargo run --example cfg_dump -- [file.php] [--functions]

use deeptective::cfg::{build_cfg_or_fallback, cfg_stats};
use deeptective::frontend::{extract_functions, Granularity, KeepList, Vocabulary};
use deeptective::model::classifier::normalize_unit;

const DEMO: &str = "<?php
function lookup($conn) {
    $id = $_GET['id'];
    if ($id > 0) {
        $r = mysqli_query($conn, \"SELECT * FROM t WHERE id = \" . $id);
    } else {
        $r = null;
    }
    foreach ($r as $row) {
        echo $row['name'];
    }
    return $r;
}
lookup($db);
";

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let per_function = args.iter().any(|a| a == "--functions");
    let source = match args.iter().find(|a| !a.starts_with("--")) {
        Some(p) => std::fs::read_to_string(p)?,
        None => DEMO.to_string(),
    };
    let keep = KeepList::default();
    let units: Vec<(String, String, Granularity)> = if per_function {
        extract_functions(&source)?.into_iter().map(|f| (f.name, f.body, Granularity::Function)).collect()
    } else {
        vec![("<file>".into(), source, Granularity::File)]
    };
    for (name, code, g) in units {
        let tokens = normalize_unit(&code, g, &keep)?;
        let vocab = Vocabulary::build(std::slice::from_ref(&tokens))?;
        let cfg = build_cfg_or_fallback(&code, g, &keep, &vocab)?;
        let s = cfg_stats(&cfg);
        println!("# {name}: {} nodes, {} edges, max out-degree {}", s.nodes, s.edges, s.max_out_degree);
        println!("lines {:?}", cfg.lines());
        print!("{}", cfg.dump());
    }
    Ok(())
}
