//! Rebuild label vectors from published confusion counts and print the
//! derived metrics as a table and as CSV.

use deeptective::metrics::{confusion, labels_from_counts, render_table, BinaryCounts, TableFormat};

fn main() -> anyhow::Result<()> {
    let rows = [
        ("File-A GIT", BinaryCounts { tn: 240, fn_: 32, tp: 241, fp: 33 }),
        ("Func-S SARD", BinaryCounts { tn: 277, fn_: 0, tp: 149, fp: 16 }),
        ("File-G GIT", BinaryCounts { tn: 251, fn_: 44, tp: 229, fp: 22 }),
    ];
    let reports: Vec<_> = rows
        .iter()
        .map(|(name, c)| {
            let (truth, pred) = labels_from_counts(*c);
            confusion(&truth, &pred).map(|r| (*name, r))
        })
        .collect::<Result<_, _>>()?;
    let refs: Vec<(&str, &_)> = reports.iter().map(|(n, r)| (*n, r)).collect();
    print!("{}", render_table(&refs, TableFormat::Text));
    println!();
    print!("{}", render_table(&refs, TableFormat::Csv));
    Ok(())
}
