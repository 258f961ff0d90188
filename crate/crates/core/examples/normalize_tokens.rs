//! Lex a PHP file, abstract identifiers and literals, and show the ids
//! the recurrent branch would see.
//!
//! cargo run --example normalize_tokens -- [file.php]

use deeptective::frontend::{encode, lex, normalize, AbstractionBudget, Granularity, KeepList, Vocabulary};

const DEMO: &str = include_str!("../fixtures/fig2_xss.php");

fn main() -> anyhow::Result<()> {
    let source = match std::env::args().nth(1) {
        Some(p) => std::fs::read_to_string(p)?,
        None => DEMO.to_string(),
    };
    let raw = lex(&source)?;
    println!("{} raw tokens", raw.len());
    let keep = KeepList::default();
    let tokens = normalize(&raw, &keep, AbstractionBudget::for_granularity(Granularity::File));
    let mut line = 0;
    for t in &tokens {
        if t.origin_line != line {
            line = t.origin_line;
            print!("\n{line:>4} |");
        }
        print!(" {}", t.surface);
    }
    println!();

    let vocab = Vocabulary::build(std::slice::from_ref(&tokens))?;
    let seq = encode(&tokens, &vocab, 40, Granularity::File);
    println!("\nvocabulary of {} ids; first 40 positions ({} real):", vocab.len(), seq.true_len);
    println!("{:?}", seq.ids);
    Ok(())
}
