//! Generates the desk corpus, validates it and writes the four CSVs.
//!
//! `cargo run --release --example synthetic_corpus [out_dir]`

use stockgan::corpus::{generate_synthetic_corpus, group_baskets, split_train_eval, validate_corpus, CorpusConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = CorpusConfig::default();
    let corpus = generate_synthetic_corpus(&config)?;

    let report = validate_corpus(&corpus.transactions, &corpus.stocks, &corpus.skus, &corpus.stores);
    print!("{}", report.render());

    let baskets = group_baskets(&corpus.transactions);
    let mean = corpus.transactions.len() as f64 / baskets.len() as f64;
    println!("{} baskets, {mean:.1} lines per basket", baskets.len());

    // Purchases only ever hit skus that were on the shelf that morning.
    let (train, eval) = split_train_eval(&corpus.transactions, 0.2, 0)?;
    println!("split: {} train lines / {} eval lines", train.len(), eval.len());

    if let Some(dir) = std::env::args().nth(1) {
        std::fs::create_dir_all(&dir)?;
        corpus.write_to(dir.as_ref())?;
        println!("wrote skus.csv, stores.csv, transactions.csv, stocks.csv to {dir}");
    }
    Ok(())
}
