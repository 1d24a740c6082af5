//! Customer tables from the recurrent next-item encoder and from Cleora,
//! plus a round trip through the `EMB1` file format.

use stockgan::corpus::{generate_synthetic_corpus, group_baskets, CorpusConfig};
use stockgan::embed::{
    build_hypergraph, customer_sequences, read_embeddings, train_cleora, train_rnn_consumer, write_embeddings,
    CleoraConfig, RnnEncoderConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_synthetic_corpus(&CorpusConfig { n_customers: 300, ..Default::default() })?;
    let baskets = group_baskets(&corpus.transactions);
    let config = CleoraConfig { product_dim: 32, customer_dim: 16, ..Default::default() };
    let (products, cleora_customers) = train_cleora(&build_hypergraph(&baskets), &config)?;

    let sequences = customer_sequences(&corpus.transactions);
    let longest = sequences.values().map(Vec::len).max().unwrap_or(0);
    println!("{} customer sequences, longest {longest}", sequences.len());

    let rnn = train_rnn_consumer(&sequences, &products, &RnnEncoderConfig { hidden_dim: 16, epochs: 2, ..Default::default() })?;
    println!("rnn: {} customers, {} skipped", rnn.table.len(), rnn.skipped.len());
    println!("cleora: {} customers", cleora_customers.len());

    let mut bytes = Vec::new();
    write_embeddings(&mut bytes, &rnn.table)?;
    let back = read_embeddings(&bytes)?;
    assert_eq!(back, rnn.table);
    println!("EMB1 round trip: {} bytes", bytes.len());
    Ok(())
}
