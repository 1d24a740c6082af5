//! Trains skip-gram and Cleora product tables on the desk corpus and
//! compares co-basket similarity against random pairs.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stockgan::corpus::{generate_synthetic_corpus, group_baskets, Basket, CorpusConfig};
use stockgan::embed::{build_hypergraph, train_cleora, train_skipgram_products, CleoraConfig, EmbeddingTable, SkipGramConfig};

fn affinity(table: &EmbeddingTable, baskets: &[Basket]) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut co, mut n_co) = (0.0, 0);
    for b in baskets.iter().take(2000) {
        let skus = b.distinct_skus();
        for w in skus.windows(2) {
            co += table.cosine(w[0].as_str(), w[1].as_str()).unwrap_or(0.0);
            n_co += 1;
        }
    }
    let ids = table.ids();
    let mut rand_sum = 0.0;
    for _ in 0..n_co {
        let a = ids.choose(&mut rng).unwrap();
        let b = ids.choose(&mut rng).unwrap();
        rand_sum += table.cosine(a.as_str(), b.as_str()).unwrap();
    }
    (co / n_co as f64, rand_sum / n_co as f64)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_synthetic_corpus(&CorpusConfig::default())?;
    let baskets = group_baskets(&corpus.transactions);

    let w2v = train_skipgram_products(&baskets, &SkipGramConfig { dim: 64, ..Default::default() })?;
    let config = CleoraConfig { product_dim: 64, customer_dim: 16, ..Default::default() };
    let (cleora, customers) = train_cleora(&build_hypergraph(&baskets), &config)?;

    // Propagation on a dense co-purchase graph pulls every row toward one
    // direction, so the Cleora gap is small in absolute terms.
    for (name, table) in [("w2v", &w2v), ("cleora", &cleora)] {
        let (co, random) = affinity(table, &baskets);
        println!(
            "{name:>6}: {} skus x {} dims, co-basket cosine {co:.5} vs random {random:.5} (gap {:.2e})",
            table.len(),
            table.dim(),
            co - random
        );
    }
    println!("cleora also embeds {} customers in {} dims", customers.len(), customers.dim());
    Ok(())
}
