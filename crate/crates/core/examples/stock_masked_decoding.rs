//! Decodes generated product blocks to skus that were actually on the shelf.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stockgan::corpus::{generate_synthetic_corpus, group_baskets, CorpusConfig, Id};
use stockgan::embed::{build_hypergraph, train_cleora, CleoraConfig};
use stockgan::features::fit_scaler;
use stockgan::gan::SkuDecoder;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_synthetic_corpus(&CorpusConfig { n_stores: 5, n_days: 14, stockout_rate: 0.3, ..Default::default() })?;
    let (products, _) = train_cleora(
        &build_hypergraph(&group_baskets(&corpus.transactions)),
        &CleoraConfig { product_dim: 16, customer_dim: 4, ..Default::default() },
    )?;
    let scaler = fit_scaler(&products.matrix().mapv(|v| v as f64))?;
    let decoder = SkuDecoder::new(&products, &scaler)?;

    let snapshot = &corpus.stocks[0];
    let mask: BTreeSet<Id> = snapshot.in_stock().map(|(id, _)| id.clone()).filter(|id| products.contains(id)).collect();
    println!(
        "store {} on {}: {} of {} skus in stock",
        snapshot.store_id,
        snapshot.date,
        mask.len(),
        products.len()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut hits = 0;
    for _ in 0..1000 {
        let v: Vec<f64> = (0..products.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (sku, cosine) = decoder.decode(&v, &mask)?;
        hits += mask.contains(&sku) as usize;
        if hits <= 3 {
            println!("  decoded {sku} at cosine {cosine:.3}");
        }
    }
    println!("{hits}/1000 decoded skus are in the mask");

    // An out-of-stock sku's own vector still decodes to an in-stock neighbour.
    if let Some(gone) = products.ids().iter().find(|id| !mask.contains(*id)) {
        let raw = products.row_f64(gone).unwrap();
        let (sku, cosine) = decoder.decode(&scaler.apply(&raw)?, &mask)?;
        println!("out-of-stock {gone} maps to {sku} (cosine {cosine:.3})");
    }
    Ok(())
}
