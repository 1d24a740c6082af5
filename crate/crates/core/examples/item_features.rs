//! Builds scaled item vectors and the three stock embeddings for a small
//! corpus.

use stockgan::corpus::{generate_synthetic_corpus, group_baskets, CorpusConfig};
use stockgan::embed::{build_hypergraph, train_cleora, CleoraConfig};
use stockgan::features::{build_item_dataset, build_stock_dataset, cyclic_date_features, fit_scaler, ItemLayout, StockMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_synthetic_corpus(&CorpusConfig { n_stores: 10, n_days: 28, ..Default::default() })?;
    let baskets = group_baskets(&corpus.transactions);
    let (products, customers) = train_cleora(
        &build_hypergraph(&baskets),
        &CleoraConfig { product_dim: 32, customer_dim: 8, ..Default::default() },
    )?;

    // Full-size layout, for reference.
    let full = ItemLayout::default();
    println!("default layout: {} values, block offsets {:?}", full.len(), full.offsets());

    let data = build_item_dataset(&corpus.transactions, &products, &customers)?;
    println!("{} item rows of width {} ({} lines dropped)", data.items.nrows(), data.layout.len(), data.dropped);

    let scaler = fit_scaler(&data.items)?;
    let scaled = scaler.apply_matrix(&data.items)?;
    let (lo, hi) = scaled.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    println!("scaled range [{lo:.3}, {hi:.3}]");
    let back = scaler.invert_matrix(&scaled)?;
    let err = (&back - &data.items).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("round-trip max error {err:.2e}");

    let first = &corpus.transactions[0];
    println!("date block for {}: {:.3?}", first.date, cyclic_date_features(first.date).0);

    for mode in [StockMode::None, StockMode::Unweighted, StockMode::Weighted] {
        let stock = build_stock_dataset(&data.stock_keys, &corpus.stocks, &products, mode)?;
        let norm = stock.matrix.row(0).dot(&stock.matrix.row(0)).sqrt();
        println!("{mode:>10}: {} (store, date) rows, first row norm {norm:.4}", stock.keys.len());
    }
    Ok(())
}
