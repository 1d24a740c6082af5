use std::collections::HashMap;

use chrono::NaiveDate;
use ndarray::Array2;

use super::{
    assemble_item_vector, cyclic_date_features, log_price, restrict_to_table, stock_embedding, FeatureError,
    ItemLayout, Result, StockMode,
};
use crate::corpus::{index_snapshots, Id, StockSnapshot, TransactionLine};
use crate::embed::EmbeddingTable;

/// Unscaled item vectors, one per transaction line with both embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemDataset {
    pub layout: ItemLayout,
    /// `<transaction_id>:<sku_id>`.
    pub row_ids: Vec<Id>,
    /// `(store_id, date)` of each row.
    pub stock_keys: Vec<(Id, NaiveDate)>,
    pub items: Array2<f64>,
    /// Lines skipped for a missing product or customer embedding.
    pub dropped: usize,
}

pub fn build_item_dataset(
    lines: &[TransactionLine],
    products: &EmbeddingTable,
    customers: &EmbeddingTable,
) -> Result<ItemDataset> {
    let layout = ItemLayout::new(products.dim(), customers.dim());
    let mut row_ids = Vec::with_capacity(lines.len());
    let mut stock_keys = Vec::with_capacity(lines.len());
    let mut values = Vec::with_capacity(lines.len() * layout.len());
    let mut dropped = 0;
    for line in lines {
        let (Some(p), Some(c)) = (products.row_f64(&line.sku_id), customers.row_f64(&line.customer_id)) else {
            dropped += 1;
            continue;
        };
        let v = assemble_item_vector(&layout, &p, &c, &cyclic_date_features(line.date), log_price(line.unit_price)?)?;
        values.extend(v);
        row_ids.push(Id::new(format!("{}:{}", line.transaction_id, line.sku_id)));
        stock_keys.push((line.store_id.clone(), line.date));
    }
    let items = Array2::from_shape_vec((row_ids.len(), layout.len()), values).expect("rows have layout length");
    Ok(ItemDataset { layout, row_ids, stock_keys, items, dropped })
}

pub fn stock_key_id(store: &Id, date: NaiveDate) -> Id {
    Id::new(format!("{store}:{date}"))
}

/// Unscaled stock embeddings, one per distinct `(store, date)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StockDataset {
    pub mode: StockMode,
    pub keys: Vec<(Id, NaiveDate)>,
    pub matrix: Array2<f64>,
}

impl StockDataset {
    pub fn position(&self, key: &(Id, NaiveDate)) -> Option<usize> {
        self.keys.iter().position(|k| k == key)
    }

    /// Rows gathered in the order of `keys`.
    pub fn aligned(&self, keys: &[(Id, NaiveDate)]) -> Result<Array2<f64>> {
        let index: HashMap<&(Id, NaiveDate), usize> = self.keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let mut out = Array2::zeros((keys.len(), self.matrix.ncols()));
        for (i, k) in keys.iter().enumerate() {
            let &j = index.get(k).ok_or_else(|| FeatureError::MissingSnapshot { store: k.0.clone(), date: k.1 })?;
            out.row_mut(i).assign(&self.matrix.row(j));
        }
        Ok(out)
    }
}

/// Snapshots are restricted to skus in `products` before aggregation.
pub fn build_stock_dataset(
    keys: &[(Id, NaiveDate)],
    snapshots: &[StockSnapshot],
    products: &EmbeddingTable,
    mode: StockMode,
) -> Result<StockDataset> {
    let index = index_snapshots(snapshots);
    let mut seen = HashMap::new();
    let mut unique = Vec::new();
    for k in keys {
        if seen.insert(k, ()).is_none() {
            unique.push(k.clone());
        }
    }
    let mut matrix = Array2::zeros((unique.len(), products.dim()));
    for (i, key) in unique.iter().enumerate() {
        let snap = index
            .get(key)
            .ok_or_else(|| FeatureError::MissingSnapshot { store: key.0.clone(), date: key.1 })?;
        let row = stock_embedding(&restrict_to_table(snap, products), products, mode)?;
        matrix.row_mut(i).assign(&ndarray::Array1::from(row));
    }
    Ok(StockDataset { mode, keys: unique, matrix })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_corpus as generate, CorpusConfig};
    use crate::features::fit_scaler;

    fn tables(corpus: &crate::corpus::SyntheticCorpus) -> (EmbeddingTable, EmbeddingTable) {
        let ids: Vec<Id> = corpus.skus.iter().map(|s| s.sku_id.clone()).collect();
        let n = ids.len();
        let p = EmbeddingTable::new(ids, Array2::from_shape_fn((n, 4), |(i, k)| ((i * 7 + k) % 5) as f32 - 2.0)).unwrap();
        let mut cust: Vec<Id> = corpus.transactions.iter().map(|l| l.customer_id.clone()).collect();
        cust.sort();
        cust.dedup();
        cust.pop();
        let m = cust.len();
        let c = EmbeddingTable::new(cust, Array2::from_shape_fn((m, 2), |(i, k)| (i + k) as f32 * 0.01)).unwrap();
        (p, c)
    }

    #[test]
    fn builds_aligned_scaled_features() {
        let corpus = generate(&CorpusConfig {
            n_stores: 3,
            n_customers: 20,
            n_skus: 15,
            n_categories: 3,
            n_days: 7,
            ..Default::default()
        })
        .unwrap();
        let (p, c) = tables(&corpus);
        let ds = build_item_dataset(&corpus.transactions, &p, &c).unwrap();
        assert_eq!(ds.layout.len(), 4 + 2 + 7);
        assert!(ds.dropped > 0);
        assert_eq!(ds.items.nrows() + ds.dropped, corpus.transactions.len());
        let scaler = fit_scaler(&ds.items).unwrap();
        assert!(scaler.apply_matrix(&ds.items).unwrap().iter().all(|v| (-1.0..=1.0).contains(v)));

        let stock = build_stock_dataset(&ds.stock_keys, &corpus.stocks, &p, StockMode::Weighted).unwrap();
        let aligned = stock.aligned(&ds.stock_keys).unwrap();
        assert_eq!(aligned.nrows(), ds.items.nrows());
        assert!(stock.keys.len() <= 3 * 7);
        assert!(aligned.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn missing_snapshot_is_an_error() {
        let p = EmbeddingTable::new(vec!["a".into()], Array2::ones((1, 2))).unwrap();
        let key = (Id::new("s"), NaiveDate::from_ymd_opt(2023, 1, 1).unwrap());
        assert!(matches!(
            build_stock_dataset(&[key], &[], &p, StockMode::Unweighted),
            Err(FeatureError::MissingSnapshot { .. })
        ));
    }
}
