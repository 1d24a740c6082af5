use std::fmt;
use std::str::FromStr;

use super::{FeatureError, Result};
use crate::corpus::StockSnapshot;
use crate::embed::EmbeddingTable;

/// How the generator sees the assortment. `None` feeds a zero block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StockMode {
    None,
    Unweighted,
    Weighted,
}

impl StockMode {
    pub const ALL: [StockMode; 3] = [StockMode::None, StockMode::Unweighted, StockMode::Weighted];

    pub fn as_str(&self) -> &'static str {
        match self {
            StockMode::None => "none",
            StockMode::Unweighted => "unweighted",
            StockMode::Weighted => "weighted",
        }
    }
}

impl fmt::Display for StockMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StockMode {
    type Err = FeatureError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(StockMode::None),
            "unweighted" => Ok(StockMode::Unweighted),
            "weighted" => Ok(StockMode::Weighted),
            other => Err(FeatureError::Mode(other.into())),
        }
    }
}

/// Mean of in-stock product rows, optionally weighted by on-hand quantity.
/// Zero-quantity entries are ignored; every in-stock sku must have a row.
pub fn stock_embedding(snapshot: &StockSnapshot, table: &EmbeddingTable, mode: StockMode) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; table.dim()];
    if mode == StockMode::None {
        return Ok(acc);
    }
    let missing: Vec<_> = snapshot.in_stock().filter(|(id, _)| !table.contains(id)).map(|(id, _)| id.clone()).collect();
    if !missing.is_empty() {
        return Err(FeatureError::MissingSkus(missing));
    }
    let mut total = 0.0;
    for (id, q) in snapshot.in_stock() {
        let w = match mode {
            StockMode::Weighted => q as f64,
            _ => 1.0,
        };
        let row = table.row(id).expect("checked above");
        for (a, v) in acc.iter_mut().zip(row) {
            *a += w * *v as f64;
        }
        total += w;
    }
    if total == 0.0 {
        return Err(FeatureError::NoStock { store: snapshot.store_id.clone(), date: snapshot.date });
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(acc)
}

/// Drops entries whose sku has no embedding.
pub fn restrict_to_table(snapshot: &StockSnapshot, table: &EmbeddingTable) -> StockSnapshot {
    StockSnapshot {
        store_id: snapshot.store_id.clone(),
        date: snapshot.date,
        entries: snapshot.entries.iter().filter(|(id, _)| table.contains(id)).map(|(k, v)| (k.clone(), *v)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Id;
    use chrono::NaiveDate;
    use ndarray::array;
    use proptest::prelude::*;

    fn snap(entries: &[(&str, u32)]) -> StockSnapshot {
        StockSnapshot {
            store_id: "s".into(),
            date: NaiveDate::from_ymd_opt(2023, 1, 2).unwrap(),
            entries: entries.iter().map(|(k, v)| (Id::new(k), *v)).collect(),
        }
    }

    fn table() -> EmbeddingTable {
        EmbeddingTable::new(vec!["e1".into(), "e2".into(), "e3".into()], array![[1.0f32, 0.0], [0.0, 1.0], [0.3, -0.7]])
            .unwrap()
    }

    #[test]
    fn weighted_mean_arithmetic() {
        let s = snap(&[("e1", 3), ("e2", 1), ("e3", 0)]);
        assert_eq!(stock_embedding(&s, &table(), StockMode::Weighted).unwrap(), vec![0.75, 0.25]);
        assert_eq!(stock_embedding(&s, &table(), StockMode::Unweighted).unwrap(), vec![0.5, 0.5]);
        assert_eq!(stock_embedding(&s, &table(), StockMode::None).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_sku_is_its_row() {
        let s = snap(&[("e3", 9), ("e1", 0)]);
        let t = table();
        let expected: Vec<f64> = t.row("e3").unwrap().iter().map(|v| *v as f64).collect();
        assert_eq!(stock_embedding(&s, &t, StockMode::Weighted).unwrap(), expected);
        assert_eq!(stock_embedding(&s, &t, StockMode::Unweighted).unwrap(), expected);
    }

    #[test]
    fn errors() {
        assert!(matches!(stock_embedding(&snap(&[("e1", 0)]), &table(), StockMode::Unweighted), Err(FeatureError::NoStock { .. })));
        match stock_embedding(&snap(&[("zz", 2), ("e1", 1)]), &table(), StockMode::Weighted) {
            Err(FeatureError::MissingSkus(ids)) => assert_eq!(ids, vec![Id::new("zz")]),
            other => panic!("{other:?}"),
        }
        let restricted = restrict_to_table(&snap(&[("zz", 2), ("e1", 1)]), &table());
        assert_eq!(stock_embedding(&restricted, &table(), StockMode::Weighted).unwrap(), vec![1.0, 0.0]);
        assert!("both".parse::<StockMode>().is_err());
        assert_eq!("weighted".parse::<StockMode>().unwrap(), StockMode::Weighted);
    }

    #[test]
    fn removing_a_sku_changes_the_embedding() {
        let full = snap(&[("e1", 2), ("e2", 5), ("e3", 1)]);
        let less = snap(&[("e1", 2), ("e2", 5)]);
        for mode in [StockMode::Unweighted, StockMode::Weighted] {
            assert_ne!(stock_embedding(&full, &table(), mode).unwrap(), stock_embedding(&less, &table(), mode).unwrap());
        }
    }

    proptest! {
        #[test]
        fn equal_quantities_match_unweighted(q in 1u32..1000, mask in proptest::collection::vec(any::<bool>(), 3)) {
            prop_assume!(mask.iter().any(|m| *m));
            let entries: Vec<(&str, u32)> = ["e1", "e2", "e3"].iter().zip(&mask).map(|(k, m)| (*k, if *m { q } else { 0 })).collect();
            let s = snap(&entries);
            let w = stock_embedding(&s, &table(), StockMode::Weighted).unwrap();
            let u = stock_embedding(&s, &table(), StockMode::Unweighted).unwrap();
            for (a, b) in w.iter().zip(&u) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
