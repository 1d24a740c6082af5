//! Retail domain records, CSV ingestion and the synthetic corpus generator.

mod generate;
mod io;
mod split;
mod validate;

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use chrono::NaiveDate;
use thiserror::Error;

pub use generate::{generate_synthetic_corpus, CorpusConfig, SyntheticCorpus};
pub use io::{
    load_skus, load_stocks, load_stores, load_transactions, read_skus, read_stocks, read_stores,
    read_transactions, write_skus, write_stocks, write_stores, write_transactions,
};
pub use split::split_train_eval;
pub use validate::{validate_corpus, CorpusStats, ValidationReport, Violation};

/// Opaque string identifier (sku, store, customer, transaction).
///
/// Backed by a shared `str` so that large stock tables can hold millions of
/// references to the same id cheaply.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Id(Arc<str>);

impl Id {
    pub fn new(s: impl AsRef<str>) -> Self {
        Id(Arc::from(s.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Id {
    fn from(s: &str) -> Self {
        Id::new(s)
    }
}

impl From<String> for Id {
    fn from(s: String) -> Self {
        Id(Arc::from(s))
    }
}

impl Borrow<str> for Id {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Id {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkuRecord {
    pub sku_id: Id,
    /// Name tokens; stored space-separated in `skus.csv`.
    pub name: Vec<String>,
    pub category_id: Id,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreRecord {
    pub store_id: Id,
    pub city: String,
}

/// One purchased SKU line.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionLine {
    pub transaction_id: Id,
    pub customer_id: Id,
    pub store_id: Id,
    pub date: NaiveDate,
    pub sku_id: Id,
    pub quantity: u32,
    pub unit_price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasketLine {
    pub sku_id: Id,
    pub quantity: u32,
    pub unit_price: f64,
}

/// All lines sharing one transaction id.
#[derive(Debug, Clone, PartialEq)]
pub struct Basket {
    pub transaction_id: Id,
    pub customer_id: Id,
    pub store_id: Id,
    pub date: NaiveDate,
    pub lines: Vec<BasketLine>,
}

impl Basket {
    /// Distinct skus in line order of first appearance.
    pub fn distinct_skus(&self) -> Vec<&Id> {
        let mut seen = Vec::with_capacity(self.lines.len());
        for line in &self.lines {
            if !seen.contains(&&line.sku_id) {
                seen.push(&line.sku_id);
            }
        }
        seen
    }
}

/// Groups lines into baskets keyed by transaction id, in order of first
/// appearance. Store, customer and date are taken from the first line.
pub fn group_baskets(lines: &[TransactionLine]) -> Vec<Basket> {
    let mut index: HashMap<&Id, usize> = HashMap::new();
    let mut baskets: Vec<Basket> = Vec::new();
    for line in lines {
        let slot = *index.entry(&line.transaction_id).or_insert_with(|| {
            baskets.push(Basket {
                transaction_id: line.transaction_id.clone(),
                customer_id: line.customer_id.clone(),
                store_id: line.store_id.clone(),
                date: line.date,
                lines: Vec::new(),
            });
            baskets.len() - 1
        });
        baskets[slot].lines.push(BasketLine {
            sku_id: line.sku_id.clone(),
            quantity: line.quantity,
            unit_price: line.unit_price,
        });
    }
    baskets
}

/// Start-of-day on-hand quantities for one store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StockSnapshot {
    pub store_id: Id,
    pub date: NaiveDate,
    pub entries: BTreeMap<Id, u32>,
}

impl StockSnapshot {
    pub fn on_hand(&self, sku: &str) -> u32 {
        self.entries.get(sku).copied().unwrap_or(0)
    }

    /// Entries with a positive quantity.
    pub fn in_stock(&self) -> impl Iterator<Item = (&Id, u32)> {
        self.entries.iter().filter(|(_, q)| **q > 0).map(|(id, q)| (id, *q))
    }

    pub fn key(&self) -> (Id, NaiveDate) {
        (self.store_id.clone(), self.date)
    }
}

/// Snapshot lookup by `(store_id, date)`.
pub fn index_snapshots(stocks: &[StockSnapshot]) -> HashMap<(Id, NaiveDate), &StockSnapshot> {
    stocks.iter().map(|s| (s.key(), s)).collect()
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: field `{field}`: {message}")]
    Parse {
        line: u64,
        field: &'static str,
        message: String,
    },
    #[error("line {line}: bad header, expected `{expected}`")]
    Header { line: u64, expected: &'static str },
    #[error("line {line}: duplicate stock row for store {store}, date {date}, sku {sku}")]
    DuplicateStock {
        line: u64,
        store: Id,
        date: NaiveDate,
        sku: Id,
    },
    #[error("invalid corpus config: {0}")]
    Config(String),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;
