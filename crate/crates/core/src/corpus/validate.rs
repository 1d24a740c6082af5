use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};

use chrono::NaiveDate;

use super::{group_baskets, Id, SkuRecord, StockSnapshot, StoreRecord, TransactionLine};

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    UnknownSku { row: usize, transaction_id: Id, sku_id: Id },
    UnknownStore { row: usize, transaction_id: Id, store_id: Id },
    EmptyCustomer { row: usize, transaction_id: Id },
    InsufficientStock {
        row: usize,
        store_id: Id,
        date: NaiveDate,
        sku_id: Id,
        on_hand: u32,
        quantity: u32,
    },
    InconsistentBasket { transaction_id: Id },
    DuplicateCatalogSku { sku_id: Id },
    DuplicateStore { store_id: Id },
    DuplicateSnapshot { store_id: Id, date: NaiveDate },
    SnapshotUnknownStore { store_id: Id, date: NaiveDate },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownSku { row, transaction_id, sku_id } => {
                write!(f, "row {row} ({transaction_id}): unknown sku {sku_id}")
            }
            Violation::UnknownStore { row, transaction_id, store_id } => {
                write!(f, "row {row} ({transaction_id}): unknown store {store_id}")
            }
            Violation::EmptyCustomer { row, transaction_id } => {
                write!(f, "row {row} ({transaction_id}): empty customer id")
            }
            Violation::InsufficientStock { row, store_id, date, sku_id, on_hand, quantity } => write!(
                f,
                "row {row}: bought {quantity} of {sku_id} at {store_id} on {date} with {on_hand} on hand"
            ),
            Violation::InconsistentBasket { transaction_id } => {
                write!(f, "transaction {transaction_id}: lines disagree on customer, store or date")
            }
            Violation::DuplicateCatalogSku { sku_id } => write!(f, "catalog: duplicate sku {sku_id}"),
            Violation::DuplicateStore { store_id } => write!(f, "stores: duplicate store {store_id}"),
            Violation::DuplicateSnapshot { store_id, date } => {
                write!(f, "stocks: duplicate snapshot for {store_id} on {date}")
            }
            Violation::SnapshotUnknownStore { store_id, date } => {
                write!(f, "stocks: snapshot for unknown store {store_id} on {date}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStats {
    pub n_lines: usize,
    pub n_baskets: usize,
    pub n_customers: usize,
    pub n_days: usize,
    pub avg_lines_per_basket: f64,
    pub avg_unique_skus_per_basket: f64,
    pub transactions_per_week: f64,
    pub unique_products_per_customer: f64,
    /// Customers with at least two baskets, over all customers.
    pub repeat_customer_share: f64,
    /// Repeat customers seen at more than one store, over repeat customers.
    pub multi_store_repeat_share: f64,
    pub baskets_over_two_products_share: f64,
    pub baskets_at_least_five_products_share: f64,
    /// Stock entries with zero on hand, over all stock entries.
    pub zero_stock_share: f64,
}

impl CorpusStats {
    fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("n_lines", self.n_lines as f64),
            ("n_baskets", self.n_baskets as f64),
            ("n_customers", self.n_customers as f64),
            ("n_days", self.n_days as f64),
            ("avg_lines_per_basket", self.avg_lines_per_basket),
            ("avg_unique_skus_per_basket", self.avg_unique_skus_per_basket),
            ("transactions_per_week", self.transactions_per_week),
            ("unique_products_per_customer", self.unique_products_per_customer),
            ("repeat_customer_share", self.repeat_customer_share),
            ("multi_store_repeat_share", self.multi_store_repeat_share),
            ("baskets_over_two_products_share", self.baskets_over_two_products_share),
            ("baskets_at_least_five_products_share", self.baskets_at_least_five_products_share),
            ("zero_stock_share", self.zero_stock_share),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub stats: CorpusStats,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// Human-readable summary followed by `stat.<name>=<value>` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "violations: {}", self.violations.len());
        for v in self.violations.iter().take(50) {
            let _ = writeln!(out, "  - {v}");
        }
        if self.violations.len() > 50 {
            let _ = writeln!(out, "  ... {} more", self.violations.len() - 50);
        }
        let s = &self.stats;
        let _ = writeln!(
            out,
            "{} lines in {} baskets from {} customers over {} days",
            s.n_lines, s.n_baskets, s.n_customers, s.n_days
        );
        let _ = writeln!(
            out,
            "basket size {:.2} lines ({:.2} unique), {:.1} transactions/week",
            s.avg_lines_per_basket, s.avg_unique_skus_per_basket, s.transactions_per_week
        );
        for (name, value) in s.entries() {
            let _ = writeln!(out, "stat.{name}={value}");
        }
        out
    }
}

pub fn validate_corpus(
    transactions: &[TransactionLine],
    stocks: &[StockSnapshot],
    skus: &[SkuRecord],
    stores: &[StoreRecord],
) -> ValidationReport {
    let mut violations = Vec::new();

    let mut sku_set: HashSet<&str> = HashSet::new();
    for s in skus {
        if !sku_set.insert(s.sku_id.as_str()) {
            violations.push(Violation::DuplicateCatalogSku { sku_id: s.sku_id.clone() });
        }
    }
    let mut store_set: HashSet<&str> = HashSet::new();
    for s in stores {
        if !store_set.insert(s.store_id.as_str()) {
            violations.push(Violation::DuplicateStore { store_id: s.store_id.clone() });
        }
    }

    let mut snapshots: HashMap<(&str, NaiveDate), &StockSnapshot> = HashMap::new();
    let mut zero_entries = 0usize;
    let mut total_entries = 0usize;
    for snap in stocks {
        if snapshots.insert((snap.store_id.as_str(), snap.date), snap).is_some() {
            violations.push(Violation::DuplicateSnapshot { store_id: snap.store_id.clone(), date: snap.date });
        }
        if !store_set.contains(snap.store_id.as_str()) {
            violations.push(Violation::SnapshotUnknownStore { store_id: snap.store_id.clone(), date: snap.date });
        }
        total_entries += snap.entries.len();
        zero_entries += snap.entries.values().filter(|q| **q == 0).count();
    }

    // Aggregate per (basket, sku) so repeated lines are checked against one snapshot.
    let mut demand: BTreeMap<(usize, &str), (u32, usize)> = BTreeMap::new();
    let mut basket_of: HashMap<&str, usize> = HashMap::new();
    let mut inconsistent: BTreeSet<usize> = BTreeSet::new();
    let mut heads: Vec<usize> = Vec::new();
    for (row, line) in transactions.iter().enumerate() {
        if !sku_set.contains(line.sku_id.as_str()) {
            violations.push(Violation::UnknownSku {
                row,
                transaction_id: line.transaction_id.clone(),
                sku_id: line.sku_id.clone(),
            });
        }
        if !store_set.contains(line.store_id.as_str()) {
            violations.push(Violation::UnknownStore {
                row,
                transaction_id: line.transaction_id.clone(),
                store_id: line.store_id.clone(),
            });
        }
        if line.customer_id.as_str().is_empty() {
            violations.push(Violation::EmptyCustomer { row, transaction_id: line.transaction_id.clone() });
        }
        let basket = *basket_of.entry(line.transaction_id.as_str()).or_insert_with(|| {
            heads.push(row);
            heads.len() - 1
        });
        let head = &transactions[heads[basket]];
        if head.customer_id != line.customer_id || head.store_id != line.store_id || head.date != line.date {
            inconsistent.insert(basket);
        }
        demand.entry((basket, line.sku_id.as_str())).or_insert((0, row)).0 += line.quantity;
    }
    for (quantity, row) in demand.values() {
        let line = &transactions[*row];
        if !sku_set.contains(line.sku_id.as_str()) || !store_set.contains(line.store_id.as_str()) {
            continue;
        }
        let on_hand = snapshots
            .get(&(line.store_id.as_str(), line.date))
            .map(|s| s.on_hand(line.sku_id.as_str()))
            .unwrap_or(0);
        if on_hand < *quantity {
            violations.push(Violation::InsufficientStock {
                row: *row,
                store_id: line.store_id.clone(),
                date: line.date,
                sku_id: line.sku_id.clone(),
                on_hand,
                quantity: *quantity,
            });
        }
    }
    for basket in inconsistent {
        violations.push(Violation::InconsistentBasket {
            transaction_id: transactions[heads[basket]].transaction_id.clone(),
        });
    }

    let baskets = group_baskets(transactions);
    let mut stats = CorpusStats {
        n_lines: transactions.len(),
        n_baskets: baskets.len(),
        ..CorpusStats::default()
    };
    if !baskets.is_empty() {
        let n = baskets.len() as f64;
        let unique: Vec<usize> = baskets.iter().map(|b| b.distinct_skus().len()).collect();
        stats.avg_lines_per_basket = transactions.len() as f64 / n;
        stats.avg_unique_skus_per_basket = unique.iter().sum::<usize>() as f64 / n;
        stats.baskets_over_two_products_share = unique.iter().filter(|u| **u > 2).count() as f64 / n;
        stats.baskets_at_least_five_products_share = unique.iter().filter(|u| **u >= 5).count() as f64 / n;

        let first = transactions.iter().map(|l| l.date).min().expect("non-empty");
        let last = transactions.iter().map(|l| l.date).max().expect("non-empty");
        stats.n_days = (last - first).num_days() as usize + 1;
        stats.transactions_per_week = n / (stats.n_days as f64 / 7.0);

        let mut products: HashMap<&str, BTreeSet<&str>> = HashMap::new();
        for l in transactions {
            products.entry(l.customer_id.as_str()).or_default().insert(l.sku_id.as_str());
        }
        let mut visits: HashMap<&str, (usize, BTreeSet<&str>)> = HashMap::new();
        for b in &baskets {
            let e = visits.entry(b.customer_id.as_str()).or_default();
            e.0 += 1;
            e.1.insert(b.store_id.as_str());
        }
        stats.n_customers = visits.len();
        let cust = stats.n_customers as f64;
        stats.unique_products_per_customer =
            products.values().map(|s| s.len()).sum::<usize>() as f64 / cust;
        let repeat: Vec<_> = visits.values().filter(|(n, _)| *n >= 2).collect();
        stats.repeat_customer_share = repeat.len() as f64 / cust;
        if !repeat.is_empty() {
            stats.multi_store_repeat_share =
                repeat.iter().filter(|(_, s)| s.len() > 1).count() as f64 / repeat.len() as f64;
        }
    }
    if total_entries > 0 {
        stats.zero_stock_share = zero_entries as f64 / total_entries as f64;
    }

    ValidationReport { violations, stats }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_corpus, CorpusConfig};

    fn corpus() -> crate::corpus::SyntheticCorpus {
        generate_synthetic_corpus(&CorpusConfig {
            n_stores: 3,
            n_customers: 80,
            n_skus: 40,
            n_categories: 4,
            n_days: 14,
            ..CorpusConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn generated_corpus_is_clean() {
        let c = corpus();
        let report = validate_corpus(&c.transactions, &c.stocks, &c.skus, &c.stores);
        assert!(report.is_clean(), "{}", report.render());
        assert!(report.stats.avg_lines_per_basket > 1.0);
        assert!(report.stats.repeat_customer_share > 0.5);
    }

    #[test]
    fn unknown_sku_reported_once() {
        let mut c = corpus();
        c.transactions[0].sku_id = Id::new("ghost");
        let report = validate_corpus(&c.transactions, &c.stocks, &c.skus, &c.stores);
        assert_eq!(report.violations.len(), 1, "{}", report.render());
        assert!(matches!(report.violations[0], Violation::UnknownSku { row: 0, .. }));
    }

    #[test]
    fn zero_stock_purchase_reported() {
        let mut c = corpus();
        let line = c.transactions[0].clone();
        let snap = c
            .stocks
            .iter_mut()
            .find(|s| s.store_id == line.store_id && s.date == line.date)
            .unwrap();
        snap.entries.insert(line.sku_id.clone(), 0);
        let report = validate_corpus(&c.transactions, &c.stocks, &c.skus, &c.stores);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::InsufficientStock { on_hand: 0, .. })));
    }

    #[test]
    fn render_carries_stat_lines() {
        let c = corpus();
        let text = validate_corpus(&c.transactions, &c.stocks, &c.skus, &c.stores).render();
        assert!(text.contains("stat.avg_lines_per_basket="));
        assert!(text.contains("stat.repeat_customer_share="));
        assert!(text.contains("stat.transactions_per_week="));
    }
}
