//! Deterministic stock-aware synthetic corpus.
//!
//! Customers carry latent preference vectors, skus carry category-clustered
//! latent vectors and a popularity offset. A customer's choice weight for a
//! sku on a given day is
//!
//! ```text
//! exp(popularity + <customer, sku>) * seasonality(category, weekday) * [on_hand > 0]
//! ```
//!
//! Stores replenish every sku to its capacity on a store-specific cycle; each
//! replenishment fails with the sku's stockout rate, leaving it at zero for
//! the cycle. Purchases deplete a running level, and the emitted snapshot is
//! the start-of-day level, so every line is feasible against its snapshot.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};

use super::{CorpusError, Id, Result, SkuRecord, StockSnapshot, StoreRecord, TransactionLine};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub n_stores: usize,
    pub n_customers: usize,
    pub n_skus: usize,
    pub n_categories: usize,
    pub n_days: usize,
    pub window_start: NaiveDate,
    pub preference_dim: usize,
    pub stockout_rate: f64,
    /// Per-sku overrides of `stockout_rate`, keyed by generated sku id.
    pub sku_stockout_rates: BTreeMap<String, f64>,
    pub replenish_period: usize,
    pub seasonality_amplitude: f64,
    pub mean_basket_size: f64,
    /// Mean probability that a customer shops on a given day.
    pub visit_rate: f64,
    /// Probability that a visit goes to a store other than the home store.
    pub away_store_rate: f64,
    /// Weight of a per-store taste shared by that store's home customers.
    /// Stores also stock deeper on what their locals like, so stock levels
    /// carry information about who shops there.
    pub regional_taste: f64,
    /// Share of the catalog each store never carries.
    pub assortment_gap: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_stores: 50,
            n_customers: 1000,
            n_skus: 500,
            n_categories: 25,
            n_days: 56,
            window_start: NaiveDate::from_ymd_opt(2023, 1, 2).expect("valid date"),
            preference_dim: 8,
            stockout_rate: 0.05,
            sku_stockout_rates: BTreeMap::new(),
            replenish_period: 7,
            seasonality_amplitude: 0.3,
            mean_basket_size: 14.0,
            visit_rate: 0.2,
            away_store_rate: 0.08,
            regional_taste: 0.0,
            assortment_gap: 0.0,
            seed: 0,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CorpusError::Config(m));
        for (name, v) in [
            ("n_stores", self.n_stores),
            ("n_customers", self.n_customers),
            ("n_skus", self.n_skus),
            ("n_categories", self.n_categories),
            ("preference_dim", self.preference_dim),
            ("replenish_period", self.replenish_period),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.n_skus < self.n_categories {
            return bad("n_skus must be >= n_categories".into());
        }
        if self.n_days < 7 {
            return bad("n_days must be >= 7".into());
        }
        if !(0.0..=1.0).contains(&self.stockout_rate) {
            return bad("stockout_rate must lie in [0, 1]".into());
        }
        if !(self.seasonality_amplitude >= 0.0 && self.seasonality_amplitude.is_finite()) {
            return bad("seasonality_amplitude must be >= 0".into());
        }
        if !(self.mean_basket_size >= 1.0 && self.mean_basket_size.is_finite()) {
            return bad("mean_basket_size must be >= 1".into());
        }
        if !(self.visit_rate > 0.0 && self.visit_rate <= 1.0) {
            return bad("visit_rate must lie in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.away_store_rate) {
            return bad("away_store_rate must lie in [0, 1]".into());
        }
        if !(self.regional_taste >= 0.0 && self.regional_taste.is_finite()) {
            return bad("regional_taste must be >= 0".into());
        }
        if !(0.0..1.0).contains(&self.assortment_gap) {
            return bad("assortment_gap must lie in [0, 1)".into());
        }
        for (sku, rate) in &self.sku_stockout_rates {
            if !(0.0..=1.0).contains(rate) {
                return bad(format!("stockout rate for {sku} must lie in [0, 1]"));
            }
            if !(0..self.n_skus).any(|i| sku_id(i) == *sku) {
                return bad(format!("stockout override for unknown sku {sku}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub skus: Vec<SkuRecord>,
    pub stores: Vec<StoreRecord>,
    pub transactions: Vec<TransactionLine>,
    pub stocks: Vec<StockSnapshot>,
}

impl SyntheticCorpus {
    /// Writes `skus.csv`, `stores.csv`, `transactions.csv` and `stocks.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        super::io::write_all(dir, self)
    }
}

pub fn sku_id(i: usize) -> String {
    format!("sku{i:05}")
}

fn store_id(i: usize) -> String {
    format!("st{i:03}")
}

fn customer_id(i: usize) -> String {
    format!("cu{i:06}")
}

const CATEGORY_WORDS: &[&str] = &[
    "dairy", "bakery", "produce", "meat", "seafood", "frozen", "snacks", "beverages", "pantry",
    "cereal", "household", "personal", "baby", "pet", "deli", "sweets", "spices", "canned",
    "pasta", "coffee", "tea", "wine", "beer", "cleaning", "paper",
];
const ADJECTIVES: &[&str] = &[
    "fresh", "organic", "classic", "light", "premium", "family", "mini", "large", "spicy", "mild",
    "sweet", "salted", "natural", "extra", "smooth",
];
const CITIES: &[&str] = &[
    "Warsaw", "Krakow", "Lodz", "Wroclaw", "Poznan", "Gdansk", "Szczecin", "Lublin", "Bydgoszcz",
    "Katowice", "Torun", "Kielce", "Rzeszow", "Olsztyn", "Opole",
];

fn round_cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Draws `k` distinct indices with probability proportional to `weights`,
/// zeroing each chosen weight.
fn draw_without_replacement(weights: &mut [f64], k: usize, rng: &mut rng::Rng) -> Vec<usize> {
    let mut picked = Vec::with_capacity(k);
    let mut total: f64 = weights.iter().sum();
    for _ in 0..k {
        if total <= 0.0 {
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        let mut last_positive = None;
        for (i, w) in weights.iter().enumerate() {
            if *w <= 0.0 {
                continue;
            }
            last_positive = Some(i);
            acc += *w;
            if acc > target {
                chosen = Some(i);
                break;
            }
        }
        // Rounding can leave `target` just past the final cumulative sum.
        let Some(i) = chosen.or(last_positive) else { break };
        total -= weights[i];
        weights[i] = 0.0;
        picked.push(i);
    }
    picked
}

pub fn generate_synthetic_corpus(config: &CorpusConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, rng::CORPUS, 0);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let d = config.preference_dim;

    let centers: Vec<Vec<f64>> = (0..config.n_categories)
        .map(|_| (0..d).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    let category_phase: Vec<f64> = (0..config.n_categories)
        .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
        .collect();

    let mut skus = Vec::with_capacity(config.n_skus);
    let mut sku_category = Vec::with_capacity(config.n_skus);
    let mut sku_latent = Vec::with_capacity(config.n_skus);
    let mut popularity = Vec::with_capacity(config.n_skus);
    let mut base_price = Vec::with_capacity(config.n_skus);
    let category_ids: Vec<Id> = (0..config.n_categories).map(|c| Id::new(format!("cat{c:03}"))).collect();
    for i in 0..config.n_skus {
        let c = i % config.n_categories;
        let latent: Vec<f64> = centers[c].iter().map(|m| m + 0.5 * normal.sample(&mut rng)).collect();
        let word = CATEGORY_WORDS[c % CATEGORY_WORDS.len()];
        let adjective = ADJECTIVES[rng.random_range(0..ADJECTIVES.len())];
        skus.push(SkuRecord {
            sku_id: Id::new(sku_id(i)),
            name: vec![adjective.to_owned(), word.to_owned(), format!("item{i}")],
            category_id: category_ids[c].clone(),
        });
        sku_category.push(c);
        sku_latent.push(latent);
        popularity.push(0.7 * normal.sample(&mut rng));
        let price = (4.0f64.ln() + 0.8 * normal.sample(&mut rng)).exp().clamp(0.2, 200.0);
        base_price.push(round_cents(price).max(0.01));
    }
    let stockout: Vec<f64> = (0..config.n_skus)
        .map(|i| {
            config
                .sku_stockout_rates
                .get(&sku_id(i))
                .copied()
                .unwrap_or(config.stockout_rate)
        })
        .collect();

    let mut stores = Vec::with_capacity(config.n_stores);
    let mut store_price = Vec::with_capacity(config.n_stores);
    let mut store_phase = Vec::with_capacity(config.n_stores);
    for s in 0..config.n_stores {
        stores.push(StoreRecord {
            store_id: Id::new(store_id(s)),
            city: CITIES[rng.random_range(0..CITIES.len())].to_owned(),
        });
        store_price.push(0.95 + 0.1 * rng.random::<f64>());
        store_phase.push(rng.random_range(0..config.replenish_period));
    }

    let scale = 1.0 / (d as f64).sqrt();
    // Regional structure has its own stream so the default corpus does not
    // depend on whether it is enabled.
    let mut regional = rng::stream(config.seed, rng::CORPUS, 1);
    let store_taste: Vec<Vec<f64>> = (0..config.n_stores)
        .map(|_| (0..d).map(|_| 1.5 * scale * normal.sample(&mut regional)).collect())
        .collect();
    let carried: Vec<Vec<bool>> = (0..config.n_stores)
        .map(|_| (0..config.n_skus).map(|_| regional.random::<f64>() >= config.assortment_gap).collect())
        .collect();
    let mut home = Vec::with_capacity(config.n_customers);
    let mut visit_p = Vec::with_capacity(config.n_customers);
    let mut affinity = Vec::with_capacity(config.n_customers);
    for _ in 0..config.n_customers {
        let h = rng.random_range(0..config.n_stores);
        home.push(h);
        visit_p.push((config.visit_rate * (0.5 + rng.random::<f64>())).min(1.0));
        let u: Vec<f64> = (0..d)
            .map(|k| 1.5 * scale * normal.sample(&mut rng) + config.regional_taste * store_taste[h][k])
            .collect();
        let row: Vec<f64> = (0..config.n_skus)
            .map(|i| {
                let dot: f64 = u.iter().zip(&sku_latent[i]).map(|(a, b)| a * b).sum();
                (popularity[i] + dot).exp()
            })
            .collect();
        affinity.push(row);
    }

    let capacity: Vec<Vec<u32>> = (0..config.n_stores)
        .map(|s| {
            (0..config.n_skus)
                .map(|i| {
                    let local: f64 = store_taste[s].iter().zip(&sku_latent[i]).map(|(a, b)| a * b).sum();
                    let lambda = 3.0 * (popularity[i] + config.regional_taste * local).exp();
                    let depth = 1 + Poisson::new(lambda).expect("positive rate").sample(&mut rng) as u32;
                    if carried[s][i] { depth } else { 0 }
                })
                .collect()
        })
        .collect();

    let store_ids: Vec<Id> = stores.iter().map(|s| s.store_id.clone()).collect();
    let sku_ids: Vec<Id> = skus.iter().map(|s| s.sku_id.clone()).collect();
    let customer_ids: Vec<Id> = (0..config.n_customers).map(|c| Id::new(customer_id(c))).collect();
    let extra_lines = Poisson::new((config.mean_basket_size - 1.0).max(1e-9)).expect("positive rate");
    let extra_units = Poisson::new(0.3).expect("positive rate");

    let mut level = vec![vec![0u32; config.n_skus]; config.n_stores];
    let mut transactions = Vec::new();
    let mut stocks = Vec::with_capacity(config.n_stores * config.n_days);
    let mut tx_counter = 0usize;
    let mut weights = vec![0.0; config.n_skus];

    for day in 0..config.n_days {
        let date = config.window_start + Duration::days(day as i64);
        let weekday = date.weekday().num_days_from_monday() as f64;

        for s in 0..config.n_stores {
            let replenish = day == 0 || (day + store_phase[s]) % config.replenish_period == 0;
            if replenish {
                for i in 0..config.n_skus {
                    // Always draw so rng consumption is independent of the rates.
                    let outage = rng.random::<f64>() < stockout[i];
                    level[s][i] = if outage { 0 } else { capacity[s][i] };
                }
            }
            stocks.push(StockSnapshot {
                store_id: store_ids[s].clone(),
                date,
                entries: sku_ids.iter().cloned().zip(level[s].iter().copied()).collect(),
            });
        }

        let season: Vec<f64> = category_phase
            .iter()
            .map(|phase| {
                let angle = std::f64::consts::TAU * weekday / 7.0 + phase;
                (1.0 + config.seasonality_amplitude * angle.sin()).max(0.05)
            })
            .collect();

        let mut visits: Vec<(usize, usize)> = Vec::new();
        for c in 0..config.n_customers {
            if rng.random::<f64>() >= visit_p[c] {
                continue;
            }
            let store = if config.n_stores > 1 && rng.random::<f64>() < config.away_store_rate {
                let other = rng.random_range(0..config.n_stores - 1);
                if other >= home[c] { other + 1 } else { other }
            } else {
                home[c]
            };
            visits.push((store, c));
        }
        visits.sort_by_key(|&(store, _)| store);

        for (s, c) in visits {
            let mut available = 0usize;
            for i in 0..config.n_skus {
                weights[i] = if level[s][i] > 0 {
                    available += 1;
                    affinity[c][i] * season[sku_category[i]]
                } else {
                    0.0
                };
            }
            if available == 0 {
                continue;
            }
            let k = (1 + extra_lines.sample(&mut rng) as usize).min(available);
            let picked = draw_without_replacement(&mut weights, k, &mut rng);
            if picked.is_empty() {
                continue;
            }
            tx_counter += 1;
            let tid = Id::new(format!("tx{tx_counter:07}"));
            for i in picked {
                let want = 1 + extra_units.sample(&mut rng) as u32;
                let quantity = want.min(level[s][i]);
                level[s][i] -= quantity;
                transactions.push(TransactionLine {
                    transaction_id: tid.clone(),
                    customer_id: customer_ids[c].clone(),
                    store_id: store_ids[s].clone(),
                    date,
                    sku_id: sku_ids[i].clone(),
                    quantity,
                    unit_price: round_cents(base_price[i] * store_price[s]).max(0.01),
                });
            }
        }
    }

    Ok(SyntheticCorpus {
        skus,
        stores,
        transactions,
        stocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{group_baskets, index_snapshots};

    fn small() -> CorpusConfig {
        CorpusConfig {
            n_stores: 4,
            n_customers: 120,
            n_skus: 60,
            n_categories: 6,
            n_days: 14,
            ..CorpusConfig::default()
        }
    }

    fn csv_bytes(c: &SyntheticCorpus) -> Vec<u8> {
        let mut out = Vec::new();
        crate::corpus::write_transactions(&mut out, &c.transactions).unwrap();
        crate::corpus::write_stocks(&mut out, &c.stocks).unwrap();
        crate::corpus::write_skus(&mut out, &c.skus).unwrap();
        crate::corpus::write_stores(&mut out, &c.stores).unwrap();
        out
    }

    #[test]
    fn same_seed_byte_identical() {
        let a = generate_synthetic_corpus(&small()).unwrap();
        let b = generate_synthetic_corpus(&small()).unwrap();
        assert_eq!(csv_bytes(&a), csv_bytes(&b));
        let other = generate_synthetic_corpus(&CorpusConfig { seed: 9, ..small() }).unwrap();
        assert_ne!(csv_bytes(&a), csv_bytes(&other));
    }

    #[test]
    fn purchases_are_feasible() {
        let c = generate_synthetic_corpus(&small()).unwrap();
        let idx = index_snapshots(&c.stocks);
        assert!(!c.transactions.is_empty());
        for line in &c.transactions {
            let snap = idx[&(line.store_id.clone(), line.date)];
            assert!(snap.on_hand(line.sku_id.as_str()) >= line.quantity);
        }
    }

    #[test]
    fn full_stockout_sku_never_bought() {
        let mut cfg = small();
        cfg.sku_stockout_rates.insert(sku_id(3), 1.0);
        let c = generate_synthetic_corpus(&cfg).unwrap();
        assert!(c.transactions.iter().all(|l| l.sku_id.as_str() != sku_id(3)));
    }

    #[test]
    fn rejects_invalid_config() {
        assert!(generate_synthetic_corpus(&CorpusConfig { n_days: 6, ..small() }).is_err());
        assert!(generate_synthetic_corpus(&CorpusConfig { n_skus: 3, ..small() }).is_err());
        assert!(generate_synthetic_corpus(&CorpusConfig { stockout_rate: 1.5, ..small() }).is_err());
        let mut cfg = small();
        cfg.sku_stockout_rates.insert("nope".into(), 0.5);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn desk_basket_size_near_fourteen() {
        let c = generate_synthetic_corpus(&CorpusConfig::default()).unwrap();
        let baskets = group_baskets(&c.transactions);
        let mean = c.transactions.len() as f64 / baskets.len() as f64;
        assert!((mean - 14.0).abs() <= 14.0 * 0.2, "mean basket size {mean}");
    }

    #[test]
    fn sampling_without_replacement_is_distinct() {
        let mut r = rng::from_seed(1);
        let mut w = vec![1.0, 0.0, 2.0, 3.0, 0.5];
        let picked = draw_without_replacement(&mut w, 10, &mut r);
        assert_eq!(picked.len(), 4);
        let mut sorted = picked.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
        assert!(!picked.contains(&1));
    }

    #[test]
    fn assortment_gap_leaves_skus_never_stocked() {
        let cfg = CorpusConfig { assortment_gap: 0.4, regional_taste: 1.0, ..small() };
        let c = generate_synthetic_corpus(&cfg).unwrap();
        let index = index_snapshots(&c.stocks);
        for store in &c.stores {
            let days: Vec<_> = c.stocks.iter().filter(|s| s.store_id == store.store_id).map(|s| s.date).collect();
            let never: Vec<&Id> = c.skus.iter().map(|k| &k.sku_id)
                .filter(|sku| days.iter().all(|d| index[&(store.store_id.clone(), *d)].on_hand(sku.as_str()) == 0))
                .collect();
            let share = never.len() as f64 / c.skus.len() as f64;
            assert!((0.2..=0.6).contains(&share), "{share}");
            assert!(!c.transactions.iter().any(|l| l.store_id == store.store_id && never.contains(&&l.sku_id)));
        }
    }

    #[test]
    fn regional_knobs_off_leave_corpus_unchanged() {
        let base = generate_synthetic_corpus(&small()).unwrap();
        let same = generate_synthetic_corpus(&CorpusConfig { regional_taste: 0.0, assortment_gap: 0.0, ..small() }).unwrap();
        assert_eq!(csv_bytes(&base), csv_bytes(&same));
        let shifted = generate_synthetic_corpus(&CorpusConfig { regional_taste: 1.0, ..small() }).unwrap();
        assert_ne!(csv_bytes(&base), csv_bytes(&shifted));
    }
}
