//! Item vectors and stock embeddings.
//!
//! An item vector is `product ⊕ customer ⊕ date(6) ⊕ log_price(1)`; see
//! [`ItemLayout`] for the block offsets. Every block is min-max scaled to
//! `[-1, 1]` per dimension with a [`ScalerParams`] fitted on training data.

mod dataset;
mod scaler;
mod stock;

use std::f64::consts::TAU;
use std::ops::Range;

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

use crate::corpus::Id;

pub use dataset::{build_item_dataset, build_stock_dataset, stock_key_id, ItemDataset, StockDataset};
pub use scaler::{fit_scaler, ScalerParams};

pub use stock::{restrict_to_table, stock_embedding, StockMode};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("{block} block has {got} values, expected {expected}")]
    BlockDim { block: &'static str, expected: usize, got: usize },
    #[error("unit price must be positive and finite, got {0}")]
    Price(f64),
    #[error("cannot fit a scaler on an empty dataset")]
    EmptyDataset,
    #[error("vector has {got} values, scaler expects {expected}")]
    ScalerDim { expected: usize, got: usize },
    #[error("store {store} on {date}: no in-stock sku has an embedding")]
    NoStock { store: Id, date: NaiveDate },
    #[error("in-stock skus missing from the product table: {0:?}")]
    MissingSkus(Vec<Id>),
    #[error("no stock snapshot for store {store} on {date}")]
    MissingSnapshot { store: Id, date: NaiveDate },
    #[error("unknown stock mode `{0}` (expected none, unweighted or weighted)")]
    Mode(String),
    #[error("scaler file: {0}")]
    Io(String),
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

pub const DATE_DIM: usize = 6;
pub const PRICE_DIM: usize = 1;

/// (sin, cos) for day of week, day of month and month, in that order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DateFeatures(pub [f64; DATE_DIM]);

/// Monday is weekday 0; day-of-month uses period 31 in every month.
pub fn cyclic_date_features(date: NaiveDate) -> DateFeatures {
    cyclic_features(date.weekday().num_days_from_monday(), date.day(), date.month())
}

/// Encodes a `(weekday 0..7, day 1..=31, month 1..=12)` triple, which need
/// not be a real calendar date.
pub fn cyclic_features(weekday: u32, day: u32, month: u32) -> DateFeatures {
    let angles = [
        TAU * weekday as f64 / 7.0,
        TAU * (day as f64 - 1.0) / 31.0,
        TAU * (month as f64 - 1.0) / 12.0,
    ];
    let mut out = [0.0; DATE_DIM];
    for (k, a) in angles.into_iter().enumerate() {
        out[2 * k] = a.sin();
        out[2 * k + 1] = a.cos();
    }
    DateFeatures(out)
}

pub fn log_price(unit_price: f64) -> Result<f64> {
    if unit_price > 0.0 && unit_price.is_finite() {
        Ok(unit_price.ln())
    } else {
        Err(FeatureError::Price(unit_price))
    }
}

/// Block widths of an item vector. `Default` is 1024 / 256 / 6 / 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ItemLayout {
    pub product_dim: usize,
    pub customer_dim: usize,
}

impl Default for ItemLayout {
    fn default() -> Self {
        ItemLayout { product_dim: 1024, customer_dim: 256 }
    }
}

impl ItemLayout {
    pub fn new(product_dim: usize, customer_dim: usize) -> Self {
        ItemLayout { product_dim, customer_dim }
    }

    pub fn len(&self) -> usize {
        self.product_dim + self.customer_dim + DATE_DIM + PRICE_DIM
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Start offsets of the product, customer, date and price blocks.
    pub fn offsets(&self) -> [usize; 4] {
        let c = self.product_dim;
        let d = c + self.customer_dim;
        [0, c, d, d + DATE_DIM]
    }

    pub fn product(&self) -> Range<usize> {
        0..self.product_dim
    }

    pub fn customer(&self) -> Range<usize> {
        let [_, c, d, _] = self.offsets();
        c..d
    }

    pub fn date(&self) -> Range<usize> {
        let [_, _, d, p] = self.offsets();
        d..p
    }

    pub fn price(&self) -> usize {
        self.offsets()[3]
    }
}

pub fn assemble_item_vector(
    layout: &ItemLayout,
    product: &[f64],
    customer: &[f64],
    date: &DateFeatures,
    log_price: f64,
) -> Result<Vec<f64>> {
    for (block, expected, got) in [
        ("product", layout.product_dim, product.len()),
        ("customer", layout.customer_dim, customer.len()),
    ] {
        if expected != got {
            return Err(FeatureError::BlockDim { block, expected, got });
        }
    }
    let mut v = Vec::with_capacity(layout.len());
    v.extend_from_slice(product);
    v.extend_from_slice(customer);
    v.extend_from_slice(&date.0);
    v.push(log_price);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn zero_angles() {
        // 2024-01-01 is a Monday.
        let f = cyclic_date_features(d(2024, 1, 1)).0;
        let expected = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        for (a, e) in f.iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn april_is_a_quarter_turn() {
        let f = cyclic_date_features(d(2023, 4, 10)).0;
        assert!((f[4] - FRAC_PI_2.sin()).abs() < 1e-15);
        assert!((f[5] - FRAC_PI_2.cos()).abs() < 1e-15);
    }

    #[test]
    fn adjacent_weekdays_are_equidistant() {
        let monday = d(2024, 1, 1);
        let step = |a: NaiveDate, b: NaiveDate| {
            let (fa, fb) = (cyclic_date_features(a).0, cyclic_date_features(b).0);
            ((fa[0] - fb[0]).powi(2) + (fa[1] - fb[1]).powi(2)).sqrt()
        };
        let expected = 2.0 * (std::f64::consts::PI / 7.0).sin();
        for k in 0..7 {
            let a = monday + chrono::Days::new(k);
            let b = a + chrono::Days::new(1);
            assert!((step(a, b) - expected).abs() < 1e-9, "day {k}");
        }
    }

    #[test]
    fn log_price_domain() {
        assert_eq!(log_price(1.0).unwrap(), 0.0);
        assert!((log_price(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-12);
        assert!(log_price(0.0).is_err());
        assert!(log_price(-2.0).is_err());
    }

    #[test]
    fn default_layout_offsets() {
        let l = ItemLayout::default();
        assert_eq!(l.len(), 1287);
        assert_eq!(l.offsets(), [0, 1024, 1280, 1286]);
    }

    #[test]
    fn assemble_checks_blocks() {
        let l = ItemLayout::default();
        let date = cyclic_date_features(d(2023, 3, 5));
        let v = assemble_item_vector(&l, &vec![0.1; 1024], &vec![0.2; 256], &date, -0.7).unwrap();
        assert_eq!(v.len(), 1287);
        assert_eq!(v[1286], -0.7);
        assert_eq!(&v[l.date()], &date.0);
        match assemble_item_vector(&l, &vec![0.1; 1023], &vec![0.2; 256], &date, 0.0) {
            Err(FeatureError::BlockDim { block: "product", expected: 1024, got: 1023 }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            assemble_item_vector(&l, &vec![0.1; 1024], &vec![0.2; 3], &date, 0.0),
            Err(FeatureError::BlockDim { block: "customer", .. })
        ));
    }

    proptest! {
        #[test]
        fn date_pairs_on_unit_circle(days in 0i64..40_000) {
            let date = d(1970, 1, 1) + chrono::Duration::days(days);
            let f = cyclic_date_features(date).0;
            for k in 0..3 {
                prop_assert!((f[2 * k].powi(2) + f[2 * k + 1].powi(2) - 1.0).abs() < 1e-9);
                prop_assert!(f[2 * k].abs() <= 1.0 && f[2 * k + 1].abs() <= 1.0);
            }
        }

        #[test]
        fn blocks_round_trip(p in proptest::collection::vec(-5.0f64..5.0, 8), c in proptest::collection::vec(-5.0f64..5.0, 3), price in -3.0f64..3.0) {
            let l = ItemLayout::new(8, 3);
            let date = cyclic_date_features(d(2023, 6, 17));
            let v = assemble_item_vector(&l, &p, &c, &date, price).unwrap();
            prop_assert_eq!(&v[l.product()], &p[..]);
            prop_assert_eq!(&v[l.customer()], &c[..]);
            prop_assert_eq!(&v[l.date()], &date.0[..]);
            prop_assert_eq!(v[l.price()], price);
        }
    }
}
