use std::collections::BTreeSet;

use ndarray::Array2;

use super::{GanError, Result};
use crate::corpus::Id;
use crate::embed::EmbeddingTable;
use crate::features::{cyclic_features, ItemLayout, ScalerParams, DATE_DIM};

/// Nearest-sku lookup over unit-normalised product rows.
#[derive(Debug, Clone)]
pub struct SkuDecoder {
    table: EmbeddingTable,
    unit: Array2<f64>,
    product_scaler: ScalerParams,
}

impl SkuDecoder {
    /// `scaler` may cover the whole item vector; only its product block is used.
    pub fn new(table: &EmbeddingTable, scaler: &ScalerParams) -> Result<Self> {
        if scaler.dim() < table.dim() {
            return Err(GanError::Dim(format!("scaler covers {} dims, products need {}", scaler.dim(), table.dim())));
        }
        let mut unit = table.matrix().mapv(|v| v as f64);
        for mut row in unit.rows_mut() {
            let n = row.dot(&row).sqrt();
            if n > 0.0 {
                row /= n;
            }
        }
        Ok(SkuDecoder { table: table.clone(), unit, product_scaler: scaler.slice(0..table.dim()) })
    }

    /// Unscales the product block of `v` and returns the in-mask sku of
    /// highest cosine similarity. Ties go to the smallest sku id.
    pub fn decode(&self, v: &[f64], mask: &BTreeSet<Id>) -> Result<(Id, f64)> {
        let dim = self.table.dim();
        if v.len() < dim {
            return Err(GanError::Dim(format!("vector has {} values, product block needs {dim}", v.len())));
        }
        let p = self.product_scaler.invert(&v[..dim])?;
        let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut best: Option<(&Id, f64)> = None;
        for id in mask {
            let i = self.table.position(id).ok_or_else(|| GanError::UnknownSku(id.to_string()))?;
            let dot: f64 = self.unit.row(i).iter().zip(&p).map(|(a, b)| a * b).sum();
            let sim = if norm > 0.0 { dot / norm } else { 0.0 };
            if best.is_none_or(|(_, s)| sim > s) {
                best = Some((id, sim));
            }
        }
        let (id, sim) = best.ok_or(GanError::EmptyMask)?;
        Ok((id.clone(), sim))
    }
}

pub fn decode_to_sku(
    v: &[f64],
    product_table: &EmbeddingTable,
    stock_mask: &BTreeSet<Id>,
    scaler: &ScalerParams,
) -> Result<(Id, f64)> {
    SkuDecoder::new(product_table, scaler)?.decode(v, stock_mask)
}

/// An item vector mapped back to raw space.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedFields {
    pub product: Vec<f64>,
    pub customer: Vec<f64>,
    pub date_block: [f64; DATE_DIM],
    pub price: f64,
    /// Monday = 0.
    pub weekday: u32,
    pub day: u32,
    pub month: u32,
}

/// Unscales `v`, takes `exp` of the log-price and picks the calendar
/// triple whose encoding is nearest the date block (first in
/// weekday, day, month order on ties).
pub fn decode_fields(v: &[f64], scaler: &ScalerParams, layout: &ItemLayout) -> Result<DecodedFields> {
    if v.len() != layout.len() {
        return Err(GanError::Dim(format!("vector has {} values, layout needs {}", v.len(), layout.len())));
    }
    let raw = scaler.invert(v)?;
    let mut date_block = [0.0; DATE_DIM];
    date_block.copy_from_slice(&raw[layout.date()]);
    let mut best = (f64::INFINITY, 0, 1, 1);
    for weekday in 0..7 {
        for day in 1..=31 {
            for month in 1..=12 {
                let enc = cyclic_features(weekday, day, month).0;
                let d: f64 = enc.iter().zip(&date_block).map(|(a, b)| (a - b).powi(2)).sum();
                if d < best.0 {
                    best = (d, weekday, day, month);
                }
            }
        }
    }
    Ok(DecodedFields {
        product: raw[layout.product()].to_vec(),
        customer: raw[layout.customer()].to_vec(),
        date_block,
        price: raw[layout.price()].exp(),
        weekday: best.1,
        day: best.2,
        month: best.3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{assemble_item_vector, cyclic_date_features, fit_scaler};
    use crate::rng;
    use chrono::{Datelike, NaiveDate};
    use ndarray::array;
    use rand::Rng as _;

    fn table(n: usize, dim: usize, seed: u64) -> EmbeddingTable {
        let mut r = rng::from_seed(seed);
        let ids = (0..n).map(|i| Id::new(format!("s{i:03}"))).collect();
        EmbeddingTable::new(ids, Array2::from_shape_fn((n, dim), |_| r.random_range(-1.0..1.0))).unwrap()
    }

    fn identity_scaler(dim: usize) -> ScalerParams {
        ScalerParams { min: vec![-1.0; dim], max: vec![1.0; dim] }
    }

    fn all(t: &EmbeddingTable) -> BTreeSet<Id> {
        t.ids().iter().cloned().collect()
    }

    #[test]
    fn self_nearest_and_mask() {
        let t = table(20, 5, 1);
        let s = identity_scaler(5);
        let v = t.row_f64("s007").unwrap();
        assert_eq!(decode_to_sku(&v, &t, &all(&t), &s).unwrap().0, Id::new("s007"));

        // Without s007 in the mask, the runner-up wins.
        let dec = SkuDecoder::new(&t, &s).unwrap();
        let mut ranked: Vec<(f64, Id)> = t
            .ids()
            .iter()
            .map(|id| (crate::embed::cosine(v.iter().copied(), t.row_f64(id).unwrap()), id.clone()))
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut mask = all(&t);
        mask.remove("s007");
        assert_eq!(dec.decode(&v, &mask).unwrap().0, ranked[1].1);
    }

    #[test]
    fn ties_break_lexicographically() {
        let t = EmbeddingTable::new(vec!["b".into(), "a".into(), "c".into()], array![[1.0f32, 0.0], [2.0, 0.0], [0.0, 1.0]]).unwrap();
        let (id, sim) = decode_to_sku(&[0.5, 0.0], &t, &all(&t), &identity_scaler(2)).unwrap();
        assert_eq!(id, Id::new("a"));
        assert!((sim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let t = table(3, 2, 0);
        assert!(matches!(decode_to_sku(&[0.1, 0.2], &t, &BTreeSet::new(), &identity_scaler(2)), Err(GanError::EmptyMask)));
        let mask: BTreeSet<Id> = [Id::new("zzz")].into_iter().collect();
        assert!(matches!(decode_to_sku(&[0.1, 0.2], &t, &mask, &identity_scaler(2)), Err(GanError::UnknownSku(_))));
    }

    #[test]
    fn matches_brute_force_in_scaled_space() {
        let t = table(40, 6, 2);
        let scaler = ScalerParams { min: vec![-2.0, -1.0, 0.0, -3.0, -1.0, -0.5], max: vec![2.0, 3.0, 1.0, 1.0, 1.0, 0.5] };
        let dec = SkuDecoder::new(&t, &scaler).unwrap();
        let mut r = rng::from_seed(3);
        for _ in 0..200 {
            let v: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
            let mask: BTreeSet<Id> = t.ids().iter().filter(|_| r.random_bool(0.4)).cloned().collect();
            if mask.is_empty() {
                continue;
            }
            let raw = scaler.invert(&v).unwrap();
            let mut best: Option<(f64, &Id)> = None;
            for id in &mask {
                let c = crate::embed::cosine(raw.iter().copied(), t.row_f64(id).unwrap());
                if best.is_none_or(|(b, _)| c > b) {
                    best = Some((c, id));
                }
            }
            assert_eq!(&dec.decode(&v, &mask).unwrap().0, best.unwrap().1);
        }
    }

    #[test]
    fn fields_round_trip() {
        let layout = ItemLayout::new(3, 2);
        let rows: Vec<Vec<f64>> = [("2023-01-02", 0.5), ("2023-07-19", 12.0), ("2024-02-29", 3.3), ("2023-12-31", 1.0)]
            .iter()
            .map(|(d, price)| {
                let date = NaiveDate::parse_from_str(d, "%Y-%m-%d").unwrap();
                assemble_item_vector(&layout, &[0.1, 0.2, 0.3], &[0.4, 0.5], &cyclic_date_features(date), f64::ln(*price))
                    .unwrap()
            })
            .collect();
        let m = Array2::from_shape_vec((4, layout.len()), rows.concat()).unwrap();
        let scaler = fit_scaler(&m).unwrap();
        let scaled = scaler.apply_matrix(&m).unwrap();
        for (i, (d, price)) in [("2023-01-02", 0.5), ("2023-07-19", 12.0), ("2024-02-29", 3.3), ("2023-12-31", 1.0)]
            .iter()
            .enumerate()
        {
            let date = NaiveDate::parse_from_str(d, "%Y-%m-%d").unwrap();
            let f = decode_fields(scaled.row(i).as_slice().unwrap(), &scaler, &layout).unwrap();
            assert_eq!((f.weekday, f.day, f.month), (date.weekday().num_days_from_monday(), date.day(), date.month()));
            assert!((f.price - price).abs() / price < 1e-6);
        }
    }

    #[test]
    fn zero_log_price_is_unit_price() {
        let layout = ItemLayout::new(1, 1);
        let f = decode_fields(&[0.0; 9], &identity_scaler(9), &layout).unwrap();
        assert_eq!(f.price, 1.0);
    }

    #[test]
    fn triple_matches_separable_search() {
        // Each (sin, cos) pair can be matched independently; the exhaustive
        // joint search must agree.
        let layout = ItemLayout::new(1, 1);
        let s = identity_scaler(9);
        let mut r = rng::from_seed(8);
        for _ in 0..300 {
            let mut v = vec![0.0; 9];
            for x in &mut v[2..8] {
                *x = r.random_range(-1.0..1.0);
            }
            let f = decode_fields(&v, &s, &layout).unwrap();
            let nearest = |pair: &[f64], period: u32, offset: u32| {
                (0..period)
                    .map(|k| {
                        let a = std::f64::consts::TAU * k as f64 / period as f64;
                        ((a.sin() - pair[0]).powi(2) + (a.cos() - pair[1]).powi(2), k + offset)
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .unwrap()
                    .1
            };
            assert_eq!(f.weekday, nearest(&v[2..4], 7, 0));
            assert_eq!(f.day, nearest(&v[4..6], 31, 1));
            assert_eq!(f.month, nearest(&v[6..8], 12, 1));
        }
    }
}
