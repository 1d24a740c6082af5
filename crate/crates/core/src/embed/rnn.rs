use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;

use super::{EmbedError, EmbeddingTable, Result};
use crate::corpus::{Id, TransactionLine};
use crate::nn::{AdamState, DenseLayer};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct RnnEncoderConfig {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub max_sequence_length: usize,
    pub seed: u64,
}

impl Default for RnnEncoderConfig {
    fn default() -> Self {
        RnnEncoderConfig {
            hidden_dim: 256,
            epochs: 3,
            learning_rate: 1e-3,
            max_sequence_length: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnOutput {
    pub table: EmbeddingTable,
    /// Customers with fewer than two embeddable purchases.
    pub skipped: Vec<Id>,
}

/// Chronological sku sequence per customer. Lines on the same date keep
/// their input order.
pub fn customer_sequences(lines: &[TransactionLine]) -> BTreeMap<Id, Vec<Id>> {
    let mut by_customer: BTreeMap<Id, Vec<&TransactionLine>> = BTreeMap::new();
    for l in lines {
        by_customer.entry(l.customer_id.clone()).or_default().push(l);
    }
    by_customer
        .into_iter()
        .map(|(c, mut ls)| {
            ls.sort_by_key(|l| l.date);
            (c, ls.into_iter().map(|l| l.sku_id.clone()).collect())
        })
        .collect()
}

const CLIP_NORM: f64 = 5.0;

/// h_t = tanh(Wx x_t + Wh h_{t-1} + b), prediction y_t = Wo h_t + bo.
struct Encoder {
    wx: DenseLayer,
    wh: Array2<f64>,
    wo: DenseLayer,
}

struct Grads {
    wx: Array2<f64>,
    b: Array1<f64>,
    wh: Array2<f64>,
    wo: Array2<f64>,
    bo: Array1<f64>,
}

impl Encoder {
    fn hidden_states(&self, x: &Array2<f64>) -> Array2<f64> {
        let z = x.dot(&self.wx.weight.t()) + &self.wx.bias;
        let h_dim = self.wh.nrows();
        let mut hs = Array2::<f64>::zeros((x.nrows(), h_dim));
        let mut prev = Array1::<f64>::zeros(h_dim);
        for t in 0..x.nrows() {
            let h = (&z.row(t) + &self.wh.dot(&prev)).mapv(f64::tanh);
            hs.row_mut(t).assign(&h);
            prev = h;
        }
        hs
    }

    /// Mean of 1 - cos(y_t, x_{t+1}) and its gradients.
    fn loss_and_grads(&self, x: &Array2<f64>) -> (f64, Grads) {
        let t_len = x.nrows();
        let n = (t_len - 1) as f64;
        let hs = self.hidden_states(x);
        let h_in = hs.slice(s![..t_len - 1, ..]);
        let y = h_in.dot(&self.wo.weight.t()) + &self.wo.bias;
        let targets = x.slice(s![1.., ..]);
        let mut dy = Array2::<f64>::zeros(y.raw_dim());
        let mut loss = 0.0;
        for t in 0..t_len - 1 {
            let (yt, xt) = (y.row(t), targets.row(t));
            let (ny, nx) = (yt.dot(&yt).sqrt(), xt.dot(&xt).sqrt());
            if ny == 0.0 || nx == 0.0 {
                loss += 1.0 / n;
                continue;
            }
            let cos = yt.dot(&xt) / (ny * nx);
            loss += (1.0 - cos) / n;
            let g = (&xt / (ny * nx) - &(&yt * (cos / (ny * ny)))) * (-1.0 / n);
            dy.row_mut(t).assign(&g);
        }
        let wo = dy.t().dot(&h_in);
        let bo = dy.sum_axis(Axis(0));
        let mut dhs = Array2::<f64>::zeros(hs.raw_dim());
        dhs.slice_mut(s![..t_len - 1, ..]).assign(&dy.dot(&self.wo.weight));

        let h_dim = self.wh.nrows();
        let mut dz = Array2::<f64>::zeros(hs.raw_dim());
        let mut wh = Array2::<f64>::zeros(self.wh.raw_dim());
        let mut carry = Array1::<f64>::zeros(h_dim);
        for t in (0..t_len).rev() {
            let h = hs.row(t);
            let dzt = (&dhs.row(t) + &carry) * &h.mapv(|v| 1.0 - v * v);
            if t > 0 {
                let prev = hs.row(t - 1);
                wh += &dzt.view().insert_axis(Axis(1)).dot(&prev.insert_axis(Axis(0)));
            }
            carry = self.wh.t().dot(&dzt);
            dz.row_mut(t).assign(&dzt);
        }
        let grads = Grads { wx: dz.t().dot(x), b: dz.sum_axis(Axis(0)), wh, wo, bo };
        (loss, grads)
    }

    fn param_blocks_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.wx.weight.as_slice_mut().expect("standard layout"),
            self.wx.bias.as_slice_mut().expect("standard layout"),
            self.wh.as_slice_mut().expect("standard layout"),
            self.wo.weight.as_slice_mut().expect("standard layout"),
            self.wo.bias.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// Trains a tanh RNN to predict the next product embedding from the ones
/// before it; a customer's row is the last hidden state over their most
/// recent `max_sequence_length` purchases. Purchases of skus absent from
/// `product_table` are dropped before the length check.
pub fn train_rnn_consumer(
    sequences: &BTreeMap<Id, Vec<Id>>,
    product_table: &EmbeddingTable,
    config: &RnnEncoderConfig,
) -> Result<RnnOutput> {
    if config.hidden_dim == 0 || config.epochs == 0 || config.max_sequence_length < 2 || !(config.learning_rate > 0.0) {
        return Err(EmbedError::Config(
            "hidden_dim, epochs and learning_rate must be positive, max_sequence_length >= 2".into(),
        ));
    }
    let p_dim = product_table.dim();
    let mut skipped = Vec::new();
    let mut inputs: Vec<(Id, Array2<f64>)> = Vec::new();
    for (customer, seq) in sequences {
        let rows: Vec<usize> = seq.iter().filter_map(|s| product_table.position(s)).collect();
        if rows.len() < 2 {
            skipped.push(customer.clone());
            continue;
        }
        let rows = &rows[rows.len().saturating_sub(config.max_sequence_length)..];
        let x = Array2::from_shape_fn((rows.len(), p_dim), |(t, k)| product_table.row_at(rows[t])[k] as f64);
        inputs.push((customer.clone(), x));
    }
    if inputs.is_empty() {
        return Err(EmbedError::Degenerate("no customer has two or more purchases".into()));
    }

    let h_dim = config.hidden_dim;
    let mut r = rng::stream(config.seed, rng::RNN, 0);
    let wx = DenseLayer::glorot(p_dim, h_dim, &mut r);
    let wh = DenseLayer::glorot(h_dim, h_dim, &mut r).weight;
    let wo = DenseLayer::glorot(h_dim, p_dim, &mut r);
    let mut enc = Encoder { wx, wh, wo };
    let n_params = 2 * h_dim * p_dim + h_dim * h_dim + h_dim + p_dim;
    let mut adam = AdamState::new(n_params, (0.9, 0.999), 1e-8);

    let mut order: Vec<usize> = (0..inputs.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng::stream(config.seed, rng::RNN, 1 + epoch as u64));
        for &i in &order {
            let (_, mut g) = enc.loss_and_grads(&inputs[i].1);
            let norm = [&g.wx, &g.wh, &g.wo].iter().map(|a| a.iter().map(|v| v * v).sum::<f64>()).sum::<f64>()
                + g.b.dot(&g.b)
                + g.bo.dot(&g.bo);
            let norm = norm.sqrt();
            if norm > CLIP_NORM {
                let f = CLIP_NORM / norm;
                g.wx *= f;
                g.b *= f;
                g.wh *= f;
                g.wo *= f;
                g.bo *= f;
            }
            let grads = [
                g.wx.as_slice().expect("standard layout"),
                g.b.as_slice().expect("standard layout"),
                g.wh.as_slice().expect("standard layout"),
                g.wo.as_slice().expect("standard layout"),
                g.bo.as_slice().expect("standard layout"),
            ];
            adam.step_blocks(enc.param_blocks_mut(), grads, config.learning_rate);
        }
    }

    let mut ids = Vec::with_capacity(inputs.len());
    let mut out = Array2::<f64>::zeros((inputs.len(), h_dim));
    for (i, (customer, x)) in inputs.iter().enumerate() {
        let hs = enc.hidden_states(x);
        out.row_mut(i).assign(&hs.row(hs.nrows() - 1));
        ids.push(customer.clone());
    }
    Ok(RnnOutput { table: EmbeddingTable::from_f64(ids, &out)?, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testutil::rel_err;
    use rand::Rng as _;

    fn product_table(n: usize, dim: usize) -> EmbeddingTable {
        let mut r = rng::from_seed(11);
        let ids = (0..n).map(|i| Id::new(format!("p{i}"))).collect();
        EmbeddingTable::new(ids, Array2::from_shape_fn((n, dim), |_| r.random_range(-1.0..1.0))).unwrap()
    }

    fn seqs() -> BTreeMap<Id, Vec<Id>> {
        let s = |v: &[usize]| v.iter().map(|i| Id::new(format!("p{i}"))).collect::<Vec<_>>();
        [
            (Id::new("a"), s(&[0, 1, 2, 3, 1])),
            (Id::new("b"), s(&[4, 5, 4, 5])),
            (Id::new("c"), s(&[0, 1, 2, 3, 1])),
            (Id::new("d"), s(&[2])),
            (Id::new("e"), vec![Id::new("unknown"), Id::new("p1")]),
        ]
        .into_iter()
        .collect()
    }

    fn cfg() -> RnnEncoderConfig {
        RnnEncoderConfig { hidden_dim: 6, epochs: 4, learning_rate: 1e-2, max_sequence_length: 64, seed: 2 }
    }

    #[test]
    fn dims_skips_and_identical_sequences() {
        let out = train_rnn_consumer(&seqs(), &product_table(6, 5), &cfg()).unwrap();
        assert_eq!(out.table.dim(), 6);
        assert_eq!(out.table.ids(), &[Id::new("a"), Id::new("b"), Id::new("c")]);
        assert_eq!(out.skipped, vec![Id::new("d"), Id::new("e")]);
        assert_eq!(out.table.row("a"), out.table.row("c"));
        assert_ne!(out.table.row("a"), out.table.row("b"));
        let again = train_rnn_consumer(&seqs(), &product_table(6, 5), &cfg()).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn default_hidden_dim_is_customer_dim() {
        let out = train_rnn_consumer(
            &seqs(),
            &product_table(6, 4),
            &RnnEncoderConfig { epochs: 1, ..Default::default() },
        )
        .unwrap();
        assert_eq!(out.table.dim(), 256);
    }

    #[test]
    fn truncation_keeps_recent_purchases() {
        let mut s = seqs();
        s.get_mut(&Id::new("b")).unwrap().splice(0..0, [Id::new("p0"), Id::new("p3")]);
        let short = RnnEncoderConfig { max_sequence_length: 4, ..cfg() };
        let a = train_rnn_consumer(&seqs(), &product_table(6, 5), &short).unwrap();
        let b = train_rnn_consumer(&s, &product_table(6, 5), &short).unwrap();
        assert_eq!(a.table.row("b"), b.table.row("b"));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let table = product_table(6, 4);
        let mut r = rng::from_seed(5);
        let mut enc = Encoder {
            wx: DenseLayer::glorot(4, 3, &mut r),
            wh: DenseLayer::glorot(3, 3, &mut r).weight,
            wo: DenseLayer::glorot(3, 4, &mut r),
        };
        let x = Array2::from_shape_fn((5, 4), |(t, k)| table.row_at(t)[k] as f64);
        let (_, g) = enc.loss_and_grads(&x);
        let analytic: Vec<f64> = [
            g.wx.as_slice().unwrap(),
            g.b.as_slice().unwrap(),
            g.wh.as_slice().unwrap(),
            g.wo.as_slice().unwrap(),
            g.bo.as_slice().unwrap(),
        ]
        .concat();
        let h = 1e-6;
        let mut idx = 0;
        for block in 0..5 {
            let len = enc.param_blocks_mut()[block].len();
            for j in 0..len {
                let orig = enc.param_blocks_mut()[block][j];
                enc.param_blocks_mut()[block][j] = orig + h;
                let up = enc.loss_and_grads(&x).0;
                enc.param_blocks_mut()[block][j] = orig - h;
                let down = enc.loss_and_grads(&x).0;
                enc.param_blocks_mut()[block][j] = orig;
                let numeric = (up - down) / (2.0 * h);
                assert!(rel_err(analytic[idx], numeric) < 1e-5, "block {block} #{j}: {} vs {numeric}", analytic[idx]);
                idx += 1;
            }
        }
    }
}
