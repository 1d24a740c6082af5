use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{EmbedError, EmbeddingTable, Result};
use crate::corpus::{Basket, Id};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub negatives_per_pair: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 1024,
            negatives_per_pair: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(EmbedError::Config("skip-gram dim must be >= 1".into()));
        }
        if self.negatives_per_pair == 0 {
            return Err(EmbedError::Config("negatives_per_pair must be >= 1".into()));
        }
        if self.epochs == 0 || !(self.learning_rate > 0.0) {
            return Err(EmbedError::Config("epochs and learning_rate must be positive".into()));
        }
        Ok(())
    }
}

fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Skip-gram with negative sampling. Every ordered pair of distinct skus in a
/// basket is a (center, context) example; negatives follow unigram^0.75.
/// Rows are sorted by sku id.
pub fn train_skipgram_products(baskets: &[Basket], config: &SkipGramConfig) -> Result<EmbeddingTable> {
    config.validate()?;
    if baskets.is_empty() {
        return Err(EmbedError::Degenerate("no baskets".into()));
    }
    let vocab: BTreeSet<&Id> = baskets.iter().flat_map(|b| b.lines.iter().map(|l| &l.sku_id)).collect();
    if vocab.len() < 2 {
        return Err(EmbedError::Degenerate(format!("{} distinct sku, need at least 2", vocab.len())));
    }
    let index: BTreeMap<&Id, usize> = vocab.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let encoded: Vec<Vec<usize>> = baskets
        .iter()
        .map(|b| b.distinct_skus().into_iter().map(|s| index[s]).collect::<Vec<_>>())
        .filter(|b| b.len() >= 2)
        .collect();
    let pairs_per_epoch: usize = encoded.iter().map(|b| b.len() * (b.len() - 1)).sum();
    if pairs_per_epoch == 0 {
        return Err(EmbedError::Degenerate("no basket holds two distinct skus".into()));
    }

    let mut counts = vec![0f64; vocab.len()];
    for b in &encoded {
        for &s in b {
            counts[s] += 1.0;
        }
    }
    // Skus only ever bought alone still get a small sampling weight.
    let weights: Vec<f64> = counts.iter().map(|c| c.max(0.5).powf(0.75)).collect();
    let noise = WeightedIndex::new(&weights).expect("positive weights");

    let (n, dim) = (vocab.len(), config.dim);
    let mut r = rng::stream(config.seed, rng::SKIPGRAM, 0);
    let half = 0.5 / dim as f32;
    let mut input = Array2::from_shape_fn((n, dim), |_| r.random_range(-half..half));
    let mut output = Array2::<f32>::zeros((n, dim));

    let total = (pairs_per_epoch * config.epochs) as f64;
    let lr0 = config.learning_rate;
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut grad = vec![0f32; dim];
    for epoch in 0..config.epochs {
        let mut er = rng::stream(config.seed, rng::SKIPGRAM, 1 + epoch as u64);
        order.shuffle(&mut er);
        for &bi in &order {
            let basket = &encoded[bi];
            for &center in basket {
                for &context in basket {
                    if center == context {
                        continue;
                    }
                    let lr = (lr0 * (1.0 - step as f64 / total).max(1e-4)) as f32;
                    step += 1;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let w = input.row(center).to_owned();
                    for k in 0..=config.negatives_per_pair {
                        let (target, label) = if k == 0 {
                            (context, 1.0f32)
                        } else {
                            let t = noise.sample(&mut er);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let mut c = output.row_mut(target);
                        let dot: f32 = w.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
                        let g = (label - sigmoid(dot)) * lr;
                        for ((gi, ci), wi) in grad.iter_mut().zip(c.iter_mut()).zip(w.iter()) {
                            *gi += g * *ci;
                            *ci += g * wi;
                        }
                    }
                    for (wi, gi) in input.row_mut(center).iter_mut().zip(&grad) {
                        *wi += gi;
                    }
                }
            }
        }
    }
    let ids = vocab.into_iter().cloned().collect();
    EmbeddingTable::new(ids, input)
}
