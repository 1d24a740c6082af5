use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{EmbedError, EmbeddingTable, Result};
use crate::corpus::{Basket, Id};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Product,
    Customer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: Id,
    pub kind: NodeKind,
}

/// Nodes plus hyperedges given as sorted, deduplicated node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    nodes: Vec<Node>,
    edges: Vec<Vec<usize>>,
}

impl Hypergraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for n in &nodes {
            if !seen.insert((n.kind, &n.id)) {
                return Err(EmbedError::DuplicateId(n.id.clone()));
            }
        }
        let mut clean = Vec::with_capacity(edges.len());
        for (i, mut e) in edges.into_iter().enumerate() {
            e.sort_unstable();
            e.dedup();
            if e.len() < 2 {
                return Err(EmbedError::Degenerate(format!("hyperedge {i} has fewer than 2 nodes")));
            }
            if let Some(&bad) = e.iter().find(|&&v| v >= nodes.len()) {
                return Err(EmbedError::Degenerate(format!("hyperedge {i} references node {bad}")));
            }
            clean.push(e);
        }
        Ok(Hypergraph { nodes, edges: clean })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    fn orphans(&self) -> Vec<Id> {
        let mut touched = vec![false; self.nodes.len()];
        for e in &self.edges {
            for &v in e {
                touched[v] = true;
            }
        }
        self.nodes.iter().zip(touched).filter(|(_, t)| !t).map(|(n, _)| n.id.clone()).collect()
    }
}

/// One hyperedge per basket: its distinct products and its customer.
/// Products come first (sorted), then customers (sorted).
pub fn build_hypergraph(baskets: &[Basket]) -> Hypergraph {
    let products: BTreeSet<&Id> = baskets.iter().flat_map(|b| b.lines.iter().map(|l| &l.sku_id)).collect();
    let customers: BTreeSet<&Id> = baskets.iter().map(|b| &b.customer_id).collect();
    let mut nodes = Vec::with_capacity(products.len() + customers.len());
    let mut product_index = BTreeMap::new();
    for p in products {
        product_index.insert(p, nodes.len());
        nodes.push(Node { id: p.clone(), kind: NodeKind::Product });
    }
    let mut customer_index = BTreeMap::new();
    for c in customers {
        customer_index.insert(c, nodes.len());
        nodes.push(Node { id: c.clone(), kind: NodeKind::Customer });
    }
    let edges = baskets
        .iter()
        .map(|b| {
            let mut e: Vec<usize> = b.distinct_skus().into_iter().map(|s| product_index[s]).collect();
            e.push(customer_index[&b.customer_id]);
            e
        })
        .collect();
    Hypergraph::new(nodes, edges).expect("basket hyperedges always hold a product and a customer")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleoraConfig {
    pub product_dim: usize,
    pub customer_dim: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for CleoraConfig {
    fn default() -> Self {
        CleoraConfig {
            product_dim: 1024,
            customer_dim: 256,
            iterations: 3,
            seed: 0,
        }
    }
}

fn normalize_rows(m: &mut Array2<f64>) {
    for mut row in m.axis_iter_mut(Axis(0)) {
        let n = row.dot(&row).sqrt();
        if n > 0.0 {
            row /= n;
        }
    }
}

/// Uniform `[-1, 1]` rows, L2-normalised.
pub fn initial_embedding(h: &Hypergraph, dim: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::stream(seed, rng::CLEORA, 0);
    let mut m = Array2::from_shape_fn((h.nodes.len(), dim), |_| r.random_range(-1.0..=1.0));
    normalize_rows(&mut m);
    m
}

/// One propagation round under the clique expansion with self-loops: each
/// node averages the rows of every member of every edge it belongs to, each
/// edge weighted by its size, then rows are L2-normalised.
pub fn propagate(h: &Hypergraph, current: &Array2<f64>) -> Array2<f64> {
    let dim = current.ncols();
    let mut next = Array2::<f64>::zeros(current.raw_dim());
    let mut degree = vec![0usize; h.nodes.len()];
    let mut sum = ndarray::Array1::<f64>::zeros(dim);
    for e in &h.edges {
        sum.fill(0.0);
        for &v in e {
            sum += &current.row(v);
        }
        for &v in e {
            let mut row = next.row_mut(v);
            row += &sum;
            degree[v] += e.len();
        }
    }
    for (mut row, d) in next.axis_iter_mut(Axis(0)).zip(degree) {
        if d > 0 {
            row /= d as f64;
        }
    }
    normalize_rows(&mut next);
    next
}

/// Returns (product table, customer table). Product rows keep
/// `product_dim`; customer rows go through a Gaussian projection to
/// `customer_dim` and are renormalised.
pub fn train_cleora(h: &Hypergraph, config: &CleoraConfig) -> Result<(EmbeddingTable, EmbeddingTable)> {
    if config.iterations == 0 || config.product_dim == 0 || config.customer_dim == 0 {
        return Err(EmbedError::Config("iterations and dims must be >= 1".into()));
    }
    if h.nodes.is_empty() || h.edges.is_empty() {
        return Err(EmbedError::Degenerate("empty hypergraph".into()));
    }
    let orphans = h.orphans();
    if !orphans.is_empty() {
        return Err(EmbedError::Orphans(orphans));
    }
    let mut m = initial_embedding(h, config.product_dim, config.seed);
    for _ in 0..config.iterations {
        m = propagate(h, &m);
    }
    let split = |kind: NodeKind| -> (Vec<Id>, Vec<usize>) {
        h.nodes.iter().enumerate().filter(|(_, n)| n.kind == kind).map(|(i, n)| (n.id.clone(), i)).unzip()
    };
    let (pids, prows) = split(NodeKind::Product);
    let (cids, crows) = split(NodeKind::Customer);
    let products = m.select(Axis(0), &prows);
    let mut r = rng::stream(config.seed, rng::CLEORA_PROJECTION, 0);
    let scale = 1.0 / (config.customer_dim as f64).sqrt();
    let projection = Array2::from_shape_fn((config.product_dim, config.customer_dim), |_| {
        scale * r.sample::<f64, _>(StandardNormal)
    });
    let mut customers = m.select(Axis(0), &crows).dot(&projection);
    normalize_rows(&mut customers);
    let customers = if cids.is_empty() { Array2::zeros((0, config.customer_dim)) } else { customers };
    Ok((EmbeddingTable::from_f64(pids, &products)?, EmbeddingTable::from_f64(cids, &customers)?))
}
