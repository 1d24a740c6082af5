use ndarray::{Array2, ArrayView1};

use super::{EvalError, Result};

pub const DEFAULT_BINS: usize = 64;

/// A discrete distribution over `B` equal-width bins spanning `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    probs: Vec<f64>,
}

impl Histogram {
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(EvalError::Probs("a histogram needs at least one bin".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(EvalError::Probs("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(EvalError::Probs(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Histogram { edges: uniform_edges(probs.len()), probs })
    }

    /// Values outside `[-1, 1]` land in the end bins; `1.0` belongs to the
    /// last bin.
    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(EvalError::Probs("a histogram needs at least one bin".into()));
        }
        let mut counts = vec![0u64; bins];
        let mut n = 0u64;
        for x in samples {
            if x.is_nan() {
                return Err(EvalError::NonFinite("histogram sample".into()));
            }
            let k = (((x + 1.0) / 2.0 * bins as f64).floor().max(0.0) as usize).min(bins - 1);
            counts[k] += 1;
            n += 1;
        }
        if n == 0 {
            return Err(EvalError::Empty("histogram samples"));
        }
        let probs = counts.iter().map(|&c| c as f64 / n as f64).collect();
        Ok(Histogram { edges: uniform_edges(bins), probs })
    }

    pub fn bins(&self) -> usize {
        self.probs.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

fn uniform_edges(bins: usize) -> Vec<f64> {
    (0..=bins).map(|k| -1.0 + 2.0 * k as f64 / bins as f64).collect()
}

/// Jensen-Shannon divergence in nats. Empty bins contribute nothing.
pub fn jsd_discrete(p: &Histogram, q: &Histogram) -> Result<f64> {
    if p.edges != q.edges {
        return Err(EvalError::Bins { p: p.bins(), q: q.bins() });
    }
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for (&a, &b) in p.probs.iter().zip(&q.probs) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            kl_p += a * (a / m).ln();
        }
        if b > 0.0 {
            kl_q += b * (b / m).ln();
        }
    }
    // Sums of (a, b) and (b, a) are the same floats, so the result is
    // exactly symmetric.
    let v = 0.5 * kl_p + 0.5 * kl_q;
    Ok(v.clamp(0.0, std::f64::consts::LN_2))
}

/// Wasserstein-1 distance between two empirical distributions on the line,
/// computed as the integral of the absolute CDF difference.
pub fn emd_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::Empty("emd sample list"));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(EvalError::NonFinite("emd sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    let mut x = a[0].min(b[0]);
    while i < a.len() || j < b.len() {
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        let next = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => break,
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (next - x);
        x = next;
    }
    Ok(total)
}

fn check_pair(real: &Array2<f64>, fake: &Array2<f64>) -> Result<()> {
    if real.nrows() == 0 || fake.nrows() == 0 || real.ncols() == 0 {
        return Err(EvalError::Empty("item vector set"));
    }
    if real.ncols() != fake.ncols() {
        return Err(EvalError::Dim { expected: real.ncols(), got: fake.ncols() });
    }
    Ok(())
}

fn column(c: ArrayView1<f64>) -> Vec<f64> {
    c.iter().copied().collect()
}

/// Mean over dimensions of the per-dimension [`emd_1d`].
pub fn dataset_emd(real: &Array2<f64>, fake: &Array2<f64>) -> Result<f64> {
    check_pair(real, fake)?;
    let mut total = 0.0;
    for (r, f) in real.columns().into_iter().zip(fake.columns()) {
        total += emd_1d(&column(r), &column(f))?;
    }
    Ok(total / real.ncols() as f64)
}

/// Mean over dimensions of the JSD between `bins`-bin histograms.
pub fn dataset_jsd(real: &Array2<f64>, fake: &Array2<f64>, bins: usize) -> Result<f64> {
    check_pair(real, fake)?;
    let mut total = 0.0;
    for (r, f) in real.columns().into_iter().zip(fake.columns()) {
        let p = Histogram::from_samples(r.iter().copied(), bins)?;
        let q = Histogram::from_samples(f.iter().copied(), bins)?;
        total += jsd_discrete(&p, &q)?;
    }
    Ok(total / real.ncols() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng as _;
    use std::f64::consts::LN_2;

    fn h(p: &[f64]) -> Histogram {
        Histogram::from_probs(p.to_vec()).unwrap()
    }

    fn kl(p: &[f64], q: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..p.len() {
            if p[i] != 0.0 {
                s += p[i] * (p[i].ln() - q[i].ln());
            }
        }
        s
    }

    fn jsd_oracle(p: &[f64], q: &[f64]) -> f64 {
        let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a + b) / 2.0).collect();
        kl(p, &m) / 2.0 + kl(q, &m) / 2.0
    }

    // Optimal coupling between equal-size uniform point sets is a
    // permutation, so exhaustive search over permutations is exact.
    fn coupling_oracle(a: &[f64], b: &[f64]) -> f64 {
        fn go(a: &[f64], b: &mut Vec<f64>, k: usize, acc: f64, best: &mut f64) {
            if k == a.len() {
                *best = best.min(acc);
                return;
            }
            for i in k..b.len() {
                b.swap(k, i);
                go(a, b, k + 1, acc + (a[k] - b[k]).abs(), best);
                b.swap(k, i);
            }
        }
        let mut best = f64::INFINITY;
        go(a, &mut b.to_vec(), 0, 0.0, &mut best);
        best / a.len() as f64
    }

    #[test]
    fn jsd_examples() {
        assert_eq!(jsd_discrete(&h(&[0.3, 0.7]), &h(&[0.3, 0.7])).unwrap(), 0.0);
        assert!((jsd_discrete(&h(&[1.0, 0.0]), &h(&[0.0, 1.0])).unwrap() - LN_2).abs() < 1e-15);
        let v = jsd_discrete(&h(&[0.5, 0.5]), &h(&[1.0, 0.0])).unwrap();
        // 0.5·(0.5 ln(2/3) + 0.5 ln 2) + 0.5·ln(4/3)
        let hand = 0.25 * (2.0f64 / 3.0).ln() + 0.25 * LN_2 + 0.5 * (4.0f64 / 3.0).ln();
        assert!((v - hand).abs() < 1e-15);
        assert!((v - 0.215761).abs() < 1e-6);
    }

    #[test]
    fn jsd_rejects_mismatched_bins() {
        assert!(matches!(jsd_discrete(&h(&[1.0]), &h(&[0.5, 0.5])), Err(EvalError::Bins { p: 1, q: 2 })));
    }

    #[test]
    fn jsd_matches_kl_composition() {
        let mut r = rng::from_seed(11);
        for _ in 0..100 {
            let bins = r.random_range(1..=8);
            let mut draw = || {
                let raw: Vec<f64> = (0..bins).map(|_| if r.random_bool(0.2) { 0.0 } else { r.random::<f64>() }).collect();
                let s: f64 = raw.iter().sum();
                if s == 0.0 {
                    let mut v = vec![0.0; bins];
                    v[0] = 1.0;
                    v
                } else {
                    raw.iter().map(|x| x / s).collect()
                }
            };
            let (p, q) = (draw(), draw());
            let (hp, hq) = (h(&p), h(&q));
            let v = jsd_discrete(&hp, &hq).unwrap();
            assert!((v - jsd_oracle(&p, &q)).abs() < 1e-12);
            assert_eq!(v, jsd_discrete(&hq, &hp).unwrap());
        }
    }

    #[test]
    fn histogram_binning() {
        let hist = Histogram::from_samples([-1.0, -0.99, 0.0, 0.49, 1.0, 7.0, -3.0], 4).unwrap();
        assert_eq!(hist.edges(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        let counts: Vec<f64> = hist.probs().iter().map(|p| p * 7.0).collect();
        for (c, e) in counts.iter().zip([3.0, 0.0, 2.0, 2.0]) {
            assert!((c - e).abs() < 1e-12);
        }
        assert!(Histogram::from_samples(std::iter::empty(), 4).is_err());
        assert!(Histogram::from_probs(vec![0.5, 0.6]).is_err());
        assert!(Histogram::from_probs(vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn emd_examples() {
        assert_eq!(emd_1d(&[0.2, 0.4, -1.0], &[0.4, -1.0, 0.2]).unwrap(), 0.0);
        assert_eq!(emd_1d(&[0.0], &[1.0]).unwrap(), 1.0);
        assert!((emd_1d(&[0.0, 1.0], &[0.5, 0.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!(emd_1d(&[], &[1.0]).is_err());
        assert!(emd_1d(&[1.0], &[]).is_err());
    }

    #[test]
    fn emd_unequal_sizes() {
        // Mass 1/3 at each of 0, 1, 2 against mass 1 at 1: cost (1 + 0 + 1)/3.
        assert!((emd_1d(&[0.0, 1.0, 2.0], &[1.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn emd_matches_exhaustive_coupling() {
        let mut r = rng::from_seed(12);
        for _ in 0..100 {
            // Sizes whose lcm is at most 6, replicated to a common size.
            let (n, m) = [(1, 1), (2, 2), (3, 3), (4, 4), (5, 5), (6, 6), (1, 4), (2, 3), (3, 6), (2, 6), (1, 5)]
                [r.random_range(0..11)];
            let a: Vec<f64> = (0..n).map(|_| (r.random_range(-10..10) as f64) / 4.0).collect();
            let b: Vec<f64> = (0..m).map(|_| r.random_range(-2.0..2.0)).collect();
            let l = num_lcm(n, m);
            let ra: Vec<f64> = a.iter().flat_map(|&x| std::iter::repeat_n(x, l / n)).collect();
            let rb: Vec<f64> = b.iter().flat_map(|&x| std::iter::repeat_n(x, l / m)).collect();
            let v = emd_1d(&a, &b).unwrap();
            assert!((v - coupling_oracle(&ra, &rb)).abs() < 1e-9, "{a:?} {b:?}");
            assert_eq!(v, emd_1d(&b, &a).unwrap());
        }
    }

    fn num_lcm(a: usize, b: usize) -> usize {
        let mut g = (a, b);
        while g.1 != 0 {
            g = (g.1, g.0 % g.1);
        }
        a / g.0 * b
    }

    #[test]
    fn dataset_metrics() {
        let mut r = rng::from_seed(13);
        let real = Array2::from_shape_fn((50, 1287), |_| r.random_range(-0.8..0.8));
        assert_eq!(dataset_emd(&real, &real).unwrap(), 0.0);
        assert_eq!(dataset_jsd(&real, &real, DEFAULT_BINS).unwrap(), 0.0);
        let mut fake = real.clone();
        fake.column_mut(700).mapv_inplace(|x| x + 0.1);
        assert!((dataset_emd(&real, &fake).unwrap() - 0.1 / 1287.0).abs() < 1e-9);
        let far = real.mapv(|x| -x.abs());
        assert!(dataset_jsd(&real, &far, DEFAULT_BINS).unwrap() <= LN_2);
        let short = Array2::zeros((5, 1286));
        assert!(matches!(dataset_emd(&real, &short), Err(EvalError::Dim { expected: 1287, got: 1286 })));
        assert!(dataset_jsd(&real, &Array2::zeros((0, 1287)), 8).is_err());
    }

    fn samples() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-3.0f64..3.0, 1..12)
    }

    proptest! {
        #[test]
        fn emd_is_a_metric(a in samples(), b in samples(), c in samples()) {
            let ab = emd_1d(&a, &b).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, emd_1d(&b, &a).unwrap());
            prop_assert!(emd_1d(&a, &c).unwrap() <= ab + emd_1d(&b, &c).unwrap() + 1e-12);
            // Duplicating every sample leaves the empirical distribution unchanged.
            let doubled: Vec<f64> = a.iter().chain(&a).copied().collect();
            prop_assert!(emd_1d(&a, &doubled).unwrap().abs() < 1e-12);
        }

        #[test]
        fn emd_zero_only_for_same_distribution(a in samples(), shift in 0.01f64..1.0) {
            let moved: Vec<f64> = a.iter().map(|x| x + shift).collect();
            prop_assert!((emd_1d(&a, &moved).unwrap() - shift).abs() < 1e-9);
        }

        #[test]
        fn jsd_bounds(a in samples(), b in samples(), bins in 1usize..80) {
            let p = Histogram::from_samples(a.iter().map(|x| x / 3.0), bins).unwrap();
            let q = Histogram::from_samples(b.iter().map(|x| x / 3.0), bins).unwrap();
            let v = jsd_discrete(&p, &q).unwrap();
            prop_assert!((0.0..=LN_2).contains(&v));
            prop_assert_eq!(v, jsd_discrete(&q, &p).unwrap());
            prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.edges().windows(2).all(|w| w[0] < w[1]));
        }
    }
}
