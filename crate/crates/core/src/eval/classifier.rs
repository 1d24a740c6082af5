use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;

use super::{EvalError, Result};
use crate::rng;

pub const MIN_SAMPLES: usize = 100;

/// Logistic-regression settings for the real-vs-fake probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub train_fraction: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { train_fraction: 0.7, iterations: 300, l2: 1e-4 }
    }
}

pub fn discriminative_accuracy(real: &Array2<f64>, fake: &Array2<f64>, seed: u64) -> Result<f64> {
    discriminative_accuracy_with(real, fake, seed, &ClassifierConfig::default())
}

/// Held-out accuracy of a logistic regression trained to tell `real` from
/// `fake`. Both classes are subsampled to the same size, then each is split
/// `train_fraction` / rest.
pub fn discriminative_accuracy_with(
    real: &Array2<f64>,
    fake: &Array2<f64>,
    seed: u64,
    cfg: &ClassifierConfig,
) -> Result<f64> {
    if real.nrows() < MIN_SAMPLES || fake.nrows() < MIN_SAMPLES {
        return Err(EvalError::TooFewSamples { real: real.nrows(), fake: fake.nrows(), min: MIN_SAMPLES });
    }
    if real.ncols() != fake.ncols() {
        return Err(EvalError::Dim { expected: real.ncols(), got: fake.ncols() });
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) || cfg.iterations == 0 || !(cfg.l2 >= 0.0) {
        return Err(EvalError::Config("train_fraction in (0, 1), iterations > 0, l2 >= 0".into()));
    }
    if real.iter().chain(fake.iter()).any(|x| !x.is_finite()) {
        return Err(EvalError::NonFinite("classifier input".into()));
    }

    let n = real.nrows().min(fake.nrows());
    let n_train = ((n as f64 * cfg.train_fraction).round() as usize).clamp(1, n - 1);
    let pick = |m: &Array2<f64>, class: u64| {
        let mut idx: Vec<usize> = (0..m.nrows()).collect();
        idx.shuffle(&mut rng::stream(seed, rng::CLASSIFIER, class));
        idx.truncate(n);
        (idx[..n_train].to_vec(), idx[n_train..].to_vec())
    };
    let (real_train, real_test) = pick(real, 0);
    let (fake_train, fake_test) = pick(fake, 1);
    if real_train.len() != fake_train.len() || real_test.len() != fake_test.len() {
        return Err(EvalError::Imbalance);
    }

    let stack = |r: &[usize], f: &[usize]| {
        let x = ndarray::concatenate(Axis(0), &[real.select(Axis(0), r).view(), fake.select(Axis(0), f).view()])
            .expect("same width");
        let y: Array1<f64> = (0..r.len() + f.len()).map(|i| if i < r.len() { 1.0 } else { 0.0 }).collect();
        (x, y)
    };
    let (mut x_train, y_train) = stack(&real_train, &fake_train);
    let (mut x_test, y_test) = stack(&real_test, &fake_test);

    // Standardise with training statistics; constant columns stay centred.
    let mean = x_train.mean_axis(Axis(0)).expect("non-empty");
    let std = x_train.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
    for x in [&mut x_train, &mut x_test] {
        *x -= &mean;
        *x /= &std;
    }

    let (w, b) = fit_logistic(&x_train, &y_train, cfg);
    let logits = x_test.dot(&w) + b;
    let correct = logits.iter().zip(&y_test).filter(|(z, y)| (**z > 0.0) == (**y == 1.0)).count();
    Ok(correct as f64 / y_test.len() as f64)
}

/// Full-batch gradient descent on the mean log-loss. The step is the
/// inverse of a smoothness bound taken from the top eigenvalue of the
/// augmented Gram matrix.
fn fit_logistic(x: &Array2<f64>, y: &Array1<f64>, cfg: &ClassifierConfig) -> (Array1<f64>, f64) {
    let n = x.nrows() as f64;
    let d = x.ncols();
    let lambda = top_eigenvalue(x) / 4.0 + cfg.l2;
    let lr = 1.0 / lambda;
    let mut w = Array1::<f64>::zeros(d);
    let mut b = 0.0;
    for _ in 0..cfg.iterations {
        let z = x.dot(&w) + b;
        let residual: Array1<f64> = z.iter().zip(y).map(|(z, y)| sigmoid(*z) - y).collect();
        let gw = x.t().dot(&residual) / n + &(&w * cfg.l2);
        let gb = residual.sum() / n;
        w.scaled_add(-lr, &gw);
        b -= lr * gb;
    }
    (w, b)
}

/// Largest eigenvalue of `[X 1]ᵀ[X 1] / n` by power iteration, padded by 10%.
fn top_eigenvalue(x: &Array2<f64>) -> f64 {
    let n = x.nrows() as f64;
    let d = x.ncols();
    let mut v = Array1::<f64>::from_elem(d + 1, 1.0 / ((d + 1) as f64).sqrt());
    let mut lambda = 1.0;
    for _ in 0..30 {
        let xv = x.dot(&v.slice(s![..d])) + v[d];
        let mut next = Array1::<f64>::zeros(d + 1);
        next.slice_mut(s![..d]).assign(&(x.t().dot(&xv) / n));
        next[d] = xv.sum() / n;
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 {
            break;
        }
        lambda = norm;
        v = next / norm;
    }
    1.1 * lambda
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn cloud(n: usize, d: usize, mean: f64, sd: f64, seed: u64) -> Array2<f64> {
        let mut r = rng::from_seed(seed);
        let g = Normal::new(mean, sd).unwrap();
        Array2::from_shape_fn((n, d), |_| g.sample(&mut r))
    }

    #[test]
    fn separable_clouds() {
        let acc = discriminative_accuracy(&cloud(300, 5, 1.0, 0.05, 1), &cloud(200, 5, -1.0, 0.05, 2), 0).unwrap();
        assert!(acc >= 0.95, "{acc}");
    }

    #[test]
    fn shifted_clouds_are_partially_separable() {
        let acc = discriminative_accuracy(&cloud(2000, 4, 0.5, 1.0, 3), &cloud(2000, 4, -0.5, 1.0, 4), 0).unwrap();
        // Bayes accuracy is Φ(1) ≈ 0.84 along the mean difference.
        assert!((acc - 0.84).abs() < 0.04, "{acc}");
    }

    #[test]
    fn same_distribution_near_chance() {
        let all = cloud(4000, 6, 0.0, 1.0, 5);
        let (a, b) = all.view().split_at(Axis(0), 2000);
        let acc = discriminative_accuracy(&a.to_owned(), &b.to_owned(), 7).unwrap();
        assert!((0.45..=0.55).contains(&acc), "{acc}");
    }

    #[test]
    fn deterministic_in_seed() {
        let a = cloud(150, 3, 0.1, 1.0, 6);
        let b = cloud(180, 3, -0.1, 1.0, 7);
        assert_eq!(discriminative_accuracy(&a, &b, 3).unwrap(), discriminative_accuracy(&a, &b, 3).unwrap());
    }

    #[test]
    fn sample_floor_and_shape() {
        let a = cloud(99, 3, 0.0, 1.0, 8);
        let b = cloud(150, 3, 0.0, 1.0, 9);
        assert!(matches!(discriminative_accuracy(&a, &b, 0), Err(EvalError::TooFewSamples { real: 99, .. })));
        let c = cloud(150, 4, 0.0, 1.0, 9);
        assert!(matches!(discriminative_accuracy(&b, &c, 0), Err(EvalError::Dim { .. })));
    }

    #[test]
    fn constant_columns_are_harmless() {
        let mut a = cloud(200, 3, 1.0, 0.05, 10);
        let mut b = cloud(200, 3, -1.0, 0.05, 11);
        a.column_mut(1).fill(0.25);
        b.column_mut(1).fill(0.25);
        assert!(discriminative_accuracy(&a, &b, 0).unwrap() >= 0.95);
    }
}
