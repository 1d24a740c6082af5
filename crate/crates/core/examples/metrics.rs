//! Distribution metrics on toy data: histogram JSD, 1-D EMD and the
//! real-vs-fake classifier.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use stockgan::eval::{discriminative_accuracy, emd_1d, evaluate, jsd_discrete, Histogram};

fn cloud(n: usize, d: usize, mean: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Normal::new(mean, 0.2).unwrap();
    Array2::from_shape_fn((n, d), |_| g.sample(&mut rng))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = Histogram::from_probs(vec![0.5, 0.5])?;
    let q = Histogram::from_probs(vec![0.9, 0.1])?;
    let disjoint = Histogram::from_probs(vec![0.0, 1.0])?;
    println!("jsd(p, q) = {:.6}", jsd_discrete(&p, &q)?);
    println!("jsd(p, p) = {:.1e}", jsd_discrete(&p, &p)?);
    println!("jsd([1, 0], [0, 1]) = {:.6} (ln 2 = {:.6})", jsd_discrete(&Histogram::from_probs(vec![1.0, 0.0])?, &disjoint)?, 2f64.ln());

    println!("emd([0, 1], [0.5, 1.5]) = {}", emd_1d(&[0.0, 1.0], &[0.5, 1.5])?);
    println!("emd([0, 0, 3], [1]) = {}", emd_1d(&[0.0, 0.0, 3.0], &[1.0])?);

    let real = cloud(5000, 4, 0.0, 1);
    for shift in [0.0, 0.1, 0.5] {
        let fake = cloud(5000, 4, shift, 2);
        let m = evaluate(&real, &fake, 64, 0)?;
        println!("shift {shift:.1}: EMD {:.4} JSD {:.4} accuracy {:.3}", m.emd, m.jsd, m.acc);
    }
    let acc = discriminative_accuracy(&cloud(500, 4, 1.0, 3), &cloud(500, 4, -1.0, 4), 0)?;
    println!("separable clouds: accuracy {acc:.3}");
    Ok(())
}
