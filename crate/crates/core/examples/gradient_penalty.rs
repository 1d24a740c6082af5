//! The gradient penalty on hand-built linear critics, and a finite-difference
//! check of its parameter gradients on a small nonlinear critic.

use ndarray::{array, Array1, Array2};
use stockgan::nn::{ActivationKind, DenseLayer, Layer, Sequential};

fn linear(w: Array2<f64>) -> Sequential {
    let out = w.nrows();
    Sequential::new(vec![Layer::Dense(DenseLayer { weight: w, bias: Array1::zeros(out) })]).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x = array![[0.3, -0.2], [1.0, 0.5], [-0.7, 0.1]];
    let unit = linear(array![[0.6, 0.8]]);
    let steep = linear(array![[1.2, 1.6]]);
    println!("unit-norm critic: penalty {:.3e}", unit.input_grad_penalty(&x, 10.0)?.value);
    println!("slope-2 critic:   penalty {:.6}", steep.input_grad_penalty(&x, 10.0)?.value);

    let critic = Sequential::new(vec![
        Layer::Dense(DenseLayer { weight: array![[0.5, -0.4], [0.3, 0.9], [-0.8, 0.2]], bias: array![0.1, -0.2, 0.05] }),
        Layer::Activation(ActivationKind::Tanh),
        Layer::Dense(DenseLayer { weight: array![[0.7, -1.1, 0.4]], bias: array![0.0] }),
    ])?;
    let analytic = critic.input_grad_penalty(&x, 10.0)?;
    println!("per-sample input-gradient norms {:.4}", analytic.grad_norms);

    let h = 1e-6;
    let mut worst = 0.0f64;
    let flat = analytic.grads.flatten();
    let n_blocks = critic.clone().param_blocks_mut().len();
    let mut k = 0;
    for b in 0..n_blocks {
        let len = critic.clone().param_blocks_mut()[b].len();
        for i in 0..len {
            let mut plus = critic.clone();
            plus.param_blocks_mut()[b][i] += h;
            let mut minus = critic.clone();
            minus.param_blocks_mut()[b][i] -= h;
            let fd = (plus.input_grad_penalty(&x, 10.0)?.value - minus.input_grad_penalty(&x, 10.0)?.value) / (2.0 * h);
            worst = worst.max((fd - flat[k]).abs() / fd.abs().max(1e-8));
            k += 1;
        }
    }
    println!("{k} parameters, worst relative error vs finite differences {worst:.2e}");
    Ok(())
}
