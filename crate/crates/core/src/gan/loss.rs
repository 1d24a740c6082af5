use ndarray::{s, Array2, Axis};
use rand::Rng as _;

use super::{GanError, Result};
use crate::nn::{Gradients, Mode, Sequential, Tensor};
use crate::rng;

#[derive(Debug, Clone)]
pub struct CriticLoss {
    /// `-(mean D(real) - mean D(fake)) + gp`, the quantity the critic minimises.
    pub loss: f64,
    /// `mean D(real) - mean D(fake)`.
    pub wasserstein: f64,
    pub gp: f64,
    pub grads: Gradients,
}

/// Adversarial terms use one dropout mask stream for real and fake rows;
/// the penalty runs on interpolates `εx + (1-ε)x̃` with dropout off.
pub fn critic_loss(critic: &Sequential, real: &Tensor, fake: &Tensor, lambda_gp: f64, seed: u64) -> Result<CriticLoss> {
    let b = real.nrows();
    if b == 0 {
        return Err(GanError::Dim("empty batch".into()));
    }
    if real.dim() != fake.dim() {
        return Err(GanError::Dim(format!("real batch {:?} vs fake batch {:?}", real.dim(), fake.dim())));
    }
    let mode = Mode::Train { seed: rng::derive(seed, rng::DROPOUT, 0) };
    let (d_real, tape_real) = critic.forward(real, mode)?;
    let (d_fake, tape_fake) = critic.forward(fake, mode)?;
    let wasserstein = d_real.mean().expect("non-empty") - d_fake.mean().expect("non-empty");

    let (mut grads, _) = critic.backward(&tape_real, &Array2::from_elem((b, 1), -1.0 / b as f64));
    grads.add_assign(&critic.backward(&tape_fake, &Array2::from_elem((b, 1), 1.0 / b as f64)).0);

    let mut gp = 0.0;
    if lambda_gp > 0.0 {
        let mut r = rng::stream(seed, rng::INTERPOLATE, 0);
        let mut x_hat = fake.clone();
        for (mut row, real_row) in x_hat.axis_iter_mut(Axis(0)).zip(real.axis_iter(Axis(0))) {
            let eps: f64 = r.random();
            row.zip_mut_with(&real_row, |f, x| *f = eps * x + (1.0 - eps) * *f);
        }
        let pen = critic.input_grad_penalty(&x_hat, lambda_gp)?;
        gp = pen.value;
        grads.add_assign(&pen.grads);
    }
    Ok(CriticLoss { loss: -wasserstein + gp, wasserstein, gp, grads })
}

#[derive(Debug, Clone)]
pub struct GeneratorLoss {
    /// `adversarial + λ_rec · reconstruction`.
    pub loss: f64,
    /// `-mean D(G(p, s))`.
    pub adversarial: f64,
    /// Mean squared distance between the generated product block and `p`.
    pub reconstruction: f64,
    /// Gradient of `loss` w.r.t. the generator output, for backpropagation
    /// through the generator.
    pub output_grad: Tensor,
}

pub fn generator_loss(
    critic: &Sequential,
    generated: &Tensor,
    real_products: &Tensor,
    lambda_rec: f64,
    mode: Mode,
) -> Result<GeneratorLoss> {
    let b = generated.nrows();
    if b == 0 {
        return Err(GanError::Dim("empty batch".into()));
    }
    let p = real_products.ncols();
    if real_products.nrows() != b || p > generated.ncols() || generated.ncols() != critic.input_dim() {
        return Err(GanError::Dim(format!(
            "generated {:?}, products {:?}, critic input {}",
            generated.dim(),
            real_products.dim(),
            critic.input_dim()
        )));
    }
    let (d, tape) = critic.forward(generated, mode)?;
    let adversarial = -d.mean().expect("non-empty");
    let (_, mut output_grad) = critic.backward(&tape, &Array2::from_elem((b, 1), -1.0 / b as f64));

    let diff = &generated.slice(s![.., ..p]) - real_products;
    let reconstruction = diff.iter().map(|v| v * v).sum::<f64>() / b as f64;
    if lambda_rec != 0.0 {
        let mut block = output_grad.slice_mut(s![.., ..p]);
        block.scaled_add(2.0 * lambda_rec / b as f64, &diff);
    }
    Ok(GeneratorLoss { loss: adversarial + lambda_rec * reconstruction, adversarial, reconstruction, output_grad })
}
