//! Gradient penalty `λ · mean_i (‖∇ₓ D(x̂ᵢ)‖₂ − 1)²` and its parameter
//! gradients by reverse-mode differentiation of the backward pass.
//!
//! Forward values `a_k` and backward values `g_k` form one graph:
//!
//! ```text
//! a_k = f_k(a_{k-1})            g_N = 1
//! g_{k-1} = J_k(a_{k-1})ᵀ g_k   u = g_0
//! ```
//!
//! The adjoint sweep first walks the backward chain from `u` up to the
//! output (collecting `ā` contributions through activation curvature), then
//! walks the forward chain down as usual.

use ndarray::{Array1, Array2, Axis, Zip};

use super::{check_finite, Gradients, Layer, NnError, Result, Sequential, Tensor};

#[derive(Debug, Clone)]
pub struct PenaltyOutput {
    /// `λ · mean (‖g‖ − 1)²`.
    pub value: f64,
    pub grads: Gradients,
    /// Per-sample `‖∇ₓ D(x̂)‖₂`.
    pub grad_norms: Array1<f64>,
}

impl Sequential {
    /// Evaluates the gradient penalty on `x_hat` with dropout disabled.
    ///
    /// The network must produce one output column. When a sample's input
    /// gradient is exactly zero, the norm's subgradient is taken as zero for
    /// that sample, so it contributes `λ/B` to the value and nothing to the
    /// gradients.
    pub fn input_grad_penalty(&self, x_hat: &Tensor, lambda: f64) -> Result<PenaltyOutput> {
        if self.output_dim() != 1 {
            return Err(NnError::Invalid(format!(
                "gradient penalty needs a scalar critic, output width is {}",
                self.output_dim()
            )));
        }
        let batch = x_hat.nrows();
        if batch == 0 {
            return Err(NnError::Invalid("empty batch".into()));
        }
        let n = self.layers.len();

        // Forward: a[k] is the input to layer k, a[n] the output.
        let mut a: Vec<Tensor> = Vec::with_capacity(n + 1);
        a.push(x_hat.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let y = match layer {
                Layer::Dense(d) => {
                    if a[i].ncols() != d.input_dim() {
                        return Err(NnError::DimMismatch { layer: i, expected: d.input_dim(), got: a[i].ncols() });
                    }
                    let mut y = a[i].dot(&d.weight.t());
                    y += &d.bias;
                    y
                }
                Layer::Activation(act) => a[i].mapv(|v| act.apply(v)),
                Layer::Dropout(_) => a[i].clone(),
            };
            check_finite(&y, i, layer.kind())?;
            a.push(y);
        }

        // Backward: g[k] is the gradient of the output sum w.r.t. a[k].
        let mut g: Vec<Tensor> = vec![Array2::zeros((0, 0)); n + 1];
        g[n] = Array2::ones((batch, 1));
        for (i, layer) in self.layers.iter().enumerate().rev() {
            g[i] = match layer {
                Layer::Dense(d) => g[i + 1].dot(&d.weight),
                Layer::Activation(act) => {
                    let mut out = g[i + 1].clone();
                    Zip::from(&mut out).and(&a[i]).for_each(|o, &x| *o *= act.derivative(x));
                    out
                }
                Layer::Dropout(_) => g[i + 1].clone(),
            };
        }

        let u = &g[0];
        let grad_norms: Array1<f64> = u.map_axis(Axis(1), |row| row.dot(&row).sqrt());
        let value = lambda * grad_norms.iter().map(|nrm| (nrm - 1.0).powi(2)).sum::<f64>() / batch as f64;

        // Adjoint of u.
        let mut g_bar = u.clone();
        for (mut row, nrm) in g_bar.axis_iter_mut(Axis(0)).zip(grad_norms.iter()) {
            let coef = if *nrm > 0.0 {
                lambda * 2.0 * (nrm - 1.0) / (nrm * batch as f64)
            } else {
                0.0
            };
            row.mapv_inplace(|v| v * coef);
        }

        let mut grads = Gradients::zeros_like(self);
        let dense_slots: Vec<usize> = {
            let mut k = 0;
            self.layers
                .iter()
                .map(|l| {
                    let s = k;
                    if matches!(l, Layer::Dense(_)) {
                        k += 1;
                    }
                    s
                })
                .collect()
        };
        let mut a_bar: Vec<Option<Tensor>> = vec![None; n + 1];

        // Ascend the backward chain: g_bar holds the adjoint of g[i].
        for (i, layer) in self.layers.iter().enumerate() {
            g_bar = match layer {
                Layer::Dense(d) => {
                    grads.dense[dense_slots[i]].weight += &g[i + 1].t().dot(&g_bar);
                    g_bar.dot(&d.weight.t())
                }
                Layer::Activation(act) => {
                    let mut curvature = g_bar.clone();
                    Zip::from(&mut curvature)
                        .and(&g[i + 1])
                        .and(&a[i])
                        .for_each(|c, &gk, &x| *c *= gk * act.second_derivative(x));
                    accumulate(&mut a_bar[i], curvature);
                    let mut next = g_bar;
                    Zip::from(&mut next).and(&a[i]).for_each(|v, &x| *v *= act.derivative(x));
                    next
                }
                Layer::Dropout(_) => g_bar,
            };
        }

        // Descend the forward chain with the collected forward adjoints.
        let mut carry: Option<Tensor> = None;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let Some(adj) = carry.take() else {
                carry = a_bar[i].take();
                continue;
            };
            let below = match layer {
                Layer::Dense(d) => {
                    let slot = &mut grads.dense[dense_slots[i]];
                    slot.weight += &adj.t().dot(&a[i]);
                    slot.bias += &adj.sum_axis(Axis(0));
                    adj.dot(&d.weight)
                }
                Layer::Activation(act) => {
                    let mut out = adj;
                    Zip::from(&mut out).and(&a[i]).for_each(|v, &x| *v *= act.derivative(x));
                    out
                }
                Layer::Dropout(_) => adj,
            };
            carry = Some(below);
            if let Some(extra) = a_bar[i].take() {
                accumulate(&mut carry, extra);
            }
        }

        Ok(PenaltyOutput { value, grads, grad_norms })
    }
}

fn accumulate(slot: &mut Option<Tensor>, t: Tensor) {
    match slot {
        Some(existing) => *existing += &t,
        None => *slot = Some(t),
    }
}
