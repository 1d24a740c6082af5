//! Stock-conditioned WGAN-GP.
//!
//! The generator maps `[p ⊕ s]` (product embedding, stock embedding, plus
//! optional noise) to a full item vector; the critic scores item vectors.
//! [`train`] runs `n_critic` RMSprop critic steps per Adam generator step.
//! Generated vectors live in scaled space and are mapped back to skus with
//! [`decode_to_sku`], restricted to the skus in stock at the conditioning
//! `(store, date)`.

mod decode;
mod loss;
mod train;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::features::ItemLayout;
use crate::nn::checkpoint::Checkpoint;
use crate::nn::{ActivationKind, NnError, Sequential};
use crate::rng;

pub use decode::{decode_fields, decode_to_sku, DecodedFields, SkuDecoder};
pub use loss::{critic_loss, generator_loss, CriticLoss, GeneratorLoss};
pub use train::{
    checkpoint_counts, generate, load_model, read_log_csv, train, write_log_csv, EpochSummary, LogRecord,
    TrainConfig, TrainOptions, TrainingData, TrainingLog,
};

#[derive(Debug, Error)]
pub enum GanError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error("{0}")]
    Dim(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("epoch {epoch} batch {batch} {step}: non-finite {what}")]
    NonFinite { epoch: usize, batch: usize, step: &'static str, what: &'static str },
    #[error("empty stock mask")]
    EmptyMask,
    #[error("sku {0} in the stock mask has no embedding")]
    UnknownSku(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = GanError> = std::result::Result<T, E>;

/// Network shapes. `Default` gives the 2048 → 1024 → 512 → 256 → 1287
/// generator and the 1287 → 512 → 128 → 1 critic.
#[derive(Debug, Clone, PartialEq)]
pub struct GanArchitecture {
    pub layout: ItemLayout,
    pub noise_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub dropout: f64,
    pub sigmoid_head: bool,
}

impl Default for GanArchitecture {
    fn default() -> Self {
        GanArchitecture {
            layout: ItemLayout::default(),
            noise_dim: 0,
            generator_hidden: vec![1024, 512, 256],
            critic_hidden: vec![512, 128],
            leaky_slope: ActivationKind::DEFAULT_LEAKY_SLOPE,
            dropout: 0.3,
            sigmoid_head: true,
        }
    }
}

impl GanArchitecture {
    /// Product block plus an equally wide stock block plus noise.
    pub fn condition_dim(&self) -> usize {
        2 * self.layout.product_dim
    }

    pub fn generator_input_dim(&self) -> usize {
        self.condition_dim() + self.noise_dim
    }

    pub fn item_dim(&self) -> usize {
        self.layout.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.generator_hidden.is_empty() || self.critic_hidden.is_empty() {
            return Err(GanError::Config("hidden layer lists must be non-empty".into()));
        }
        if self.generator_hidden.iter().chain(&self.critic_hidden).any(|w| *w == 0) {
            return Err(GanError::Config("hidden widths must be positive".into()));
        }
        if !(self.leaky_slope > 0.0) || !(0.0..1.0).contains(&self.dropout) {
            return Err(GanError::Config("leaky slope must be > 0 and dropout in [0, 1)".into()));
        }
        Ok(())
    }

    fn to_metadata(&self, meta: &mut BTreeMap<String, String>) {
        let join = |v: &[usize]| v.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",");
        meta.insert("product_dim".into(), self.layout.product_dim.to_string());
        meta.insert("customer_dim".into(), self.layout.customer_dim.to_string());
        meta.insert("noise_dim".into(), self.noise_dim.to_string());
        meta.insert("generator_hidden".into(), join(&self.generator_hidden));
        meta.insert("critic_hidden".into(), join(&self.critic_hidden));
        meta.insert("leaky_slope".into(), format!("{:?}", self.leaky_slope));
        meta.insert("dropout".into(), format!("{:?}", self.dropout));
        meta.insert("head".into(), if self.sigmoid_head { "sigmoid" } else { "linear" }.into());
    }

    fn from_metadata(meta: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| meta.get(k).ok_or_else(|| GanError::Checkpoint(format!("missing metadata `{k}`")));
        let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| GanError::Checkpoint(format!("bad `{k}`"))) };
        let real = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| GanError::Checkpoint(format!("bad `{k}`"))) };
        let list = |k: &str| -> Result<Vec<usize>> {
            get(k)?
                .split(',')
                .map(|w| w.parse().map_err(|_| GanError::Checkpoint(format!("bad `{k}`"))))
                .collect()
        };
        Ok(GanArchitecture {
            layout: ItemLayout::new(num("product_dim")?, num("customer_dim")?),
            noise_dim: num("noise_dim")?,
            generator_hidden: list("generator_hidden")?,
            critic_hidden: list("critic_hidden")?,
            leaky_slope: real("leaky_slope")?,
            dropout: real("dropout")?,
            sigmoid_head: match get("head")?.as_str() {
                "sigmoid" => true,
                "linear" => false,
                other => return Err(GanError::Checkpoint(format!("unknown head `{other}`"))),
            },
        })
    }
}

pub fn build_generator(arch: &GanArchitecture, seed: u64) -> Result<Sequential> {
    arch.validate()?;
    let mut r = rng::stream(seed, rng::INIT, 0);
    let mut b = Sequential::builder(arch.generator_input_dim());
    for &w in &arch.generator_hidden {
        b = b.dense(w, &mut r).activation(ActivationKind::LeakyRelu(arch.leaky_slope));
    }
    Ok(b.dense(arch.item_dim(), &mut r).activation(ActivationKind::Tanh).build()?)
}

pub fn build_critic(arch: &GanArchitecture, seed: u64) -> Result<Sequential> {
    arch.validate()?;
    let mut r = rng::stream(seed, rng::INIT, 1);
    let mut b = Sequential::builder(arch.item_dim());
    for &w in &arch.critic_hidden {
        b = b
            .dense(w, &mut r)
            .activation(ActivationKind::LeakyRelu(arch.leaky_slope))
            .dropout(arch.dropout);
    }
    b = b.dense(1, &mut r);
    if arch.sigmoid_head {
        b = b.activation(ActivationKind::Sigmoid);
    }
    Ok(b.build()?)
}

/// Generator and critic with the architecture they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    pub arch: GanArchitecture,
    pub generator: Sequential,
    pub critic: Sequential,
}

impl GanModel {
    pub fn new(arch: GanArchitecture, seed: u64) -> Result<Self> {
        Ok(GanModel { generator: build_generator(&arch, seed)?, critic: build_critic(&arch, seed)?, arch })
    }

    /// Checkpoint without optimizer state.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut metadata = BTreeMap::new();
        self.arch.to_metadata(&mut metadata);
        Checkpoint { metadata, networks: vec![self.generator.clone(), self.critic.clone()], state_blocks: vec![] }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let arch = GanArchitecture::from_metadata(&c.metadata)?;
        let [generator, critic] = <[Sequential; 2]>::try_from(c.networks.clone())
            .map_err(|_| GanError::Checkpoint("expected generator and critic".into()))?;
        if generator.input_dim() != arch.generator_input_dim()
            || generator.output_dim() != arch.item_dim()
            || critic.input_dim() != arch.item_dim()
            || critic.output_dim() != 1
        {
            return Err(GanError::Checkpoint("network shapes disagree with metadata".into()));
        }
        Ok(GanModel { arch, generator, critic })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;

    #[test]
    fn generator_parameter_count() {
        // Independent arithmetic over the stated widths.
        let widths = [2048usize, 1024, 512, 256, 1287];
        let expected: usize = widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        assert_eq!(expected, 2_098_176 + 524_800 + 131_328 + 330_759);
        assert_eq!(expected, 3_085_063);
        let g = build_generator(&GanArchitecture::default(), 0).unwrap();
        assert_eq!(g.param_count(), expected);
        let dims: Vec<(usize, usize)> = g.dense_layers().map(|d| (d.input_dim(), d.output_dim())).collect();
        assert_eq!(dims, [(2048, 1024), (1024, 512), (512, 256), (256, 1287)]);
    }

    #[test]
    fn critic_shape_and_head() {
        let c = build_critic(&GanArchitecture::default(), 0).unwrap();
        let dims: Vec<(usize, usize)> = c.dense_layers().map(|d| (d.input_dim(), d.output_dim())).collect();
        assert_eq!(dims, [(1287, 512), (512, 128), (128, 1)]);
        assert_eq!(c.layers().iter().filter(|l| matches!(l, Layer::Dropout(_))).count(), 2);
        assert!(matches!(c.layers().last(), Some(Layer::Activation(ActivationKind::Sigmoid))));
        let linear = GanArchitecture { sigmoid_head: false, ..Default::default() };
        assert!(matches!(build_critic(&linear, 0).unwrap().layers().last(), Some(Layer::Dense(_))));
    }

    #[test]
    fn init_is_seeded_and_checkpoint_round_trips() {
        let arch = GanArchitecture {
            layout: ItemLayout::new(4, 2),
            noise_dim: 3,
            generator_hidden: vec![8, 5],
            critic_hidden: vec![6],
            sigmoid_head: false,
            ..Default::default()
        };
        let a = GanModel::new(arch.clone(), 9).unwrap();
        assert_eq!(a, GanModel::new(arch.clone(), 9).unwrap());
        assert_ne!(a, GanModel::new(arch, 10).unwrap());
        let back = GanModel::from_checkpoint(&Checkpoint::from_bytes(&a.to_checkpoint().to_bytes()).unwrap()).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.generator.input_dim(), 4 + 4 + 3);
    }
}
