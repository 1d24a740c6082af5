use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::PipelineError;
use crate::corpus::CorpusConfig;
use crate::embed::{CleoraConfig, RnnEncoderConfig, SkipGramConfig};
use crate::features::ItemLayout;
use crate::gan::{GanArchitecture, TrainConfig};

/// Comma-separated layer widths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Widths(pub Vec<usize>);

/// Comma-separated seeds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

macro_rules! comma_list {
    ($t:ident, $inner:ty) => {
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                let v = s
                    .split(',')
                    .map(|x| x.trim().parse::<$inner>().map_err(|e| e.to_string()))
                    .collect::<Result<Vec<_>, _>>()?;
                if v.is_empty() {
                    return Err("empty list".into());
                }
                Ok($t(v))
            }
        }

        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    };
}

comma_list!(Widths, usize);
comma_list!(Seeds, u64);

/// Critic output head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Sigmoid,
    Linear,
}

impl FromStr for Head {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sigmoid" => Ok(Head::Sigmoid),
            "linear" => Ok(Head::Linear),
            _ => Err("expected sigmoid or linear".into()),
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Head::Sigmoid => "sigmoid",
            Head::Linear => "linear",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedSettings {
    pub product_dim: usize,
    pub customer_dim: usize,
    pub seed: u64,
    pub skipgram_negatives: usize,
    pub skipgram_epochs: usize,
    pub skipgram_learning_rate: f64,
    pub cleora_iterations: usize,
    pub rnn_epochs: usize,
    pub rnn_learning_rate: f64,
    pub rnn_max_sequence_length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSettings {
    pub eval_fraction: f64,
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanSettings {
    pub noise_dim: usize,
    pub generator_hidden: Widths,
    pub critic_hidden: Widths,
    pub leaky_slope: f64,
    pub dropout: f64,
    pub head: Head,
    pub n_critic: usize,
    pub lambda_gp: f64,
    pub lambda_rec: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub gen_lr: f64,
    pub gen_beta1: f64,
    pub gen_beta2: f64,
    pub critic_lr: f64,
    pub critic_alpha: f64,
    pub seed: u64,
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub bins: usize,
    pub seeds: Seeds,
}

/// Every tunable of a run, read from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus: CorpusConfig,
    pub embed: EmbedSettings,
    pub features: FeatureSettings,
    pub gan: GanSettings,
    pub eval: EvalSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let sg = SkipGramConfig::default();
        let rnn = RnnEncoderConfig::default();
        let cleora = CleoraConfig::default();
        let arch = GanArchitecture::default();
        let train = TrainConfig::default();
        PipelineConfig {
            corpus: CorpusConfig::default(),
            embed: EmbedSettings {
                product_dim: cleora.product_dim,
                customer_dim: cleora.customer_dim,
                seed: 0,
                skipgram_negatives: sg.negatives_per_pair,
                skipgram_epochs: sg.epochs,
                skipgram_learning_rate: sg.learning_rate,
                cleora_iterations: cleora.iterations,
                rnn_epochs: rnn.epochs,
                rnn_learning_rate: rnn.learning_rate,
                rnn_max_sequence_length: rnn.max_sequence_length,
            },
            features: FeatureSettings { eval_fraction: 0.2, split_seed: 0 },
            gan: GanSettings {
                noise_dim: arch.noise_dim,
                generator_hidden: Widths(arch.generator_hidden),
                critic_hidden: Widths(arch.critic_hidden),
                leaky_slope: arch.leaky_slope,
                dropout: arch.dropout,
                head: Head::Sigmoid,
                n_critic: train.n_critic,
                lambda_gp: train.lambda_gp,
                lambda_rec: train.lambda_rec,
                batch_size: train.batch_size,
                epochs: train.epochs,
                gen_lr: train.gen_lr,
                gen_beta1: train.gen_betas.0,
                gen_beta2: train.gen_betas.1,
                critic_lr: train.critic_lr,
                critic_alpha: train.critic_alpha,
                seed: 0,
                checkpoint_every: 0,
            },
            eval: EvalSettings { bins: crate::eval::DEFAULT_BINS, seeds: Seeds(vec![0]) },
        }
    }
}

macro_rules! keys {
    ($( $key:literal => $($field:ident).+ , $doc:literal; )*) => {
        /// `(key, description)` for every accepted key, in file order.
        pub const KEYS: &[(&str, &str)] = &[$(($key, $doc)),*];

        impl PipelineConfig {
            pub fn get(&self, key: &str) -> Option<String> {
                match key {
                    $($key => Some(self.$($field).+.to_string()),)*
                    _ => None,
                }
            }

            pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
                match key {
                    $($key => {
                        self.$($field).+ = value.parse().map_err(|e| {
                            PipelineError::Validation(format!("config key `{key}`: cannot parse `{value}`: {e}"))
                        })?;
                    })*
                    _ => return Err(PipelineError::Validation(format!("unknown config key `{key}`"))),
                }
                Ok(())
            }
        }
    };
}

keys! {
    "corpus.n_stores" => corpus.n_stores, "number of stores";
    "corpus.n_customers" => corpus.n_customers, "number of customers";
    "corpus.n_skus" => corpus.n_skus, "catalog size";
    "corpus.n_categories" => corpus.n_categories, "number of sku categories";
    "corpus.n_days" => corpus.n_days, "days in the corpus window (>= 7)";
    "corpus.window_start" => corpus.window_start, "first day, YYYY-MM-DD";
    "corpus.preference_dim" => corpus.preference_dim, "latent taste dimensions";
    "corpus.stockout_rate" => corpus.stockout_rate, "chance a sku misses a restock at a store";
    "corpus.replenish_period" => corpus.replenish_period, "days between restocks";
    "corpus.seasonality_amplitude" => corpus.seasonality_amplitude, "day-of-week demand swing";
    "corpus.mean_basket_size" => corpus.mean_basket_size, "target lines per basket";
    "corpus.visit_rate" => corpus.visit_rate, "daily visit probability per customer";
    "corpus.away_store_rate" => corpus.away_store_rate, "share of visits to a non-home store";
    "corpus.regional_taste" => corpus.regional_taste, "weight of store-level taste and local stock depth";
    "corpus.assortment_gap" => corpus.assortment_gap, "share of skus a store never carries";
    "corpus.seed" => corpus.seed, "generator seed";
    "embed.product_dim" => embed.product_dim, "product embedding width";
    "embed.customer_dim" => embed.customer_dim, "customer embedding width (also the RNN hidden size)";
    "embed.seed" => embed.seed, "seed for all embedding trainers";
    "embed.skipgram.negatives" => embed.skipgram_negatives, "negative samples per pair";
    "embed.skipgram.epochs" => embed.skipgram_epochs, "skip-gram passes over the pairs";
    "embed.skipgram.learning_rate" => embed.skipgram_learning_rate, "initial skip-gram step size";
    "embed.cleora.iterations" => embed.cleora_iterations, "propagation rounds";
    "embed.rnn.epochs" => embed.rnn_epochs, "passes over customer sequences";
    "embed.rnn.learning_rate" => embed.rnn_learning_rate, "Adam step size";
    "embed.rnn.max_sequence_length" => embed.rnn_max_sequence_length, "most recent purchases kept per customer";
    "features.eval_fraction" => features.eval_fraction, "share of baskets held out for evaluation";
    "features.split_seed" => features.split_seed, "seed of the basket split";
    "gan.noise_dim" => gan.noise_dim, "extra N(0,1) generator inputs";
    "gan.generator_hidden" => gan.generator_hidden, "generator hidden widths";
    "gan.critic_hidden" => gan.critic_hidden, "critic hidden widths";
    "gan.leaky_slope" => gan.leaky_slope, "LeakyReLU negative slope";
    "gan.dropout" => gan.dropout, "critic dropout rate";
    "gan.head" => gan.head, "critic output head: sigmoid or linear";
    "gan.n_critic" => gan.n_critic, "critic steps per generator step";
    "gan.lambda_gp" => gan.lambda_gp, "gradient penalty weight";
    "gan.lambda_rec" => gan.lambda_rec, "reconstruction loss weight";
    "gan.batch_size" => gan.batch_size, "rows per batch";
    "gan.epochs" => gan.epochs, "training epochs";
    "gan.gen_lr" => gan.gen_lr, "generator Adam step size";
    "gan.gen_beta1" => gan.gen_beta1, "generator Adam beta1";
    "gan.gen_beta2" => gan.gen_beta2, "generator Adam beta2";
    "gan.critic_lr" => gan.critic_lr, "critic RMSprop step size";
    "gan.critic_alpha" => gan.critic_alpha, "critic RMSprop smoothing";
    "gan.seed" => gan.seed, "seed for initialisation, batching and generation";
    "gan.checkpoint_every" => gan.checkpoint_every, "epochs between checkpoints, 0 for final only";
    "eval.bins" => eval.bins, "histogram bins for JSD";
    "eval.seeds" => eval.seeds, "classifier seeds; one report row per seed";
}

impl PipelineConfig {
    /// Parses `key = value` lines. `#` starts a comment; keys may appear
    /// once; unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut cfg = PipelineConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(PipelineError::Validation(format!("config line {}: expected `key = value`", i + 1)));
            };
            let key = key.trim();
            cfg.set(key, value.trim())?;
            if !seen.insert(key.to_string()) {
                return Err(PipelineError::Validation(format!("config key `{key}` set twice")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Every key with its current value; parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (key, _) in KEYS {
            s.push_str(key);
            s.push_str(" = ");
            s.push_str(&self.get(key).expect("listed key"));
            s.push('\n');
        }
        s
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Validation(m));
        self.corpus.validate()?;
        if self.embed.product_dim == 0 || self.embed.customer_dim == 0 {
            return bad("embed.product_dim and embed.customer_dim must be positive".into());
        }
        if !(self.features.eval_fraction > 0.0 && self.features.eval_fraction < 1.0) {
            return bad("features.eval_fraction must lie in (0, 1)".into());
        }
        if self.eval.bins == 0 {
            return bad("eval.bins must be positive".into());
        }
        self.train_config().validate()?;
        self.skipgram_config().validate()?;
        Ok(())
    }

    pub fn layout(&self) -> ItemLayout {
        ItemLayout::new(self.embed.product_dim, self.embed.customer_dim)
    }

    pub fn skipgram_config(&self) -> SkipGramConfig {
        SkipGramConfig {
            dim: self.embed.product_dim,
            negatives_per_pair: self.embed.skipgram_negatives,
            epochs: self.embed.skipgram_epochs,
            learning_rate: self.embed.skipgram_learning_rate,
            seed: self.embed.seed,
        }
    }

    pub fn cleora_config(&self) -> CleoraConfig {
        CleoraConfig {
            product_dim: self.embed.product_dim,
            customer_dim: self.embed.customer_dim,
            iterations: self.embed.cleora_iterations,
            seed: self.embed.seed,
        }
    }

    pub fn rnn_config(&self) -> RnnEncoderConfig {
        RnnEncoderConfig {
            hidden_dim: self.embed.customer_dim,
            epochs: self.embed.rnn_epochs,
            learning_rate: self.embed.rnn_learning_rate,
            max_sequence_length: self.embed.rnn_max_sequence_length,
            seed: self.embed.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let g = &self.gan;
        TrainConfig {
            arch: GanArchitecture {
                layout: self.layout(),
                noise_dim: g.noise_dim,
                generator_hidden: g.generator_hidden.0.clone(),
                critic_hidden: g.critic_hidden.0.clone(),
                leaky_slope: g.leaky_slope,
                dropout: g.dropout,
                sigmoid_head: g.head == Head::Sigmoid,
            },
            n_critic: g.n_critic,
            lambda_gp: g.lambda_gp,
            lambda_rec: g.lambda_rec,
            batch_size: g.batch_size,
            epochs: g.epochs,
            gen_lr: g.gen_lr,
            gen_betas: (g.gen_beta1, g.gen_beta2),
            critic_lr: g.critic_lr,
            critic_alpha: g.critic_alpha,
            seed: g.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_text();
        assert_eq!(text.lines().count(), KEYS.len());
        assert_eq!(PipelineConfig::parse(&text).unwrap(), cfg);
        assert!(text.contains("gan.generator_hidden = 1024,512,256\n"));
        assert!(text.contains("corpus.window_start = 2023-01-02\n"));
    }

    #[test]
    fn overrides_and_comments() {
        let cfg = PipelineConfig::parse(
            "# reduced\nembed.product_dim = 16\n\ngan.critic_hidden = 8, 4  # two layers\ngan.head=linear\neval.seeds = 1,2,3\n",
        )
        .unwrap();
        assert_eq!(cfg.embed.product_dim, 16);
        assert_eq!(cfg.gan.critic_hidden, Widths(vec![8, 4]));
        assert_eq!(cfg.eval.seeds, Seeds(vec![1, 2, 3]));
        let t = cfg.train_config();
        assert!(!t.arch.sigmoid_head);
        assert_eq!(t.arch.item_dim(), 16 + 256 + 7);
    }

    #[test]
    fn strict_parsing() {
        let err = PipelineConfig::parse("gan.epochz = 3\n").unwrap_err();
        assert!(err.to_string().contains("gan.epochz"));
        assert_eq!(err.exit_code(), 1);
        assert!(PipelineConfig::parse("gan.epochs = three\n").is_err());
        assert!(PipelineConfig::parse("gan.epochs\n").is_err());
        assert!(PipelineConfig::parse("gan.epochs = 1\ngan.epochs = 2\n").is_err());
        assert!(PipelineConfig::parse("features.eval_fraction = 1.5\n").is_err());
        assert!(PipelineConfig::parse("corpus.n_days = 3\n").is_err());
    }
}
