use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{concatenate, s, Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{critic_loss, generator_loss, GanArchitecture, GanError, GanModel, Result};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::{AdamState, Mode, NnError, RmsPropState, Tensor};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub arch: GanArchitecture,
    pub n_critic: usize,
    pub lambda_gp: f64,
    pub lambda_rec: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub gen_lr: f64,
    pub gen_betas: (f64, f64),
    pub critic_lr: f64,
    pub critic_alpha: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            arch: GanArchitecture::default(),
            n_critic: 5,
            lambda_gp: 10.0,
            lambda_rec: 1.0,
            batch_size: 128,
            epochs: 200,
            gen_lr: 2e-4,
            gen_betas: (0.5, 0.999),
            critic_lr: 2e-4,
            critic_alpha: RmsPropState::DEFAULT_ALPHA,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.n_critic == 0 || self.batch_size == 0 {
            return Err(GanError::Config("n_critic and batch_size must be >= 1".into()));
        }
        if !(self.lambda_gp >= 0.0) || !(self.lambda_rec >= 0.0) {
            return Err(GanError::Config("lambda_gp and lambda_rec must be >= 0".into()));
        }
        if !(self.gen_lr > 0.0) || !(self.critic_lr > 0.0) {
            return Err(GanError::Config("learning rates must be positive".into()));
        }
        Ok(())
    }

    /// Everything except `epochs`; a resumed run must match it exactly.
    fn fingerprint(&self) -> String {
        format!("{:?}", TrainConfig { epochs: 0, ..self.clone() })
    }
}

/// Scaled item vectors with their `[p ⊕ s]` conditions, row-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub items: Array2<f64>,
    pub conditions: Array2<f64>,
}

impl TrainingData {
    /// Builds conditions from the product block of `items` and `stock`.
    pub fn from_items(items: Array2<f64>, stock: &Array2<f64>, product_dim: usize) -> Result<Self> {
        if stock.nrows() != items.nrows() || stock.ncols() != product_dim || items.ncols() < product_dim {
            return Err(GanError::Dim(format!(
                "items {:?} and stock {:?} do not align for product dim {product_dim}",
                items.dim(),
                stock.dim()
            )));
        }
        let conditions = concatenate(Axis(1), &[items.slice(s![.., ..product_dim]), stock.view()]).expect("same rows");
        Ok(TrainingData { items, conditions })
    }

    pub fn len(&self) -> usize {
        self.items.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.items.nrows() == 0
    }

    fn check(&self, arch: &GanArchitecture) -> Result<()> {
        if self.is_empty() {
            return Err(GanError::Dim("no training rows".into()));
        }
        if self.items.nrows() != self.conditions.nrows() {
            return Err(GanError::Dim(format!("{} items vs {} conditions", self.items.nrows(), self.conditions.nrows())));
        }
        if self.items.ncols() != arch.item_dim() || self.conditions.ncols() != arch.condition_dim() {
            return Err(GanError::Dim(format!(
                "items {} / conditions {} columns, architecture expects {} / {}",
                self.items.ncols(),
                self.conditions.ncols(),
                arch.item_dim(),
                arch.condition_dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub epoch: usize,
    pub batch: usize,
    /// Mean over the batch's critic iterations.
    pub critic_loss: f64,
    pub gen_loss: f64,
    pub rec_loss: f64,
    pub gp: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<LogRecord>,
    pub critic_updates: u64,
    pub generator_updates: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSummary {
    /// 1-based.
    pub epoch: usize,
    pub critic_loss: f64,
    pub gen_loss: f64,
    pub rec_loss: f64,
    pub gp: f64,
    pub critic_updates: u64,
    pub generator_updates: u64,
}

#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Where `epoch_NNNN.ganm` files go.
    pub checkpoint_dir: Option<PathBuf>,
    /// Write a checkpoint every this many epochs; 0 writes only the last.
    /// The final epoch is always written.
    pub checkpoint_every: usize,
    /// Continues from a checkpoint written by [`train`] with the same config.
    pub resume: Option<Checkpoint>,
    pub on_epoch: Option<Box<dyn FnMut(&EpochSummary, &GanModel) + 'a>>,
}

struct State {
    model: GanModel,
    adam: AdamState,
    rms: RmsPropState,
    epochs_done: usize,
    critic_updates: u64,
    generator_updates: u64,
}

impl State {
    fn fresh(config: &TrainConfig) -> Result<Self> {
        let model = GanModel::new(config.arch.clone(), config.seed)?;
        Ok(State {
            adam: AdamState::for_network(&model.generator, config.gen_betas),
            rms: RmsPropState::for_network(&model.critic, config.critic_alpha),
            model,
            epochs_done: 0,
            critic_updates: 0,
            generator_updates: 0,
        })
    }

    fn to_checkpoint(&self, config: &TrainConfig) -> Checkpoint {
        let mut c = self.model.to_checkpoint();
        let meta = &mut c.metadata;
        meta.insert("train_config".into(), config.fingerprint());
        meta.insert("epochs_done".into(), self.epochs_done.to_string());
        meta.insert("critic_updates".into(), self.critic_updates.to_string());
        meta.insert("generator_updates".into(), self.generator_updates.to_string());
        meta.insert("adam_step".into(), self.adam.step.to_string());
        c.state_blocks = vec![self.adam.m.clone(), self.adam.v.clone(), self.rms.square_avg.clone()];
        c
    }

    fn from_checkpoint(c: &Checkpoint, config: &TrainConfig) -> Result<Self> {
        let meta = |k: &str| -> Result<&String> {
            c.metadata.get(k).ok_or_else(|| GanError::Checkpoint(format!("not a training checkpoint: missing `{k}`")))
        };
        if meta("train_config")? != &config.fingerprint() {
            return Err(GanError::Checkpoint("checkpoint was written with a different training config".into()));
        }
        let num = |k: &str| -> Result<u64> { meta(k)?.parse().map_err(|_| GanError::Checkpoint(format!("bad `{k}`"))) };
        let model = GanModel::from_checkpoint(c)?;
        let [m, v, sq] = <[Vec<f64>; 3]>::try_from(c.state_blocks.clone())
            .map_err(|_| GanError::Checkpoint("expected three optimizer state blocks".into()))?;
        let mut adam = AdamState::for_network(&model.generator, config.gen_betas);
        let mut rms = RmsPropState::for_network(&model.critic, config.critic_alpha);
        if m.len() != adam.m.len() || v.len() != adam.v.len() || sq.len() != rms.square_avg.len() {
            return Err(GanError::Checkpoint("optimizer state does not match the networks".into()));
        }
        (adam.m, adam.v, adam.step, rms.square_avg) = (m, v, num("adam_step")?, sq);
        Ok(State {
            model,
            adam,
            rms,
            epochs_done: num("epochs_done")? as usize,
            critic_updates: num("critic_updates")?,
            generator_updates: num("generator_updates")?,
        })
    }
}

fn with_noise(conditions: &Tensor, noise_dim: usize, seed: u64) -> Tensor {
    if noise_dim == 0 {
        return conditions.clone();
    }
    let mut r = rng::stream(seed, rng::NOISE, 0);
    let z = Array2::from_shape_simple_fn((conditions.nrows(), noise_dim), || StandardNormal.sample(&mut r));
    concatenate(Axis(1), &[conditions.view(), z.view()]).expect("same rows")
}

fn tag(epoch: usize, batch: usize, step: &'static str) -> impl Fn(NnError) -> GanError {
    move |e| match e {
        NnError::NonFinite { .. } => GanError::NonFinite { epoch, batch, step, what: "activation" },
        other => GanError::Nn(other),
    }
}

fn finite(v: f64, epoch: usize, batch: usize, step: &'static str, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(GanError::NonFinite { epoch, batch, step, what })
    }
}

/// Mini-batch WGAN-GP. Each batch takes `n_critic` critic steps on the same
/// real rows with fresh fakes, then one generator step. Rows are shuffled
/// per epoch; the final partial batch is kept. All randomness derives from
/// `(seed, epoch, batch)`, so a resumed run matches an uninterrupted one.
pub fn train(data: &TrainingData, config: &TrainConfig, mut options: TrainOptions<'_>) -> Result<(GanModel, TrainingLog)> {
    config.validate()?;
    data.check(&config.arch)?;
    let mut st = match &options.resume {
        Some(c) => State::from_checkpoint(c, config)?,
        None => State::fresh(config)?,
    };
    if let Some(dir) = &options.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let p = config.arch.layout.product_dim;
    let noise_dim = config.arch.noise_dim;
    let n = data.len();
    let mut log = TrainingLog::default();
    let start = Instant::now();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in st.epochs_done..config.epochs {
        let epoch_seed = rng::derive(config.seed, rng::EPOCH, epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng::stream(epoch_seed, rng::EPOCH, 0));
        let first_record = log.records.len();
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let batch_seed = rng::derive(epoch_seed, rng::EPOCH, 1 + batch as u64);
            let real = data.items.select(Axis(0), idx);
            let cond = data.conditions.select(Axis(0), idx);
            let (mut c_loss, mut c_gp) = (0.0, 0.0);
            for it in 0..config.n_critic {
                let step_seed = rng::derive(batch_seed, it as u64, 0);
                let g_in = with_noise(&cond, noise_dim, step_seed);
                let fake = st.model.generator.predict(&g_in).map_err(tag(epoch, batch, "critic"))?;
                let out = critic_loss(&st.model.critic, &real, &fake, config.lambda_gp, step_seed).map_err(|e| match e {
                    GanError::Nn(inner) => tag(epoch, batch, "critic")(inner),
                    other => other,
                })?;
                c_loss += finite(out.loss, epoch, batch, "critic", "loss")?;
                c_gp += out.gp;
                st.rms.step_network(&mut st.model.critic, &out.grads, config.critic_lr);
                st.critic_updates += 1;
                log.critic_updates += 1;
            }

            let gen_seed = rng::derive(batch_seed, config.n_critic as u64, 0);
            let g_in = with_noise(&cond, noise_dim, gen_seed);
            let (fake, tape) = st.model.generator.forward(&g_in, Mode::Eval).map_err(tag(epoch, batch, "generator"))?;
            let products = real.slice(s![.., ..p]).to_owned();
            let mode = Mode::Train { seed: rng::derive(gen_seed, rng::DROPOUT, 0) };
            let g = generator_loss(&st.model.critic, &fake, &products, config.lambda_rec, mode).map_err(|e| match e {
                GanError::Nn(inner) => tag(epoch, batch, "generator")(inner),
                other => other,
            })?;
            finite(g.loss, epoch, batch, "generator", "loss")?;
            let (grads, _) = st.model.generator.backward(&tape, &g.output_grad);
            if grads.flatten().iter().any(|v| !v.is_finite()) {
                return Err(GanError::NonFinite { epoch, batch, step: "generator", what: "gradient" });
            }
            st.adam.step_network(&mut st.model.generator, &grads, config.gen_lr);
            st.generator_updates += 1;
            log.generator_updates += 1;

            let k = config.n_critic as f64;
            log.records.push(LogRecord {
                epoch: epoch + 1,
                batch,
                critic_loss: c_loss / k,
                gen_loss: g.loss,
                rec_loss: g.reconstruction,
                gp: c_gp / k,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        st.epochs_done = epoch + 1;
        let due = epoch + 1 == config.epochs
            || (options.checkpoint_every > 0 && (epoch + 1) % options.checkpoint_every == 0);
        if let (Some(dir), true) = (&options.checkpoint_dir, due) {
            st.to_checkpoint(config).save(&dir.join(format!("epoch_{:04}.ganm", epoch + 1)))?;
        }
        if let Some(cb) = options.on_epoch.as_mut() {
            let recs = &log.records[first_record..];
            let mean = |f: fn(&LogRecord) -> f64| recs.iter().map(f).sum::<f64>() / recs.len() as f64;
            let summary = EpochSummary {
                epoch: epoch + 1,
                critic_loss: mean(|r| r.critic_loss),
                gen_loss: mean(|r| r.gen_loss),
                rec_loss: mean(|r| r.rec_loss),
                gp: mean(|r| r.gp),
                critic_updates: st.critic_updates,
                generator_updates: st.generator_updates,
            };
            cb(&summary, &st.model);
        }
    }
    Ok((st.model, log))
}

/// Loads a training checkpoint as a model, ignoring optimizer state.
pub fn load_model(path: &Path) -> Result<GanModel> {
    GanModel::from_checkpoint(&Checkpoint::load(path)?)
}

/// One item vector per condition row. With `noise_dim = 0` the output is a
/// pure function of the conditions.
pub fn generate(model: &GanModel, conditions: &Array2<f64>, seed: u64) -> Result<Array2<f64>> {
    if conditions.ncols() != model.arch.condition_dim() {
        return Err(GanError::Dim(format!(
            "conditions have {} columns, generator expects {}",
            conditions.ncols(),
            model.arch.condition_dim()
        )));
    }
    if conditions.nrows() == 0 {
        return Ok(Array2::zeros((0, model.arch.item_dim())));
    }
    let g_in = with_noise(conditions, model.arch.noise_dim, rng::derive(seed, rng::NOISE, 1));
    Ok(model.generator.predict(&g_in)?)
}

const LOG_HEADER: &str = "epoch,batch,critic_loss,gen_loss,rec_loss,gp,seconds";

pub fn write_log_csv(log: &TrainingLog, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    w.write_record(LOG_HEADER.split(',')).map_err(csv_err)?;
    for r in &log.records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log_csv(path: &Path) -> Result<Vec<LogRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header.join(",") != LOG_HEADER {
        return Err(GanError::Config(format!("training log header must be `{LOG_HEADER}`")));
    }
    r.deserialize().map(|rec| rec.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> GanError {
    GanError::Io(std::io::Error::other(e.to_string()))
}

/// Update counters recovered from a checkpoint's metadata.
pub fn checkpoint_counts(c: &Checkpoint) -> BTreeMap<String, u64> {
    ["epochs_done", "critic_updates", "generator_updates"]
        .into_iter()
        .filter_map(|k| Some((k.to_string(), c.metadata.get(k)?.parse().ok()?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ItemLayout;
    use std::cell::RefCell;

    fn tiny_arch() -> GanArchitecture {
        GanArchitecture {
            layout: ItemLayout::new(3, 2),
            generator_hidden: vec![8, 8],
            critic_hidden: vec![8, 4],
            ..Default::default()
        }
    }

    fn data(n: usize) -> TrainingData {
        let items = crate::nn::testutil::random_batch(1, n, tiny_arch().item_dim());
        let stock = crate::nn::testutil::random_batch(2, n, 3);
        TrainingData::from_items(items, &stock, 3).unwrap()
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig { arch: tiny_arch(), batch_size: 4, epochs, ..Default::default() }
    }

    #[test]
    fn five_critic_updates_per_generator_update() {
        let (_, log) = train(&data(40), &cfg(1), TrainOptions::default()).unwrap();
        assert_eq!(log.generator_updates, 10);
        assert_eq!(log.critic_updates, 50);
        assert_eq!(log.records.len(), 10);
        assert!(log.records.iter().all(|r| r.critic_loss.is_finite() && r.gen_loss.is_finite()));
    }

    #[test]
    fn partial_batches_are_trained() {
        let (_, log) = train(&data(10), &cfg(2), TrainOptions::default()).unwrap();
        assert_eq!(log.generator_updates, 6);
        assert_eq!(log.critic_updates, 30);
    }

    #[test]
    fn deterministic_checkpoints_and_resume() {
        let d = data(12);
        let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
        for dir in &dirs[..2] {
            let opts = TrainOptions { checkpoint_dir: Some(dir.path().to_path_buf()), checkpoint_every: 1, ..Default::default() };
            train(&d, &cfg(3), opts).unwrap();
        }
        assert!(dirs[0].path().join("epoch_0001.ganm").exists());
        let read = |dir: &tempfile::TempDir, e: usize| std::fs::read(dir.path().join(format!("epoch_{e:04}.ganm"))).unwrap();
        assert_eq!(read(&dirs[0], 3), read(&dirs[1], 3));

        // Two epochs, then resume for the third.
        let opts = TrainOptions { checkpoint_dir: Some(dirs[2].path().to_path_buf()), ..Default::default() };
        train(&d, &cfg(2), opts).unwrap();
        let resume = Checkpoint::load(&dirs[2].path().join("epoch_0002.ganm")).unwrap();
        assert!(matches!(
            train(&d, &TrainConfig { seed: 99, ..cfg(3) }, TrainOptions { resume: Some(resume.clone()), ..Default::default() }),
            Err(GanError::Checkpoint(_))
        ));
        let opts = TrainOptions {
            checkpoint_dir: Some(dirs[2].path().to_path_buf()),
            resume: Some(resume),
            ..Default::default()
        };
        let (_, log) = train(&d, &cfg(3), opts).unwrap();
        assert_eq!(log.generator_updates, 3);
        assert_eq!(read(&dirs[2], 3), read(&dirs[0], 3));
    }

    #[test]
    fn epoch_callback_and_generation() {
        let seen = RefCell::new(Vec::new());
        let opts = TrainOptions {
            on_epoch: Some(Box::new(|s: &EpochSummary, _: &GanModel| seen.borrow_mut().push((s.epoch, s.critic_updates)))),
            ..Default::default()
        };
        let d = data(8);
        let (model, _) = train(&d, &cfg(2), opts).unwrap();
        assert_eq!(*seen.borrow(), vec![(1, 10), (2, 20)]);
        let out = generate(&model, &d.conditions, 0).unwrap();
        assert_eq!(out.dim(), (8, tiny_arch().item_dim()));
        assert!(out.iter().all(|v| v.abs() < 1.0));
        let twice = concatenate(Axis(0), &[d.conditions.slice(s![..1, ..]), d.conditions.slice(s![..1, ..])]).unwrap();
        let g = generate(&model, &twice, 5).unwrap();
        assert_eq!(g.row(0), g.row(1));
        assert!(generate(&model, &Array2::zeros((1, 5)), 0).is_err());
    }

    #[test]
    fn log_csv_round_trip() {
        let (_, log) = train(&data(8), &cfg(1), TrainOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.csv");
        write_log_csv(&log, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("epoch,batch,critic_loss,gen_loss,rec_loss,gp,seconds\n"));
        assert_eq!(read_log_csv(&p).unwrap(), log.records);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(train(&data(8), &TrainConfig { n_critic: 0, ..cfg(1) }, TrainOptions::default()), Err(GanError::Config(_))));
        let mut d = data(8);
        d.conditions = d.conditions.slice(s![..7, ..]).to_owned();
        assert!(matches!(train(&d, &cfg(1), TrainOptions::default()), Err(GanError::Dim(_))));
    }
}
