//! Run directories, strict config files and the command layer behind the
//! `stockgan` binary.
//!
//! A run lives in `<runs>/<name>/`, where `<runs>` is `runs` or the value
//! of `STOCKGAN_RUNS_DIR`. Each command reads the artifacts of the stages
//! before it and writes its own, plus a JSON manifest under `manifests/`.
//!
//! ```text
//! config.txt
//! corpus/        skus.csv stores.csv transactions.csv stocks.csv validation.txt
//! embeddings/    products_{w2v,cleora}.emb customers_cleora.emb customers_rnn_{w2v,cleora}.emb
//! features/      stock_<product>_<mode>.emb (+ .scaler.json)
//!                <consumer>_<product>/{items_train.emb,items_eval.emb,scaler.json}
//! gan/           <consumer>_<product>_<mode>/{model.ganm,log.csv,checkpoints/}
//! generated/     <consumer>_<product>_<mode>/{items.emb,decoded.csv}
//! eval/          metrics.csv report.txt
//! manifests/     <command>.json
//! ```

mod cli;
mod commands;
mod config;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embed::{ConsumerMethod, ProductMethod};
use crate::eval::CellKey;
use crate::features::StockMode;

pub use cli::run_cli;
pub use commands::{
    corpus_gen, corpus_validate, embed_customers, embed_products, eval_report, eval_run, features_build, gan_generate,
    gan_train, cell_data, select_cells, select_pairs, Context,
};
pub use config::{EmbedSettings, EvalSettings, FeatureSettings, GanSettings, Head, PipelineConfig, Seeds, Widths, KEYS};

pub const RUNS_DIR_ENV: &str = "STOCKGAN_RUNS_DIR";

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad config, flags, inputs or a missing upstream artifact.
    #[error("{0}")]
    Validation(String),
    /// Anything that went wrong while doing the work.
    #[error("{0}")]
    Runtime(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 1,
            PipelineError::Runtime(_) => 2,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

fn runtime(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Runtime(e.to_string())
}

fn validation(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Validation(e.to_string())
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        runtime(e)
    }
}

impl From<crate::corpus::CorpusError> for PipelineError {
    fn from(e: crate::corpus::CorpusError) -> Self {
        match e {
            crate::corpus::CorpusError::Io { .. } => runtime(e),
            _ => validation(e),
        }
    }
}

impl From<crate::embed::EmbedError> for PipelineError {
    fn from(e: crate::embed::EmbedError) -> Self {
        match e {
            crate::embed::EmbedError::Io(_) => runtime(e),
            _ => validation(e),
        }
    }
}

impl From<crate::features::FeatureError> for PipelineError {
    fn from(e: crate::features::FeatureError) -> Self {
        match e {
            crate::features::FeatureError::Io(_) => runtime(e),
            _ => validation(e),
        }
    }
}

impl From<crate::gan::GanError> for PipelineError {
    fn from(e: crate::gan::GanError) -> Self {
        use crate::gan::GanError as G;
        match e {
            G::Io(_) | G::NonFinite { .. } | G::Nn(_) => runtime(e),
            _ => validation(e),
        }
    }
}

impl From<crate::eval::EvalError> for PipelineError {
    fn from(e: crate::eval::EvalError) -> Self {
        use crate::eval::EvalError as E;
        match e {
            E::Io(_) | E::NonFinite(_) => runtime(e),
            _ => validation(e),
        }
    }
}

impl From<crate::nn::NnError> for PipelineError {
    fn from(e: crate::nn::NnError) -> Self {
        runtime(e)
    }
}

/// Root of the run directories: `$STOCKGAN_RUNS_DIR` or `runs`.
pub fn runs_root() -> PathBuf {
    std::env::var_os(RUNS_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

/// Paths of every artifact in one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDir {
    pub root: PathBuf,
}

fn cell_name(c: &CellKey) -> String {
    format!("{}_{}_{}", c.consumer, c.product, c.mode)
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn named(name: &str) -> Self {
        RunDir::new(runs_root().join(name))
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.txt")
    }

    pub fn corpus(&self, file: &str) -> PathBuf {
        self.root.join("corpus").join(file)
    }

    pub fn products(&self, p: ProductMethod) -> PathBuf {
        self.root.join("embeddings").join(format!("products_{p}.emb"))
    }

    /// RNN customers depend on the product table they were trained over.
    pub fn customers(&self, c: ConsumerMethod, p: ProductMethod) -> PathBuf {
        let file = match c {
            ConsumerMethod::Cleora => "customers_cleora.emb".to_string(),
            ConsumerMethod::Rnn => format!("customers_rnn_{p}.emb"),
        };
        self.root.join("embeddings").join(file)
    }

    pub fn stock(&self, p: ProductMethod, mode: StockMode) -> PathBuf {
        self.root.join("features").join(format!("stock_{p}_{mode}.emb"))
    }

    pub fn stock_scaler(&self, p: ProductMethod, mode: StockMode) -> PathBuf {
        self.root.join("features").join(format!("stock_{p}_{mode}.scaler.json"))
    }

    pub fn features(&self, c: ConsumerMethod, p: ProductMethod) -> PathBuf {
        self.root.join("features").join(format!("{c}_{p}"))
    }

    pub fn gan(&self, cell: &CellKey) -> PathBuf {
        self.root.join("gan").join(cell_name(cell))
    }

    pub fn generated(&self, cell: &CellKey) -> PathBuf {
        self.root.join("generated").join(cell_name(cell))
    }

    pub fn eval(&self, file: &str) -> PathBuf {
        self.root.join("eval").join(file)
    }

    pub fn manifest(&self, step: &str) -> PathBuf {
        self.root.join("manifests").join(format!("{step}.json"))
    }
}

/// Fails with a message naming the command that produces `path`.
pub fn require(path: &Path, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::Validation(format!(
            "missing {}; run `stockgan {producer}` first",
            path.display()
        )))
    }
}

/// Writes through a temporary sibling and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// What a command read and wrote, with enough detail to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub run: String,
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    /// Path relative to the run directory → sha256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// Command-specific facts such as the selected experiment cells.
    pub details: BTreeMap<String, String>,
    pub started_unix: u64,
    pub seconds: f64,
}

/// Collects inputs and outputs while a command runs.
pub struct ManifestBuilder {
    manifest: RunManifest,
    root: PathBuf,
    clock: Instant,
}

impl ManifestBuilder {
    pub fn start(command: &str, run: &RunDir, config: &PipelineConfig) -> Self {
        let cfg = KEYS.iter().map(|(k, _)| (k.to_string(), config.get(k).expect("listed key"))).collect();
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let run_name = run.root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        ManifestBuilder {
            manifest: RunManifest {
                command: command.to_string(),
                run: run_name,
                config: cfg,
                seeds: BTreeMap::new(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                details: BTreeMap::new(),
                started_unix,
                seconds: 0.0,
            },
            root: run.root.clone(),
            clock: Instant::now(),
        }
    }

    fn rel(&self, path: &Path) -> String {
        path.strip_prefix(&self.root).unwrap_or(path).to_string_lossy().into_owned()
    }

    pub fn seed(&mut self, name: &str, seed: u64) {
        self.manifest.seeds.insert(name.into(), seed);
    }

    pub fn detail(&mut self, key: &str, value: impl ToString) {
        self.manifest.details.insert(key.into(), value.to_string());
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let h = file_sha256(path)?;
        self.manifest.inputs.insert(self.rel(path), h);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        let h = file_sha256(path)?;
        self.manifest.outputs.insert(self.rel(path), h);
        Ok(())
    }

    pub fn finish(mut self, path: &Path) -> Result<RunManifest> {
        self.manifest.seconds = self.clock.elapsed().as_secs_f64();
        let json = serde_json::to_string_pretty(&self.manifest).map_err(runtime)?;
        write_atomic(path, json.as_bytes())?;
        Ok(self.manifest)
    }
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(validation)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b/out.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn require_names_producer() {
        let err = require(Path::new("/nonexistent/x.emb"), "embed products").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("stockgan embed products"));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::new(dir.path().join("r1"));
        let input = run.corpus("x.csv");
        write_atomic(&input, b"abc").unwrap();
        let mut m = ManifestBuilder::start("gan train", &run, &PipelineConfig::default());
        m.input(&input).unwrap();
        m.detail("stock_mode", StockMode::Weighted);
        m.seed("gan", 4);
        let written = m.finish(&run.manifest("gan-train")).unwrap();
        let back = read_manifest(&run.manifest("gan-train")).unwrap();
        assert_eq!(back, written);
        assert_eq!(back.run, "r1");
        assert_eq!(back.inputs["corpus/x.csv"], sha256_hex(b"abc"));
        assert_eq!(back.details["stock_mode"], "weighted");
        assert_eq!(back.config.len(), KEYS.len());
    }
}
