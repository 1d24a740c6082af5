use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use ndarray::{concatenate, Array2, Axis};

use super::{require, runtime, validation, write_atomic, ManifestBuilder, PipelineConfig, PipelineError, Result, RunDir};
use crate::corpus::{
    self, group_baskets, index_snapshots, split_train_eval, validate_corpus, Id, StockSnapshot, TransactionLine,
};
use crate::embed::{
    build_hypergraph, customer_sequences, load_embeddings, train_cleora, train_rnn_consumer, train_skipgram_products,
    write_embeddings, ConsumerMethod, EmbeddingTable, ProductMethod,
};
use crate::eval::{build_report, evaluate, CellKey, MetricReport, MetricRow, METHOD_PAIRS};
use crate::features::{
    build_item_dataset, build_stock_dataset, fit_scaler, restrict_to_table, stock_key_id, ScalerParams, StockMode,
};
use crate::gan::{self, decode_fields, SkuDecoder, TrainOptions, TrainingData};

/// A run directory and the config its commands use.
pub struct Context {
    pub run: RunDir,
    pub config: PipelineConfig,
    pub quiet: bool,
}

impl Context {
    pub fn new(run: RunDir, config: PipelineConfig) -> Self {
        Context { run, config, quiet: false }
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

/// Method pairs in report order, narrowed by the given filters.
pub fn select_pairs(consumer: Option<ConsumerMethod>, product: Option<ProductMethod>) -> Vec<(ConsumerMethod, ProductMethod)> {
    METHOD_PAIRS
        .into_iter()
        .filter(|(c, p)| consumer.is_none_or(|x| x == *c) && product.is_none_or(|x| x == *p))
        .collect()
}

/// Experiment cells in report order, narrowed by the given filters.
pub fn select_cells(
    consumer: Option<ConsumerMethod>,
    product: Option<ProductMethod>,
    mode: Option<StockMode>,
) -> Vec<CellKey> {
    let mut out = Vec::new();
    for (c, p) in select_pairs(consumer, product) {
        for (m, _) in crate::eval::MODE_COLUMNS {
            if mode.is_none_or(|x| x == m) {
                out.push(CellKey { consumer: c, product: p, mode: m });
            }
        }
    }
    out
}

fn cell_flags(c: &CellKey) -> String {
    format!("--consumer {} --product {} --stock-mode {}", c.consumer, c.product, c.mode)
}

fn save_table(table: &EmbeddingTable, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_embeddings(&mut buf, table)?;
    write_atomic(path, &buf)
}

fn load_table(path: &Path, producer: &str, m: &mut ManifestBuilder) -> Result<EmbeddingTable> {
    require(path, producer)?;
    m.input(path)?;
    Ok(load_embeddings(path)?)
}

fn save_scaler(s: &ScalerParams, path: &Path) -> Result<()> {
    write_atomic(path, serde_json::to_string(s).map_err(runtime)?.as_bytes())
}

fn load_scaler(path: &Path, producer: &str, m: &mut ManifestBuilder) -> Result<ScalerParams> {
    require(path, producer)?;
    m.input(path)?;
    Ok(ScalerParams::load(path)?)
}

fn as_f64(t: &EmbeddingTable) -> Array2<f64> {
    t.matrix().mapv(|v| v as f64)
}

fn load_lines(ctx: &Context, m: &mut ManifestBuilder) -> Result<Vec<TransactionLine>> {
    let p = ctx.run.corpus("transactions.csv");
    require(&p, "corpus gen")?;
    m.input(&p)?;
    Ok(corpus::load_transactions(&p)?)
}

fn load_stocks(ctx: &Context, m: &mut ManifestBuilder) -> Result<Vec<StockSnapshot>> {
    let p = ctx.run.corpus("stocks.csv");
    require(&p, "corpus gen")?;
    m.input(&p)?;
    Ok(corpus::load_stocks(&p)?)
}

fn split(ctx: &Context, lines: &[TransactionLine]) -> Result<(Vec<TransactionLine>, Vec<TransactionLine>)> {
    Ok(split_train_eval(lines, ctx.config.features.eval_fraction, ctx.config.features.split_seed)?)
}

/// `(store, date)` of every transaction id.
fn transaction_keys(lines: &[TransactionLine]) -> HashMap<Id, (Id, NaiveDate)> {
    lines.iter().map(|l| (l.transaction_id.clone(), (l.store_id.clone(), l.date))).collect()
}

/// Recovers the `(store, date)` of feature rows named `<transaction>:<sku>`.
fn row_keys(ids: &[Id], tx: &HashMap<Id, (Id, NaiveDate)>) -> Result<Vec<(Id, NaiveDate)>> {
    ids.iter()
        .map(|id| {
            let t = id.as_str().rsplit_once(':').map(|(t, _)| t).unwrap_or(id.as_str());
            tx.get(t).cloned().ok_or_else(|| {
                PipelineError::Validation(format!("feature row {id} has no transaction; rerun `stockgan features build`"))
            })
        })
        .collect()
}

fn stock_rows(table: &EmbeddingTable, keys: &[(Id, NaiveDate)]) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((keys.len(), table.dim()));
    for (i, (store, date)) in keys.iter().enumerate() {
        let id = stock_key_id(store, *date);
        let row = table
            .row(&id)
            .ok_or_else(|| PipelineError::Validation(format!("no stock embedding for store {store} on {date}")))?;
        out.row_mut(i).assign(&row.mapv(|v| v as f64));
    }
    Ok(out)
}

pub fn corpus_gen(ctx: &Context) -> Result<()> {
    let mut m = ManifestBuilder::start("corpus gen", &ctx.run, &ctx.config);
    m.seed("corpus", ctx.config.corpus.seed);
    let c = corpus::generate_synthetic_corpus(&ctx.config.corpus)?;
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    let mut buf = Vec::new();
    corpus::write_skus(&mut buf, &c.skus)?;
    files.push((ctx.run.corpus("skus.csv"), std::mem::take(&mut buf)));
    corpus::write_stores(&mut buf, &c.stores)?;
    files.push((ctx.run.corpus("stores.csv"), std::mem::take(&mut buf)));
    corpus::write_transactions(&mut buf, &c.transactions)?;
    files.push((ctx.run.corpus("transactions.csv"), std::mem::take(&mut buf)));
    corpus::write_stocks(&mut buf, &c.stocks)?;
    files.push((ctx.run.corpus("stocks.csv"), buf));
    files.push((ctx.run.config(), ctx.config.to_text().into_bytes()));
    for (path, bytes) in &files {
        write_atomic(path, bytes)?;
        m.output(path)?;
    }
    m.detail("transactions", c.transactions.len());
    m.detail("snapshots", c.stocks.len());
    m.finish(&ctx.run.manifest("corpus-gen"))?;
    ctx.say(format!(
        "corpus: {} skus, {} stores, {} lines, {} snapshots -> {}",
        c.skus.len(),
        c.stores.len(),
        c.transactions.len(),
        c.stocks.len(),
        ctx.run.corpus("").display()
    ));
    Ok(())
}

/// Writes `validation.txt`; violations make the command fail after the
/// report is written.
pub fn corpus_validate(ctx: &Context) -> Result<()> {
    let mut m = ManifestBuilder::start("corpus validate", &ctx.run, &ctx.config);
    let lines = load_lines(ctx, &mut m)?;
    let stocks = load_stocks(ctx, &mut m)?;
    let (skus_p, stores_p) = (ctx.run.corpus("skus.csv"), ctx.run.corpus("stores.csv"));
    require(&skus_p, "corpus gen")?;
    require(&stores_p, "corpus gen")?;
    m.input(&skus_p)?;
    m.input(&stores_p)?;
    let report = validate_corpus(&lines, &stocks, &corpus::load_skus(&skus_p)?, &corpus::load_stores(&stores_p)?);
    let text = report.render();
    let out = ctx.run.corpus("validation.txt");
    write_atomic(&out, text.as_bytes())?;
    m.output(&out)?;
    m.detail("violations", report.violations.len());
    m.finish(&ctx.run.manifest("corpus-validate"))?;
    ctx.say(text.trim_end());
    if report.is_clean() {
        Ok(())
    } else {
        Err(PipelineError::Validation(format!("corpus has {} violations", report.violations.len())))
    }
}

pub fn embed_products(ctx: &Context, method: Option<ProductMethod>) -> Result<()> {
    let methods: Vec<ProductMethod> = method.map_or(ProductMethod::ALL.to_vec(), |x| vec![x]);
    for p in methods {
        let mut m = ManifestBuilder::start(&format!("embed products --method {p}"), &ctx.run, &ctx.config);
        m.seed("embed", ctx.config.embed.seed);
        let baskets = group_baskets(&load_lines(ctx, &mut m)?);
        let table = match p {
            ProductMethod::W2v => train_skipgram_products(&baskets, &ctx.config.skipgram_config())?,
            ProductMethod::Cleora => train_cleora(&build_hypergraph(&baskets), &ctx.config.cleora_config())?.0,
        };
        let out = ctx.run.products(p);
        save_table(&table, &out)?;
        m.output(&out)?;
        m.finish(&ctx.run.manifest(&format!("embed-products-{p}")))?;
        ctx.say(format!("products ({p}): {} x {} -> {}", table.len(), table.dim(), out.display()));
    }
    Ok(())
}

/// Cleora customers come from the joint hypergraph; RNN customers are
/// trained over each selected product table.
pub fn embed_customers(ctx: &Context, method: Option<ConsumerMethod>, product: Option<ProductMethod>) -> Result<()> {
    let methods: Vec<ConsumerMethod> = method.map_or(ConsumerMethod::ALL.to_vec(), |x| vec![x]);
    for c in methods {
        match c {
            ConsumerMethod::Cleora => {
                let mut m = ManifestBuilder::start("embed customers --method cleora", &ctx.run, &ctx.config);
                m.seed("embed", ctx.config.embed.seed);
                let baskets = group_baskets(&load_lines(ctx, &mut m)?);
                let (_, table) = train_cleora(&build_hypergraph(&baskets), &ctx.config.cleora_config())?;
                let out = ctx.run.customers(c, ProductMethod::Cleora);
                save_table(&table, &out)?;
                m.output(&out)?;
                m.finish(&ctx.run.manifest("embed-customers-cleora"))?;
                ctx.say(format!("customers (cleora): {} x {} -> {}", table.len(), table.dim(), out.display()));
            }
            ConsumerMethod::Rnn => {
                for p in product.map_or(ProductMethod::ALL.to_vec(), |x| vec![x]) {
                    let mut m =
                        ManifestBuilder::start(&format!("embed customers --method rnn --product {p}"), &ctx.run, &ctx.config);
                    m.seed("embed", ctx.config.embed.seed);
                    let products =
                        load_table(&ctx.run.products(p), &format!("embed products --method {p}"), &mut m)?;
                    let seqs = customer_sequences(&load_lines(ctx, &mut m)?);
                    let out_rnn = train_rnn_consumer(&seqs, &products, &ctx.config.rnn_config())?;
                    let out = ctx.run.customers(c, p);
                    save_table(&out_rnn.table, &out)?;
                    m.output(&out)?;
                    m.detail("skipped_customers", out_rnn.skipped.len());
                    m.finish(&ctx.run.manifest(&format!("embed-customers-rnn-{p}")))?;
                    ctx.say(format!(
                        "customers (rnn over {p}): {} x {}, {} skipped -> {}",
                        out_rnn.table.len(),
                        out_rnn.table.dim(),
                        out_rnn.skipped.len(),
                        out.display()
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Stock embeddings for every `(store, date)` with a purchase, in all three
/// modes, then scaled item matrices for each selected method pair.
pub fn features_build(ctx: &Context, consumer: Option<ConsumerMethod>, product: Option<ProductMethod>) -> Result<()> {
    let pairs = select_pairs(consumer, product);
    let mut m = ManifestBuilder::start("features build", &ctx.run, &ctx.config);
    m.seed("split", ctx.config.features.split_seed);
    let lines = load_lines(ctx, &mut m)?;
    let stocks = load_stocks(ctx, &mut m)?;
    let (train, eval) = split(ctx, &lines)?;
    let mut keys: Vec<(Id, NaiveDate)> = lines.iter().map(|l| (l.store_id.clone(), l.date)).collect();
    keys.sort();
    keys.dedup();
    let layout = ctx.config.layout();

    let products: BTreeSet<ProductMethod> = pairs.iter().map(|(_, p)| *p).collect();
    let mut product_tables = HashMap::new();
    for p in products {
        let table = load_table(&ctx.run.products(p), &format!("embed products --method {p}"), &mut m)?;
        if table.dim() != layout.product_dim {
            return Err(PipelineError::Validation(format!(
                "{} has dim {}, config says embed.product_dim = {}; rerun `stockgan embed products`",
                ctx.run.products(p).display(),
                table.dim(),
                layout.product_dim
            )));
        }
        for mode in StockMode::ALL {
            let ds = build_stock_dataset(&keys, &stocks, &table, mode)?;
            let scaler = fit_scaler(&ds.matrix)?;
            let ids = ds.keys.iter().map(|(s, d)| stock_key_id(s, *d)).collect();
            let scaled = EmbeddingTable::from_f64(ids, &scaler.apply_matrix(&ds.matrix)?)?;
            save_table(&scaled, &ctx.run.stock(p, mode))?;
            save_scaler(&scaler, &ctx.run.stock_scaler(p, mode))?;
            m.output(&ctx.run.stock(p, mode))?;
            m.output(&ctx.run.stock_scaler(p, mode))?;
        }
        product_tables.insert(p, table);
    }

    for (c, p) in pairs {
        let producer = match c {
            ConsumerMethod::Cleora => "embed customers --method cleora".to_string(),
            ConsumerMethod::Rnn => format!("embed customers --method rnn --product {p}"),
        };
        let customers = load_table(&ctx.run.customers(c, p), &producer, &mut m)?;
        if customers.dim() != layout.customer_dim {
            return Err(PipelineError::Validation(format!(
                "customer table has dim {}, config says embed.customer_dim = {}; rerun `stockgan {producer}`",
                customers.dim(),
                layout.customer_dim
            )));
        }
        let table = &product_tables[&p];
        let tr = build_item_dataset(&train, table, &customers)?;
        let ev = build_item_dataset(&eval, table, &customers)?;
        let scaler = fit_scaler(&tr.items)?;
        let dir = ctx.run.features(c, p);
        let train_t = EmbeddingTable::from_f64(tr.row_ids.clone(), &scaler.apply_matrix(&tr.items)?)?;
        let eval_t = EmbeddingTable::from_f64(ev.row_ids.clone(), &scaler.apply_matrix(&ev.items)?)?;
        for (name, t) in [("items_train.emb", &train_t), ("items_eval.emb", &eval_t)] {
            save_table(t, &dir.join(name))?;
            m.output(&dir.join(name))?;
        }
        save_scaler(&scaler, &dir.join("scaler.json"))?;
        m.output(&dir.join("scaler.json"))?;
        m.detail(&format!("{c}_{p}.dropped_lines"), tr.dropped + ev.dropped);
        ctx.say(format!(
            "features ({c}+{p}): {} train / {} eval rows of width {} ({} lines dropped) -> {}",
            train_t.len(),
            eval_t.len(),
            train_t.dim(),
            tr.dropped + ev.dropped,
            dir.display()
        ));
    }
    m.finish(&ctx.run.manifest("features-build"))?;
    Ok(())
}

/// Training rows of a cell: scaled items and `[product ⊕ stock]` conditions.
fn training_data(ctx: &Context, cell: &CellKey, file: &str, m: &mut ManifestBuilder) -> Result<(TrainingData, Vec<Id>, Vec<(Id, NaiveDate)>)> {
    let items = load_table(&ctx.run.features(cell.consumer, cell.product).join(file), "features build", m)?;
    let layout = ctx.config.layout();
    if items.dim() != layout.len() {
        return Err(PipelineError::Validation(format!(
            "feature rows have width {}, config implies {}; rerun `stockgan features build`",
            items.dim(),
            layout.len()
        )));
    }
    let stock = load_table(&ctx.run.stock(cell.product, cell.mode), "features build", m)?;
    let lines = load_lines(ctx, m)?;
    let keys = row_keys(items.ids(), &transaction_keys(&lines))?;
    let data = TrainingData::from_items(as_f64(&items), &stock_rows(&stock, &keys)?, layout.product_dim)?;
    Ok((data, items.ids().to_vec(), keys))
}

/// Scaled item rows, aligned stock conditions and each row's `(store,
/// date)` for one cell, as `gan train` (`eval = false`) or `gan generate`
/// (`eval = true`) sees them.
pub fn cell_data(ctx: &Context, cell: &CellKey, eval: bool) -> Result<(TrainingData, Vec<(Id, NaiveDate)>)> {
    let file = if eval { "items_eval.emb" } else { "items_train.emb" };
    let mut m = ManifestBuilder::start("cell data", &ctx.run, &ctx.config);
    let (data, _, keys) = training_data(ctx, cell, file, &mut m)?;
    Ok((data, keys))
}

pub fn gan_train(ctx: &Context, cells: &[CellKey]) -> Result<()> {
    let config = ctx.config.train_config();
    for cell in cells {
        let step = format!("gan train {}", cell_flags(cell));
        let mut m = ManifestBuilder::start(&step, &ctx.run, &ctx.config);
        m.seed("gan", config.seed);
        m.detail("consumer", cell.consumer);
        m.detail("product", cell.product);
        m.detail("stock_mode", cell.mode);
        let (data, _, _) = training_data(ctx, cell, "items_train.emb", &mut m)?;
        let dir = ctx.run.gan(cell);
        let every = (config.epochs / 10).max(1);
        let label = format!("{}+{} {}", cell.consumer, cell.product, cell.mode);
        let quiet = ctx.quiet;
        let opts = TrainOptions {
            checkpoint_dir: Some(dir.join("checkpoints")),
            checkpoint_every: ctx.config.gan.checkpoint_every,
            resume: None,
            on_epoch: Some(Box::new(move |s: &gan::EpochSummary, _: &gan::GanModel| {
                if !quiet && (s.epoch % every == 0 || s.epoch == 1) {
                    println!(
                        "  [{label}] epoch {:>4}: critic {:.5} gen {:.5} rec {:.5} gp {:.5}",
                        s.epoch, s.critic_loss, s.gen_loss, s.rec_loss, s.gp
                    );
                }
            })),
        };
        let (model, log) = gan::train(&data, &config, opts)?;
        let model_path = dir.join("model.ganm");
        write_atomic(&model_path, &model.to_checkpoint().to_bytes())?;
        let log_path = dir.join("log.csv");
        let tmp = dir.join("log.csv.tmp");
        gan::write_log_csv(&log, &tmp)?;
        std::fs::rename(&tmp, &log_path)?;
        m.output(&model_path)?;
        m.output(&log_path)?;
        m.output(&dir.join("checkpoints").join(format!("epoch_{:04}.ganm", config.epochs)))?;
        m.detail("rows", data.len());
        m.detail("epochs", config.epochs);
        m.detail("critic_updates", log.critic_updates);
        m.detail("generator_updates", log.generator_updates);
        m.finish(&ctx.run.manifest(&format!("gan-train-{}_{}_{}", cell.consumer, cell.product, cell.mode)))?;
        ctx.say(format!(
            "gan ({}): {} rows, {} critic / {} generator updates -> {}",
            cell_flags(cell),
            data.len(),
            log.critic_updates,
            log.generator_updates,
            model_path.display()
        ));
    }
    Ok(())
}

/// Rows of a user condition file `store_id,date,sku_id`.
fn read_condition_file(path: &Path) -> Result<Vec<(Id, NaiveDate, Id)>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(validation)?;
    let header: Vec<String> = r.headers().map_err(validation)?.iter().map(String::from).collect();
    if header != ["store_id", "date", "sku_id"] {
        return Err(PipelineError::Validation(format!("{}: header must be store_id,date,sku_id", path.display())));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(validation)?;
        let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
            .map_err(|e| PipelineError::Validation(format!("{} line {}: date: {e}", path.display(), i + 2)))?;
        out.push((Id::new(&rec[0]), date, Id::new(&rec[2])));
    }
    Ok(out)
}

/// Replays the held-out rows' conditions (or those of `conditions`) through
/// a trained generator and decodes each output to an in-stock sku.
pub fn gan_generate(ctx: &Context, cells: &[CellKey], conditions: Option<&Path>) -> Result<()> {
    for cell in cells {
        let mut m = ManifestBuilder::start(&format!("gan generate {}", cell_flags(cell)), &ctx.run, &ctx.config);
        m.seed("gan", ctx.config.gan.seed);
        m.detail("stock_mode", cell.mode);
        let model_path = ctx.run.gan(cell).join("model.ganm");
        require(&model_path, &format!("gan train {}", cell_flags(cell)))?;
        m.input(&model_path)?;
        let model = gan::load_model(&model_path)?;
        let products = load_table(&ctx.run.products(cell.product), &format!("embed products --method {}", cell.product), &mut m)?;
        let fdir = ctx.run.features(cell.consumer, cell.product);
        let scaler = load_scaler(&fdir.join("scaler.json"), "features build", &mut m)?;
        let layout = model.arch.layout;

        let (cond, sources, keys, out_dir) = match conditions {
            None => {
                let (data, ids, keys) = training_data(ctx, cell, "items_eval.emb", &mut m)?;
                (data.conditions, ids, keys, ctx.run.generated(cell))
            }
            Some(path) => {
                m.input(path)?;
                let rows = read_condition_file(path)?;
                let stock = load_table(&ctx.run.stock(cell.product, cell.mode), "features build", &mut m)?;
                let pscaler = scaler.slice(layout.product());
                let mut prod = Array2::zeros((rows.len(), layout.product_dim));
                for (i, (_, _, sku)) in rows.iter().enumerate() {
                    let raw = products
                        .row_f64(sku)
                        .ok_or_else(|| PipelineError::Validation(format!("condition sku {sku} has no embedding")))?;
                    prod.row_mut(i).assign(&ndarray::Array1::from(pscaler.apply(&raw)?));
                }
                let keys: Vec<(Id, NaiveDate)> = rows.iter().map(|(s, d, _)| (s.clone(), *d)).collect();
                let st = stock_rows(&stock, &keys)?;
                let cond = concatenate(Axis(1), &[prod.view(), st.view()]).expect("same rows");
                let sources = rows.iter().map(|(s, d, k)| Id::new(format!("{s}:{d}:{k}"))).collect();
                (cond, sources, keys, ctx.run.generated(cell).join("conditioned"))
            }
        };
        if cond.nrows() == 0 {
            return Err(PipelineError::Validation("no conditions to generate from".into()));
        }
        let fake = gan::generate(&model, &cond, ctx.config.gan.seed)?;

        let stocks = load_stocks(ctx, &mut m)?;
        let snaps = index_snapshots(&stocks);
        let decoder = SkuDecoder::new(&products, &scaler)?;
        let mut masks: HashMap<&(Id, NaiveDate), BTreeSet<Id>> = HashMap::new();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["source", "store_id", "date", "sku_id", "cosine", "weekday", "day", "month", "unit_price"])
            .map_err(runtime)?;
        for (i, key) in keys.iter().enumerate() {
            if !masks.contains_key(key) {
                let snap = snaps.get(key).ok_or_else(|| {
                    PipelineError::Validation(format!("no stock snapshot for store {} on {}", key.0, key.1))
                })?;
                masks.insert(key, restrict_to_table(snap, &products).in_stock().map(|(id, _)| id.clone()).collect());
            }
            let row = fake.row(i).to_vec();
            let (sku, cos) = decoder.decode(&row, &masks[key])?;
            let f = decode_fields(&row, &scaler, &layout)?;
            w.write_record([
                sources[i].to_string(),
                key.0.to_string(),
                key.1.to_string(),
                sku.to_string(),
                format!("{cos:.6}"),
                f.weekday.to_string(),
                f.day.to_string(),
                f.month.to_string(),
                format!("{:.4}", f.price),
            ])
            .map_err(runtime)?;
        }
        let decoded = w.into_inner().map_err(runtime)?;
        let ids = (0..fake.nrows()).map(|i| Id::new(format!("gen{i}:{}", sources[i]))).collect();
        let items = EmbeddingTable::from_f64(ids, &fake)?;
        save_table(&items, &out_dir.join("items.emb"))?;
        write_atomic(&out_dir.join("decoded.csv"), &decoded)?;
        m.output(&out_dir.join("items.emb"))?;
        m.output(&out_dir.join("decoded.csv"))?;
        m.detail("rows", fake.nrows());
        let slug = format!("gan-generate-{}_{}_{}{}", cell.consumer, cell.product, cell.mode, if conditions.is_some() { "-conditioned" } else { "" });
        m.finish(&ctx.run.manifest(&slug))?;
        ctx.say(format!("generated ({}): {} items -> {}", cell_flags(cell), fake.nrows(), out_dir.display()));
    }
    Ok(())
}

/// Metrics of held-out real rows against generated rows. With `explicit`,
/// every listed cell must have been generated; otherwise cells without
/// output are skipped.
pub fn eval_run(ctx: &Context, cells: &[CellKey], explicit: bool) -> Result<()> {
    let mut m = ManifestBuilder::start("eval run", &ctx.run, &ctx.config);
    let mut rows = Vec::new();
    let mut real_cache: HashMap<(ConsumerMethod, ProductMethod), Array2<f64>> = HashMap::new();
    for cell in cells {
        let gen_path = ctx.run.generated(cell).join("items.emb");
        if !explicit && !gen_path.exists() {
            continue;
        }
        let fake = as_f64(&load_table(&gen_path, &format!("gan generate {}", cell_flags(cell)), &mut m)?);
        let pair = (cell.consumer, cell.product);
        if !real_cache.contains_key(&pair) {
            let p = ctx.run.features(cell.consumer, cell.product).join("items_eval.emb");
            real_cache.insert(pair, as_f64(&load_table(&p, "features build", &mut m)?));
        }
        let real = &real_cache[&pair];
        for &seed in &ctx.config.eval.seeds.0 {
            let mt = evaluate(real, &fake, ctx.config.eval.bins, seed)?;
            rows.push(MetricRow {
                key: *cell,
                emd: mt.emd,
                jsd: mt.jsd,
                acc: mt.acc,
                seed,
                n_real: real.nrows(),
                n_fake: fake.nrows(),
            });
        }
        ctx.say(format!("evaluated {}", cell_flags(cell)));
    }
    if rows.is_empty() {
        return Err(PipelineError::Validation("no generated items to evaluate; run `stockgan gan generate` first".into()));
    }
    let report = build_report(rows, ctx.config.eval.bins)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    let out = ctx.run.eval("metrics.csv");
    write_atomic(&out, &buf)?;
    m.output(&out)?;
    m.detail("rows", report.rows().len());
    m.finish(&ctx.run.manifest("eval-run"))?;
    ctx.say(report.render_table().trim_end());
    Ok(())
}

pub fn eval_report(ctx: &Context) -> Result<MetricReport> {
    let mut m = ManifestBuilder::start("eval report", &ctx.run, &ctx.config);
    let p = ctx.run.eval("metrics.csv");
    require(&p, "eval run")?;
    m.input(&p)?;
    let report = MetricReport::read_csv(std::fs::File::open(&p)?, ctx.config.eval.bins)?;
    let text = report.render_table();
    let out = ctx.run.eval("report.txt");
    write_atomic(&out, text.as_bytes())?;
    m.output(&out)?;
    m.finish(&ctx.run.manifest("eval-report"))?;
    ctx.say(text.trim_end());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_selection() {
        assert_eq!(select_cells(None, None, None).len(), 12);
        assert_eq!(select_cells(Some(ConsumerMethod::Rnn), None, None).len(), 6);
        let one = select_cells(Some(ConsumerMethod::Cleora), Some(ProductMethod::W2v), Some(StockMode::Weighted));
        assert_eq!(one, [CellKey { consumer: ConsumerMethod::Cleora, product: ProductMethod::W2v, mode: StockMode::Weighted }]);
        assert_eq!(select_pairs(None, Some(ProductMethod::Cleora)).len(), 2);
    }

    #[test]
    fn row_keys_follow_transactions() {
        let line = TransactionLine {
            transaction_id: Id::new("t1"),
            customer_id: Id::new("c1"),
            store_id: Id::new("s1"),
            date: NaiveDate::from_ymd_opt(2023, 1, 2).unwrap(),
            sku_id: Id::new("k"),
            quantity: 1,
            unit_price: 1.0,
        };
        let tx = transaction_keys(&[line]);
        assert_eq!(row_keys(&[Id::new("t1:k")], &tx).unwrap()[0].0, Id::new("s1"));
        assert!(row_keys(&[Id::new("t2:k")], &tx).is_err());
    }

    #[test]
    fn missing_upstream_names_command() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = Context { run: RunDir::new(dir.path()), config: PipelineConfig::default(), quiet: true };
        let err = embed_products(&ctx, None).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("stockgan corpus gen"), "{err}");
        let err = eval_report(&ctx).unwrap_err();
        assert!(err.to_string().contains("stockgan eval run"));
    }
}
