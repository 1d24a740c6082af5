//! Trains a small stock-conditioned WGAN-GP in memory, resumes it from a
//! checkpoint and scores generated items against held-out ones.

use stockgan::corpus::{generate_synthetic_corpus, group_baskets, split_train_eval, CorpusConfig, TransactionLine};
use stockgan::embed::{build_hypergraph, train_cleora, CleoraConfig, EmbeddingTable};
use stockgan::eval::evaluate;
use stockgan::features::{build_item_dataset, build_stock_dataset, fit_scaler, ScalerParams, StockMode};
use stockgan::gan::{self, GanArchitecture, TrainConfig, TrainOptions, TrainingData};

fn dataset(
    lines: &[TransactionLine],
    tables: &(EmbeddingTable, EmbeddingTable),
    stocks: &[stockgan::corpus::StockSnapshot],
    scalers: Option<(&ScalerParams, &ScalerParams)>,
) -> Result<(TrainingData, ScalerParams, ScalerParams), Box<dyn std::error::Error>> {
    let items = build_item_dataset(lines, &tables.0, &tables.1)?;
    let stock = build_stock_dataset(&items.stock_keys, stocks, &tables.0, StockMode::Weighted)?;
    let (item_scaler, stock_scaler) = match scalers {
        Some((a, b)) => (a.clone(), b.clone()),
        None => (fit_scaler(&items.items)?, fit_scaler(&stock.matrix)?),
    };
    let cond = stock_scaler.apply_matrix(&stock.aligned(&items.stock_keys)?)?;
    let data = TrainingData::from_items(item_scaler.apply_matrix(&items.items)?, &cond, tables.0.dim())?;
    Ok((data, item_scaler, stock_scaler))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_synthetic_corpus(&CorpusConfig { n_stores: 10, n_days: 28, ..Default::default() })?;
    let tables = train_cleora(
        &build_hypergraph(&group_baskets(&corpus.transactions)),
        &CleoraConfig { product_dim: 8, customer_dim: 4, ..Default::default() },
    )?;
    let (train_lines, eval_lines) = split_train_eval(&corpus.transactions, 0.2, 0)?;
    let (train, item_scaler, stock_scaler) = dataset(&train_lines, &tables, &corpus.stocks, None)?;
    let (eval, _, _) = dataset(&eval_lines, &tables, &corpus.stocks, Some((&item_scaler, &stock_scaler)))?;
    println!("{} train rows, {} eval rows", train.len(), eval.len());

    let mut config = TrainConfig {
        arch: GanArchitecture {
            layout: stockgan::features::ItemLayout::new(8, 4),
            generator_hidden: vec![32, 16],
            critic_hidden: vec![16, 8],
            ..Default::default()
        },
        epochs: 10,
        ..Default::default()
    };
    let dir = std::env::temp_dir().join("stockgan_train_example");
    let opts = TrainOptions {
        checkpoint_dir: Some(dir.clone()),
        checkpoint_every: 5,
        on_epoch: Some(Box::new(|s: &gan::EpochSummary, _: &gan::GanModel| {
            println!(
                "epoch {:>2}: critic {:+.4} gen {:+.4} rec {:.4} gp {:.4}",
                s.epoch, s.critic_loss, s.gen_loss, s.rec_loss, s.gp
            );
        })),
        ..Default::default()
    };
    let (model, log) = gan::train(&train, &config, opts)?;
    println!("{} critic updates per generator update", log.critic_updates / log.generator_updates);

    // Resuming from epoch 5 replays epochs 6..10 exactly.
    let resumed = gan::train(
        &train,
        &config,
        TrainOptions { resume: Some(stockgan::nn::checkpoint::Checkpoint::load(&dir.join("epoch_0005.ganm"))?), ..Default::default() },
    )?
    .0;
    println!("resume reproduces the model: {}", resumed == model);

    let fake = gan::generate(&model, &eval.conditions, 0)?;
    let m = evaluate(&eval.items, &fake, 64, 0)?;
    println!("eval: EMD {:.4}  JSD {:.4}  classifier accuracy {:.3}", m.emd, m.jsd, m.acc);

    config.epochs = 1;
    let untrained = gan::train(&train, &config, TrainOptions::default())?.0;
    let m1 = evaluate(&eval.items, &gan::generate(&untrained, &eval.conditions, 0)?, 64, 0)?;
    println!("after a single epoch: EMD {:.4}  JSD {:.4}", m1.emd, m1.jsd);
    let _ = std::fs::remove_dir_all(dir);
    Ok(())
}
