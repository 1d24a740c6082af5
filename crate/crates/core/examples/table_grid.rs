//! The whole experiment grid through the command layer on a small corpus:
//! every method pair, all three stock modes, then the rendered table.
//!
//! `cargo run --release --example table_grid [run_dir]`

use stockgan::pipeline::{self, Context, PipelineConfig, RunDir};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("stockgan_grid"));
    let config = PipelineConfig::parse(
        "corpus.n_stores = 10
         corpus.n_customers = 200
         corpus.n_skus = 100
         corpus.n_categories = 10
         corpus.n_days = 28
         embed.product_dim = 16
         embed.customer_dim = 8
         gan.generator_hidden = 32,16
         gan.critic_hidden = 16,8
         gan.epochs = 5
         eval.seeds = 0,1",
    )?;
    let mut ctx = Context::new(RunDir::new(&dir), config);
    ctx.quiet = true;

    pipeline::corpus_gen(&ctx)?;
    pipeline::corpus_validate(&ctx)?;
    pipeline::embed_products(&ctx, None)?;
    pipeline::embed_customers(&ctx, None, None)?;
    pipeline::features_build(&ctx, None, None)?;
    let cells = pipeline::select_cells(None, None, None);
    pipeline::gan_train(&ctx, &cells)?;
    pipeline::gan_generate(&ctx, &cells, None)?;
    pipeline::eval_run(&ctx, &cells, false)?;
    let report = pipeline::eval_report(&ctx)?;
    println!("{}", report.render_table());
    println!("artifacts under {}", dir.display());
    Ok(())
}
