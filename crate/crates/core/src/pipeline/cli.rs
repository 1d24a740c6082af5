use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use super::commands::{self, select_cells, Context};
use super::{PipelineConfig, Result, RunDir};
use crate::embed::{ConsumerMethod, ProductMethod};
use crate::features::StockMode;

fn parse<T: FromStr>(s: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "stockgan", about = "Stock-conditioned synthetic transaction pipeline")]
struct Cli {
    /// Run name; artifacts go to $STOCKGAN_RUNS_DIR/<run> (default runs/<run>).
    #[arg(long, global = true, default_value = "default")]
    run: String,
    /// Config file. Defaults to the run's saved config.txt, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Group,
}

#[derive(Subcommand, Debug)]
enum Group {
    #[command(subcommand)]
    Corpus(CorpusCmd),
    #[command(subcommand)]
    Embed(EmbedCmd),
    #[command(subcommand)]
    Features(FeaturesCmd),
    #[command(subcommand)]
    Gan(GanCmd),
    #[command(subcommand)]
    Eval(EvalCmd),
}

#[derive(Subcommand, Debug)]
enum CorpusCmd {
    /// Generate the synthetic corpus.
    Gen,
    /// Check referential integrity and stock feasibility.
    Validate,
}

#[derive(Subcommand, Debug)]
enum EmbedCmd {
    Products {
        #[arg(long, value_parser = parse::<ProductMethod>)]
        method: Option<ProductMethod>,
    },
    Customers {
        #[arg(long, value_parser = parse::<ConsumerMethod>)]
        method: Option<ConsumerMethod>,
        /// Product table the RNN encoder reads.
        #[arg(long, value_parser = parse::<ProductMethod>)]
        product: Option<ProductMethod>,
    },
}

#[derive(Subcommand, Debug)]
enum FeaturesCmd {
    Build {
        #[arg(long, value_parser = parse::<ConsumerMethod>)]
        consumer: Option<ConsumerMethod>,
        #[arg(long, value_parser = parse::<ProductMethod>)]
        product: Option<ProductMethod>,
    },
}

#[derive(Args, Debug)]
struct CellArgs {
    #[arg(long = "stock-mode", value_parser = parse::<StockMode>)]
    stock_mode: Option<StockMode>,
    #[arg(long, value_parser = parse::<ConsumerMethod>)]
    consumer: Option<ConsumerMethod>,
    #[arg(long, value_parser = parse::<ProductMethod>)]
    product: Option<ProductMethod>,
}

impl CellArgs {
    fn any(&self) -> bool {
        self.stock_mode.is_some() || self.consumer.is_some() || self.product.is_some()
    }
}

#[derive(Subcommand, Debug)]
enum GanCmd {
    /// Train every selected cell; omitted flags select all values.
    Train(CellArgs),
    Generate {
        #[command(flatten)]
        cell: CellArgs,
        /// CSV of `store_id,date,sku_id` conditions instead of held-out rows.
        #[arg(long)]
        conditions: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum EvalCmd {
    Run(CellArgs),
    /// Render the stock-mode grid from eval/metrics.csv.
    Report,
}

fn load_config(run: &RunDir, explicit: Option<&PathBuf>) -> Result<PipelineConfig> {
    match explicit {
        Some(p) => PipelineConfig::load(p),
        None if run.config().exists() => PipelineConfig::load(&run.config()),
        None => Ok(PipelineConfig::default()),
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let run = RunDir::named(&cli.run);
    let config = load_config(&run, cli.config.as_ref())?;
    let ctx = Context { run, config, quiet: cli.quiet };
    match cli.command {
        Group::Corpus(CorpusCmd::Gen) => commands::corpus_gen(&ctx),
        Group::Corpus(CorpusCmd::Validate) => commands::corpus_validate(&ctx),
        Group::Embed(EmbedCmd::Products { method }) => commands::embed_products(&ctx, method),
        Group::Embed(EmbedCmd::Customers { method, product }) => commands::embed_customers(&ctx, method, product),
        Group::Features(FeaturesCmd::Build { consumer, product }) => commands::features_build(&ctx, consumer, product),
        Group::Gan(GanCmd::Train(c)) => commands::gan_train(&ctx, &select_cells(c.consumer, c.product, c.stock_mode)),
        Group::Gan(GanCmd::Generate { cell: c, conditions }) => {
            commands::gan_generate(&ctx, &select_cells(c.consumer, c.product, c.stock_mode), conditions.as_deref())
        }
        Group::Eval(EvalCmd::Run(c)) => {
            commands::eval_run(&ctx, &select_cells(c.consumer, c.product, c.stock_mode), c.any())
        }
        Group::Eval(EvalCmd::Report) => commands::eval_report(&ctx).map(|_| ()),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code: 0 ok, 1 validation error, 2 runtime error.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
