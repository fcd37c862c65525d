use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scbg::config::PipelineConfig;
use scbg::pipeline;
use scbg::Result;

/// Courtesy-controllable trajectory generation on synthetic interaction scenes.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Pipeline configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Global seed; every stage derives its own stream from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for all artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Dataset file, overriding `<out>/dataset.json`.
    #[arg(long, global = true, value_name = "PATH")]
    dataset: Option<PathBuf>,
    /// Log progress to standard error (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic train and validation scenarios.
    GenData {
        /// Training scenarios.
        #[arg(long)]
        n: Option<usize>,
        /// Validation scenarios.
        #[arg(long)]
        n_val: Option<usize>,
    },
    /// Train the marginal/conditional predictor.
    TrainPredictor {
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Label every scenario's futures with courtesy values.
    Label {
        /// Augmented futures per scenario.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Train the courtesy-conditioned generator.
    TrainScbg {
        #[arg(long)]
        steps: Option<usize>,
        /// Courtesy loss weight.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Train the courtesy range predictor.
    TrainRange {
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Evaluate the generator on the validation split.
    Eval {
        /// Also train and compare the ablation variants.
        #[arg(long)]
        ablation: bool,
    },
    /// Draw generated trajectories at several courtesy quantiles as SVG.
    Render {
        /// Scenario id (repeatable); defaults to the first validation scenes.
        #[arg(long = "id")]
        ids: Vec<String>,
        /// Comma-separated quantiles in [0, 1].
        #[arg(long, value_delimiter = ',')]
        quantiles: Vec<f64>,
    },
    /// Run every stage in order.
    Pipeline {
        #[arg(long)]
        ablation: bool,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut c = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = common.seed {
        c.seed = s;
    }
    if let Some(o) = &common.out {
        c.paths.out_dir = o.clone();
    }
    if let Some(d) = &common.dataset {
        c.paths.dataset = Some(d.clone());
    }
    Ok(c)
}

fn run(cli: Cli) -> Result<()> {
    let mut c = load_config(&cli.common)?;
    // A closed pipe (for example `| head`) is not an error of the run.
    let print = |s: &str| {
        let _ = writeln!(std::io::stdout(), "{}", s.trim_end());
    };
    match cli.command {
        Command::GenData { n, n_val } => {
            c.data.train = n.unwrap_or(c.data.train);
            c.data.validation = n_val.unwrap_or(c.data.validation);
            print(&pipeline::gen_data(&c)?);
        }
        Command::TrainPredictor { steps } => {
            c.predictor.steps = steps.unwrap_or(c.predictor.steps);
            print(&pipeline::train_predictor_stage(&c)?);
        }
        Command::Label { m } => {
            c.labels.m = m.unwrap_or(c.labels.m);
            print(&pipeline::label(&c)?);
        }
        Command::TrainScbg { steps, beta } => {
            c.scbg.steps = steps.unwrap_or(c.scbg.steps);
            c.scbg.beta = beta.unwrap_or(c.scbg.beta);
            print(&pipeline::train_scbg_stage(&c)?);
        }
        Command::TrainRange { steps } => {
            c.range.steps = steps.unwrap_or(c.range.steps);
            print(&pipeline::train_range_stage(&c)?);
        }
        Command::Eval { ablation } => print(&pipeline::eval(&c, ablation)?),
        Command::Render { ids, quantiles } => print(&pipeline::render(&c, &ids, &quantiles)?),
        Command::Pipeline { ablation } => pipeline::pipeline(&c, ablation, print)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
