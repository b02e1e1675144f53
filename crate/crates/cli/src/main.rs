use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dualnet::dataset::Task;
use dualnet_cli::pipeline::{self, DEFAULT_MNIST_BASE};
use dualnet_cli::{exit, CliError, CliResult, FileConfig, Overrides, Profile, Settings};

/// Dual-network attention experiments on multi-digit MNIST.
///
/// Exit codes: 0 success, 1 other failure, 2 configuration error, 3 data
/// error, 4 threshold check failed, 5 stale or mixed provenance.
#[derive(Debug, Parser)]
#[command(name = "dualnet", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Task(s) to run; repeat or comma-separate. Default: all three.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_task)]
    task: Option<Vec<Task>>,
    #[arg(long, global = true)]
    runs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Divide dataset sizes by this factor.
    #[arg(long, global = true)]
    scale: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    /// Directory holding the MNIST IDX files.
    #[arg(long, global = true)]
    mnist_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compose the multi-digit datasets.
    GenData,
    /// Pretrain and freeze the function networks.
    Pretrain,
    /// Train context networks through the frozen function network.
    Train,
    /// Re-evaluate stored runs on the test split.
    Eval,
    /// Render gate montages and the channel separation statistic.
    Visualize {
        #[arg(long, default_value_t = 0)]
        run: usize,
    },
    /// Aggregate runs into the results table.
    Report {
        /// Exit with code 4 when the profile's accuracy bands are missed.
        #[arg(long)]
        check: bool,
    },
    /// Download MNIST with curl.
    Fetch {
        #[arg(long)]
        allow_network: bool,
        #[arg(long, default_value = DEFAULT_MNIST_BASE)]
        base_url: String,
    },
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: dualnet::Error| e.to_string())
}

fn settings(common: Common) -> CliResult<Settings> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    Settings::resolve(
        file,
        Overrides {
            profile: common.profile,
            mnist_dir: common.mnist_dir,
            out: common.out,
            tasks: common.task,
            runs: common.runs,
            seed: common.seed,
            scale: common.scale,
        },
    )
}

fn run(cli: Cli) -> CliResult<()> {
    let s = settings(cli.common)?;
    match cli.command {
        Command::GenData => pipeline::gen_data(&s).map(drop),
        Command::Pretrain => pipeline::pretrain(&s).map(drop),
        Command::Train => pipeline::train(&s).map(drop),
        Command::Eval => pipeline::eval(&s).map(drop),
        Command::Visualize { run } => {
            for (path, digest) in pipeline::visualize(&s, run)? {
                println!("{}  {}", &digest[..16], path.display());
            }
            Ok(())
        }
        Command::Report { check } => pipeline::report(&s, check).map(drop),
        Command::Fetch {
            allow_network,
            base_url,
        } => pipeline::fetch(&s, allow_network, &base_url),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(code(&e))
        }
    }
}

fn code(e: &CliError) -> u8 {
    e.exit_code() as u8
}
