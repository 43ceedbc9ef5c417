//! `coldstart`: generate, analyse, randomize and run promotion experiments
//! on bipartite user-item networks.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use coldstart_core::promotion::{Engine, Strategy};

#[derive(Parser, Debug)]
#[command(name = "coldstart", version, about = "Cold-start item promotion experiments on bipartite networks")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Directory for all outputs, created if missing [default: .]
    #[arg(long)]
    pub output_dir: Option<PathBuf>,

    /// Worker threads; 0 uses every core [default: 0]
    #[arg(long)]
    pub threads: Option<usize>,

    /// Plain-text `key = value` file supplying defaults for any option.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Input {
    /// Edge list, one `user item` pair per line.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Mapping file (`index<TAB>id`) fixing user indices; needs --item-map.
    #[arg(long)]
    pub user_map: Option<PathBuf>,

    /// Mapping file (`index<TAB>id`) fixing item indices; needs --user-map.
    #[arg(long)]
    pub item_map: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Summary statistics, degree distributions and degree-correlation curves.
    Stats(StatsArgs),
    /// Synthetic network with power-law degrees and tuned degree correlations.
    Generate(GenerateArgs),
    /// Degree-preserving randomization by link crossing.
    Reshuffle(ReshuffleArgs),
    /// Top-L recommendation lists.
    Recommend(RecommendArgs),
    /// One promotion experiment: strategy, R and L fixed.
    Promote(PromoteArgs),
    /// Promotion experiments over strategy and R grids.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub common: Common,
    /// Lower cutoff for the power-law fits [default: 1]
    #[arg(long)]
    pub k_min: Option<u32>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of users [default: 10000]
    #[arg(long)]
    pub user_count: Option<usize>,
    /// Number of items [default: 5000]
    #[arg(long)]
    pub item_count: Option<usize>,
    /// [default: 2.5]
    #[arg(long)]
    pub user_exponent: Option<f64>,
    /// [default: 2.2]
    #[arg(long)]
    pub item_exponent: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub user_k_min: Option<u32>,
    /// [default: 1000]
    #[arg(long)]
    pub user_k_max: Option<u32>,
    /// [default: 1]
    #[arg(long)]
    pub item_k_min: Option<u32>,
    /// [default: 1000]
    #[arg(long)]
    pub item_k_max: Option<u32>,
    /// Degree-correlation target: negative, positive or none [default: negative]
    #[arg(long)]
    pub target: Option<String>,
    /// Tuning swap proposals per link [default: 10]
    #[arg(long)]
    pub tuning_budget: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ReshuffleArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Swap proposals [default: three per link]
    #[arg(long)]
    pub attempts: Option<u64>,
}

#[derive(Args, Debug)]
pub struct RecommendArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub common: Common,
    /// List length [default: 6]
    #[arg(long = "L")]
    pub list_length: Option<usize>,
    /// Keep only the k strongest similarities per item (icf only).
    #[arg(long)]
    pub top_k: Option<usize>,
    /// icf or ucf [default: icf]
    #[arg(long)]
    pub engine: Option<Engine>,
    /// Comma-separated user ids [default: every user]
    #[arg(long, value_delimiter = ',')]
    pub users: Option<Vec<String>>,
}

#[derive(Args, Debug)]
pub struct PromoteArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: Option<u64>,
    /// MaxD, MinD, PA, RAN or a numeric exponent
    #[arg(long, allow_hyphen_values = true)]
    pub strategy: Option<Strategy>,
    /// Number of users linked to the new item.
    #[arg(long = "R")]
    pub links: Option<usize>,
    /// List length [default: 6]
    #[arg(long = "L")]
    pub list_length: Option<usize>,
    /// [default: 50]
    #[arg(long)]
    pub realizations: Option<usize>,
    /// icf or ucf [default: icf]
    #[arg(long)]
    pub engine: Option<Engine>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated named strategies or exponents.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub strategies: Option<Vec<Strategy>>,
    /// Comma-separated exponents, each run as a weighted strategy.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub tau_grid: Option<Vec<f64>>,
    /// Use the default exponent grid (-4 to 4 in steps of 0.5).
    #[arg(long, conflicts_with = "tau_grid")]
    pub default_tau_grid: bool,
    /// Comma-separated R values [default: log-spaced 1..1000, capped at n]
    #[arg(long = "R-grid", value_delimiter = ',')]
    pub links_grid: Option<Vec<usize>>,
    /// List length [default: 6]
    #[arg(long = "L")]
    pub list_length: Option<usize>,
    /// [default: 50]
    #[arg(long)]
    pub realizations: Option<usize>,
    /// icf or ucf [default: icf]
    #[arg(long)]
    pub engine: Option<Engine>,
}

/// A flag combination that is individually valid but not usable together,
/// or a required option that neither the flags nor the config supplied.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let name = match &cli.command {
        Command::Stats(_) => "stats",
        Command::Generate(_) => "generate",
        Command::Reshuffle(_) => "reshuffle",
        Command::Recommend(_) => "recommend",
        Command::Promote(_) => "promote",
        Command::Sweep(_) => "sweep",
    };
    let result = match cli.command {
        Command::Stats(a) => commands::stats(a),
        Command::Generate(a) => commands::generate(a),
        Command::Reshuffle(a) => commands::reshuffle(a),
        Command::Recommend(a) => commands::recommend(a),
        Command::Promote(a) => commands::promote(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(usage) = e.downcast_ref::<Usage>() {
                let mut cmd = Cli::command();
                cmd.build();
                let sub = cmd.find_subcommand_mut(name).expect("known subcommand");
                eprintln!("error: {usage}\n\n{}", sub.render_usage());
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        }
    }
}
