use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod settings;

#[derive(Parser)]
#[command(name = "gest", version, about = "Build event graphs from video detections and describe them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct ConfigArgs {
    /// TOML file with [pipeline] and [llm] tables
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set pipeline.vote_min_count=4`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse detection streams and write graph.json, graph.dot and manifest.json
    BuildGraph(commands::BuildGraphArgs),
    /// Render a graph as proto-language and, unless --dry-run, ask the LLM for a description
    Describe(commands::DescribeArgs),
    /// Score candidate descriptions against references with BLEU@4 and ROUGE-L
    Eval(commands::EvalArgs),
    /// Write a graph dump as Graphviz DOT
    ExportDot(commands::ExportDotArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildGraph(a) => commands::build_graph(a),
        Command::Describe(a) => commands::describe(a),
        Command::Eval(a) => commands::eval(a),
        Command::ExportDot(a) => commands::export_dot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<settings::ConfigFailure>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
