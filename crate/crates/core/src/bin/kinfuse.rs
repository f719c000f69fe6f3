use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kinfuse::pipeline::{cmd_build, cmd_evaluate, cmd_index, cmd_inspect, Run};

#[derive(Parser)]
#[command(version, about = "Entity-context prompt datasets and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set retrieval.token_budget=256`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Segment the corpus and write the entity index.
    Index(RunArgs),
    /// Split the dataset and write train/eval prompt files.
    Build(RunArgs),
    /// Score predictions against the eval prompts.
    Evaluate(RunArgs),
    /// Print the postings of one entity.
    Inspect {
        /// Index directory; defaults to `index.path` of `--config`.
        #[arg(long, required_unless_present = "config")]
        index: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        entity: String,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> kinfuse::Result<()> {
    let load = |a: &RunArgs| Run::load(&a.config, &a.overrides);
    match cli.command {
        Command::Index(a) => print_counts(&cmd_index(&load(&a)?)?.counts),
        Command::Build(a) => print_counts(&cmd_build(&load(&a)?)?.counts),
        Command::Evaluate(a) => print!("{}", cmd_evaluate(&load(&a)?)?.0),
        Command::Inspect {
            index,
            config,
            overrides,
            entity,
        } => {
            let dir = match (index, config) {
                (Some(dir), _) => dir,
                (None, Some(c)) => Run::load(&c, &overrides)?.index_dir(),
                (None, None) => unreachable!("clap requires one of them"),
            };
            print!("{}", cmd_inspect(&dir, &entity)?);
        }
    }
    Ok(())
}

fn print_counts(counts: &std::collections::BTreeMap<String, usize>) {
    for (k, v) in counts {
        println!("{k}\t{v}");
    }
}
