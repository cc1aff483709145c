use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use healthgat::pipeline::{describe_artifacts, emit_figure_data, run_pipeline, PipelineConfig, Stage};

#[derive(Parser)]
#[command(name = "healthgat", version, about = "Medical-event embeddings with graph attention refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Resume at this stage, reusing earlier artifacts.
        #[arg(long, default_value = "ingest")]
        from: String,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project an embedding file to 2-D coordinates.
    Figure {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize an artifact directory.
    Describe { dir: PathBuf },
}

fn run(config: PathBuf, from: String, out: Option<PathBuf>) -> ExitCode {
    let setup = PipelineConfig::load(&config).and_then(|mut cfg| {
        let stage: Stage = from.parse()?;
        if let Some(dir) = out {
            cfg.output_dir = dir;
        }
        Ok((cfg, stage))
    });
    let (cfg, stage) = match setup {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_pipeline(&cfg, stage) {
        Ok(_) => {
            println!("wrote {}", cfg.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, from, out } => run(config, from, out),
        Command::Figure { embeddings, out } => match emit_figure_data(&embeddings, &out) {
            Ok(n) => {
                println!("wrote {n} rows to {}", out.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Describe { dir } => match describe_artifacts(&dir) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
