use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use entangle_cli::{load_document, presets, run_document, Overrides, RunOptions, EXIT_STEP_CAP};

#[derive(Parser)]
#[command(name = "entsim", version, about = "Entanglement network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file or a preset
    Run {
        /// Path to an experiment JSON file, or a preset name (`presets/<name>`)
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Defaults to results/<experiment name>
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads; all cores by default
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write per-step state of trial 0 as JSON lines
        #[arg(long)]
        trace: bool,
        /// Overwrite existing result files
        #[arg(long)]
        force: bool,
    },
    /// List the preset catalog
    Presets,
    /// Check that an experiment resolves without running it
    Validate { config: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Presets => {
            for name in presets::names() {
                let doc = presets::get(name).expect("listed preset");
                println!("{name:26} {} variants  {}", doc.variants.len(), doc.description);
            }
            return ExitCode::SUCCESS;
        }
        Command::Validate { config } => load_document(&config).and_then(|loaded| {
            let variants = loaded.document.resolve(&loaded.base_dir, Overrides::default())?;
            for v in variants {
                println!("{}: ok ({} trials, {} requests)", v.label, v.config.trials, v.config.queue_length);
            }
            Ok(false)
        }),
        Command::Run {
            config,
            seed,
            trials,
            out_dir,
            jobs,
            trace,
            force,
        } => load_document(&config).and_then(|loaded| {
            let opts = RunOptions {
                out_dir: out_dir
                    .unwrap_or_else(|| PathBuf::from("results").join(&loaded.document.name)),
                jobs,
                trace,
                force,
            };
            let report = run_document(&loaded.document, &loaded.base_dir, Overrides { seed, trials }, &opts)?;
            for v in &report.variants {
                match &v.series {
                    Some(s) => println!(
                        "{}: mean latency over last 20 requests {:.2}{}",
                        v.label,
                        s.tail_mean(20),
                        if v.failed_trials > 0 {
                            format!(" ({} trials hit the step cap)", v.failed_trials)
                        } else {
                            String::new()
                        }
                    ),
                    None => println!("{}: every trial hit the step cap", v.label),
                }
            }
            Ok(report.any_failed())
        }),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_STEP_CAP),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
