use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use torus_deform::config::{validate, ExperimentConfig};
use torus_deform::{presets, runner, Error};

#[derive(Parser)]
#[command(version, about = "Build and check volume-preserving deformations of Anosov maps on T^3")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config without running experiments.
    Validate(Source),
    /// Run the enabled stages and write reports.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: runs/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated stages to run, e.g. `construct,verify`.
        #[arg(long)]
        stages: Option<String>,
    },
    /// Shipped configurations.
    #[command(subcommand)]
    Preset(PresetCommand),
}

#[derive(Subcommand)]
enum PresetCommand {
    List,
    Show { name: String },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use a shipped preset instead of a file.
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> torus_deform::Result<ExperimentConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path),
            (None, Some(name)) => presets::get(name),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if matches!(e, Error::Config { .. }) { 2 } else { 1 })
}

/// A config that cannot be read is a config error, whatever the cause.
fn config_error(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match cli.command {
        Command::Preset(PresetCommand::List) => {
            for name in presets::names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Preset(PresetCommand::Show { name }) => match presets::source(&name) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Validate(source) => {
            let cfg = match source.load() {
                Ok(c) => c,
                Err(e) => return config_error(&e),
            };
            let diagnostics = validate(&cfg);
            if diagnostics.is_empty() {
                println!("{}: ok", cfg.name);
                ExitCode::SUCCESS
            } else {
                for d in &diagnostics {
                    println!("{d}");
                }
                ExitCode::from(2)
            }
        }
        Command::Run {
            source,
            seed,
            out,
            stages,
        } => {
            let mut cfg = match source.load() {
                Ok(c) => c,
                Err(e) => return config_error(&e),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(list) = &stages {
                if let Err(e) = cfg.select_stages(list) {
                    return fail(&e);
                }
            }
            let out = out.unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
            match runner::run(&cfg, &out) {
                Ok(m) => {
                    for s in &m.stages {
                        println!("{:<11} {:?} {:.1}s", s.name, s.status, s.wall_seconds);
                        if let Some(e) = &s.error {
                            println!("  error: {e}");
                        }
                        for c in &s.checks {
                            println!("  {:<34} {:?} worst={:.3e}", c.check, c.verdict, c.worst);
                        }
                    }
                    println!(
                        "{} passed, {} failed, {} inconclusive; outputs in {}",
                        m.summary.passed,
                        m.summary.failed,
                        m.summary.inconclusive,
                        out.display()
                    );
                    ExitCode::from(m.exit_code() as u8)
                }
                Err(e) => fail(&e),
            }
        }
    }
}
