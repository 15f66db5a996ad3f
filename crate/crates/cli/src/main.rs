//! Experiment harness for the spike-deconvolution library: computes
//! certificates, solution paths, compressed-sensing transitions, and the
//! asymptotic probes, writing CSV + SVG + JSON artifacts.

mod artifact;
mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CmdResult;
use config::*;

#[derive(Parser)]
#[command(
    name = "certiscope",
    about = "Dual certificates and solution paths for sparse spike deconvolution on thin grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file (command-specific schema; unknown fields rejected).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV/SVG/JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed override for the Monte-Carlo commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Built-in experiment size when no config file is given.
    #[arg(long, global = true, default_value = "fast")]
    profile: Profile,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Profile {
    Fast,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Dense traces of the vanishing-derivatives and third-derivative
    /// precertificates with their non-degeneracy verdicts.
    Certificates,
    /// Exact LASSO and C-BP solution paths with extended-support predictions.
    Path,
    /// Compressed-sensing experiments on Gaussian ensembles.
    Cs {
        #[command(subcommand)]
        which: CsCommand,
    },
    /// λ₀ scaling exponents over a family of grids.
    Scaling,
    /// Optimal objective values over nested grids.
    Gamma,
    /// Leading-order inverse-Gram expansion residuals.
    GramCheck,
}

#[derive(Subcommand)]
enum CsCommand {
    /// Identifiability and Fuchs-validity probability curves.
    Transition,
    /// Extended-support size histograms.
    Histogram,
}

fn init_threads() {
    if let Ok(v) = std::env::var("CERTISCOPE_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();

    let result: CmdResult = match &cli.command {
        Command::Certificates => {
            match load_or_default(cli.config.as_deref(), CertificatesConfig::default()) {
                Ok(cfg) => commands::cmd_certificates(cfg, &cli.out),
                Err(e) => Err(e),
            }
        }
        Command::Path => match load_or_default(cli.config.as_deref(), PathConfig::default()) {
            Ok(cfg) => commands::cmd_path(cfg, &cli.out),
            Err(e) => Err(e),
        },
        Command::Cs { which } => match which {
            CsCommand::Transition => {
                let default = match cli.profile {
                    Profile::Fast => CsTransitionConfig::fast(),
                    Profile::Full => CsTransitionConfig::full(),
                };
                match load_or_default(cli.config.as_deref(), default) {
                    Ok(mut cfg) => {
                        if let Some(seed) = cli.seed {
                            cfg.master_seed = seed;
                        }
                        commands::cmd_cs_transition(cfg, &cli.out)
                    }
                    Err(e) => Err(e),
                }
            }
            CsCommand::Histogram => {
                let default = match cli.profile {
                    Profile::Fast => CsHistogramConfig::fast(),
                    Profile::Full => CsHistogramConfig::full(),
                };
                match load_or_default(cli.config.as_deref(), default) {
                    Ok(mut cfg) => {
                        if let Some(seed) = cli.seed {
                            cfg.master_seed = seed;
                        }
                        commands::cmd_cs_histogram(cfg, &cli.out)
                    }
                    Err(e) => Err(e),
                }
            }
        },
        Command::Scaling => match load_or_default(cli.config.as_deref(), ScalingConfig::default())
        {
            Ok(cfg) => commands::cmd_scaling(cfg, &cli.out),
            Err(e) => Err(e),
        },
        Command::Gamma => match load_or_default(cli.config.as_deref(), GammaConfig::default()) {
            Ok(cfg) => commands::cmd_gamma(cfg, &cli.out),
            Err(e) => Err(e),
        },
        Command::GramCheck => {
            match load_or_default(cli.config.as_deref(), GramCheckConfig::default()) {
                Ok(cfg) => commands::cmd_gram_check(cfg, &cli.out),
                Err(e) => Err(e),
            }
        }
    };

    match result {
        Ok((artifact, checks)) => {
            println!("csv:     {}", artifact.csv_path.display());
            println!("svg:     {}", artifact.svg_path.display());
            println!("summary: {}", artifact.json_summary_path.display());
            println!("sha256:  {}", artifact.csv_sha256);
            let mut all_passed = true;
            for c in &checks {
                let tag = if c.passed { "pass" } else { "FAIL" };
                println!("[{tag}] {}{}", c.name, if c.detail.is_empty() {
                    String::new()
                } else {
                    format!(" — {}", c.detail)
                });
                all_passed &= c.passed;
            }
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(msg) => {
            let payload = serde_json::json!({ "error": msg });
            eprintln!("{payload}");
            let _ = std::fs::create_dir_all(&cli.out)
                .and_then(|_| std::fs::write(cli.out.join("error.json"), payload.to_string()));
            ExitCode::from(2)
        }
    }
}
