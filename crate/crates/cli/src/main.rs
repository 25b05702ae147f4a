use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qnoise_cli::{effective_config, run, write_output, Command, ExperimentConfig, Fault};

#[derive(Parser)]
#[command(name = "qnoise", version, about = "Quantum intensity noise after nonlinear fiber propagation and spectral filtering")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Experiment config (TOML). Defaults to the bundled fission config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Overrides binning.channels.
    #[arg(long, global = true)]
    bins: Option<usize>,

    /// Print the effective config and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Output spectrum versus input peak power.
    Spectrum,
    /// Optimized filter noise versus transmission, with the linear-loss baseline.
    MinNoise,
    /// Noise of randomly drawn block filters.
    RandomFilters,
    /// Pair variance and relative pair noise over output channels.
    PairMap,
    /// Optimized noise versus pump excess noise.
    Immunity,
    /// Invariant and oracle checks; exit status 1 on failure.
    Validate {
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(ValueEnum, Clone, Copy)]
enum FaultArg {
    WirtingerFactor,
    CovarianceAsymmetry,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let base = match &cli.config {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::bundled()),
    };
    let cfg = match base.and_then(|c| effective_config(c, cli.seed, cli.bins)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.print_config {
        print!("{}", cfg.canonical());
        return ExitCode::SUCCESS;
    }
    let (cmd, fault) = match cli.command {
        Cmd::Spectrum => (Command::Spectrum, None),
        Cmd::MinNoise => (Command::MinNoise, None),
        Cmd::RandomFilters => (Command::RandomFilters, None),
        Cmd::PairMap => (Command::PairMap, None),
        Cmd::Immunity => (Command::Immunity, None),
        Cmd::Validate { inject_fault } => (
            Command::Validate,
            inject_fault.map(|f| match f {
                FaultArg::WirtingerFactor => Fault::WirtingerFactor,
                FaultArg::CovarianceAsymmetry => Fault::CovarianceAsymmetry,
            }),
        ),
    };
    let out = match run(cmd, &cfg, fault) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Err(e) = write_output(&out, &cfg, &cli.out) {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    for line in &out.summary {
        println!("{line}");
    }
    println!("wrote {} files to {}", out.artifacts.len() + 2, cli.out.display());
    if out.passed {
        ExitCode::SUCCESS
    } else {
        eprintln!("validation failed");
        ExitCode::from(1)
    }
}
