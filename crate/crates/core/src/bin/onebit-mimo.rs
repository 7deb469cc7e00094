use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use onebit_mimo::sim::{
    emit_results, metadata_path, run_fer_sweep_with, wilson_interval, Execution, RunMetadata, SimConfig,
};
use onebit_mimo::{selftest, Error};

#[derive(Debug, Parser)]
#[command(name = "onebit-mimo", version, about = "Coded MU-MIMO link simulation with one-bit ADCs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte-Carlo FER sweep
    Run(Box<RunArgs>),
    /// Run the built-in consistency checks
    Selftest,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Key-value config file; flags below override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of users K
    #[arg(long)]
    k: Option<String>,
    /// Number of receive antennas N_r
    #[arg(long)]
    nr: Option<String>,
    /// Modulation (bpsk, 4qam, 16qam)
    #[arg(long = "mod")]
    modulation: Option<String>,
    /// Channel code, polar:<n>:<rate>[:<design dB>]
    #[arg(long)]
    code: Option<String>,
    /// Detector list: so, scso, oscso, zf, genie (comma separated)
    #[arg(long)]
    detector: Option<String>,
    /// SNR grid in dB, A:B:STEP
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Frames per SNR point
    #[arg(long)]
    frames: Option<String>,
    /// Master seed
    #[arg(long)]
    seed: Option<String>,
    /// Output file
    #[arg(long)]
    out: Option<String>,
    /// Output format (csv or json)
    #[arg(long)]
    format: Option<String>,
    /// Run frames on one thread
    #[arg(long)]
    serial: bool,
}

impl RunArgs {
    fn config(&self) -> Result<SimConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                SimConfig::parse(&text)?
            }
            None => SimConfig::default(),
        };
        let overrides = [
            ("k", &self.k),
            ("nr", &self.nr),
            ("mod", &self.modulation),
            ("code", &self.code),
            ("detector", &self.detector),
            ("snr", &self.snr),
            ("frames", &self.frames),
            ("seed", &self.seed),
            ("out", &self.out),
            ("format", &self.format),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(args: &RunArgs) -> Result<(), Error> {
    let cfg = args.config()?;
    let execution = if args.serial { Execution::Serial } else { Execution::Parallel };
    let result = run_fer_sweep_with(&cfg, execution)?;

    println!("{:>8}  {:>6}  {:>10}  {:>21}  {:>12}", "snr_db", "det", "fer", "95% CI", "mean_scans");
    for p in &result.points {
        let (lo, hi) = wilson_interval(p.user_block_errors, p.frames * cfg.users as u64);
        println!(
            "{:>8.2}  {:>6}  {:>10.3e}  [{:>9.3e}, {:>9.3e}]  {:>12.0}",
            p.snr_db, p.detector, p.fer, lo, hi, p.mean_scans
        );
    }
    if let Some(path) = &cfg.out {
        let meta = RunMetadata::new(&cfg, result.timings)?;
        emit_results(&result.points, path, cfg.format, &meta)?;
        eprintln!("wrote {} and {}", path.display(), metadata_path(path).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors count as config errors (exit code 1).
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Run(args) => match run(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e @ Error::Io(_)) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Selftest => {
            let mut ok = true;
            for check in selftest::run() {
                match check.result {
                    Ok(()) => println!("PASS  {}", check.name),
                    Err(msg) => {
                        ok = false;
                        println!("FAIL  {}: {msg}", check.name);
                    }
                }
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
