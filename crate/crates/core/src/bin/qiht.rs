use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qiht_core::embedding::{consistency_proximity, spe_deviation};
use qiht_core::harness::{export_csv, run_grid, run_method, ExperimentGrid, Instance, Method};
use qiht_core::signal_model::{derive_seed, gen_gaussian_matrix, snr_db};
use qiht_core::{Error, Quantizer};

#[derive(Parser)]
#[command(
    name = "qiht",
    version,
    about = "Sparse recovery from quantized measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the Lloyd-Max quantizer for a standard normal source as JSON.
    DesignQuantizer {
        #[arg(long)]
        bits: u32,
    },
    /// Reconstruct one random problem instance and report the SNR.
    Reconstruct {
        #[arg(long, value_enum)]
        method: CliMethod,
        #[arg(long, default_value_t = 1)]
        bits: u32,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 16)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo check of the sign product embedding or of consistency
    /// proximity.
    EmbedCheck {
        #[arg(long, value_enum)]
        mode: EmbedMode,
        #[arg(long, default_value_t = 1024)]
        m: usize,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Allowed sign disagreements (proximity mode).
        #[arg(long, default_value_t = 0)]
        r: usize,
        /// Number of vector pairs.
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a grid sweep described by a key = value config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMethod {
    Iht,
    Qiht,
    /// QIHT with a 1-bit quantizer.
    Biht,
    Bpdn,
    Ht,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedMode {
    Spe,
    Proximity,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

fn run(command: Command) -> qiht_core::Result<String> {
    let value = match command {
        Command::DesignQuantizer { bits } => Quantizer::optimal(bits)?.to_json(),
        Command::Reconstruct {
            method,
            bits,
            m,
            n,
            k,
            seed,
        } => {
            let (name, method) = match method {
                CliMethod::Iht => ("iht", Method::Iht),
                CliMethod::Qiht => ("qiht", Method::Qiht),
                CliMethod::Biht => ("biht", Method::Qiht),
                CliMethod::Bpdn => ("bpdn", Method::Bpdn),
                CliMethod::Ht => ("ht", Method::Ht),
            };
            if name == "biht" && bits != 1 {
                return Err(Error::InvalidArgument(format!(
                    "biht needs --bits 1, got {bits}"
                )));
            }
            let quantizer = Quantizer::optimal(bits)?;
            let instance = Instance::new(n, k, m, &quantizer, seed)?;
            let start = Instant::now();
            let (estimate, iterations, terminated_by) =
                run_method(&instance, &quantizer, method, k)?;
            let wall_time = start.elapsed().as_secs_f64();
            json!({
                "method": name,
                "bits": bits,
                "m": m,
                "n": n,
                "k": k,
                "seed": seed,
                "snr_db": number(snr_db(&instance.x0, &estimate)?),
                "iterations": iterations,
                "terminated_by": terminated_by,
                "wall_time_s": wall_time,
            })
        }
        Command::EmbedCheck {
            mode,
            m,
            n,
            k,
            r,
            pairs,
            seed,
        } => match mode {
            EmbedMode::Spe => {
                let phi = gen_gaussian_matrix(m, n, derive_seed(&[seed, 0]))?;
                let report = spe_deviation(&phi, k, pairs, derive_seed(&[seed, 1]))?;
                serde_json::to_value(report).expect("report serializes")
            }
            EmbedMode::Proximity => {
                let report = consistency_proximity(seed, m, n, k, r, pairs)?;
                serde_json::to_value(report).expect("report serializes")
            }
        },
        Command::Sweep { config, out } => {
            let grid = ExperimentGrid::from_config_file(&config)?;
            let table = run_grid(&grid)?;
            export_csv(&table, &out)?;
            let flagged = table.rows.iter().filter(|r| r.note.is_some()).count();
            json!({
                "rows": table.rows.len(),
                "aggregates": table.aggregates.len(),
                "failed_rows": flagged,
                "out": out.display().to_string(),
            })
        }
    };
    Ok(serde_json::to_string_pretty(&value).expect("json value serializes"))
}
