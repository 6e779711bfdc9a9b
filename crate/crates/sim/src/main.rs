use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sisa_core::microsim::Fault;
use sisa_core::perfmodel::ColdStart;
use sisa_core::GemmShape;
use sisa_sim::config::{Arch, Config};
use sisa_sim::error::{Error, Result};
use sisa_sim::models::resolve_model;
use sisa_sim::report::{parse_gemm, simulate_report};
use sisa_sim::sweep::{parse_m_range, sweep, to_csv, Workload};
use sisa_sim::validate::{run_validation, ValidateOptions};

/// Cycle and energy models for a slab-partitioned systolic array.
#[derive(Parser)]
#[command(name = "sisa", version)]
struct Cli {
    /// Architecture config (TOML). Defaults to $SISA_CONFIG_ROOT/default.toml,
    /// then the built-in default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Disable slab power gating.
    #[arg(long, global = true)]
    no_power_gating: bool,
    /// Let a tile's drain overlap the next tile's fill on the same unit.
    #[arg(long, global = true)]
    drain_overlap: bool,
    /// Expose the whole first round's load before compute starts.
    #[arg(long, global = true)]
    full_cold_start: bool,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one GEMM on one architecture and print a JSON report.
    Simulate {
        #[arg(long, value_parser = parse_gemm)]
        gemm: GemmShape,
        #[arg(long, value_enum, default_value = "sisa")]
        arch: Arch,
    },
    /// Sweep m over a model (or a fixed N×K GEMM) on several architectures.
    Sweep {
        #[command(flatten)]
        target: SweepTarget,
        /// `a..b` (inclusive) or a comma list.
        #[arg(long, default_value = "1..150", value_parser = parse_m_values)]
        m: MValues,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "sisa,tpu,redas")]
        arch: Vec<Arch>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Compare architectures on one GEMM, or on a model at one m.
    Compare {
        #[arg(long, value_parser = parse_gemm, conflicts_with_all = ["model", "m"])]
        gemm: Option<GemmShape>,
        #[arg(long, requires = "m")]
        model: Option<String>,
        #[arg(long)]
        m: Option<u64>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "sisa,tpu,redas")]
        arch: Vec<Arch>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Check the cycle formula against the PE-level simulator and the
    /// scheduler's coverage properties.
    Validate {
        /// Random GEMM shapes for the coverage check.
        #[arg(long, default_value_t = 1000)]
        shapes: usize,
        /// Add one drain cycle in the PE-level simulator (self-test).
        #[arg(long, hide = true)]
        inject_drain_fault: bool,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SweepTarget {
    /// Bundled model name or descriptor path.
    #[arg(long)]
    model: Option<String>,
    /// Fixed `NxK`; m varies.
    #[arg(long)]
    gemm_nk: Option<String>,
}

#[derive(Clone)]
struct MValues(Vec<u64>);

fn parse_m_values(s: &str) -> std::result::Result<MValues, String> {
    parse_m_range(s).map(MValues)
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io {
            path: p.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn parse_nk(s: &str) -> Result<(u64, u64)> {
    let shape = parse_gemm(&format!("1x{s}")).map_err(|e| Error::config("gemm-nk", e))?;
    Ok((shape.n, shape.k))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = Config::resolve(cli.config.as_deref())?;
    if cli.no_power_gating {
        cfg.plan.power_gating = false;
    }
    if cli.drain_overlap {
        cfg.perf.drain_overlap = true;
    }
    if cli.full_cold_start {
        cfg.perf.cold_start = ColdStart::FullTile;
    }
    match cli.cmd {
        Command::Simulate { gemm, arch } => emit(&cli.out, &json(&simulate_report(&cfg, arch, gemm)?)),
        Command::Sweep {
            target,
            m,
            arch,
            format,
        } => {
            let workload = match (target.model, target.gemm_nk) {
                (Some(name), _) => Workload::Model(resolve_model(&name)?),
                (None, Some(nk)) => {
                    let (n, k) = parse_nk(&nk)?;
                    Workload::Gemm { n, k }
                }
                (None, None) => unreachable!("clap enforces the group"),
            };
            let rows = sweep(&cfg, &workload, &m.0, &arch)?;
            emit(
                &cli.out,
                &match format {
                    Format::Csv => to_csv(&rows),
                    Format::Json => json(&rows),
                },
            )
        }
        Command::Compare {
            gemm,
            model,
            m,
            arch,
            format,
        } => {
            let (workload, m) = match (gemm, model, m) {
                (Some(g), _, _) => (Workload::Gemm { n: g.n, k: g.k }, g.m),
                (None, Some(name), Some(m)) => (Workload::Model(resolve_model(&name)?), m),
                _ => return Err(Error::config("compare", "give --gemm, or --model with --m")),
            };
            if m == 0 {
                return Err(Error::config("m", "must be positive"));
            }
            let rows = sweep(&cfg, &workload, &[m], &arch)?;
            emit(
                &cli.out,
                &match format {
                    Format::Csv => to_csv(&rows),
                    Format::Json => json(&rows),
                },
            )
        }
        Command::Validate {
            shapes,
            inject_drain_fault,
        } => {
            let report = run_validation(ValidateOptions {
                fault: if inject_drain_fault {
                    Fault::ExtraDrainCycle
                } else {
                    Fault::None
                },
                schedule_shapes: shapes,
                ..ValidateOptions::default()
            });
            emit(&cli.out, &json(&report))?;
            match report.counterexample {
                None => Ok(()),
                Some(c) => Err(Error::Validation(c)),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = Error::config("arguments", e.kind());
            eprintln!("{e}");
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
