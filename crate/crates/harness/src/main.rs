use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use assembly_core::{run, Scenario64};
use assembly_harness::output::{read_batch, write_batch, write_run};
use assembly_harness::{report_accuracy, run_batch, HarnessError};

const EXIT_TOOL: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

/// Decentralised multi-hand assembly: simulation runs, batch studies and the live bridge.
///
/// Log verbosity comes from ASSEMBLY_LOG (error, warn, info, debug, trace; default warn).
#[derive(Parser)]
#[command(name = "assembly", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one seed and print a JSON summary.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_steps: Option<u64>,
        /// Gradient step multiplier.
        #[arg(long)]
        ts: Option<f64>,
        /// Also write the trace CSV and event log here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run consecutive seeds in parallel and write a batch directory.
    Batch {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_steps: Option<u64>,
        #[arg(long)]
        ts: Option<f64>,
    },
    /// Summarise a batch directory: convergence and placement accuracy.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Serve one live simulation over WebSocket.
    Serve {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Simulation steps per second.
        #[arg(long, default_value_t = 30.0)]
        tick_hz: f64,
        /// Listen on all interfaces instead of loopback.
        #[arg(long)]
        public: bool,
    },
}

enum Failure {
    Validation(String),
    Tool(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Usage(m) => Failure::Validation(m),
            other => Failure::Tool(other.to_string()),
        }
    }
}

fn load(name: &str, max_steps: Option<u64>, ts: Option<f64>) -> Result<Scenario64, Failure> {
    let mut s = Scenario64::load(name).map_err(|e| Failure::Validation(format!("{name}: {e}")))?;
    if let Some(m) = max_steps {
        s.planner.max_steps = m;
    }
    if let Some(t) = ts {
        s.planner.t_s = t;
    }
    s.validate().map_err(|e| Failure::Validation(e.to_string()))?;
    Ok(s)
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn execute(cmd: Cmd) -> Result<bool, Failure> {
    match cmd {
        Cmd::Run {
            scenario,
            seed,
            max_steps,
            ts,
            out,
        } => {
            let s = load(&scenario, max_steps, ts)?;
            let outcome = run(&s, seed, &s.planner).map_err(|e| Failure::Tool(e.to_string()))?;
            if let Some(dir) = out {
                write_run(&dir, seed, &outcome)?;
            }
            let summary = assembly_harness::RunSummary::of(seed, &outcome);
            print_json(&json!({ "scenario": s.name, "run": summary }));
            Ok(outcome.converged)
        }
        Cmd::Batch {
            scenario,
            runs,
            base_seed,
            out,
            max_steps,
            ts,
        } => {
            let s = load(&scenario, max_steps, ts)?;
            let started = std::time::Instant::now();
            let (report, outcomes) = run_batch(&s, runs, base_seed, &s.planner)?;
            log::info!("batch finished in {:.2?}", started.elapsed());
            write_batch(&out, &s, &report, &outcomes)?;
            print_json(&json!({
                "scenario": report.scenario,
                "runs": report.runs,
                "converged": report.converged,
                "steps_to_convergence": report.steps_to_convergence,
                "final_normalized_loss": report.final_normalized_loss,
                "out": out,
            }));
            Ok(report.all_converged())
        }
        Cmd::Report { input } => {
            let (report, finals) = read_batch(&input)?;
            let worlds: Vec<_> = finals.runs.iter().map(|r| r.components.clone()).collect();
            let acc = report_accuracy(&worlds, &finals.goals);
            println!("scenario {}: {}/{} runs converged", report.scenario, report.converged, report.runs);
            if let Some(s) = report.steps_to_convergence {
                println!("steps to convergence: min {} median {} max {}", s.min, s.median, s.max);
            }
            if let Some(f) = report.final_normalized_loss {
                println!("final normalized loss: min {:.3e} median {:.3e} max {:.3e}", f.min, f.median, f.max);
            }
            for r in report.per_run.iter().filter(|r| !r.converged) {
                println!("  seed {} did not converge (final {:.4})", r.seed, r.final_normalized_loss);
            }
            println!("{acc}");
            Ok(report.all_converged())
        }
        Cmd::Serve {
            scenario,
            port,
            seed,
            tick_hz,
            public,
        } => {
            let s = load(&scenario, None, None)?;
            let cfg = assembly_bridge::ServerConfig {
                port,
                seed,
                tick_hz,
                host: if public { [0, 0, 0, 0] } else { [127, 0, 0, 1] },
                ..Default::default()
            };
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Tool(e.to_string()))?;
            rt.block_on(assembly_bridge::serve(s, cfg)).map_err(|e| match e {
                assembly_bridge::ServerError::Config(m) => Failure::Validation(m),
                other => Failure::Tool(other.to_string()),
            })?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ASSEMBLY_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_NOT_CONVERGED),
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Tool(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_TOOL)
        }
    }
}
