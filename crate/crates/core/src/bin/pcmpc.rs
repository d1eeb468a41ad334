use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pcmpc::sim::{parse_config, run_closed_loop, write_outputs, SimConfig, Termination};

#[derive(Parser)]
#[command(name = "pcmpc", version, about = "Ensemble continuation MPC closed-loop simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the closed-loop minimum-time experiment and write CSV logs.
    Run {
        /// Flat `key = value` config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Disable the LU preconditioner.
        #[arg(long)]
        no_precond: bool,
        /// Keep only variant K (1-based) of the configured list.
        #[arg(long, value_name = "K")]
        single_variant: Option<usize>,
        /// Cap on applied control steps.
        #[arg(long, value_name = "N")]
        max_steps: Option<usize>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn main() -> ExitCode {
    let Command::Run {
        config,
        out,
        no_precond,
        single_variant,
        max_steps,
    } = Cli::parse().command;

    let cfg = match build_config(config, out, no_precond, single_variant, max_steps) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let run = match run_closed_loop(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("solver error: {e}");
            return ExitCode::from(EXIT_SOLVER);
        }
    };
    if let Err(e) = write_outputs(&run.records, &run.summary, &cfg.output_dir) {
        eprintln!("failed to write outputs to {}: {e}", cfg.output_dir.display());
        return ExitCode::FAILURE;
    }

    let s = &run.summary;
    let segments: Vec<String> = s
        .switch_segments
        .iter()
        .map(|(k, n)| format!("k={}:{n}", k + 1))
        .collect();
    println!(
        "steps={} gmres_iters={} initial_p={:.6} final=({:.6}, {:.6}) segments=[{}] terminated_by={}",
        s.steps_executed,
        s.total_gmres_iters,
        s.initial_p,
        s.final_state[0],
        s.final_state[1],
        segments.join(" "),
        s.terminated_by
    );
    match s.terminated_by {
        Termination::Error(_) => ExitCode::from(EXIT_SOLVER),
        _ => ExitCode::SUCCESS,
    }
}

fn build_config(
    path: Option<PathBuf>,
    out: Option<PathBuf>,
    no_precond: bool,
    single_variant: Option<usize>,
    max_steps: Option<usize>,
) -> Result<SimConfig, String> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
            parse_config(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => SimConfig::default(),
    };
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    if no_precond {
        cfg.precond_enabled = false;
    }
    if let Some(n) = max_steps {
        cfg.max_steps = n;
    }
    if let Some(k) = single_variant {
        if k == 0 {
            return Err("--single-variant is 1-based".into());
        }
        cfg = cfg.with_single_variant(k - 1).map_err(|e| e.to_string())?;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}
