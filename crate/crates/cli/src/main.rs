//! `pfltank`: run energy-tank PFL scenarios and evaluate ISO/TS 15066 limits.
//!
//! Exit codes: 0 success, 2 controller fault during a run, 3 bad
//! configuration or arguments, 1 failure writing outputs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pfltank_core::config::load_scenario;
use pfltank_core::iso15066::{max_energy, reduced_mass, v_max, BodyRegion, ForceMode, StiffnessUnit};
use pfltank_core::sim_harness::{run, RunResult};
use pfltank_core::{io, Error};

const EXIT_FAULT: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_IO: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "pfltank", version, about = "Energy-tank kinetic-energy limiting for collaborative robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write ticks.csv and summary.json.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the control period (s).
        #[arg(long)]
        tau: Option<f64>,
        /// Override the simulated duration (s).
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Energy and speed limits for one body region and robot mass.
    Iso {
        /// Maximum permissible quasi-static force (N).
        #[arg(long)]
        fmax: f64,
        /// Body-region stiffness, in the unit given by --k-unit.
        #[arg(long)]
        k: f64,
        /// "N/m" or "N/mm".
        #[arg(long)]
        k_unit: StiffnessUnit,
        /// Effective mass of the human body region (kg).
        #[arg(long)]
        mh: f64,
        /// Effective robot mass (kg).
        #[arg(long)]
        mr: f64,
        #[arg(long, default_value_t = 2.0)]
        transient_mult: f64,
        /// Print v_max over a robot-mass range LO:HI:STEP as CSV instead.
        #[arg(long, value_name = "LO:HI:STEP")]
        sweep_mr: Option<String>,
    },
    /// Check a scenario without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PFLTANK_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            out,
            tau,
            duration,
        } => cmd_run(&config, &out, tau, duration),
        Command::Iso {
            fmax,
            k,
            k_unit,
            mh,
            mr,
            transient_mult,
            sweep_mr,
        } => cmd_iso(fmax, k_unit.to_newton_per_metre(k), mh, mr, transient_mult, sweep_mr.as_deref()),
        Command::Validate { config } => cmd_validate(&config),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("pfltank: {e}");
            ExitCode::from(match e {
                Error::Io(_) => EXIT_IO,
                e if e.is_controller_fault() => EXIT_FAULT,
                _ => EXIT_CONFIG,
            })
        }
    }
}

fn cmd_run(
    config: &std::path::Path,
    out: &std::path::Path,
    tau: Option<f64>,
    duration: Option<f64>,
) -> Result<ExitCode, Error> {
    let mut scenario = load_scenario(config)?;
    if let Some(tau) = tau {
        scenario.tau = tau;
    }
    if let Some(duration) = duration {
        scenario.duration = duration;
    }
    let RunResult {
        ticks, summary, fault, ..
    } = run(&scenario)?;
    io::write_run(out, &ticks, &summary)?;

    println!("scenario {} : {} ticks, {} s", summary.scenario, summary.ticks, summary.end_time);
    for s in &summary.segments {
        println!(
            "  {:<12} [{:.3}, {:.3}) s  max H {:.4} J / bound {:.4} J  max speed {:.4} m/s{}",
            s.region,
            s.start_time,
            s.end_time,
            s.max_h_truth,
            s.energy_bound,
            s.max_speed,
            if s.bound_respected {
                String::new()
            } else {
                format!("  above bound for {:.3} s", s.overshoot_duration)
            }
        );
    }
    println!(
        "  min tank margin {:.3e} J  conservation residual {:.3e} J  damper {:.4e} J",
        summary.min_tank_margin, summary.max_conservation_residual, summary.damper_dissipated
    );
    println!("  wrote {}", out.display());
    match fault {
        Some(e) => {
            eprintln!("pfltank: run aborted: {e}");
            Ok(ExitCode::from(EXIT_FAULT))
        }
        None => Ok(ExitCode::SUCCESS),
    }
}

fn parse_range(spec: &str) -> Result<(f64, f64, f64), Error> {
    let bad = || Error::Config(format!("--sweep-mr expects LO:HI:STEP with 0 < LO <= HI and STEP > 0, got {spec:?}"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    match parts[..] {
        [lo, hi, step] if lo > 0.0 && hi >= lo && step > 0.0 && hi.is_finite() => Ok((lo, hi, step)),
        _ => Err(bad()),
    }
}

fn cmd_iso(fmax: f64, k: f64, mh: f64, mr: f64, mult: f64, sweep: Option<&str>) -> Result<ExitCode, Error> {
    let region = BodyRegion::with_multiplier("region", fmax, k, mh, mult)?;
    if let Some(spec) = sweep {
        let (lo, hi, step) = parse_range(spec)?;
        println!("m_r,mu,v_max_quasi_static,v_max_transient");
        let n = ((hi - lo) / step + 1e-9).floor() as u64;
        for i in 0..=n {
            let m_r = lo + i as f64 * step;
            println!(
                "{m_r},{},{},{}",
                reduced_mass(mh, m_r)?,
                v_max(&region, m_r, ForceMode::QuasiStatic)?,
                v_max(&region, m_r, ForceMode::Transient)?
            );
        }
        return Ok(ExitCode::SUCCESS);
    }
    let mu = reduced_mass(mh, mr)?;
    println!("{:<22}{:>12.6} J", "E_max (transient)", max_energy(&region));
    println!("{:<22}{:>12.6} kg", "mu", mu);
    println!("{:<22}{:>12.6} m/s", "v_max (quasi-static)", v_max(&region, mr, ForceMode::QuasiStatic)?);
    println!("{:<22}{:>12.6} m/s", "v_max (transient)", v_max(&region, mr, ForceMode::Transient)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(config: &std::path::Path) -> Result<ExitCode, Error> {
    let s = load_scenario(config)?;
    println!(
        "{}: ok ({} steps of {} s, {} region(s))",
        s.name,
        s.steps(),
        s.tau,
        s.schedule.entries().len()
    );
    Ok(ExitCode::SUCCESS)
}
