//! Command line front end for the hagm simulator.
//!
//! Subcommands: `allocate` runs one wrench through an allocator and prints
//! the outcome as a CSV row; `simulate` runs a scenario file to a telemetry
//! CSV; `sweep` reruns a scenario across ground thrust margins; `compare`
//! races the prioritized allocator against the thrust-first baseline;
//! `mission` runs the scripted pick-and-place mission.
//!
//! Exit codes: 0 on success, 1 on configuration or I/O errors, 2 when a
//! simulation reports a stability or mission failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use hagm::allocation::{
    allocate_baseline_thrust_priority, allocate_prioritized, allocate_thrust_tracking,
    FeasibleSets, Mixer,
};
use hagm::arm::ArmGeometry;
use hagm::config;
use hagm::mission::{mission_pick_place, MissionConfig};
use hagm::model::{ControlInput, ControllerGains, RobotParams, Vec3};
use hagm::scenario::{compare_allocators, run_scenario, RunOutcome, Scenario, SimEvent};

#[derive(Parser)]
#[command(
    name = "hagm",
    version,
    about = "Deterministic simulator for a wheeled aerial manipulator",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Allocate one commanded wrench and print the outcome as a CSV row.
    Allocate(AllocateArgs),
    /// Run a scenario file and write its telemetry CSV.
    Simulate(SimulateArgs),
    /// Rerun a scenario across a range of ground thrust margins.
    Sweep(SweepArgs),
    /// Race the prioritized allocator against thrust-first baselines.
    Compare(CompareArgs),
    /// Run the scripted pick-and-place mission.
    Mission(MissionArgs),
}

#[derive(clap::Args)]
struct AllocateArgs {
    /// Commanded wrench "T,tau_x,tau_y,tau_z" (newtons, newton meters).
    #[arg(long, value_name = "T,TX,TY,TZ")]
    input: String,
    /// Robot parameter TOML file; built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    params: Option<PathBuf>,
    /// Allocator branch: ground, aerial, or baseline.
    #[arg(long, value_name = "MODE")]
    mode: String,
    /// Hover throttle fraction in (0, 1); baseline mode only.
    #[arg(long, value_name = "FRAC")]
    hover_throttle: Option<f64>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Scenario TOML file.
    #[arg(long, value_name = "FILE")]
    scenario: PathBuf,
    /// Robot parameter TOML file; built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    params: Option<PathBuf>,
    /// Controller gain TOML file; built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    gains: Option<PathBuf>,
    /// Telemetry CSV output path.
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct SweepArgs {
    /// Scenario TOML file.
    #[arg(long, value_name = "FILE")]
    scenario: PathBuf,
    /// Swept parameter as "T_ground_frac=START:STOP:STEP" (inclusive).
    #[arg(long, value_name = "NAME=START:STOP:STEP")]
    vary: String,
    /// Robot parameter TOML file; built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    params: Option<PathBuf>,
    /// Controller gain TOML file; built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    gains: Option<PathBuf>,
    /// Output directory for per-value telemetry and summary.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct CompareArgs {
    /// Scenario TOML file.
    #[arg(long, value_name = "FILE")]
    scenario: PathBuf,
    /// Baseline hover throttle fractions, comma separated.
    #[arg(long, value_name = "F1,F2,...")]
    hover: String,
    /// Robot parameter TOML file; built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    params: Option<PathBuf>,
    /// Controller gain TOML file; built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    gains: Option<PathBuf>,
    /// Comparison table CSV output path.
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct MissionArgs {
    /// Mission TOML file; built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Robot parameter TOML file; built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    params: Option<PathBuf>,
    /// Controller gain TOML file; built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    gains: Option<PathBuf>,
    /// Output directory for telemetry, events, phases, and summary CSVs.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Command::Allocate(args) => allocate(args),
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => sweep(args),
        Command::Compare(args) => compare(args),
        Command::Mission(args) => mission(args),
    }
}

/// Robot parameters and arm geometry from `--params`, or the defaults.
fn load_params(path: &Option<PathBuf>) -> Result<(RobotParams, ArmGeometry)> {
    match path {
        Some(p) => config::load_params(p).with_context(|| format!("loading {}", p.display())),
        None => Ok((RobotParams::default(), ArmGeometry::default())),
    }
}

fn load_gains(path: &Option<PathBuf>) -> Result<ControllerGains> {
    match path {
        Some(p) => config::load_gains(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ControllerGains::default()),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    config::load_scenario(path).with_context(|| format!("loading {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn make_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn allocate(args: AllocateArgs) -> Result<ExitCode> {
    let (params, _) = load_params(&args.params)?;
    let fields: Vec<f64> = args
        .input
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("parsing --input {:?}", args.input))?;
    if fields.len() != 4 {
        bail!("--input needs exactly 4 comma-separated numbers, got {}", fields.len());
    }
    let u = ControlInput::new(fields[0], Vec3::new(fields[1], fields[2], fields[3]));
    let mixer = Mixer::new(&params);
    let sets = FeasibleSets::new(&params);
    let res = match args.mode.as_str() {
        "ground" | "aerial" => {
            if args.hover_throttle.is_some() {
                bail!("--hover-throttle only applies to --mode baseline");
            }
            if args.mode == "ground" {
                allocate_prioritized(&u, &params, &mixer, &sets)
            } else {
                allocate_thrust_tracking(&u, &params, &mixer, &sets)
            }
        }
        "baseline" => {
            let h = args
                .hover_throttle
                .context("--mode baseline needs --hover-throttle")?;
            if !(h > 0.0 && h < 1.0) {
                bail!("--hover-throttle must be in (0, 1), got {h}");
            }
            allocate_baseline_thrust_priority(&u, h, &params, &mixer)
        }
        other => bail!("unknown --mode {other:?}, expected ground, aerial, or baseline"),
    };
    println!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        res.speeds.v[0],
        res.speeds.v[1],
        res.speeds.v[2],
        res.speeds.v[3],
        res.alpha,
        res.beta,
        res.u_applied.thrust,
        res.u_applied.tau.x,
        res.u_applied.tau.y,
        res.u_applied.tau.z,
        u8::from(res.saturated_tilt),
        u8::from(res.saturated_yaw),
        u8::from(res.thrust_floored),
        u8::from(res.thrust_ceiling),
    );
    Ok(ExitCode::SUCCESS)
}

/// One "ok" line to stdout, or the failure to stderr with exit code 2.
fn report_run(name: &str, out: &RunOutcome, dest: &Path) -> ExitCode {
    match &out.failure {
        Some(reason) => {
            eprintln!("{name}: FAILED: {reason} ({} rows kept)", out.records.len());
            ExitCode::from(2)
        }
        None => {
            println!(
                "{name}: ok, {} rows, mean power {:.1} W -> {}",
                out.records.len(),
                out.stats.mean_power_w,
                dest.display()
            );
            ExitCode::SUCCESS
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let scenario = load_scenario(&args.scenario)?;
    let (params, geom) = load_params(&args.params)?;
    let gains = load_gains(&args.gains)?;
    let out = run_scenario(&scenario, &params, &gains, &geom)?;
    write_file(&args.out, &out.csv())?;
    Ok(report_run(&scenario.name, &out, &args.out))
}

/// "START:STOP:STEP" into an inclusive, fp-stable value list.
fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("parsing range {spec:?}"))?;
    let [start, stop, step] = parts[..] else {
        bail!("range needs START:STOP:STEP, got {spec:?}");
    };
    if !(step > 0.0 && stop >= start) {
        bail!("range needs STEP > 0 and STOP >= START, got {spec:?}");
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if n > 1_000 {
        bail!("range {spec:?} expands to {n} values, refusing more than 1000");
    }
    // Snap accumulated rounding so values (and file names) stay exact.
    Ok((0..n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let (name, range) = args
        .vary
        .split_once('=')
        .with_context(|| format!("--vary needs NAME=START:STOP:STEP, got {:?}", args.vary))?;
    if name != "T_ground_frac" {
        bail!("unknown sweep parameter {name:?}, expected T_ground_frac");
    }
    let fracs = parse_range(range)?;
    let scenario = load_scenario(&args.scenario)?;
    let (params, geom) = load_params(&args.params)?;
    let gains = load_gains(&args.gains)?;
    make_dir(&args.out)?;

    let mut summary = String::from("T_ground_frac,pitch_rmse,mean_power_w,energy_j\n");
    for &frac in &fracs {
        let mut p = params.clone();
        p.t_ground_frac = frac;
        let p = p.validated().context("swept parameters")?;
        let out = run_scenario(&scenario, &p, &gains, &geom)?;
        if let Some(reason) = &out.failure {
            eprintln!("{}: FAILED at T_ground_frac={frac}: {reason}", scenario.name);
            return Ok(ExitCode::from(2));
        }
        write_file(&args.out.join(format!("T_ground_frac_{frac}.csv")), &out.csv())?;
        let pitch_rmse = out.stats.pitch.as_ref().map_or(f64::NAN, |s| s.rmse);
        summary.push_str(&format!(
            "{frac},{pitch_rmse},{},{}\n",
            out.stats.mean_power_w, out.stats.energy_j
        ));
    }
    let summary_path = args.out.join("summary.csv");
    write_file(&summary_path, &summary)?;
    println!(
        "{}: swept {} values -> {}",
        scenario.name,
        fracs.len(),
        summary_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn compare(args: CompareArgs) -> Result<ExitCode> {
    let hover: Vec<f64> = args
        .hover
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("parsing --hover {:?}", args.hover))?;
    let scenario = load_scenario(&args.scenario)?;
    let (params, geom) = load_params(&args.params)?;
    let gains = load_gains(&args.gains)?;
    let rows = compare_allocators(&scenario, &hover, &params, &gains, &geom)?;

    let mut table = String::from("label,hover_frac,pitch_rmse,settling_time_s,mean_power_w\n");
    for r in &rows {
        let frac = r.hover_frac.map(|f| f.to_string()).unwrap_or_default();
        let settle = r.settling_time_s.map(|t| t.to_string()).unwrap_or_default();
        table.push_str(&format!(
            "{},{frac},{},{settle},{}\n",
            r.label, r.pitch_rmse, r.mean_power_w
        ));
    }
    write_file(&args.out, &table)?;
    println!(
        "{}: {} configurations -> {}",
        scenario.name,
        rows.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn events_csv(events: &[SimEvent]) -> String {
    let mut s = String::from("t,event\n");
    for e in events {
        s.push_str(&format!("{},{}\n", e.t, e.what));
    }
    s
}

fn mission(args: MissionArgs) -> Result<ExitCode> {
    let config = match &args.config {
        Some(p) => config::load_mission(p).with_context(|| format!("loading {}", p.display()))?,
        None => MissionConfig::default(),
    };
    let (params, geom) = load_params(&args.params)?;
    let gains = load_gains(&args.gains)?;
    let out = mission_pick_place(&config, &params, &gains, &geom)?;
    make_dir(&args.out)?;

    write_file(&args.out.join("telemetry.csv"), &hagm::telemetry::csv_string(&out.records))?;
    write_file(&args.out.join("events.csv"), &events_csv(&out.events))?;
    let mut phases = String::from("phase,completed_t\n");
    for (name, t) in &out.phase_log {
        phases.push_str(&format!("{name},{t}\n"));
    }
    write_file(&args.out.join("phases.csv"), &phases)?;
    let placement = out
        .placement_error_m
        .map(|e| e.to_string())
        .unwrap_or_default();
    let failure = out.failure.clone().unwrap_or_default();
    write_file(
        &args.out.join("summary.csv"),
        &format!(
            "success,placement_error_m,phases_completed,failure\n{},{placement},{},{failure}\n",
            out.success,
            out.phase_log.len()
        ),
    )?;

    if out.success {
        println!(
            "mission: ok, placement error {:.4} m, {} phases -> {}",
            out.placement_error_m.unwrap_or(f64::NAN),
            out.phase_log.len(),
            args.out.display()
        );
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "mission: FAILED: {} ({} phases completed)",
            out.failure.as_deref().unwrap_or("unknown"),
            out.phase_log.len()
        );
        Ok(ExitCode::from(2))
    }
}
