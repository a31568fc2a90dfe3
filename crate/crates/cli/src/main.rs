//! `reachbot` command-line driver.
//!
//! Exit codes: 0 success, 1 scenario or usage error, 2 the run did not
//! converge or diverged, 3 I/O error.

mod plot;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reachbot::analysis::{fos_grid, symmetric_axis, trade_study, FosGrid, Stance};
use reachbot::sim::{self, ModelError, NoiseLevel, Scenario};

#[derive(Parser)]
#[command(name = "reachbot", version, about = "Planar four-boom anchored robot simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario's waypoint program.
    Run(RunArgs),
    /// Factor-of-safety map over a grid of disturbance forces.
    Fos(FosArgs),
    /// Response time against plant mass.
    Trade(TradeArgs),
    /// Check a scenario file and its initial stance without running it.
    Validate(ScenarioArg),
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario file (TOML).
    #[arg(long, value_name = "FILE")]
    scenario: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Absolute actuator noise level, overriding the scenario.
    #[arg(long, value_name = "S")]
    noise_sigma: Option<f64>,
    /// Plant mass and inertia as a multiple of the controller's model.
    #[arg(long, value_name = "X")]
    mass_scale: Option<f64>,
    /// Output directory; nothing is written without it.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Write every N-th record to the trace table (the last is always written).
    #[arg(long, value_name = "N", default_value_t = 10)]
    stride: usize,
    /// Skip the SVG plots.
    #[arg(long)]
    no_plots: bool,
}

#[derive(Args)]
struct FosArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Boom pretension in newtons; defaults to the scenario's.
    #[arg(long, value_name = "P")]
    pretension: Option<f64>,
    /// Grid size as columns x rows.
    #[arg(long, value_name = "NxM", default_value = "50x50", value_parser = parse_grid)]
    grid: (usize, usize),
    /// Half-widths of the disturbance force range in newtons.
    #[arg(long, num_args = 2, value_names = ["FX", "FY"], default_values_t = [200.0, 200.0])]
    range: Vec<f64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    no_plots: bool,
}

#[derive(Args)]
struct TradeArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Plant masses in kg as start:stop:step, inclusive.
    #[arg(long, value_name = "A:B:C", default_value = "10:100:10", value_parser = parse_masses)]
    masses: Masses,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    no_plots: bool,
}

#[derive(Clone, Debug)]
struct Masses(Vec<f64>);

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (n, m) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NxM, got `{s}`"))?;
    let n: usize = n.trim().parse().map_err(|e| format!("grid columns: {e}"))?;
    let m: usize = m.trim().parse().map_err(|e| format!("grid rows: {e}"))?;
    if n < 2 || m < 2 {
        return Err("grid needs at least 2 samples per axis".into());
    }
    Ok((n, m))
}

fn parse_masses(s: &str) -> Result<Masses, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(format!("expected start:stop:step, got `{s}`"));
    };
    if !(step > 0.0 && start > 0.0 && stop >= start) {
        return Err("need 0 < start <= stop and step > 0".into());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok(Masses((0..count).map(|k| start + k as f64 * step).collect()))
}

enum Failure {
    Scenario(String),
    Runtime(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Scenario(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Scenario(m) | Failure::Runtime(m) | Failure::Io(m) => m,
        }
    }
}

fn io_failure(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

/// Errors raised while running a loaded scenario. Non-convergence and
/// divergence are runtime failures; anything else is a scenario problem.
fn runtime_failure(e: reachbot::Error) -> Failure {
    use reachbot::Error as E;
    match e.root() {
        E::ScenarioInvalid { .. } | E::GainNotPD { .. } => Failure::Scenario(e.to_string()),
        _ => Failure::Runtime(e.to_string()),
    }
}

fn load(arg: &ScenarioArg) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(&arg.scenario).map_err(io_failure(&arg.scenario))?;
    let mut s = Scenario::from_toml_str(&text)
        .map_err(|e| Failure::Scenario(format!("{}: {e}", arg.scenario.display())))?;
    if let Ok(seed) = std::env::var("REACHBOT_SEED") {
        s.seed = seed
            .trim()
            .parse()
            .map_err(|_| Failure::Scenario(format!("REACHBOT_SEED: `{seed}` is not a u64")))?;
    }
    Ok(s)
}

fn stance(s: &Scenario) -> Result<Stance, Failure> {
    Stance::new(s.initial_pose, s.model, s.anchors.clone())
        .map_err(|e| Failure::Scenario(format!("initial stance: {e}")))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path).map_err(io_failure(path))?))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    writeln!(f).and_then(|_| f.flush()).map_err(io_failure(path))
}

fn out_dir(out: &Option<PathBuf>) -> Result<Option<&Path>, Failure> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_failure(dir))?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

/// Prints to stdout, ignoring a closed pipe.
fn say(text: &str) {
    let _ = writeln!(io::stdout().lock(), "{text}");
}

fn print_json(value: &impl serde::Serialize) {
    say(&serde_json::to_string_pretty(value).expect("summary serializes"));
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let mut s = load(&args.scenario)?;
    if let Some(sigma) = args.noise_sigma {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Failure::Scenario(format!("--noise-sigma: {sigma} must be >= 0")));
        }
        s.noise = NoiseLevel::Absolute(sigma);
    }
    if let Some(k) = args.mass_scale {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Failure::Scenario(format!("--mass-scale: {k} must be > 0")));
        }
        s.model_error = ModelError {
            mass_scale: k,
            inertia_scale: k,
        };
    }
    let trace = sim::simulate(&s).map_err(runtime_failure)?;
    let summary = sim::summarize(&s, &trace);
    if let Some(dir) = out_dir(&args.out)? {
        let path = dir.join("trace.csv");
        sim::write_csv(&trace, args.stride, create(&path)?).map_err(io_failure(&path))?;
        write_json(&dir.join("summary.json"), &summary)?;
        if !args.no_plots {
            plot::trajectory(&dir.join("trajectory.svg"), &s, &trace).map_err(Failure::Io)?;
            plot::errors(&dir.join("errors.svg"), &trace).map_err(Failure::Io)?;
        }
    }
    print_json(&summary);
    if !trace.status.done {
        return Err(Failure::Runtime(format!(
            "waypoint {} not reached within the {} s budget",
            trace.status.index, s.budget
        )));
    }
    Ok(())
}

fn write_grid(path: &Path, grid: &FosGrid) -> Result<(), Failure> {
    let mut f = create(path)?;
    let mut body = || -> io::Result<()> {
        writeln!(f, "fx_n,fy_n,fos")?;
        for (r, fy) in grid.fy.iter().enumerate() {
            for (c, fx) in grid.fx.iter().enumerate() {
                writeln!(f, "{fx},{fy},{}", grid.at(r, c))?;
            }
        }
        f.flush()
    };
    body().map_err(io_failure(path))
}

fn fos(args: &FosArgs) -> Result<(), Failure> {
    let s = load(&args.scenario)?;
    let pretension = args.pretension.unwrap_or(s.pretension);
    let (fx, fy) = (args.range[0], args.range[1]);
    if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
        return Err(Failure::Scenario("--range: half-widths must be positive".into()));
    }
    let st = stance(&s)?;
    let (n, m) = args.grid;
    let grid = fos_grid(
        &st,
        symmetric_axis(fx, n),
        symmetric_axis(fy, m),
        pretension,
        &s.structure,
        &s.grip,
    )
    .map_err(runtime_failure)?;
    let finite = grid.values.iter().copied().filter(|v| *v < reachbot::analysis::FOS_SENTINEL);
    let summary = serde_json::json!({
        "scenario": s.name,
        "pretension_n": pretension,
        "grid": [n, m],
        "range_n": [fx, fy],
        "cells": grid.values.len(),
        "safe_cells": grid.safe_cells(),
        "min_fos": finite.clone().fold(f64::INFINITY, f64::min),
        "max_fos": finite.fold(0.0, f64::max),
    });
    if let Some(dir) = out_dir(&args.out)? {
        write_grid(&dir.join("fos_grid.csv"), &grid)?;
        write_json(&dir.join("fos_summary.json"), &summary)?;
        if !args.no_plots {
            plot::fos_map(&dir.join("fos_map.svg"), &grid).map_err(Failure::Io)?;
        }
    }
    print_json(&summary);
    Ok(())
}

fn trade(args: &TradeArgs) -> Result<(), Failure> {
    let s = load(&args.scenario)?;
    let rows = trade_study(&s, &args.masses.0).map_err(runtime_failure)?;
    if let Some(dir) = out_dir(&args.out)? {
        let path = dir.join("trade.csv");
        let mut f = create(&path)?;
        let mut body = || -> io::Result<()> {
            writeln!(f, "mass_kg,response_time_s,clipped_fraction,clipped")?;
            for r in &rows {
                writeln!(
                    f,
                    "{},{},{},{}",
                    r.mass_kg,
                    r.response_time_s,
                    r.clipped_fraction,
                    u8::from(r.clipped)
                )?;
            }
            f.flush()
        };
        body().map_err(io_failure(&path))?;
        write_json(&dir.join("trade.json"), &rows)?;
        if !args.no_plots {
            plot::trade(&dir.join("trade.svg"), &rows).map_err(Failure::Io)?;
        }
    }
    print_json(&rows);
    Ok(())
}

fn validate(arg: &ScenarioArg) -> Result<(), Failure> {
    let s = load(arg)?;
    stance(&s)?;
    say(&format!(
        "{}: ok ({} waypoints, {} anchors)",
        arg.scenario.display(),
        s.program.len(),
        s.anchors.anchors().len()
    ));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Fos(a) => fos(a),
        Command::Trade(a) => trade(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
