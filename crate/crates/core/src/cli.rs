//! The `uav-planner` command line.
//!
//! Exit codes: 0 success, 1 invalid input or I/O failure, 2 when no
//! feasible tour was found (including users with an empty service area).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use crate::coverage::{grid_dimensions, service_area, ServiceAreaGrid};
use crate::ga::ga_run;
use crate::link::max_service_distance;
use crate::routing::{advanced_run, heuristic_run, Budget, Problem, SolveError, SolverRun};
use crate::scenario_io::{
    conversion_json, convert_footprints, coverage_geojson, export_grid, load_scenario, save_report, trajectory_geojson,
    HeightRule, Scenario, SolverMeta, TrajectoryReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "uav-planner", version, about = "Plan LoS-constrained UAV service trajectories over a cuboid city model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Ga,
    Heuristic,
    Advanced,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Ga => "ga",
            SolverKind::Heuristic => "heuristic",
            SolverKind::Advanced => "advanced",
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Square grid resolution in metres, replacing the scenario's dx/dy.
    #[arg(long)]
    pub grid_res: Option<f64>,
    /// Objective exponent, replacing the scenario's I_w.
    #[arg(long)]
    pub iw: Option<f64>,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Master seed for every stochastic component.
    #[arg(long)]
    pub seed: u64,
    /// Iterations (heuristics) or generations (GA); defaults to the scenario's solver settings.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write wall-clock times into the output files (makes them run-dependent).
    #[arg(long)]
    pub record_timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute every user's service-area raster.
    Coverage {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run one solver and write its trajectory report.
    Solve {
        #[arg(long, value_enum)]
        solver: SolverKind,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run all solvers on one scenario and tabulate the results.
    Compare {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Load and check a scenario.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Convert a footprint table into merged cuboids.
    Convert {
        /// CSV with columns x_min,x_max,y_min,y_max,height.
        #[arg(long)]
        input: PathBuf,
        /// Output JSON with the merged obstacles.
        #[arg(long)]
        out: PathBuf,
        /// Height for rows that leave it empty; such rows are errors otherwise.
        #[arg(long)]
        default_height: Option<f64>,
    },
}

enum Failure {
    Error(anyhow::Error),
    Infeasible(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Error(e)
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `argv` (program name first) and runs the command, printing to
/// stdout/stderr. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Coverage { scenario, out_dir } => cmd_coverage(&scenario, &out_dir, out),
        Command::Solve { solver, run } => cmd_solve(solver, &run, out),
        Command::Compare { run } => cmd_compare(&run, out),
        Command::Validate { scenario } => cmd_validate(&scenario, out),
        Command::Convert {
            input,
            out: target,
            default_height,
        } => cmd_convert(&input, &target, default_height, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Error(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_ERROR
        }
        Err(Failure::Infeasible(msg)) => {
            let _ = writeln!(err, "infeasible: {msg}");
            EXIT_INFEASIBLE
        }
    }
}

fn prepare(args: &ScenarioArgs) -> anyhow::Result<Scenario> {
    let mut s = load_scenario(&args.scenario)?;
    if let Some(r) = args.grid_res {
        let g = s.grid.with_resolution(r, r);
        g.validate().map_err(|e| anyhow!("--grid-res: {e}"))?;
        s.grid = g;
    }
    if let Some(iw) = args.iw {
        if !(iw >= 0.0 && iw.is_finite()) {
            return Err(anyhow!("--iw: must be a finite value >= 0, got {iw}"));
        }
        s.mission.i_w = iw;
    }
    Ok(s)
}

fn out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn areas(s: &Scenario) -> Vec<ServiceAreaGrid<f64>> {
    s.users().iter().map(|u| service_area(u, &s.map, &s.budget, &s.grid)).collect()
}

fn cmd_coverage(args: &ScenarioArgs, dir: &Path, out: &mut dyn Write) -> CmdResult {
    let s = prepare(args)?;
    out_dir(dir)?;
    let grids = areas(&s);
    let (mx, my) = grid_dimensions(&s.grid);
    let mut summary = String::from("user,weight,d_max,valid_cells,raster\n");
    for (u, g) in s.users().iter().zip(&grids) {
        let name = format!("coverage_{}.csv", file_stem(&u.id));
        export_grid(g, dir.join(&name)).map_err(anyhow::Error::from)?;
        let d = max_service_distance(u.weight, &s.budget);
        summary.push_str(&format!("{},{},{},{},{}\n", u.id, u.weight, d, g.count_valid(), name));
        let _ = writeln!(out, "{}: {} of {} cells", u.id, g.count_valid(), mx * my);
    }
    write_text(&dir.join("coverage_summary.csv"), &summary)?;
    write_text(&dir.join("coverage.geojson"), &coverage_geojson(&grids))?;
    Ok(())
}

struct Outcome {
    kind: SolverKind,
    run: SolverRun<f64>,
    seconds: f64,
}

fn solve_one(kind: SolverKind, s: &Scenario, problem: &Problem<'_, f64>, seed: u64, iterations: Option<usize>) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let run = match kind {
        SolverKind::Heuristic => heuristic_run(problem, Budget::Iterations(iterations.unwrap_or(s.solvers.heuristic_iterations)), seed),
        SolverKind::Advanced => advanced_run(problem, Budget::Iterations(iterations.unwrap_or(s.solvers.advanced_iterations)), seed),
        SolverKind::Ga => {
            let mut cfg = s.solvers.ga;
            cfg.seed = seed;
            if let Some(g) = iterations {
                cfg.generations = g;
            }
            ga_run(problem, &cfg, Budget::Iterations(cfg.generations))
        }
    }
    .map_err(|e| anyhow!("{} solver: {e}", kind.name()))?;
    Ok(Outcome {
        kind,
        run,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn build_problem<'a>(s: &'a Scenario, grids: &'a [ServiceAreaGrid<f64>]) -> Result<Problem<'a, f64>, Failure> {
    Problem::new(&s.mission, grids, &s.map, &s.budget).map_err(|e| match e {
        SolveError::Unsatisfiable { .. } => Failure::Infeasible(e.to_string()),
        other => Failure::Error(anyhow!(other)),
    })
}

fn cmd_solve(kind: SolverKind, args: &RunArgs, out: &mut dyn Write) -> CmdResult {
    let s = prepare(&args.scenario)?;
    out_dir(&args.out_dir)?;
    let grids = areas(&s);
    let problem = build_problem(&s, &grids)?;
    let o = solve_one(kind, &s, &problem, args.seed, args.iterations)?;
    let meta = SolverMeta {
        name: kind.name().to_string(),
        seed: args.seed,
        iterations: o.run.iterations,
        wall_time_s: args.record_timing.then_some(o.seconds),
    };
    let report = TrajectoryReport::from_tour(&s, &o.run.tour, meta, &o.run.trace);
    save_report(&report, args.out_dir.join("report.json")).map_err(anyhow::Error::from)?;
    write_text(&args.out_dir.join("trajectory.geojson"), &trajectory_geojson(&s, &o.run.tour))?;
    let t = &o.run.tour;
    let _ = writeln!(
        out,
        "{}: objective {:.6}, end time {:.3} s, feasible {}, wall time {:.3} s",
        kind.name(),
        t.objective,
        t.end_time,
        t.feasible,
        o.seconds
    );
    if t.feasible {
        Ok(())
    } else {
        Err(Failure::Infeasible(format!(
            "{} found no tour within T_max = {} s (best end time {:.3} s)",
            kind.name(),
            s.mission.t_max,
            t.end_time
        )))
    }
}

fn cmd_compare(args: &RunArgs, out: &mut dyn Write) -> CmdResult {
    let s = prepare(&args.scenario)?;
    out_dir(&args.out_dir)?;
    let grids = areas(&s);
    let problem = build_problem(&s, &grids)?;
    let mut table = String::from("solver,objective,end_time,feasible,ordered_pairs,total_pairs");
    table.push_str(if args.record_timing { ",wall_time_s\n" } else { "\n" });
    let mut infeasible = Vec::new();
    for kind in [SolverKind::Heuristic, SolverKind::Advanced, SolverKind::Ga] {
        let o = solve_one(kind, &s, &problem, args.seed, args.iterations)?;
        let t = &o.run.tour;
        let (ok, total) = t.priority_compliance(s.users());
        table.push_str(&format!("{},{},{},{},{},{}", o.kind.name(), t.objective, t.end_time, t.feasible, ok, total));
        if args.record_timing {
            table.push_str(&format!(",{}", o.seconds));
        }
        table.push('\n');
        let _ = writeln!(
            out,
            "{:<9} objective {:>14.6}  end time {:>9.3} s  compliance {ok}/{total}  wall time {:.3} s",
            o.kind.name(),
            t.objective,
            t.end_time,
            o.seconds
        );
        if !t.feasible {
            infeasible.push(o.kind.name());
        }
    }
    write_text(&args.out_dir.join("compare.csv"), &table)?;
    if infeasible.is_empty() {
        Ok(())
    } else {
        Err(Failure::Infeasible(format!("no feasible tour from: {}", infeasible.join(", "))))
    }
}

fn cmd_validate(path: &Path, out: &mut dyn Write) -> CmdResult {
    let s = load_scenario(path).map_err(anyhow::Error::from)?;
    let (mx, my) = grid_dimensions(&s.grid);
    let _ = writeln!(
        out,
        "ok: {} users, {} obstacles, {mx} x {my} grid at {} m, T_max {} s",
        s.users().len(),
        s.map.len(),
        s.grid.altitude,
        s.mission.t_max
    );
    Ok(())
}

fn cmd_convert(input: &Path, target: &Path, default_height: Option<f64>, out: &mut dyn Write) -> CmdResult {
    let rule = match default_height {
        Some(h) if h > 0.0 && h.is_finite() => HeightRule::Fixed(h),
        Some(h) => return Err(anyhow!("--default-height: must be > 0, got {h}").into()),
        None => HeightRule::Require,
    };
    let conv = convert_footprints(input, rule).map_err(|e| anyhow!("{}: {e}", input.display()))?;
    if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
        out_dir(parent)?;
    }
    write_text(target, &conversion_json(&conv))?;
    let _ = writeln!(out, "footprints: {} -> cuboids: {}", conv.before, conv.after);
    Ok(())
}
