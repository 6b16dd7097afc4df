use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};
use stlrelax::scenario::{run_receding_horizon, Mode, Scenario, SimLog, STREAMS};
use stlrelax::stl::{parse_formula, robustness, Trace};

use crate::plot::{render_dir, PlotKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "stlrelax", version, about = "Minimal STL relaxation and risk-aware Pareto refinement for vehicle MPC")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Robustness of a formula over a CSV trace (header `t,<signals>`).
    Monitor {
        formula: String,
        trace: PathBuf,
        /// Sample index at which to evaluate.
        #[arg(long, default_value_t = 0)]
        t: usize,
    },
    /// Solve the first control cycle of a scenario and print a JSON summary.
    Solve {
        scenario: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Explored Stage 2 candidates at one cycle, as CSV.
    Pareto {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        cycle: usize,
        #[command(flatten)]
        overrides: Overrides,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the closed loop and write every log stream into a directory.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Output directory.
        #[arg(long, env = "STLRELAX_OUT", default_value = "out")]
        out: PathBuf,
    },
    /// Render a plot from a simulation output directory.
    Plot {
        log_dir: PathBuf,
        #[arg(value_enum)]
        kind: PlotKind,
        /// Output SVG; standard output when omitted.
        out_svg: Option<PathBuf>,
        /// Cycle shown by the front plot; the first logged cycle by default.
        #[arg(long)]
        cycle: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Stage1,
    Full,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Stage1 => Mode::Stage1Only,
            ModeArg::Full => Mode::Full,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    pub mode: ModeArg,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Scenario fields that can be replaced from the command line.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Base seed for risk sampling [default: from scenario].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Epsilon grid points per objective [default: from scenario].
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Relaxation budget above the minimum [default: from scenario].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Monte Carlo samples per agent [default: from scenario].
    #[arg(long)]
    pub samples: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, sc: &mut Scenario) {
        if let Some(s) = self.seed {
            sc.seed = s;
        }
        if let Some(g) = self.grid_size {
            sc.objectives.grid_size = g;
        }
        if let Some(a) = self.alpha {
            sc.budget_alpha = a;
        }
        if let Some(n) = self.samples {
            sc.risk.n_samples = n;
        }
    }
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub msg: String,
}

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_USAGE, msg: msg.to_string() }
}

fn io(msg: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_IO, msg: msg.to_string() }
}

fn load(path: &Path, ov: &Overrides) -> Result<Scenario, Failure> {
    if !path.is_file() {
        return Err(io(format!("scenario file `{}` does not exist", path.display())));
    }
    let mut sc = Scenario::load(path).map_err(io)?;
    ov.apply(&mut sc);
    sc.validate().map_err(usage)?;
    Ok(sc)
}

fn run(sc: &Scenario, mode: Mode) -> Result<SimLog, Failure> {
    run_receding_horizon(sc, mode).map_err(|e| Failure { code: EXIT_INFEASIBLE, msg: e.to_string() })
}

/// Hex SHA-256 of the effective scenario and mode.
pub fn config_hash(sc: &Scenario, mode: Mode) -> String {
    let mut h = Sha256::new();
    h.update(sc.to_json().as_bytes());
    h.update(mode.to_string().as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest(sc: &Scenario, mode: Mode, log: &SimLog) -> serde_json::Value {
    let mut streams: Vec<&str> = STREAMS.to_vec();
    streams.push("scenario.json");
    serde_json::json!({
        "tool": "stlrelax",
        "version": env!("CARGO_PKG_VERSION"),
        "mode": mode.to_string(),
        "seed": sc.seed,
        "config_hash": config_hash(sc, mode),
        "cycles_configured": sc.cycles,
        "cycles_run": log.cycles.len(),
        "aborted": log.aborted,
        "streams": streams,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| io(format!("{}: {e}", path.display())))
}

fn monitor(formula: &str, trace: &Path, t: usize, out: &mut dyn Write) -> Result<i32, Failure> {
    let f = parse_formula(formula).map_err(|e| usage(format!("formula: {e}")))?;
    let tr = Trace::read_csv_path(trace).map_err(io)?;
    let rho = robustness(&f, &tr, t).map_err(usage)?;
    writeln!(out, "{rho} {}", if rho >= 0.0 { "SAT" } else { "UNSAT" }).map_err(io)?;
    Ok(EXIT_OK)
}

fn solve(path: &Path, args: &RunArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut sc = load(path, &args.overrides)?;
    sc.cycles = 1;
    let log = run(&sc, args.mode.into())?;
    if let Some(msg) = &log.aborted {
        eprintln!("{msg}");
        return Ok(EXIT_INFEASIBLE);
    }
    let c = &log.cycles[0];
    let named = |v: &[f64]| -> serde_json::Map<String, serde_json::Value> {
        log.soft_names.iter().cloned().zip(v.iter().map(|d| serde_json::json!(d))).collect()
    };
    let summary = serde_json::json!({
        "status": c.status,
        "delta_min": c.delta_min,
        "stage1_deltas": named(&c.stage1_deltas),
        "executed_deltas": named(&c.executed_deltas),
        "control": { "a": c.control.a, "beta": c.control.beta },
        "candidates": c.front.len(),
        "risk": c.risk.agents.iter().map(|a| (a.agent.clone(), serde_json::json!(a.r))).collect::<serde_json::Map<_, _>>(),
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&summary).expect("json")).map_err(io)?;
    Ok(EXIT_OK)
}

fn pareto(path: &Path, cycle: usize, ov: &Overrides, dest: Option<&Path>, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut sc = load(path, ov)?;
    if cycle >= sc.cycles {
        return Err(usage(format!("--cycle {cycle} is beyond the scenario's {} cycles", sc.cycles)));
    }
    sc.cycles = cycle + 1;
    let log = run(&sc, Mode::Full)?;
    if let Some(msg) = &log.aborted {
        eprintln!("{msg}");
        return Ok(EXIT_INFEASIBLE);
    }
    let mut table = log.front_table();
    table.rows.retain(|r| r.cycle == cycle);
    let mut buf = Vec::new();
    table.write(&mut buf).map_err(io)?;
    match dest {
        Some(p) => write_file(p, &buf)?,
        None => out.write_all(&buf).map_err(io)?,
    }
    Ok(EXIT_OK)
}

fn simulate(path: &Path, args: &RunArgs, dir: &Path) -> Result<i32, Failure> {
    let sc = load(path, &args.overrides)?;
    let mode: Mode = args.mode.into();
    std::fs::create_dir_all(dir).map_err(|e| io(format!("{}: {e}", dir.display())))?;
    let log = run(&sc, mode)?;
    log.write_dir(dir).map_err(io)?;
    sc.save(&dir.join("scenario.json")).map_err(io)?;
    let m = serde_json::to_string_pretty(&manifest(&sc, mode, &log)).expect("json") + "\n";
    write_file(&dir.join("manifest.json"), m.as_bytes())?;
    if let Some(msg) = &log.aborted {
        eprintln!("{msg}");
        return Ok(EXIT_INFEASIBLE);
    }
    log::info!("wrote {} cycles to {}", log.cycles.len(), dir.display());
    Ok(EXIT_OK)
}

fn plot(dir: &Path, kind: PlotKind, dest: Option<&Path>, cycle: Option<usize>, out: &mut dyn Write) -> Result<i32, Failure> {
    if !dir.is_dir() {
        return Err(io(format!("log directory `{}` does not exist", dir.display())));
    }
    let svg = render_dir(dir, kind, cycle).map_err(io)?;
    match dest {
        Some(p) => write_file(p, svg.as_bytes())?,
        None => out.write_all(svg.as_bytes()).map_err(io)?,
    }
    Ok(EXIT_OK)
}

/// Runs a parsed command; data goes to `out`, diagnostics to standard error.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> i32 {
    let res = match &cli.command {
        Command::Monitor { formula, trace, t } => monitor(formula, trace, *t, out),
        Command::Solve { scenario, run } => solve(scenario, run, out),
        Command::Pareto { scenario, cycle, overrides, out: dest } => {
            pareto(scenario, *cycle, overrides, dest.as_deref(), out)
        }
        Command::Simulate { scenario, run, out: dir } => simulate(scenario, run, dir),
        Command::Plot { log_dir, kind, out_svg, cycle } => plot(log_dir, *kind, out_svg.as_deref(), *cycle, out),
    };
    match res {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}

/// Entry point over raw arguments.
pub fn main_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli, out),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if e.use_stderr() {
                let _ = e.print();
            } else {
                let _ = write!(out, "{e}");
            }
            code
        }
    }
}
