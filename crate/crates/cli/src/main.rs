use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use scm_transfer::calibration::{build_command_pairs, command_grid};
use scm_transfer::config::{parse_config, GridSpec, ScenarioConfig};
use scm_transfer::planner::{plan_step, PrimitiveLibrary};
use scm_transfer::scm::{validate_polygon, RectangleMap};
use scm_transfer::sim::{plot, prepare_library, run_scenario, Mode, Pose, SimError, SimTrace, SimulatedVehicle};
use scm_transfer::transfer::{build_capability_hull, read_pairs_csv, write_pairs_csv, Command, CommandMapper, CommandPair};

const EXIT_MISSION_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "scmt", version, about = "Teacher-to-learner command transfer with rectangle maps")]
struct Cli {
    /// Scenario config (JSON). Without it the built-in degraded reference
    /// scenario is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Conformal-map utilities.
    Scm {
        #[command(subcommand)]
        command: ScmCmd,
    },
    /// Probes the learner and writes command pairs.
    Calibrate(CalibrateArgs),
    /// Command mapping utilities.
    Transfer {
        #[command(subcommand)]
        command: TransferCmd,
    },
    /// Builds the capability-filtered teacher primitive library.
    BuildPrimitives(PairsArg),
    /// Plans one horizon from a pose.
    Plan(PlanArgs),
    /// Runs the closed-loop scenario.
    Simulate(SimulateArgs),
}

#[derive(Subcommand, Debug)]
enum ScmCmd {
    /// Solves the rectangle map of a polygon.
    Solve {
        /// Vertices as `x,y;x,y;...` in counterclockwise order.
        #[arg(long)]
        polygon: String,
        /// Indices of the four rectangle corners, ascending.
        #[arg(long, default_value = "0,1,2,3")]
        corners: String,
    },
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Probe grid as `NVxNGAMMA`; defaults to the config.
    #[arg(long)]
    grid: Option<String>,
    /// Seconds each probe command is held; defaults to the config.
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum TransferCmd {
    /// Maps a teacher command to the learner.
    Map {
        #[arg(long)]
        pairs: PathBuf,
        /// Teacher command as `v,gamma`.
        #[arg(long, allow_hyphen_values = true)]
        command: String,
        /// Nearest-pair shortcut radius; defaults to the config.
        #[arg(long)]
        psi: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct PairsArg {
    /// Command pairs CSV; calibrates against the simulated learner if absent.
    #[arg(long)]
    pairs: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlanArgs {
    #[command(flatten)]
    pairs: PairsArg,
    /// Pose as `x,y,theta`; defaults to the scenario start.
    #[arg(long, allow_hyphen_values = true)]
    pose: Option<String>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Sends teacher commands unchanged to the learner.
    #[arg(long)]
    baseline: bool,
}

/// Failures that map to distinct exit codes.
enum Failure {
    Usage(anyhow::Error),
    Mission(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn parse_numbers(text: &str, sep: char, count: usize, what: &str) -> Result<Vec<f64>, Failure> {
    let vals: Result<Vec<f64>, _> = text.split(sep).map(|s| s.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if v.len() == count && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(usage(anyhow!("{what}: expected {count} numbers separated by '{sep}', got {text:?}"))),
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(usage)?;
            parse_config(&text)
                .with_context(|| format!("config {}", path.display()))
                .map_err(usage)?
        }
        None => ScenarioConfig::degraded_reference(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.to_string_lossy().into_owned();
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig) -> Result<PathBuf, Failure> {
    let dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn read_pairs(path: &Path) -> Result<Vec<CommandPair>, Failure> {
    let file = fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(usage)?;
    read_pairs_csv(file)
        .with_context(|| format!("pairs file {}", path.display()))
        .map_err(usage)
}

fn calibrate(cfg: &ScenarioConfig, grid: &GridSpec) -> Result<Vec<CommandPair>, Failure> {
    let mut learner = SimulatedVehicle::new(cfg.learner, cfg.dt, cfg.noise_sigma, cfg.seed);
    let pairs = build_command_pairs(&mut learner, &command_grid(grid.nv, grid.ngamma), grid.duration, &cfg.teacher)
        .context("calibration")?;
    Ok(pairs)
}

fn pairs_or_calibrate(cfg: &ScenarioConfig, arg: &PairsArg) -> Result<Vec<CommandPair>, Failure> {
    match &arg.pairs {
        Some(p) => read_pairs(p),
        None => calibrate(cfg, &cfg.calibration),
    }
}

fn cmd_scm_solve(polygon: &str, corners: &str) -> Result<(), Failure> {
    let vertices = polygon
        .split(';')
        .map(|v| parse_numbers(v, ',', 2, "vertex").map(|xy| Complex64::new(xy[0], xy[1])))
        .collect::<Result<Vec<_>, _>>()?;
    let c = parse_numbers(corners, ',', 4, "corners")?;
    if c.iter().any(|x| x.fract() != 0.0 || *x < 0.0) {
        return Err(usage(anyhow!("corners must be non-negative integers")));
    }
    let corners = [c[0] as usize, c[1] as usize, c[2] as usize, c[3] as usize];
    let poly = validate_polygon(&vertices, corners).map_err(usage)?;
    let map = RectangleMap::new(&poly).context("solving the rectangle map")?;
    let (k, kp) = map.rectangle();
    let params = map.strip().params();
    let report = json!({
        "aspect": map.aspect(),
        "m": map.modulus_m(),
        "K": k,
        "Kp": kp,
        "strip_length": params.length,
        "prevertices": params.prevertices,
        "on_top": params.on_top,
        "vertex_error": map.strip().vertex_error().context("checking the solution")?,
    });
    println!("{}", serde_json::to_string_pretty(&report).context("serializing")?);
    Ok(())
}

fn cmd_calibrate(cfg: &ScenarioConfig, args: &CalibrateArgs) -> Result<(), Failure> {
    let mut grid = cfg.calibration.clone();
    if let Some(g) = &args.grid {
        let parts: Vec<&str> = g.split('x').collect();
        let parsed: Option<Vec<usize>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
        match parsed.as_deref() {
            Some([nv, ng]) if *nv > 0 && *ng > 0 => {
                grid.nv = *nv;
                grid.ngamma = *ng;
            }
            _ => return Err(usage(anyhow!("--grid: expected NVxNGAMMA, got {g:?}"))),
        }
    }
    if let Some(d) = args.duration {
        if !(d.is_finite() && d >= cfg.dt) {
            return Err(usage(anyhow!("--duration must be at least dt = {}", cfg.dt)));
        }
        grid.duration = d;
    }
    let pairs = calibrate(cfg, &grid)?;
    let dir = out_dir(cfg)?;
    let mut buf = Vec::new();
    write_pairs_csv(&pairs, &mut buf).context("writing pairs")?;
    let path = write(&dir, "pairs.csv", buf)?;
    println!("{} pairs written to {}", pairs.len(), path.display());
    Ok(())
}

fn cmd_transfer_map(cfg: &ScenarioConfig, pairs: &Path, command: &str, psi: Option<f64>) -> Result<(), Failure> {
    let c = parse_numbers(command, ',', 2, "--command")?;
    let desired = Command::new(c[0], c[1]);
    let psi = psi.unwrap_or(cfg.psi);
    if !(psi.is_finite() && psi >= 0.0) {
        return Err(usage(anyhow!("--psi must be non-negative")));
    }
    let hull = build_capability_hull(&read_pairs(pairs)?).map_err(usage)?;
    let mapper = CommandMapper::new(hull, psi, cfg.region_vertices).map_err(usage)?;
    let u = mapper.map(desired).context("mapping the command")?;
    println!("{}", json!({ "v": u.v, "gamma": u.gamma }));
    Ok(())
}

fn library(cfg: &ScenarioConfig, arg: &PairsArg) -> Result<(PrimitiveLibrary, Vec<Option<Command>>), Failure> {
    let pairs = pairs_or_calibrate(cfg, arg)?;
    Ok(prepare_library(cfg, Mode::Transfer, &pairs).context("building the library")?)
}

fn cmd_build_primitives(cfg: &ScenarioConfig, arg: &PairsArg) -> Result<(), Failure> {
    let (lib, _) = library(cfg, arg)?;
    let dir = out_dir(cfg)?;
    let path = write(&dir, "primitives.json", lib.to_json().context("serializing")?)?;
    println!(
        "{} of {} primitives admissible, written to {}",
        lib.admissible_indices().len(),
        lib.primitives.len(),
        path.display()
    );
    Ok(())
}

fn cmd_plan(cfg: &ScenarioConfig, args: &PlanArgs) -> Result<(), Failure> {
    let pose = match &args.pose {
        Some(p) => {
            let v = parse_numbers(p, ',', 3, "--pose")?;
            Pose::new(v[0], v[1], v[2])
        }
        None => cfg.start_pose(),
    };
    let (lib, learner_cmds) = library(cfg, &args.pairs)?;
    let plan = plan_step(&pose, &cfg.path(), &lib, cfg.horizon, cfg.gains).context("planning")?;
    let steps: Vec<_> = plan
        .chosen
        .iter()
        .zip(&plan.costs)
        .map(|(&i, &cost)| {
            let t = lib.primitives[i].command;
            let l = learner_cmds[i];
            json!({
                "primitive": i,
                "teacher": { "v": t.v, "gamma": t.gamma },
                "learner": l.map(|l| json!({ "v": l.v, "gamma": l.gamma })),
                "cost": cost,
            })
        })
        .collect();
    let report = json!({ "steps": steps, "polyline": plan.polyline() });
    let dir = out_dir(cfg)?;
    let path = write(&dir, "plan.json", serde_json::to_string_pretty(&report).context("serializing")?)?;
    println!("{}", serde_json::to_string(&json!({ "chosen": plan.chosen, "costs": plan.costs })).context("serializing")?);
    eprintln!("plan written to {}", path.display());
    Ok(())
}

fn write_run(dir: &Path, cfg: &ScenarioConfig, trace: &SimTrace) -> Result<(), Failure> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).context("trace")?;
    write(dir, "trace.csv", buf)?;
    let mut buf = Vec::new();
    trace.write_plans_csv(&mut buf).context("plans")?;
    write(dir, "plans.csv", buf)?;
    write(dir, "trajectory.svg", plot::render_svg(&cfg.environment(), trace))?;
    write(dir, "config.json", cfg.to_json())?;
    Ok(())
}

fn cmd_simulate(cfg: &ScenarioConfig, args: &SimulateArgs) -> Result<(), Failure> {
    let mode = if args.baseline { Mode::Baseline } else { Mode::Transfer };
    let dir = out_dir(cfg)?;
    let result = run_scenario(cfg, mode);
    let (trace, pairs) = match &result {
        Ok(run) => (&run.trace, Some(&run.pairs)),
        Err(SimError::MissionFailed { trace, .. }) => (trace.as_ref(), None),
        Err(SimError::ConfigInvalid(m)) => return Err(usage(anyhow!("{m}"))),
        Err(e) => return Err(Failure::Runtime(anyhow!("{e}"))),
    };
    write_run(&dir, cfg, trace)?;
    if let Some(pairs) = pairs.filter(|p| !p.is_empty()) {
        let mut buf = Vec::new();
        write_pairs_csv(pairs, &mut buf).context("writing pairs")?;
        write(&dir, "pairs.csv", buf)?;
    }
    let metrics = scm_transfer::sim::trace_metrics(trace, &cfg.path());
    let text = serde_json::to_string_pretty(&metrics).context("serializing")?;
    write(&dir, "metrics.json", &text)?;
    println!("{text}");
    match result {
        Ok(_) => Ok(()),
        Err(e) => Err(Failure::Mission(anyhow!("{e}"))),
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Cmd::Scm {
        command: ScmCmd::Solve { polygon, corners },
    } = &cli.command
    {
        return cmd_scm_solve(polygon, corners);
    }
    let cfg = load_config(cli)?;
    match &cli.command {
        Cmd::Scm { .. } => unreachable!("handled above"),
        Cmd::Calibrate(args) => cmd_calibrate(&cfg, args),
        Cmd::Transfer {
            command: TransferCmd::Map { pairs, command, psi },
        } => cmd_transfer_map(&cfg, pairs, command, *psi),
        Cmd::BuildPrimitives(args) => cmd_build_primitives(&cfg, args),
        Cmd::Plan(args) => cmd_plan(&cfg, args),
        Cmd::Simulate(args) => cmd_simulate(&cfg, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Mission(e)) => {
            eprintln!("{e:#}");
            ExitCode::from(EXIT_MISSION_FAILED)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_MISSION_FAILED)
        }
    }
}
