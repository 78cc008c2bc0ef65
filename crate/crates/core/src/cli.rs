//! Command-line front end.
//!
//! Exit codes: 0 success or stable, 1 unreadable input or output, 2 invalid
//! input, 3 unstable, 4 inconclusive.

use crate::diffeq::{trajectory, DirectSolver};
use crate::error::{Error, Result};
use crate::io::{
    self, read_json, write_energy_csv, write_json, write_table_csv, write_trajectory_csv, DelaySpec, DifferenceConfig,
    FamilyConfig, NetworkConfig, TransportConfig, WaveInitial,
};
use crate::rational::{format_q, parse_q, qi, rational_gcd, to_f64, Q};
use crate::ratlattice::{class_members, integer_kernel, LevelFrame};
use crate::scalar::C64;
use crate::signal::Piecewise;
use crate::spectral::{stability_verdict_delays, Verdict, SEARCH_CAP};
use crate::transport::{simulate_transport, TransportGrid, TransportSystem};
use crate::wavenet::{
    classify, periodic_witness, random_state, simulate_wave, stability_verdict_wave, witness_paths, DampingSet,
    WaveRun, WaveState,
};
use crate::Tolerances;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_UNSTABLE: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

/// Environment variable bounding the number of worker threads.
pub const THREADS_ENV: &str = "NETWAVE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "netwave", version, about = "Delay equations, transport and wave networks: simulation and stability")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: RunOptions,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Integer relations and equivalence classes of a delay vector.
    Lattice,
    /// Simulate a system and write trajectories.
    Simulate {
        #[arg(value_enum)]
        target: SimTarget,
    },
    /// Decide stability under arbitrary switching.
    Stability {
        #[arg(value_enum)]
        target: StabilityTarget,
    },
    /// Run a list of configurations in parallel.
    Batch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimTarget {
    Difference,
    Transport,
    Wave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityTarget {
    Delays,
    Wave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunOptions {
    /// Input configuration file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Grid step as a rational `p/q`.
    #[arg(long, global = true, value_parser = parse_positive_q)]
    #[serde(serialize_with = "opt_q")]
    pub grid_step: Option<Q>,
    /// Time horizon (or level window for stability) as a rational `p/q`.
    #[arg(long, global = true, value_parser = parse_positive_q)]
    #[serde(serialize_with = "opt_q")]
    pub horizon: Option<Q>,
    /// Largest number of assignments explored by exhaustive searches.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub cap: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, global = true, value_parser = parse_positive_f64)]
    pub tol_algebraic: Option<f64>,
    #[arg(long, global = true, value_parser = parse_positive_f64)]
    pub tol_simulation: Option<f64>,
    #[arg(long, global = true, value_parser = parse_positive_f64)]
    pub tol_spectral: Option<f64>,
}

fn opt_q<S: serde::Serializer>(x: &Option<Q>, s: S) -> std::result::Result<S::Ok, S::Error> {
    x.as_ref().map(format_q).serialize(s)
}

fn parse_positive_q(s: &str) -> std::result::Result<Q, String> {
    let x = parse_q(s).map_err(|e| e.to_string())?;
    if x > Q::from_integer(0.into()) {
        Ok(x)
    } else {
        Err("must be positive".into())
    }
}

fn parse_positive_f64(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err("must be a positive number".into()),
    }
}

impl RunOptions {
    pub fn tolerances(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            algebraic: self.tol_algebraic.unwrap_or(d.algebraic),
            simulation: self.tol_simulation.unwrap_or(d.simulation),
            spectral: self.tol_spectral.unwrap_or(d.spectral),
        }
    }

    fn config_path(&self) -> Result<&Path> {
        self.config.as_deref().ok_or_else(|| Error::invalid("--config is required"))
    }

    fn out_dir(&self) -> Result<&Path> {
        let out = self.out.as_deref().ok_or_else(|| Error::invalid("--out is required"))?;
        std::fs::create_dir_all(out)?;
        Ok(out)
    }
}

/// The resolved run description embedded in every JSON output.
#[derive(Debug, Clone, Serialize)]
struct Resolved<'a> {
    command: String,
    options: &'a RunOptions,
    tolerances: Tolerances,
    config: Value,
}

fn resolved<'a>(command: &str, options: &'a RunOptions) -> Result<Resolved<'a>> {
    let config = match &options.config {
        Some(p) => read_json::<Value>(p)?,
        None => Value::Null,
    };
    Ok(Resolved { command: command.to_string(), options, tolerances: options.tolerances(), config })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Stable,
    Unstable,
    Inconclusive,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Done | Outcome::Stable => EXIT_OK,
            Outcome::Unstable => EXIT_UNSTABLE,
            Outcome::Inconclusive => EXIT_INCONCLUSIVE,
        }
    }
}

pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

/// Result of one command: the exit outcome and the JSON report.
pub struct Report {
    pub outcome: Outcome,
    pub json: Value,
}

fn command_name(c: &Command) -> String {
    match c {
        Command::Lattice => "lattice".into(),
        Command::Simulate { target } => format!("simulate-{}", format!("{target:?}").to_lowercase()),
        Command::Stability { target } => format!("stability-{}", format!("{target:?}").to_lowercase()),
        Command::Batch => "batch".into(),
    }
}

pub fn execute(command: &Command, options: &RunOptions) -> Result<Report> {
    let name = command_name(command);
    let run = resolved(&name, options)?;
    let run_json = serde_json::to_value(&run)?;
    let (outcome, mut body) = match command {
        Command::Lattice => (Outcome::Done, cmd_lattice(options)?),
        Command::Simulate { target: SimTarget::Difference } => (Outcome::Done, simulate_difference(options)?),
        Command::Simulate { target: SimTarget::Transport } => (Outcome::Done, simulate_transport_cmd(options)?),
        Command::Simulate { target: SimTarget::Wave } => (Outcome::Done, simulate_wave_cmd(options)?),
        Command::Stability { target: StabilityTarget::Delays } => stability_delays(options)?,
        Command::Stability { target: StabilityTarget::Wave } => stability_wave(options)?,
        Command::Batch => (Outcome::Done, batch(options)?),
    };
    body["run"] = run_json;
    if let Some(out) = &options.out {
        std::fs::create_dir_all(out)?;
        let file = match command {
            Command::Simulate { .. } => "metadata.json",
            Command::Stability { .. } => "verdict.json",
            Command::Lattice => "lattice.json",
            Command::Batch => "batch.json",
        };
        write_json(&out.join(file), &body)?;
    }
    Ok(Report { outcome, json: body })
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    configure_threads();
    match execute(&cli.command, &cli.options) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report.json).unwrap_or_default());
            report.outcome.code()
        }
        Err(e) => {
            eprintln!("netwave: {e}");
            error_code(&e)
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|s| s.parse::<usize>().ok()).filter(|&n| n > 0) {
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn cmd_lattice(options: &RunOptions) -> Result<Value> {
    let spec: DelaySpec = read_json(options.config_path()?)?;
    let delays = spec.build()?;
    let kernel = integer_kernel(&spec.b)?;
    let summary = if kernel.is_empty() { "trivial lattice".to_string() } else { format!("kernel of rank {}", kernel.len()) };
    let mut body = json!({ "summary": summary, "kernel": kernel });
    if delays.is_numeric() {
        let frame = LevelFrame::own(&delays)?;
        let upper = options.horizon.clone().unwrap_or_else(|| frame.max_delay() * qi(3));
        let classes: Vec<Value> = frame
            .classes_up_to(&upper)
            .into_iter()
            .map(|(key, level)| {
                let members = class_members(&key, &delays);
                json!({ "key": key.0, "level": format_q(&level), "members": members })
            })
            .collect();
        body["upper"] = json!(format_q(&upper));
        body["classes"] = Value::Array(classes);
    }
    Ok(body)
}

fn default_step(lengths: &[Q]) -> Result<Q> {
    let g = rational_gcd(lengths).ok_or_else(|| Error::invalid("no positive lengths"))?;
    Ok(g / qi(16))
}

fn steps_for(horizon: &Q, step: &Q) -> Result<usize> {
    let n = (horizon / step).ceil().to_integer();
    usize::try_from(n).map_err(|_| Error::OutOfRange("too many time steps".into()))
}

fn simulate_difference(options: &RunOptions) -> Result<Value> {
    let cfg: DifferenceConfig = read_json(options.config_path()?)?;
    let delays = cfg.delays.build()?;
    let l = delays.require_numeric().map(|_| delays.delays().expect("numeric"))?;
    let l_max = delays.max_delay().expect("numeric");
    let signal = io::switching_signal(&cfg.signal)?;
    let u0 = cfg.initial.build(&l_max)?;
    let step = match &options.grid_step {
        Some(s) => s.clone(),
        None => delays.min_delay().expect("numeric") / qi(16),
    };
    let horizon = options.horizon.clone().unwrap_or_else(|| &l_max * qi(10));
    let steps = steps_for(&horizon, &step)?;
    let times: Vec<Q> = (0..=steps).map(|k| &step * qi(k as i64)).collect();
    let mut solver = DirectSolver::new(&u0, &signal, &l)?;
    let traj = trajectory(&mut solver, &times);
    let out = options.out_dir()?;
    match options.format {
        Format::Csv => write_trajectory_csv(&out.join("trajectory.csv"), &traj.times, &traj.values)?,
        Format::Json => write_json(
            &out.join("trajectory.json"),
            &json!({
                "time": traj.times.iter().map(to_f64).collect::<Vec<_>>(),
                "values": traj.values.iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()).collect::<Vec<_>>(),
            }),
        )?,
    }
    Ok(json!({
        "delays": l.iter().map(format_q).collect::<Vec<_>>(),
        "horizon": format_q(&horizon),
        "grid_step": format_q(&step),
        "method": traj.method,
        "samples": traj.times.len(),
    }))
}

fn write_fields(out: &Path, format: Format, header: &[&str], rows: Vec<Vec<f64>>, energy: (&[f64], &[f64])) -> Result<()> {
    match format {
        Format::Csv => {
            write_table_csv(&out.join("field.csv"), header, &rows)?;
            write_energy_csv(&out.join("energy.csv"), energy.0, energy.1)
        }
        Format::Json => {
            write_json(&out.join("field.json"), &json!({ "columns": header, "rows": rows }))?;
            write_json(&out.join("energy.json"), &json!({ "time": energy.0, "energy": energy.1 }))
        }
    }
}

fn simulate_transport_cmd(options: &RunOptions) -> Result<Value> {
    let cfg: TransportConfig = read_json(options.config_path()?)?;
    let transmission = cfg.transmission.build(io::matrix)?;
    let system = TransportSystem::new(cfg.lengths.clone(), transmission)?;
    let step = match &options.grid_step {
        Some(s) => s.clone(),
        None => default_step(&cfg.lengths)?,
    };
    let grid = TransportGrid::new(&cfg.lengths, &step)?;
    let l_max = cfg.lengths.iter().max().cloned().expect("validated");
    let horizon = options.horizon.clone().unwrap_or_else(|| l_max * qi(10));
    let steps = steps_for(&horizon, &step)?;
    let run = simulate_transport(&system, &cfg.profiles(grid.cells())?, &step, steps)?;
    let h = grid.h();
    let mut rows = Vec::new();
    for m in 0..=steps {
        for (i, field) in run.fields(m).into_iter().enumerate() {
            for (x, z) in grid.centres(i).into_iter().zip(field) {
                rows.push(vec![m as f64 * h, i as f64, x, z.re, z.im]);
            }
        }
    }
    let times: Vec<f64> = (0..=steps).map(|m| m as f64 * h).collect();
    let energies: Vec<f64> = (0..=steps).map(|m| 2.0 * run.half_energy(m)).collect();
    write_fields(options.out_dir()?, options.format, &["time", "component", "x", "re", "im"], rows, (&times, &energies))?;
    Ok(json!({
        "lengths": cfg.lengths.iter().map(format_q).collect::<Vec<_>>(),
        "horizon": format_q(&horizon),
        "grid_step": format_q(&step),
        "steps": steps,
        "final_norm_squared": energies.last(),
    }))
}

fn wave_rows(run: &WaveRun, grid: &TransportGrid) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for m in 0..=run.steps() {
        let state = run.state_at(m)?;
        let t = m as f64 * run.h();
        for (j, (du, v)) in state.du().iter().zip(state.v()).enumerate() {
            for (k, x) in grid.centres(j).into_iter().enumerate() {
                rows.push(vec![t, j as f64, x, du[k].re, du[k].im, v[k].re, v[k].im]);
            }
        }
    }
    Ok(rows)
}

fn simulate_wave_cmd(options: &RunOptions) -> Result<Value> {
    let cfg: NetworkConfig = read_json(options.config_path()?)?;
    let mut net = cfg.network()?;
    let damping = cfg.damping()?.unwrap_or_else(|| Piecewise::constant(vec![Q::from_integer(0.into()); net.damped().len()]));
    let step = match &options.grid_step {
        Some(s) => s.clone(),
        None => default_step(&net.edge_lengths())?,
    };
    let mut path = None;
    let state = match cfg.initial.clone().unwrap_or(WaveInitial::Random) {
        WaveInitial::Random => random_state(&net, &step, &mut ChaCha8Rng::seed_from_u64(options.seed))?,
        WaveInitial::Witness => {
            let set = DampingSet::Finite(damping.values().to_vec());
            let first = witness_paths(&net, &set)?.into_iter().next().ok_or(Error::NoWitness)?;
            let w = periodic_witness(&net, &first, &step)?;
            net = w.network;
            path = Some(first);
            w.state
        }
        WaveInitial::Samples { du, v } => {
            let conv = |x: &Vec<Vec<io::Entry>>| x.iter().map(|r| r.iter().map(|e| e.value()).collect()).collect::<Vec<Vec<C64>>>();
            WaveState::new(&net, &step, conv(&du), conv(&v))?
        }
    };
    let l_max = net.edge_lengths().into_iter().max().expect("edges");
    let horizon = options.horizon.clone().unwrap_or_else(|| l_max * qi(10));
    let steps = steps_for(&horizon, &step)?;
    let tol = options.tolerances();
    let residual = state.compatibility_residual(&net);
    if residual > tol.simulation {
        return Err(Error::NotInConstraintSpace { residual, tol: tol.simulation });
    }
    let run = simulate_wave(&state, &net, &damping, steps)?;
    let grid = TransportGrid::new(&net.edge_lengths(), &step)?;
    let header = ["time", "edge", "x", "re(du)", "im(du)", "re(v)", "im(v)"];
    write_fields(options.out_dir()?, options.format, &header, wave_rows(&run, &grid)?, (&run.times(), run.energies()))?;
    Ok(json!({
        "lengths": net.edge_lengths().iter().map(format_q).collect::<Vec<_>>(),
        "horizon": format_q(&horizon),
        "grid_step": format_q(&step),
        "steps": steps,
        "initial_energy": run.energies()[0],
        "final_energy": run.energies().last(),
        "energy_identity_residual": crate::wavenet::energy_identity_residual(&run),
        "witness_path": path,
    }))
}

/// Windows tried, in multiples of `L_max`, when no horizon is given: the
/// widest one whose exhaustive search fits under the cap is used.
const DEFAULT_WINDOWS: [i64; 6] = [40, 30, 20, 14, 10, 6];

fn stability_delays(options: &RunOptions) -> Result<(Outcome, Value)> {
    let cfg: FamilyConfig = read_json(options.config_path()?)?;
    let (delays, family) = cfg.build()?;
    let l_max = delays.max_delay().ok_or_else(|| Error::invalid("delays need generator values"))?;
    let cap = options.cap.unwrap_or(SEARCH_CAP);
    let windows: Vec<Q> = match &options.horizon {
        Some(h) => vec![h.clone()],
        None => DEFAULT_WINDOWS.iter().map(|&k| &l_max * qi(k)).collect(),
    };
    let mut last = None;
    for x_max in windows {
        match stability_verdict_delays(&delays, &family, &x_max, cap, options.tolerances().spectral) {
            Ok(v) => {
                let outcome = match v.verdict {
                    Verdict::Stable => Outcome::Stable,
                    Verdict::Unstable => Outcome::Unstable,
                    Verdict::Inconclusive => Outcome::Inconclusive,
                };
                return Ok((outcome, json!({ "x_max": format_q(&x_max), "verdict": v })));
            }
            Err(e @ Error::SearchCap { .. }) => last = Some((x_max, e)),
            Err(e) => return Err(e),
        }
    }
    let (x_max, e) = last.expect("at least one window");
    Ok((
        Outcome::Inconclusive,
        json!({ "x_max": format_q(&x_max), "verdict": { "verdict": Verdict::Inconclusive, "reason": e.to_string() } }),
    ))
}

fn damping_set(cfg: &NetworkConfig) -> Result<DampingSet> {
    if let Some(set) = &cfg.damping_set {
        return Ok(set.clone());
    }
    match cfg.damping()? {
        Some(signal) => Ok(DampingSet::Finite(signal.values().to_vec())),
        None => Err(Error::invalid("a damping_set or damping signal is required")),
    }
}

fn stability_wave(options: &RunOptions) -> Result<(Outcome, Value)> {
    let cfg: NetworkConfig = read_json(options.config_path()?)?;
    let net = cfg.network()?;
    let set = damping_set(&cfg)?;
    let verdict = stability_verdict_wave(&net, &set)?;
    let classes = classify(&net)?;
    let mut body = json!({
        "stable": verdict.stable,
        "reasons": verdict.reasons,
        "is_tree": classes.is_tree,
        "undamped": net.undamped().iter().map(|&q| net.names()[q].clone()).collect::<Vec<_>>(),
    });
    if verdict.stable {
        return Ok((Outcome::Stable, body));
    }
    let Some(path) = witness_paths(&net, &set)?.into_iter().next() else {
        body["witness"] = Value::Null;
        return Ok((Outcome::Unstable, body));
    };
    let step = options.grid_step.clone().unwrap_or_else(|| Q::new(1.into(), 16.into()));
    let w = periodic_witness(&net, &path, &step)?;
    let infima = set.infima(net.damped().len())?;
    let periods = 5;
    let steps = steps_for(&qi(periods), &step)?;
    let run = simulate_wave(&w.state, &w.network, &Piecewise::constant(infima), steps)?;
    let e0 = run.energies()[0];
    let drift = run.energies().iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    body["witness"] = json!({
        "path": path.vertices.iter().map(|&q| net.names()[q].clone()).collect::<Vec<_>>(),
        "kind": path.kind,
        "length_scale": format_q(&w.scale),
        "periods": periods,
        "energy": e0,
        "max_energy_drift": drift,
    });
    Ok((Outcome::Unstable, body))
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchRun {
    command: String,
    config: PathBuf,
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchConfig {
    runs: Vec<BatchRun>,
}

fn parse_command(name: &str) -> Result<Command> {
    Ok(match name {
        "lattice" => Command::Lattice,
        "simulate-difference" => Command::Simulate { target: SimTarget::Difference },
        "simulate-transport" => Command::Simulate { target: SimTarget::Transport },
        "simulate-wave" => Command::Simulate { target: SimTarget::Wave },
        "stability-delays" => Command::Stability { target: StabilityTarget::Delays },
        "stability-wave" => Command::Stability { target: StabilityTarget::Wave },
        other => return Err(Error::invalid(format!("unknown batch command {other:?}"))),
    })
}

fn batch(options: &RunOptions) -> Result<Value> {
    let path = options.config_path()?;
    let cfg: BatchConfig = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let jobs = cfg
        .runs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let command = parse_command(&r.command)?;
            let mut opts = options.clone();
            opts.config = Some(base.join(&r.config));
            opts.out = options.out.as_ref().map(|o| o.join(format!("{i:03}-{}", r.command)));
            Ok((command, opts))
        })
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<Value> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, (command, opts))| match execute(command, opts) {
            Ok(report) => json!({ "index": i, "command": command_name(command), "exit_code": report.outcome.code(), "report": report.json }),
            Err(e) => json!({ "index": i, "command": command_name(command), "exit_code": error_code(&e), "error": e.to_string() }),
        })
        .collect();
    Ok(json!({ "runs": results }))
}
