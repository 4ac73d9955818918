//! Command-line harness: simulate scenarios, run and tune the observers,
//! sweep noise levels and verify run manifests.
//!
//! Exit codes: 0 success, 1 run failure or manifest mismatch, 2 usage or
//! configuration error, 3 every tuner seed diverged.

pub mod config;
pub mod manifest;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use til_core::benchmark::BenchGains;
use til_core::exec::Execution;
use til_core::observer::{run_estimation, GainName, Param};
use til_core::report::{self, RmsRow};
use til_core::scenario::Experiment;
use til_core::sweep::run_sweep;
use til_core::tuner::{bo_minimize, BenchProblem, BoResult, TilProblem, BENCH_THETA};

use config::{Condition, Loaded, ObserverKind};
use manifest::{sha256_hex, FileDigest, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "til", version, about = "Twin-in-the-loop estimation experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the scenario seed; the tuner uses the same seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Concurrent jobs for sweeps and tuner seeds; 0 or absent uses all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Truth trajectory of the loaded vehicle.
    Simulate,
    /// Run the observer on every condition and tabulate rms errors.
    Estimate,
    /// Bayesian optimization of observer gains.
    Tune,
    /// rms error over a noise axis and repetition seeds.
    Sweep,
    /// Check a manifest's artifacts and re-run it.
    Report {
        manifest: PathBuf,
        /// Only check the files on disk, do not re-run.
        #[arg(long)]
        verify_only: bool,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Estimate => "estimate",
            Command::Tune => "tune",
            Command::Sweep => "sweep",
            Command::Report { .. } => "report",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        match s {
            "simulate" => Some(Command::Simulate),
            "estimate" => Some(Command::Estimate),
            "tune" => Some(Command::Tune),
            "sweep" => Some(Command::Sweep),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const FAILURE: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const DIVERGED: u8 = 3;

    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: Self::USAGE, message: message.into() }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        Self { code: Self::FAILURE, message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::failure(format!("{}: {e}", path.display()))
    }
}

impl From<til_core::Error> for CliError {
    fn from(e: til_core::Error) -> Self {
        use til_core::Error::*;
        let code = match e {
            Config(_) | InvalidParams(_) | Noise(_) => Self::USAGE,
            AllSeedsDiverged(_) => Self::DIVERGED,
            _ => Self::FAILURE,
        };
        Self { code, message: e.to_string() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Output directory collecting artifact digests.
struct Out {
    dir: PathBuf,
    artifacts: Vec<FileDigest>,
}

impl Out {
    fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), artifacts: Vec::new() })
    }

    fn write<F>(&mut self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> til_core::Result<()>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|e| CliError::io(&path, e))?;
        drop(w);
        self.artifacts.push(FileDigest::of(&path, name)?);
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |w| Ok(w.write_all(text.as_bytes())?))
    }
}

struct Ctx<'a> {
    global: &'a Global,
    loaded: Loaded,
    seed: u64,
    exec: Execution,
}

impl Ctx<'_> {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.global.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Run one invocation. Returns the manifest path for run commands.
pub fn run(cli: &Cli) -> Result<Option<PathBuf>, CliError> {
    if let Command::Report { manifest, verify_only } = &cli.command {
        return report_cmd(&cli.global, manifest, *verify_only).map(|_| None);
    }
    let path = cli.global.config.as_ref().ok_or_else(|| CliError::usage("--config is required"))?;
    let loaded = Loaded::read(path)?;
    let seed = cli.global.seed.unwrap_or(loaded.config.scenario.seed);
    let ctx = Ctx { global: &cli.global, loaded, seed, exec: Execution::from_jobs(cli.global.jobs.filter(|j| *j > 0)) };
    let mut out = Out::create(&cli.global.out)?;
    match cli.command {
        Command::Simulate => simulate(&ctx, &mut out)?,
        Command::Estimate => estimate(&ctx, &mut out)?,
        Command::Tune => tune(&ctx, &mut out)?,
        Command::Sweep => sweep(&ctx, &mut out)?,
        Command::Report { .. } => unreachable!(),
    }
    let gains_path = ctx.loaded.gains_path();
    let gains_sha256 = match &gains_path {
        Some(p) => Some(sha256_hex(&std::fs::read(p).map_err(|e| CliError::io(p, e))?)),
        None => None,
    };
    let manifest = RunManifest {
        command: cli.command.name().into(),
        config: ctx.loaded.path.clone(),
        config_sha256: sha256_hex(ctx.loaded.text.as_bytes()),
        gains: gains_path,
        gains_sha256,
        seed: ctx.seed,
        out: std::path::absolute(&out.dir).map_err(|e| CliError::io(&out.dir, e))?,
        artifacts: out.artifacts,
    };
    let path = manifest.write(&out.dir)?;
    ctx.info(format!("wrote {}", path.display()));
    Ok(Some(path))
}

fn experiment(cfg: &til_core::scenario::ScenarioConfig) -> Result<Experiment, CliError> {
    Experiment::run(cfg).map_err(|e| divergence_at(e, cfg.fs, "truth"))
}

/// Reword a divergence with its sample index.
fn divergence_at(e: til_core::Error, fs: f64, what: &str) -> CliError {
    match e {
        til_core::Error::Diverged { time, reason } => CliError::failure(format!(
            "{what} diverged at sample {} (t = {time:.3} s): {reason}",
            (time * fs).round() as u64
        )),
        e => e.into(),
    }
}

fn simulate(ctx: &Ctx, out: &mut Out) -> Result<(), CliError> {
    let exp = experiment(&ctx.loaded.scenario(ctx.seed))?;
    out.write("truth.csv", |w| report::write_truth_csv(w, &exp.truth))?;
    ctx.info(format!("simulated {} samples", exp.truth.len()));
    Ok(())
}

fn estimate(ctx: &Ctx, out: &mut Out) -> Result<(), CliError> {
    let gains = ctx.loaded.gains()?;
    let schedule = ctx.loaded.schedule()?;
    let est = &ctx.loaded.config.estimate;
    let initial = ctx.loaded.config.observer.initial;
    let base = [Condition { name: "base".into(), scenario: toml::Table::new() }];
    let conditions = if est.conditions.is_empty() { &base[..] } else { &est.conditions[..] };
    let mut rows = Vec::new();
    for (i, c) in conditions.iter().enumerate() {
        let cfg = ctx.loaded.condition(c, ctx.seed)?;
        let exp = experiment(&cfg)?;
        let run = run_estimation(&exp, &gains, &schedule, initial)
            .map_err(|e| divergence_at(e, cfg.fs, &format!("condition '{}': estimator", c.name)))?;
        let csv = format!("estimation_{i}.csv");
        out.write(&csv, |w| report::write_estimation_csv(w, &run, &exp.truth.sideslip()))?;
        for &p in &est.params {
            let row = RmsRow::from_run(&c.name, &run, p);
            ctx.info(format!("{}: {} rms {:.4} ({:.2} %)", c.name, p.name(), row.rms, row.rms_percent));
            rows.push(row);
            let col = 3 + Param::ALL.iter().position(|q| *q == p).expect("known param");
            let script = report::gnuplot_script(&csv, &format!("{} deviation, {}", p.name(), c.name), "SI", &[(col, p.name())]);
            out.text(&format!("estimation_{i}_{}.gp", p.name()), &script)?;
        }
        let script = report::gnuplot_script(&csv, &format!("sideslip, {}", c.name), "rad", &[(9, "estimate"), (10, "truth")]);
        out.text(&format!("sideslip_{i}.gp"), &script)?;
    }
    out.write("rms.csv", |w| report::write_rms_table(w, &rows))
}

fn tune(ctx: &Ctx, out: &mut Out) -> Result<(), CliError> {
    let exp = experiment(&ctx.loaded.scenario(ctx.seed))?;
    let t = &ctx.loaded.config.tune;
    let initial = ctx.loaded.config.observer.initial;
    let mut bo = t.bo.clone();
    bo.seed = ctx.seed;
    bo.execution = ctx.exec;
    let check = |bo: &til_core::tuner::BoConfig, dims: usize| {
        if bo.bounds.len() != dims {
            return Err(CliError::usage(format!("tune.bo.bounds has {} entries for {dims} gains", bo.bounds.len())));
        }
        Ok(())
    };
    let (names, result, gains_toml): (Vec<GainName>, BoResult, String) = match t.observer {
        ObserverKind::Til => {
            let problem = TilProblem {
                exp: &exp,
                base: ctx.loaded.gains()?,
                names: t.names(),
                schedule: ctx.loaded.schedule()?,
                initial,
            };
            if bo.bounds.is_empty() {
                bo.bounds = problem.bounds(&t.gain_bounds());
            }
            check(&bo, problem.names.len())?;
            let r = bo_minimize(|th| problem.evaluate(th), &bo)?;
            let g = problem.gains(&r.best_evaluated);
            (problem.names.clone(), r, toml::to_string(&g).expect("gains serialize"))
        }
        ObserverKind::Benchmark => {
            let problem = BenchProblem::new(&exp, initial.mass)?;
            if bo.bounds.is_empty() {
                bo.bounds = BenchProblem::bounds(&t.gain_bounds());
            }
            check(&bo, BENCH_THETA.len())?;
            let r = bo_minimize(|th| problem.evaluate(th), &bo)?;
            let g = BenchGains::from_theta(&r.best_evaluated);
            (BENCH_THETA.to_vec(), r, toml::to_string(&g).expect("gains serialize"))
        }
    };
    let names: Vec<String> = names.iter().map(|n| n.as_str().to_string()).collect();
    out.write("history.csv", |w| report::write_history_csv(w, &names, &result.history))?;
    out.write("theta.csv", |w| {
        report::write_theta_table(
            w,
            &names,
            &bo.bounds,
            &[("best_evaluated", &result.best_evaluated), ("best_predicted", &result.best_predicted)],
        )
    })?;
    out.text("gains.toml", &gains_toml)?;
    ctx.info(format!("best objective {:.6} after {} evaluations", result.best_value, result.history.len()));
    Ok(())
}

fn sweep(ctx: &Ctx, out: &mut Out) -> Result<(), CliError> {
    let spec = ctx.loaded.config.sweep.as_ref().ok_or_else(|| CliError::usage("config has no [sweep] section"))?;
    let rows = run_sweep(
        &ctx.loaded.scenario(ctx.seed),
        spec,
        &ctx.loaded.gains()?,
        &ctx.loaded.schedule()?,
        ctx.loaded.config.observer.initial,
        ctx.exec,
    )?;
    out.write("sweep.csv", |w| report::write_sweep_csv(w, spec.axis, spec.param, &rows))?;
    for (v, m) in til_core::sweep::mean_by_value(&rows) {
        ctx.info(format!("{} = {v}: mean {} rms {m:.2} %", spec.axis.name(), spec.param.name()));
    }
    Ok(())
}

fn report_cmd(global: &Global, path: &Path, verify_only: bool) -> Result<(), CliError> {
    let m = manifest::RunManifest::read(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let say = |s: String| {
        if !global.quiet {
            println!("{s}");
        }
    };
    let on_disk = m.mismatches(dir);
    for a in &m.artifacts {
        say(format!("{} {}", if on_disk.contains(&a.file) { "changed      " } else { "ok           " }, a.file));
    }
    let mut failed = !on_disk.is_empty();
    if !verify_only {
        let text = std::fs::read(&m.config).map_err(|e| CliError::io(&m.config, e))?;
        if sha256_hex(&text) != m.config_sha256 {
            return Err(CliError::failure(format!("{} changed since the run", m.config.display())));
        }
        if let (Some(g), Some(sha)) = (&m.gains, &m.gains_sha256) {
            let text = std::fs::read(g).map_err(|e| CliError::io(g, e))?;
            if &sha256_hex(&text) != sha {
                return Err(CliError::failure(format!("{} changed since the run", g.display())));
            }
        }
        let command = Command::from_name(&m.command)
            .ok_or_else(|| CliError::usage(format!("unknown command '{}' in manifest", m.command)))?;
        let tmp = std::env::temp_dir().join(format!("til-rerun-{}-{}", std::process::id(), sha256_hex(path.to_string_lossy().as_bytes())));
        let cli = Cli {
            global: Global {
                config: Some(m.config.clone()),
                seed: Some(m.seed),
                out: tmp.clone(),
                quiet: true,
                jobs: global.jobs,
            },
            command,
        };
        let result = run(&cli).and_then(|p| RunManifest::read(&p.expect("run commands write a manifest")));
        let _ = std::fs::remove_dir_all(&tmp);
        let again = result?;
        let names = |v: &[FileDigest]| v.iter().map(|a| a.file.clone()).collect::<Vec<_>>();
        if names(&again.artifacts) != names(&m.artifacts) {
            say("re-run wrote a different set of files".into());
            failed = true;
        }
        for (a, b) in m.artifacts.iter().zip(&again.artifacts) {
            let same = a == b;
            failed |= !same;
            say(format!("{} {}", if same { "rerun ok     " } else { "rerun differs" }, a.file));
        }
    }
    if failed {
        Err(CliError::failure("manifest check failed"))
    } else {
        say("manifest reproduced".into());
        Ok(())
    }
}
