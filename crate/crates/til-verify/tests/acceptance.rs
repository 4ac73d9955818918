//! Acceptance criteria, one line per criterion.
//!
//! Run with `cargo test -p til-verify --test acceptance`; pass criterion numbers
//! as arguments to run a subset.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use til_core::benchmark::{run_benchmark, BenchGains};
use til_core::exec::Execution;
use til_core::observer::{
    run_estimation, Estimator, GainBounds, GainSet, MassLaw, Param, StageKind, StageSchedule, DEFAULT_YAW_GATE,
};
use til_core::rigid_body::{
    combined_inertia, perturbed_params, total_mass, LoadConfig, PointMass, VehicleParams,
};
use til_core::scenario::metrics::rms;
use til_core::scenario::{Experiment, NoiseSettings, ScenarioConfig, ScenarioKind};
use til_core::sweep::{mean_by_value, run_sweep, SweepAxis, SweepSpec};
use til_core::tuner::{bo_minimize, objective::score, BenchProblem, BoConfig, Evaluation, TilProblem};
use til_cli::{run, Cli};
use til_core::twin::{DriverInput, ParamDeviation, Simulator, Twin, TwinConfig, TwinState};
use til_verify::{branin, branin_distance, brute_force_inertia, BRANIN_BOX};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// ---------------------------------------------------------------- 1

fn criterion_1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (a, b) = (rng.random_range(300.0..1500.0), rng.random_range(300.0..1500.0));
        let base = VehicleParams {
            mass: rng.random_range(800.0..3000.0),
            cm: [rng.random_range(-2.0..-0.5), rng.random_range(-0.1..0.1), rng.random_range(0.3..0.9)],
            jxx: a,
            jyy: b + rng.random_range(0.0..a),
            jzz: b + rng.random_range(a * 0.5..a),
            ..VehicleParams::default()
        };
        let loads: Vec<PointMass> = (0..rng.random_range(1..9))
            .map(|_| PointMass {
                mass: rng.random_range(1.0..150.0),
                position: [rng.random_range(-4.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..1.5)],
            })
            .collect();
        let fast = combined_inertia(&base, &LoadConfig::from_point_masses(loads.iter().copied())).unwrap();
        let slow = brute_force_inertia(&base, &loads);
        for k in 0..3 {
            worst = worst.max(rel(fast[k], slow[k]));
        }
    }
    let m = total_mass(&VehicleParams::default(), &LoadConfig::default_passengers());
    verdict(worst <= 1e-12 && m == 2480.8, format!("max rel err {worst:.1e} over 1000 draws, M_tot = {m} kg"))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Verdict {
    let p = perturbed_params(&VehicleParams::default(), &LoadConfig::default_passengers()).unwrap();
    let reference = [(p.mass, 2480.8), (p.jxx, 901.9), (p.jyy, 4394.4), (p.jzz, 4760.0)];
    let worst = reference.iter().map(|(a, b)| rel(*a, *b)).fold(0.0, f64::max);
    verdict(
        worst <= 0.01,
        format!("M {:.1}, Jxx {:.1}, Jyy {:.1}, Jzz {:.1}; worst rel dev {:.2} %", p.mass, p.jxx, p.jyy, p.jzz, 100.0 * worst),
    )
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Verdict {
    let mut cfg = ScenarioConfig::preset(ScenarioKind::Urban);
    cfg.noise = NoiseSettings::with_snr(10.0);
    let exp = Experiment::run(&cfg).unwrap();
    let mut out = Vec::new();
    for dm0 in [-200.0, 0.0, 200.0] {
        let initial = ParamDeviation { mass: dm0, ..Default::default() };
        let run = run_estimation(&exp, &GainSet::recommended(), &StageSchedule::only(StageKind::Mass), initial).unwrap();
        out.push(run.rms_percent(Param::Mass));
    }
    let worst = out.iter().copied().fold(0.0, f64::max);
    let target = if worst <= 2.0 { "met" } else { "not met" };
    verdict(
        worst <= 10.0,
        format!("rms% from -200/0/+200 kg: {:.2}/{:.2}/{:.2} (bound 10, target 2 {target})", out[0], out[1], out[2]),
    )
}

// ---------------------------------------------------------------- 4

/// Final mass deviation after a 10 s coast-down from 20 m/s.
fn coast_down(law: MassLaw) -> (f64, f64) {
    let cfg = TwinConfig::default();
    let nominal = VehicleParams::default();
    let truth = perturbed_params(&nominal, &LoadConfig::default_passengers()).unwrap();
    let dt = 0.01;
    let mut real = Twin::new(truth, cfg, TwinState::rolling(20.0, &cfg)).unwrap();
    let twin = Twin::new(nominal, cfg, TwinState::rolling(20.0, &cfg)).unwrap();
    let gains = GainSet { mass_law: law, ..GainSet::recommended() };
    let mut est = Estimator::new(twin, ParamDeviation::default(), gains, StageSchedule::only(StageKind::Mass), dt).unwrap();
    let u = DriverInput::default();
    let mut dm = 0.0;
    for _ in 0..1000 {
        let y = real.readout(&u);
        assert!(y.ax < 0.0, "not a coast-down");
        dm = est.update(&u, &y).unwrap().delta.mass;
        real.step(&u, dt).unwrap();
    }
    (dm, truth.mass - nominal.mass)
}

fn criterion_4() -> Verdict {
    let (signed, truth) = coast_down(MassLaw::Signed);
    let (unsigned, _) = coast_down(MassLaw::Unsigned);
    verdict(
        signed > 0.0 && signed < truth && unsigned < 0.0,
        format!("from 0 kg towards +{truth:.1} kg: signed law {signed:+.2} kg, unsigned law {unsigned:+.2} kg"),
    )
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Verdict {
    let mut cfg = ScenarioConfig::preset(ScenarioKind::Urban);
    cfg.noise = NoiseSettings::with_snr(10.0);
    let exp = Experiment::run(&cfg).unwrap();
    let initial = ParamDeviation { mass: -200.0, ..Default::default() };
    let run = run_estimation(&exp, &GainSet::recommended(), &StageSchedule::only(StageKind::Mass), initial).unwrap();
    let mut gated = 0;
    let mut moved = 0;
    let mut prev = initial.mass;
    for (l, y) in run.logs.iter().zip(&exp.observations.measurements) {
        if y.wz.abs() > DEFAULT_YAW_GATE {
            gated += 1;
            if l.delta.mass.to_bits() != prev.to_bits() {
                moved += 1;
            }
        }
        prev = l.delta.mass;
    }
    verdict(gated > 100 && moved == 0, format!("{gated} gated samples, {moved} with a mass update"))
}

// ---------------------------------------------------------------- 6

fn inertia_run(cfg: &ScenarioConfig, stage: StageKind, p: Param) -> f64 {
    let exp = Experiment::run(cfg).unwrap();
    let run = run_estimation(&exp, &GainSet::recommended(), &StageSchedule::only(stage), ParamDeviation::default()).unwrap();
    run.rms_percent(p)
}

fn criterion_6() -> Verdict {
    let mut steer = ScenarioConfig::preset(ScenarioKind::SweptSteer);
    steer.prior.mass = true;
    let rx = inertia_run(&steer, StageKind::RollYawInertia, Param::Jxx);
    let rz = inertia_run(&steer, StageKind::RollYawInertia, Param::Jzz);
    steer.noise = NoiseSettings::with_snr(10.0);
    let nx = inertia_run(&steer, StageKind::RollYawInertia, Param::Jxx);
    let nz = inertia_run(&steer, StageKind::RollYawInertia, Param::Jzz);
    let mut pitch = ScenarioConfig::preset(ScenarioKind::ConstantSpeedRoughRoad);
    pitch.noise = NoiseSettings::with_snr(10.0);
    pitch.noise.road_eps = 0.1;
    pitch.prior.cm = false;
    let jy = inertia_run(&pitch, StageKind::PitchInertia, Param::Jyy);
    let parts = [rx <= 2.0 && rz <= 2.0, nz <= 10.0 && nx < 50.0, jy <= 15.0];
    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    verdict(
        parts.iter().all(|p| *p),
        format!(
            "noiseless Jxx {rx:.2} / Jzz {rz:.2} % [{}]; snr 10 Jxx {nx:.2} / Jzz {nz:.2} % [{}]; pitch Jyy {jy:.1} % [{}]",
            mark(parts[0]),
            mark(parts[1]),
            mark(parts[2])
        ),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Verdict {
    let gains = GainSet::recommended();
    let urban = ScenarioConfig::preset(ScenarioKind::Urban);
    let spec = SweepSpec { axis: SweepAxis::Snr, values: vec![5.0, 7.5, 10.0, 15.0, 20.0], repetitions: 5, param: Param::Mass };
    let mass = mean_by_value(
        &run_sweep(&urban, &spec, &gains, &StageSchedule::only(StageKind::Mass), ParamDeviation::default(), Execution::default())
            .unwrap(),
    );
    let mass_ok = mass.len() == 5 && mass.windows(2).all(|w| w[1].1 <= 1.2 * w[0].1);

    let mut rough = ScenarioConfig::preset(ScenarioKind::ConstantSpeedRoughRoad);
    rough.noise = NoiseSettings::with_snr(10.0);
    rough.prior.cm = false;
    let spec = SweepSpec { axis: SweepAxis::RoadEps, values: vec![0.0, 0.05, 0.1, 0.2, 0.3], repetitions: 5, param: Param::Jyy };
    let jyy = mean_by_value(
        &run_sweep(&rough, &spec, &gains, &StageSchedule::only(StageKind::PitchInertia), ParamDeviation::default(), Execution::default())
            .unwrap(),
    );
    let at = |v: f64| jyy.iter().find(|(x, _)| *x == v).map(|p| p.1).unwrap_or(f64::NAN);
    let jyy_ok = at(0.2) >= 1.5 * at(0.1) && at(0.3) >= 1.5 * at(0.1);
    let fmt = |xs: &[(f64, f64)]| xs.iter().map(|(_, m)| format!("{m:.1}")).collect::<Vec<_>>().join("/");
    verdict(
        mass_ok && jyy_ok,
        format!("mass rms% over snr 5..20: {}; Jyy rms% over eps 0..0.3: {}", fmt(&mass), fmt(&jyy)),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Verdict {
    let mut cfg = ScenarioConfig::preset(ScenarioKind::ConstantSpeedRoughRoad);
    cfg.noise.road_eps = 0.1;
    let exp = Experiment::run(&cfg).unwrap();
    let err: Vec<f64> =
        exp.observations.inputs.iter().zip(&exp.truth.inputs).map(|(o, t)| o.road_front - t.road_front).collect();
    let r = rms(&err);
    verdict((0.001..=0.003).contains(&r), format!("road corruption rms {:.3} cm (0.2 cm +/- 50 %)", 100.0 * r))
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Verdict {
    let bounds = BRANIN_BOX.to_vec();
    let diag = bounds.iter().map(|(lo, hi)| (hi - lo) * (hi - lo)).sum::<f64>().sqrt();
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    for seed in 1..=10 {
        let cfg = BoConfig::new(bounds.clone(), 40, 10, seed);
        let r = bo_minimize(|x: &[f64]| Evaluation::finite(branin(x)), &cfg).unwrap();
        worst = worst.max(branin_distance(&r.best_evaluated) / diag);
        monotone &= r.history.windows(2).all(|w| w[1].incumbent <= w[0].incumbent);
    }
    verdict(
        worst <= 0.05 && monotone,
        format!("Branin, 40 evaluations: worst distance {:.2} % of the diagonal over 10 seeds, incumbent monotone {monotone}", 100.0 * worst),
    )
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Verdict {
    let mut cfg = ScenarioConfig::preset(ScenarioKind::LaneChangeBraking);
    cfg.truth.drag_scale = 1.3;
    cfg.truth.tire_stiffness_scale = 0.85;
    cfg.noise = NoiseSettings::with_snr(10.0);
    let exp = Experiment::run(&cfg).unwrap();
    let bounds = GainBounds::default();
    let (evals, n_seed) = (40, 13);

    let til = TilProblem::mass_and_sideslip(&exp, 0.0);
    let til_bo = bo_minimize(|t| til.evaluate(t), &BoConfig::new(til.bounds(&bounds), evals, n_seed, 1)).unwrap();
    let til_run = run_estimation(&exp, &til.gains(&til_bo.best_evaluated), &til.schedule, til.initial).unwrap();

    let bench = BenchProblem::new(&exp, 0.0).unwrap();
    let bench_bo = bo_minimize(|t| bench.evaluate(t), &BoConfig::new(BenchProblem::bounds(&bounds), evals, n_seed, 1)).unwrap();
    let (bench_run, _) = run_benchmark(&exp, &bench.model, &BenchGains::from_theta(&bench_bo.best_evaluated), 0.0).unwrap();

    let beta = |e: &Evaluation| e.components.iter().find(|c| c.0 == "beta_rms").unwrap().1;
    let (b_til, b_bench) = (beta(&score(&til_run, &exp)), beta(&score(&bench_run, &exp)));
    let truth = til_run.truth_delta.mass;
    let (m_til, m_bench) = (til_run.rms(Param::Mass), bench_run.rms(Param::Mass));
    let bench_final_err = (bench_run.final_delta().mass - truth).abs();
    let no_convergence = bench_final_err >= 0.5 * truth.abs();
    let ratio = b_til.max(b_bench) / b_til.min(b_bench);
    verdict(
        m_til < m_bench && no_convergence && ratio <= 2.0,
        format!(
            "mass rms TiL {m_til:.1} kg vs benchmark {m_bench:.1} kg; benchmark final error {:.0} % of offset; sideslip rms {b_til:.5} vs {b_bench:.5} rad (x{ratio:.2})",
            100.0 * bench_final_err / truth.abs()
        ),
    )
}

// ---------------------------------------------------------------- 11

fn til(args: &[&str]) -> bool {
    let cli = Cli::try_parse_from(["til"].iter().chain(args).chain(&["--quiet"])).unwrap();
    run(&cli).is_ok()
}

fn criterion_11() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        ("simulate", "[scenario]\nkind = \"swept-steer\"\nduration = 20.0\nnoise = { snr = 10.0 }\n"),
        (
            "estimate",
            "[scenario]\nduration = 30.0\n[[observer.stage]]\nkind = \"mass\"\nduration = inf\n\
             [[estimate.conditions]]\nname = \"a\"\n[[estimate.conditions]]\nname = \"b\"\nscenario = { noise = { snr = 5.0 } }\n",
        ),
        (
            "sweep",
            "[scenario]\nkind = \"constant-speed-rough-road\"\nduration = 10.0\nnoise = { snr = 10.0 }\n\
             [[observer.stage]]\nkind = \"pitch-inertia\"\nduration = inf\n\
             [sweep]\naxis = \"road-eps\"\nvalues = [0.0, 0.1]\nrepetitions = 3\nparam = \"jyy\"\n",
        ),
        (
            "tune",
            "[scenario]\nkind = \"lane-change-braking\"\nduration = 30.0\n[[observer.stage]]\nkind = \"mass\"\nduration = inf\n\
             [tune]\nnames = [\"k_wheel\", \"k_ax_dm\"]\n[tune.bo]\niterations = 10\nn_seed = 4\ncandidates = 200\n",
        ),
    ];
    let mut checked = 0;
    let mut bad = Vec::new();
    for (cmd, text) in configs {
        let cfg = dir.path().join(format!("{cmd}.toml"));
        std::fs::write(&cfg, text).unwrap();
        let (a, b) = (dir.path().join(format!("{cmd}_a")), dir.path().join(format!("{cmd}_b")));
        let (c, sa, sb) = (cfg.to_str().unwrap(), a.to_str().unwrap(), b.to_str().unwrap());
        assert!(til(&[cmd, "--config", c, "--out", sa, "--seed", "3"]), "{cmd} failed");
        assert!(til(&[cmd, "--config", c, "--out", sb, "--seed", "3", "--jobs", "2"]), "{cmd} failed");
        let manifest = a.join("manifest.json");
        if !til(&["report", manifest.to_str().unwrap()]) {
            bad.push(format!("{cmd}: report"));
        }
        let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
        for art in m["artifacts"].as_array().unwrap() {
            let f = art["file"].as_str().unwrap();
            checked += 1;
            if read(&a, f) != read(&b, f) {
                bad.push(format!("{cmd}: {f}"));
            }
        }
    }
    verdict(bad.is_empty() && checked > 0, format!("{checked} artifacts from 4 commands reproduced; mismatches {bad:?}"))
}

fn read(dir: &Path, f: &str) -> Vec<u8> {
    std::fs::read(dir.join(f)).unwrap()
}

// ----------------------------------------------------------------

type Criterion = (usize, &'static str, Duration, fn() -> Verdict);

fn main() {
    let all: [Criterion; 11] = [
        (1, "rigid-body oracle", Duration::from_secs(1), criterion_1),
        (2, "loaded vehicle parameters", Duration::from_secs(1), criterion_2),
        (3, "mass convergence", Duration::from_secs(120), criterion_3),
        (4, "sign law necessity", Duration::from_secs(10), criterion_4),
        (5, "yaw-rate gating", Duration::from_secs(10), criterion_5),
        (6, "inertia estimation", Duration::from_secs(300), criterion_6),
        (7, "sensitivity trends", Duration::from_secs(600), criterion_7),
        (8, "road-noise magnitude", Duration::from_secs(5), criterion_8),
        (9, "optimizer sanity", Duration::from_secs(30), criterion_9),
        (10, "head-to-head", Duration::from_secs(900), criterion_10),
        (11, "manifest determinism", Duration::from_secs(600), criterion_11),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, budget, f) in all {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| verdict(false, format!("panicked: {}", panic_message(&e))));
        let took = start.elapsed();
        let pass = v.pass && took <= budget;
        failed += usize::from(!pass);
        let line = format!(
            "criterion {n:>2} {name:<26} {} {:>7.2} s (budget {} s)  {}\n",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            v.detail
        );
        std::io::stdout().write_all(line.as_bytes()).unwrap();
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}
