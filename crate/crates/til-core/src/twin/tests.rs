use super::model::{self, mechanical_energy, GRAVITY};
use super::*;

const DT: f64 = 0.01;

fn nominal() -> (VehicleParams, TwinConfig) {
    (VehicleParams::default(), TwinConfig::default())
}

fn run(
    state: TwinState,
    input: DriverInput,
    p: &VehicleParams,
    cfg: &TwinConfig,
    dt: f64,
    steps: usize,
) -> Vec<TwinState> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = state;
    out.push(s);
    for _ in 0..steps {
        s = model::step(&s, &input, p, cfg, dt).unwrap();
        out.push(s);
    }
    out
}

/// Traction torque that balances drag and rolling resistance at speed `v`.
fn cruise_torque(v: f64, p: &VehicleParams, cfg: &TwinConfig) -> f64 {
    let drag = 0.5 * cfg.air_density * cfg.drag_area * v * v;
    cfg.wheel_radius * (drag + cfg.rolling_resistance * p.mass * GRAVITY)
}

#[test]
fn rest_is_a_fixed_point() {
    let (p, cfg) = nominal();
    let traj = run(TwinState::default(), DriverInput::default(), &p, &cfg, DT, 1000);
    for w in traj.windows(2) {
        let (a, b) = (w[0].to_array(), w[1].to_array());
        let drift = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-9, "drift {drift}");
    }
}

#[test]
fn constant_traction_accelerates() {
    let (p, cfg) = nominal();
    let input = DriverInput { traction_torque: 800.0, ..Default::default() };
    let traj = run(TwinState::default(), input, &p, &cfg, DT, 1000);
    for w in traj.windows(2).skip(10) {
        assert!(w[1].vx > w[0].vx, "vx stalled at {}", w[0].vx);
    }
}

#[test]
fn heavier_vehicle_accelerates_less() {
    let (p, cfg) = nominal();
    let heavy = ParamDeviation { mass: 355.0, ..Default::default() }.apply(&p).unwrap();
    let input = DriverInput { traction_torque: 1500.0, ..Default::default() };
    let mut a = TwinState::rolling(10.0, &cfg);
    let mut b = a;
    for k in 0..500 {
        let ya = model::readout(&a, &p, &cfg, &input);
        let yb = model::readout(&b, &heavy, &cfg, &input);
        // skip the slip-relaxation transient
        if k >= 50 {
            assert!(yb.ax < ya.ax, "sample {k}: {} >= {}", yb.ax, ya.ax);
        }
        a = model::step(&a, &input, &p, &cfg, DT).unwrap();
        b = model::step(&b, &input, &heavy, &cfg, DT).unwrap();
    }
}

#[test]
fn steady_straight_reads_zero_ax() {
    let (p, cfg) = nominal();
    let v = 20.0;
    let input = DriverInput { traction_torque: cruise_torque(v, &p, &cfg), ..Default::default() };
    let traj = run(TwinState::rolling(v, &cfg), input, &p, &cfg, DT, 2000);
    let y = model::readout(traj.last().unwrap(), &p, &cfg, &input);
    assert!(y.ax.abs() < 0.05, "ax = {}", y.ax);
}

#[test]
fn steady_circle_lateral_acceleration() {
    let (p, cfg) = nominal();
    let v = 15.0;
    let input = DriverInput {
        steering: 0.6,
        traction_torque: cruise_torque(v, &p, &cfg) + 120.0,
        ..Default::default()
    };
    let traj = run(TwinState::rolling(v, &cfg), input, &p, &cfg, DT, 3000);
    let s = traj.last().unwrap();
    let y = model::readout(s, &p, &cfg, &input);
    // kinematic oracle a = V^2 / R = V r, plus the tilt seen by a body-fixed sensor
    let speed = s.vx.hypot(s.vy);
    let expected = speed * s.wz * s.roll.cos() + GRAVITY * s.roll.sin();
    assert!(expected > 2.0, "not a meaningful turn: {expected}");
    let rel = (y.ay - expected).abs() / expected;
    assert!(rel < 0.05, "ay {} vs v^2/R {} ({:.1}%)", y.ay, expected, rel * 100.0);
}

#[test]
fn at_rest_reads_gravity() {
    let (p, cfg) = nominal();
    let y = model::readout(&TwinState::default(), &p, &cfg, &DriverInput::default());
    assert!((y.az - GRAVITY).abs() < 0.01 * GRAVITY);
    assert_eq!(y.ax, 0.0);
}

#[test]
fn inject_examples() {
    let (p, cfg) = nominal();
    let mut twin = Twin::new(p, cfg, TwinState::rolling(12.0, &cfg)).unwrap();
    let input = DriverInput { steering: 0.3, traction_torque: 300.0, ..Default::default() };
    for _ in 0..100 {
        twin.step(&input, DT).unwrap();
    }
    let before = *twin.state();
    twin.inject(&StateCorrection::default()).unwrap();
    assert_eq!(*twin.state(), before);

    twin.inject(&StateCorrection { vx: 0.25, ..Default::default() }).unwrap();
    let after = *twin.state();
    assert_eq!(after.vx, before.vx + 0.25);
    assert_eq!(TwinState { vx: before.vx, ..after }, before);

    let measured = before.wz + 0.01;
    let residual = measured - twin.readout(&input).wz;
    twin.inject(&StateCorrection { wz: 1.0 * residual, ..Default::default() }).unwrap();
    assert_eq!(twin.state().wz, measured);
}

#[test]
fn inject_rejects_oversized_correction() {
    let (p, cfg) = nominal();
    let mut twin = Twin::new(p, cfg, TwinState::rolling(12.0, &cfg)).unwrap();
    let before = *twin.state();
    assert!(twin.inject(&StateCorrection { vx: 500.0, ..Default::default() }).is_err());
    assert!(twin.inject(&StateCorrection { wheel: [-100.0; 4], ..Default::default() }).is_err());
    assert_eq!(*twin.state(), before);
}

#[test]
fn set_params_examples() {
    let (p, cfg) = nominal();
    let mut twin = Twin::new(p, cfg, TwinState::default()).unwrap();
    twin.set_params(&ParamDeviation { mass: 355.0, ..Default::default() }).unwrap();
    assert!((twin.effective_params().mass - 2480.8).abs() < 1e-9);
    twin.set_params(&ParamDeviation { jzz: 827.23, ..Default::default() }).unwrap();
    assert!((twin.effective_params().jzz - 4760.0).abs() < 1e-9);
    assert!(twin.set_params(&ParamDeviation { mass: -3000.0, ..Default::default() }).is_err());
    assert!(twin.set_params(&ParamDeviation { jxx: -900.0, ..Default::default() }).is_err());
}

#[test]
fn zero_deviation_is_bitwise_nominal() {
    let (p, cfg) = nominal();
    let input = DriverInput { steering: 0.4, traction_torque: 500.0, ..Default::default() };
    let mut a = Twin::new(p, cfg, TwinState::rolling(15.0, &cfg)).unwrap();
    let mut b = a.clone();
    for _ in 0..1000 {
        b.set_params(&ParamDeviation::default()).unwrap();
        a.step(&input, DT).unwrap();
        b.step(&input, DT).unwrap();
    }
    assert_eq!(a.state(), b.state());
}

#[test]
fn deterministic_trajectories() {
    let (p, cfg) = nominal();
    let input = DriverInput { steering: -0.5, traction_torque: 900.0, road_front: 0.01, road_rear: -0.005, ..Default::default() };
    let a = run(TwinState::rolling(18.0, &cfg), input, &p, &cfg, DT, 500);
    let b = run(TwinState::rolling(18.0, &cfg), input, &p, &cfg, DT, 500);
    assert_eq!(a, b);
}

#[test]
fn coasting_dissipates_energy() {
    let (p, cfg) = nominal();
    for steering in [0.0, 0.5] {
        let input = DriverInput { steering, ..Default::default() };
        let traj = run(TwinState::rolling(25.0, &cfg), input, &p, &cfg, DT, 2000);
        let energy: Vec<f64> = traj.iter().map(|s| mechanical_energy(s, &p, &cfg)).collect();
        for k in (0..energy.len() - 100).step_by(10) {
            assert!(
                energy[k + 100] <= energy[k],
                "energy rose over [{}, {}] s with steering {steering}",
                k as f64 * DT,
                (k + 100) as f64 * DT
            );
        }
    }
}

#[test]
fn halving_dt_converges() {
    let (p, cfg) = nominal();
    let input = DriverInput { steering: 0.8, traction_torque: 700.0, ..Default::default() };
    let coarse = run(TwinState::rolling(15.0, &cfg), input, &p, &cfg, 0.01, 1000);
    let fine = run(TwinState::rolling(15.0, &cfg), input, &p, &cfg, 0.005, 2000);
    let (a, b) = (coarse.last().unwrap(), fine.last().unwrap());
    for (x, y) in [(a.vx, b.vx), (a.vy, b.vy), (a.wz, b.wz)] {
        assert!((x - y).abs() <= 1e-3 * y.abs().max(1e-3), "{x} vs {y}");
    }
}

#[test]
fn step_rejects_bad_dt() {
    let (p, cfg) = nominal();
    let s = TwinState::default();
    let u = DriverInput::default();
    assert!(model::step(&s, &u, &p, &cfg, 0.0).is_err());
    assert!(model::step(&s, &u, &p, &cfg, 0.02).is_err());
}
