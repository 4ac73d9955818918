//! CSV and gnuplot artifacts.
//!
//! Every table has a header row and SI values printed with the shortest
//! round-trip representation, so identical runs give identical bytes.

use std::io::Write;

use crate::error::Result;
use crate::observer::{EstimationRun, Param};
use crate::scenario::TruthRun;
use crate::sweep::{SweepAxis, SweepRow};
use crate::tuner::EvalRecord;
use crate::twin::MeasurementVec;

/// Columns of the truth trajectory.
pub const TRUTH_COLUMNS: [&str; 26] = [
    "time", "steering", "traction_torque", "brake_torque", "road_front", "road_rear", "vx", "vy", "vz", "wx", "wy",
    "wz", "roll", "pitch", "heave", "w_fl", "w_fr", "w_rl", "w_rr", "sideslip", "y_ax", "y_ay", "y_az", "y_wx",
    "y_wy", "y_wz",
];

/// Columns of an estimation trajectory.
pub const ESTIMATE_COLUMNS: [&str; 20] = [
    "time", "stage", "d_mass", "d_jxx", "d_jyy", "d_jzz", "vx", "vy", "sideslip", "sideslip_true", "r_ax", "r_ay",
    "r_az", "r_wx", "r_wy", "r_wz", "r_w_fl", "r_w_fr", "r_w_rl", "r_w_rr",
];

fn num(x: f64) -> String {
    format!("{x}")
}

/// Truth trajectory with the clean readout, one row per sample.
pub fn write_truth_csv<W: Write>(w: W, run: &TruthRun) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRUTH_COLUMNS)?;
    for (k, ((s, u), y)) in run.states.iter().zip(&run.inputs).zip(&run.measurements).enumerate() {
        let mut row = vec![
            num(run.time(k)),
            num(u.steering),
            num(u.traction_torque),
            num(u.brake_torque),
            num(u.road_front),
            num(u.road_rear),
            num(s.vx),
            num(s.vy),
            num(s.vz),
            num(s.wx),
            num(s.wy),
            num(s.wz),
            num(s.roll),
            num(s.pitch),
            num(s.heave),
        ];
        row.extend(s.wheel_rate.iter().map(|v| num(*v)));
        row.push(num(s.sideslip()));
        row.extend([y.ax, y.ay, y.az, y.wx, y.wy, y.wz].map(num));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Estimated deviations, planar velocities and residuals per sample.
pub fn write_estimation_csv<W: Write>(w: W, run: &EstimationRun, truth_sideslip: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ESTIMATE_COLUMNS)?;
    for (k, l) in run.logs.iter().enumerate() {
        let mut row = vec![
            num(l.time),
            l.stage.map_or("none", |s| s.name()).to_string(),
            num(l.delta.mass),
            num(l.delta.jxx),
            num(l.delta.jyy),
            num(l.delta.jzz),
            num(l.vx),
            num(l.vy),
            num(l.sideslip()),
            truth_sideslip.get(k).map_or_else(String::new, |b| num(*b)),
        ];
        row.extend(l.residual.to_array().iter().map(|v| num(*v)));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// One row of an rms summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsRow {
    pub condition: String,
    pub param: Param,
    pub truth: f64,
    pub rms: f64,
    pub rms_percent: f64,
}

impl RmsRow {
    pub fn from_run(condition: impl Into<String>, run: &EstimationRun, param: Param) -> Self {
        Self {
            condition: condition.into(),
            param,
            truth: param.of(&run.truth_delta),
            rms: run.rms(param),
            rms_percent: run.rms_percent(param),
        }
    }
}

pub fn write_rms_table<W: Write>(w: W, rows: &[RmsRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["condition", "param", "truth_deviation", "rms", "rms_percent"])?;
    for r in rows {
        out.write_record([r.condition.clone(), r.param.name().into(), num(r.truth), num(r.rms), num(r.rms_percent)])?;
    }
    out.flush()?;
    Ok(())
}

/// Per-iteration tuning history: point, objective and incumbent.
pub fn write_history_csv<W: Write>(w: W, names: &[String], history: &[EvalRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["iteration".to_string()];
    header.extend(names.iter().cloned());
    header.extend(["objective", "diverged", "incumbent"].map(String::from));
    out.write_record(&header)?;
    for (i, h) in history.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(h.theta.iter().map(|v| num(*v)));
        row.extend([num(h.value), h.diverged.to_string(), num(h.incumbent)]);
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Final gains next to their box, in the layout of a bounds table.
pub fn write_theta_table<W: Write>(w: W, names: &[String], bounds: &[(f64, f64)], columns: &[(&str, &[f64])]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["parameter", "lower", "upper"];
    header.extend(columns.iter().map(|c| c.0));
    out.write_record(&header)?;
    for (i, name) in names.iter().enumerate() {
        let mut row = vec![name.clone(), num(bounds[i].0), num(bounds[i].1)];
        row.extend(columns.iter().map(|c| num(c.1[i])));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(w: W, axis: SweepAxis, param: Param, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([axis.name(), "seed", "param", "rms_percent", "diverged"])?;
    for r in rows {
        out.write_record([
            num(r.value),
            r.seed.to_string(),
            param.name().to_string(),
            r.rms_percent.map_or_else(String::new, num),
            r.rms_percent.is_none().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// gnuplot script plotting `ys` (1-based column numbers) against column 1
/// of a comma-separated file with a header row.
pub fn gnuplot_script(csv_name: &str, title: &str, ylabel: &str, ys: &[(usize, &str)]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str(&format!("set title '{title}'\n"));
    s.push_str("set xlabel 'time [s]'\n");
    s.push_str(&format!("set ylabel '{ylabel}'\n"));
    s.push_str("set grid\n");
    let plots: Vec<String> =
        ys.iter().map(|(c, label)| format!("'{csv_name}' using 1:{c} with lines title '{label}'")).collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}

/// Column index (1-based) of a residual channel in the estimation CSV.
pub fn residual_column(channel: &str) -> Option<usize> {
    MeasurementVec::NAMES.iter().position(|n| *n == channel).map(|i| 11 + i)
}
