//! Error metrics shared by reports, sweeps and the tuner.

/// Evaluation window length, s.
pub const RMS_WINDOW: f64 = 1.0;
/// Sideslip weight in the tuning cost.
pub const K_BETA: f64 = 100.0;
/// Mass term horizon in the tuning cost, s.
pub const MASS_HORIZON: f64 = 10.0;

/// Root mean square. Zero for an empty slice.
pub fn rms(err: &[f64]) -> f64 {
    if err.is_empty() {
        return 0.0;
    }
    (err.iter().map(|e| e * e).sum::<f64>() / err.len() as f64).sqrt()
}

/// The trailing `window` seconds of a trace sampled at `fs`.
pub fn tail(xs: &[f64], fs: f64, window: f64) -> &[f64] {
    let n = ((window * fs).round() as usize).clamp(1, xs.len().max(1));
    &xs[xs.len().saturating_sub(n)..]
}

/// RMS of `estimate - truth` over the final `window` seconds.
pub fn rms_last_window(truth: &[f64], estimate: &[f64], fs: f64, window: f64) -> f64 {
    let err: Vec<f64> = truth.iter().zip(estimate).map(|(t, e)| e - t).collect();
    rms(tail(&err, fs, window))
}

/// Final-window RMS as a percentage of the true deviation `nu0`.
pub fn rms_percent(truth: &[f64], estimate: &[f64], fs: f64, window: f64, nu0: f64) -> f64 {
    100.0 * rms_last_window(truth, estimate, fs, window) / nu0.abs()
}

/// Tuning cost: weighted sideslip RMS over the whole run plus mass RMS over
/// the last [`MASS_HORIZON`] seconds.
pub fn til_cost(beta: &[f64], beta_hat: &[f64], dm: &[f64], dm_hat: &[f64], fs: f64) -> f64 {
    let n = beta.len().min(beta_hat.len());
    let beta_term = if n == 0 {
        0.0
    } else {
        let s: f64 = beta.iter().zip(beta_hat).map(|(b, bh)| K_BETA * (b - bh).powi(2)).sum();
        (s / n as f64).sqrt()
    };
    let m = dm.len().min(dm_hat.len());
    let mass_term = rms_last_window(&dm[..m], &dm_hat[..m], fs, MASS_HORIZON);
    beta_term + mass_term
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rms_of_constant_error() {
        let truth = vec![1.0; 300];
        let est = vec![1.5; 300];
        assert_relative_eq!(rms_last_window(&truth, &est, 100.0, 1.0), 0.5, epsilon = 1e-15);
        assert_eq!(rms_last_window(&truth, &truth, 100.0, 1.0), 0.0);
    }

    #[test]
    fn rms_of_sine_over_whole_periods() {
        let fs = 1000.0;
        let a = 3.0;
        let est: Vec<f64> = (0..5000).map(|k| a * (2.0 * std::f64::consts::PI * 5.0 * k as f64 / fs).sin()).collect();
        let truth = vec![0.0; est.len()];
        let r = rms_last_window(&truth, &est, fs, 1.0);
        assert_relative_eq!(r, a / 2f64.sqrt(), max_relative = 1e-3);
    }

    #[test]
    fn window_only_sees_the_tail() {
        let mut est = vec![100.0; 1000];
        est[900..].iter_mut().for_each(|v| *v = 2.0);
        let truth = vec![0.0; 1000];
        assert_eq!(rms_last_window(&truth, &est, 100.0, 1.0), 2.0);
        assert_relative_eq!(rms_percent(&truth, &est, 100.0, 1.0, 355.0), 200.0 / 355.0);
    }

    #[test]
    fn cost_examples() {
        let n = 3000;
        let z = vec![0.0; n];
        assert_eq!(til_cost(&z, &z, &z, &z, 100.0), 0.0);

        let dm_hat = vec![7.0; n];
        assert_relative_eq!(til_cost(&z, &z, &z, &dm_hat, 100.0), 7.0, epsilon = 1e-12);

        let beta_hat = vec![0.01; n];
        assert_relative_eq!(til_cost(&z, &beta_hat, &z, &z, 100.0), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn mass_term_uses_last_ten_seconds() {
        let n = 3000;
        let mut dm_hat = vec![500.0; n];
        dm_hat[n - 1000..].iter_mut().for_each(|v| *v = 1.0);
        let z = vec![0.0; n];
        assert_relative_eq!(til_cost(&z, &z, &z, &dm_hat, 100.0), 1.0, epsilon = 1e-12);
    }
}
