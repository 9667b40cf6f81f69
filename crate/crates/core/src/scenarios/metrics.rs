//! Scalar metrics computed from telemetry, and the `metrics.txt` sidecar.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};

use crate::frames::{rotate_body_to_world, Rotation, Vec3};

use super::config::{ResponseSignal, Role, ScenarioConfig};
use super::telemetry::{column_index, TelemetryTable};

/// `y(t) ≈ amplitude · sin(ωt + phase) + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineFit {
    pub amplitude: f64,
    /// rad.
    pub phase: f64,
    pub offset: f64,
}

/// Least-squares fit of `[sin ωt, cos ωt, 1]` at a known frequency.
pub fn fit_sine(t: &[f64], y: &[f64], frequency: f64) -> Option<SineFit> {
    let w = TAU * frequency;
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (&ti, &yi) in t.iter().zip(y) {
        let a = Vector3::new((w * ti).sin(), (w * ti).cos(), 1.0);
        ata += a * a.transpose();
        aty += a * yi;
    }
    let x = ata.lu().solve(&aty)?;
    let amplitude = x[0].hypot(x[1]);
    if !(amplitude > 0.0) {
        return None;
    }
    Some(SineFit { amplitude, phase: x[1].atan2(x[0]), offset: x[2] })
}

/// Wraps to `(-180, 180]`.
pub fn wrap_deg(a: f64) -> f64 {
    let r = (a + 180.0).rem_euclid(360.0) - 180.0;
    if r == -180.0 {
        180.0
    } else {
        r
    }
}

/// Phase lag of `response` behind `command` in degrees, in `[0, 180]`.
pub fn phase_lag_deg(t: &[f64], command: &[f64], response: &[f64], frequency: f64) -> Option<f64> {
    let c = fit_sine(t, command, frequency)?;
    let r = fit_sine(t, response, frequency)?;
    Some(wrap_deg((c.phase - r.phase).to_degrees()).abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub scenario: String,
    pub role: Role,
    /// Largest |yaw rate| inside the window (rad/s).
    pub max_yaw_rate: f64,
    /// |z(t1) − z(t0)| over the window (m).
    pub z_drift: f64,
    /// Largest |z − z(t0)| over the window (m).
    pub max_depth_deviation: f64,
    /// Largest horizontal speed over the window (m/s).
    pub peak_speed: f64,
    pub phase_lag_deg: Option<f64>,
    pub phase_channel: Option<String>,
    pub saturations: u64,
}

impl RunMetrics {
    pub fn compute(config: &ScenarioConfig, table: &TelemetryTable, saturations: u64) -> RunMetrics {
        let m = &config.metrics;
        let [t0, t1] = m.window.unwrap_or([0.0, config.duration]);
        let rows: Vec<&[f64; 40]> = table.rows.iter().filter(|r| r[0] >= t0 - 1e-9 && r[0] <= t1 + 1e-9).collect();
        let (iz, ir) = (column_index("z").unwrap(), column_index("r").unwrap());
        let world_vel: Vec<Vec3> = rows.iter().map(|r| world_velocity(r)).collect();

        let mut out = RunMetrics {
            scenario: config.name.clone(),
            role: m.role,
            max_yaw_rate: rows.iter().map(|r| r[ir].abs()).fold(0.0, f64::max),
            z_drift: 0.0,
            max_depth_deviation: 0.0,
            peak_speed: world_vel.iter().map(|v| v.x.hypot(v.y)).fold(0.0, f64::max),
            phase_lag_deg: None,
            phase_channel: m.phase_channel.clone(),
            saturations,
        };
        if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
            out.z_drift = (last[iz] - first[iz]).abs();
            out.max_depth_deviation = rows.iter().map(|r| (r[iz] - first[iz]).abs()).fold(0.0, f64::max);
        }

        let sine = m.phase_channel.as_deref().and_then(|ch| Some((ch, config.trace.channel(ch)?.sine()?)));
        if let Some((ch, sine)) = sine {
            let fit_from = sine.start + m.phase_discard_periods / sine.frequency;
            let ic = column_index(&format!("cmd_{ch}")).unwrap();
            let (mut t, mut c, mut y) = (Vec::new(), Vec::new(), Vec::new());
            for (r, v) in rows.iter().zip(&world_vel) {
                if r[0] >= fit_from && sine.stop.is_none_or(|s| r[0] <= s) {
                    t.push(r[0] - sine.start);
                    c.push(r[ic]);
                    y.push(m.phase_sign * if m.phase_response == ResponseSignal::Vx { v.x } else { v.y });
                }
            }
            if t.len() >= 8 {
                out.phase_lag_deg = phase_lag_deg(&t, &c, &y, sine.frequency);
            }
        }
        out
    }

    fn write_sidecar(&self, out: &mut String, prefix: &str) {
        let _ = writeln!(out, "{prefix}role = {}", self.role.name());
        let _ = writeln!(out, "{prefix}max_yaw_rate = {:.6}", self.max_yaw_rate);
        let _ = writeln!(out, "{prefix}z_drift = {:.6}", self.z_drift);
        let _ = writeln!(out, "{prefix}max_depth_deviation = {:.6}", self.max_depth_deviation);
        let _ = writeln!(out, "{prefix}peak_speed = {:.6}", self.peak_speed);
        if let (Some(lag), Some(ch)) = (self.phase_lag_deg, &self.phase_channel) {
            let _ = writeln!(out, "{prefix}phase_channel = {ch}");
            let _ = writeln!(out, "{prefix}phase_lag_deg = {lag:.3}");
        }
        let _ = writeln!(out, "{prefix}saturations = {}", self.saturations);
    }

    pub fn sidecar(&self) -> String {
        let mut s = format!("scenario = {}\n", self.scenario);
        self.write_sidecar(&mut s, "");
        s
    }
}

fn world_velocity(r: &[f64; 40]) -> Vec3 {
    let q = Rotation::normalized(nalgebra::Quaternion::new(r[4], r[5], r[6], r[7]));
    rotate_body_to_world(&q, &Vec3::new(r[8], r[9], r[10]))
}

/// Paired comparisons across the runs of one experiment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub experiment: String,
    pub runs: Vec<RunMetrics>,
    /// Tilt-driven over torque-driven peak yaw rate.
    pub yaw_rate_gain_ratio: Option<f64>,
    pub z_drift_torque: Option<f64>,
    pub z_drift_tilt: Option<f64>,
    pub phase_lag_pitch: Option<f64>,
    pub phase_lag_tilt: Option<f64>,
}

impl MetricsReport {
    pub fn from_runs(experiment: &str, runs: Vec<RunMetrics>) -> Self {
        let find = |role: Role| runs.iter().find(|r| r.role == role);
        let torque = find(Role::YawTorque);
        let tilt = find(Role::YawTilt);
        let yaw_rate_gain_ratio = match (torque, tilt) {
            (Some(a), Some(b)) if a.max_yaw_rate > 0.0 => Some(b.max_yaw_rate / a.max_yaw_rate),
            _ => None,
        };
        MetricsReport {
            experiment: experiment.to_string(),
            yaw_rate_gain_ratio,
            z_drift_torque: torque.map(|r| r.z_drift),
            z_drift_tilt: tilt.map(|r| r.z_drift),
            phase_lag_pitch: find(Role::PitchTranslation).and_then(|r| r.phase_lag_deg),
            phase_lag_tilt: find(Role::TiltTranslation).and_then(|r| r.phase_lag_deg),
            runs,
        }
    }

    pub fn z_drift_ratio(&self) -> Option<f64> {
        match (self.z_drift_tilt, self.z_drift_torque) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        }
    }

    pub fn phase_lag_ratio(&self) -> Option<f64> {
        match (self.phase_lag_tilt, self.phase_lag_pitch) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        }
    }

    pub fn sidecar(&self) -> String {
        let mut s = format!("experiment = {}\n", self.experiment);
        let opt = |s: &mut String, key: &str, v: Option<f64>| {
            if let Some(v) = v {
                let _ = writeln!(s, "{key} = {v:.6}");
            }
        };
        opt(&mut s, "yaw_rate_gain_ratio", self.yaw_rate_gain_ratio);
        opt(&mut s, "z_drift_torque", self.z_drift_torque);
        opt(&mut s, "z_drift_tilt", self.z_drift_tilt);
        opt(&mut s, "z_drift_ratio", self.z_drift_ratio());
        opt(&mut s, "phase_lag_pitch_deg", self.phase_lag_pitch);
        opt(&mut s, "phase_lag_tilt_deg", self.phase_lag_tilt);
        opt(&mut s, "phase_lag_ratio", self.phase_lag_ratio());
        for r in &self.runs {
            r.write_sidecar(&mut s, &format!("run.{}.", r.scenario));
        }
        s
    }
}

/// Reads `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_sidecar(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}
