//! Per-run telemetry CSV.

use std::io::{Read, Write};

use crate::dynamics::TrajectorySample;
use crate::error::RunError;

pub const COLUMNS: [&str; 40] = [
    "t",
    "x",
    "y",
    "z",
    "qw",
    "qx",
    "qy",
    "qz",
    "u",
    "v",
    "w",
    "p",
    "q",
    "r",
    "beta1",
    "beta2",
    "beta3",
    "beta4",
    "omega1",
    "omega2",
    "omega3",
    "omega4",
    "duty1",
    "duty2",
    "duty3",
    "duty4",
    "cmd_roll",
    "cmd_pitch",
    "cmd_yaw1",
    "cmd_throttle",
    "cmd_surge",
    "cmd_sway",
    "cmd_yaw2",
    "submerged",
    "fx",
    "fy",
    "fz",
    "mx",
    "my",
    "mz",
];

pub fn column_index(name: &str) -> Option<usize> {
    COLUMNS.iter().position(|c| *c == name)
}

pub fn row(s: &TrajectorySample) -> [f64; 40] {
    let st = &s.state;
    let mut r = [0.0; 40];
    r[0] = s.t;
    r[1..4].copy_from_slice(st.position.as_slice());
    r[4..8].copy_from_slice(&st.attitude.wxyz());
    r[8..11].copy_from_slice(st.velocity.as_slice());
    r[11..14].copy_from_slice(st.body_rates.as_slice());
    r[14..18].copy_from_slice(&st.tilt);
    r[18..22].copy_from_slice(&st.motor_speed);
    r[22..26].copy_from_slice(&s.duty);
    r[26..33].copy_from_slice(&s.commands.as_array());
    r[33] = s.submerged_fraction;
    r[34..37].copy_from_slice(s.wrench.force.as_slice());
    r[37..40].copy_from_slice(s.wrench.moment.as_slice());
    r
}

pub fn write_csv<W: Write>(out: W, samples: &[TrajectorySample]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| RunError::Telemetry(e.to_string());
    w.write_record(COLUMNS).map_err(err)?;
    for s in samples {
        w.write_record(row(s).iter().map(|v| format!("{v:.8e}"))).map_err(err)?;
    }
    w.flush().map_err(|e| RunError::Telemetry(e.to_string()))
}

/// Telemetry loaded back from CSV, one `[f64; 40]` per row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TelemetryTable {
    pub rows: Vec<[f64; 40]>,
}

impl TelemetryTable {
    pub fn from_samples(samples: &[TrajectorySample]) -> Self {
        TelemetryTable { rows: samples.iter().map(row).collect() }
    }

    pub fn read<R: Read>(input: R) -> Result<Self, RunError> {
        let mut rd = csv::Reader::from_reader(input);
        let err = |e: csv::Error| RunError::Telemetry(e.to_string());
        let header = rd.headers().map_err(err)?;
        if header.iter().ne(COLUMNS) {
            return Err(RunError::Telemetry(format!(
                "unexpected header: {}",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(err)?;
            let mut r = [0.0; 40];
            for (slot, field) in r.iter_mut().zip(rec.iter()) {
                *slot = field
                    .trim()
                    .parse()
                    .map_err(|_| RunError::Telemetry(format!("row {}: bad number `{field}`", i + 1)))?;
            }
            rows.push(r);
        }
        Ok(TelemetryTable { rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}
