//! Scripted transmitter traces.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::control::{channel_map, ChannelCommands, ChannelMap, CHANNEL_NAMES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineTrace {
    pub amplitude: f64,
    /// Hz.
    pub frequency: f64,
    #[serde(default)]
    pub offset: f64,
    /// The sine starts from zero phase at this time; before it the channel holds `offset`.
    #[serde(default)]
    pub start: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
}

impl SineTrace {
    pub fn value(&self, t: f64) -> f64 {
        let active = t >= self.start && self.stop.is_none_or(|s| t <= s);
        if active {
            self.offset + self.amplitude * (TAU * self.frequency * (t - self.start)).sin()
        } else {
            self.offset
        }
    }
}

/// One channel: piecewise-linear keyframes `[t, value]` held past the
/// last point, or a sine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelTrace {
    Keyframes { keyframes: Vec<[f64; 2]> },
    Sine { sine: SineTrace },
}

impl ChannelTrace {
    pub fn constant(value: f64) -> Self {
        ChannelTrace::Keyframes { keyframes: vec![[0.0, value]] }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            ChannelTrace::Sine { sine } => sine.value(t),
            ChannelTrace::Keyframes { keyframes } => interpolate(keyframes, t),
        }
    }

    pub fn sine(&self) -> Option<&SineTrace> {
        match self {
            ChannelTrace::Sine { sine } => Some(sine),
            ChannelTrace::Keyframes { .. } => None,
        }
    }

    /// Reason the trace is malformed, if it is.
    pub fn check(&self) -> Result<(), String> {
        match self {
            ChannelTrace::Keyframes { keyframes } => {
                let first = keyframes.first().ok_or("keyframe list is empty")?;
                if first[0] != 0.0 {
                    return Err(format!("first keyframe must be at t = 0, found {}", first[0]));
                }
                for w in keyframes.windows(2) {
                    if !(w[1][0] > w[0][0]) {
                        return Err(format!(
                            "keyframe times must be strictly increasing ({} then {})",
                            w[0][0], w[1][0]
                        ));
                    }
                }
                if keyframes.iter().flatten().any(|v| !v.is_finite()) {
                    return Err("keyframes must be finite".into());
                }
                if keyframes.iter().any(|k| k[1].abs() > 1.0) {
                    return Err("keyframe values must lie in [-1, 1]".into());
                }
                Ok(())
            }
            ChannelTrace::Sine { sine } => {
                if !(sine.frequency > 0.0 && sine.frequency.is_finite()) {
                    return Err("sine frequency must be positive".into());
                }
                if sine.offset.abs() + sine.amplitude.abs() > 1.0 {
                    return Err("sine must stay within [-1, 1]".into());
                }
                if sine.stop.is_some_and(|s| s < sine.start) {
                    return Err("sine stop precedes start".into());
                }
                Ok(())
            }
        }
    }
}

fn interpolate(k: &[[f64; 2]], t: f64) -> f64 {
    let Some(last) = k.last() else { return 0.0 };
    if t >= last[0] {
        return last[1];
    }
    if t <= k[0][0] {
        return k[0][1];
    }
    let i = k.partition_point(|p| p[0] <= t);
    let ([t0, v0], [t1, v1]) = (k[i - 1], k[i]);
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

/// Raw transmitter frames over time; absent channels read zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandTrace {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roll: Option<ChannelTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch: Option<ChannelTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw1: Option<ChannelTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throttle: Option<ChannelTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surge: Option<ChannelTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sway: Option<ChannelTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw2: Option<ChannelTrace>,
}

impl CommandTrace {
    pub fn channels(&self) -> [Option<&ChannelTrace>; 7] {
        [&self.roll, &self.pitch, &self.yaw1, &self.throttle, &self.surge, &self.sway, &self.yaw2].map(Option::as_ref)
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelTrace> {
        let i = CHANNEL_NAMES.iter().position(|n| *n == name)?;
        self.channels()[i]
    }

    pub fn set(&mut self, name: &str, trace: ChannelTrace) -> bool {
        let slot = match name {
            "roll" => &mut self.roll,
            "pitch" => &mut self.pitch,
            "yaw1" => &mut self.yaw1,
            "throttle" => &mut self.throttle,
            "surge" => &mut self.surge,
            "sway" => &mut self.sway,
            "yaw2" => &mut self.yaw2,
            _ => return false,
        };
        *slot = Some(trace);
        true
    }

    pub fn raw(&self, t: f64) -> [f64; 7] {
        self.channels().map(|c| c.map_or(0.0, |c| c.value(t)))
    }

    pub fn commands(&self, t: f64, map: &ChannelMap) -> ChannelCommands {
        channel_map(&self.raw(t), map)
    }

    /// First malformed channel with the reason.
    pub fn check(&self) -> Result<(), (String, String)> {
        for (name, c) in CHANNEL_NAMES.iter().zip(self.channels()) {
            if let Some(c) = c {
                c.check().map_err(|r| (format!("trace.{name}"), r))?;
            }
        }
        Ok(())
    }
}
