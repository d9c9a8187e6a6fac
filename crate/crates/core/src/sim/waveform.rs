use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Recorded signals, in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "vsw")]
    Vsw,
    #[serde(rename = "iLr")]
    ILr,
    #[serde(rename = "vCr")]
    VCr,
    #[serde(rename = "iLm")]
    ILm,
    #[serde(rename = "vOut")]
    VOut,
    #[serde(rename = "iOut")]
    IOut,
    #[serde(rename = "gateHS")]
    GateHs,
    #[serde(rename = "gateLS")]
    GateLs,
}

impl Channel {
    pub const ALL: [Channel; 8] = [
        Channel::Vsw,
        Channel::ILr,
        Channel::VCr,
        Channel::ILm,
        Channel::VOut,
        Channel::IOut,
        Channel::GateHs,
        Channel::GateLs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Vsw => "vsw",
            Channel::ILr => "iLr",
            Channel::VCr => "vCr",
            Channel::ILm => "iLm",
            Channel::VOut => "vOut",
            Channel::IOut => "iOut",
            Channel::GateHs => "gateHS",
            Channel::GateLs => "gateLS",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown channel `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WaveformError {
    #[error("channel {0} was not recorded")]
    MissingChannel(Channel),
    #[error("need at least {needed} periods of data, have {have:.3}")]
    TooShort { needed: usize, have: f64 },
    #[error("waveform not settled: RMS of the last two periods differ by {relative:.3e}")]
    NotSettled { relative: f64 },
}

/// Multi-channel trace sampled on a shared, strictly increasing time axis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Waveform {
    pub channels: Vec<Channel>,
    pub t: Vec<f64>,
    /// One column per entry of `channels`.
    pub data: Vec<Vec<f64>>,
}

impl Waveform {
    pub fn new(channels: Vec<Channel>) -> Self {
        let data = vec![Vec::new(); channels.len()];
        Self {
            channels,
            t: Vec::new(),
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Appends a full sample (indexed by `Channel::index`). A sample at the
    /// same instant as the previous one replaces it.
    pub(crate) fn push(&mut self, t: f64, sample: &[f64; 8]) {
        if let Some(&last) = self.t.last() {
            if t <= last {
                for (col, ch) in self.data.iter_mut().zip(&self.channels) {
                    *col.last_mut().unwrap() = sample[ch.index()];
                }
                return;
            }
        }
        self.t.push(t);
        for (col, ch) in self.data.iter_mut().zip(&self.channels) {
            col.push(sample[ch.index()]);
        }
    }

    /// Appends a sample given as one value per recorded channel.
    pub fn push_row(&mut self, t: f64, row: &[f64]) {
        assert_eq!(row.len(), self.channels.len());
        self.t.push(t);
        for (col, &v) in self.data.iter_mut().zip(row) {
            col.push(v);
        }
    }

    pub fn channel(&self, ch: Channel) -> Result<&[f64], WaveformError> {
        self.channels
            .iter()
            .position(|&c| c == ch)
            .map(|i| self.data[i].as_slice())
            .ok_or(WaveformError::MissingChannel(ch))
    }

    /// Samples with `t0 <= t <= t1`, for every channel.
    pub fn window(&self, t0: f64, t1: f64) -> Waveform {
        let lo = self.t.partition_point(|&t| t < t0);
        let hi = self.t.partition_point(|&t| t <= t1);
        Waveform {
            channels: self.channels.clone(),
            t: self.t[lo..hi].to_vec(),
            data: self.data.iter().map(|c| c[lo..hi].to_vec()).collect(),
        }
    }

    fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        let i = self.t.partition_point(|&s| s < t);
        if i == 0 {
            return values[0];
        }
        if i >= self.t.len() {
            return values[values.len() - 1];
        }
        let (t0, t1) = (self.t[i - 1], self.t[i]);
        let w = (t - t0) / (t1 - t0);
        values[i - 1] + w * (values[i] - values[i - 1])
    }

    /// Trapezoidal integral of `weight(t) · channel(t)` over `[t0, t1]`,
    /// with linear interpolation at the window ends.
    pub fn integrate<W>(&self, ch: Channel, t0: f64, t1: f64, weight: W) -> Result<f64, WaveformError>
    where
        W: Fn(f64) -> f64,
    {
        let values = self.channel(ch)?;
        let lo = self.t.partition_point(|&t| t <= t0);
        let hi = self.t.partition_point(|&t| t < t1);
        let mut pts = Vec::with_capacity(hi.saturating_sub(lo) + 2);
        pts.push((t0, self.interpolate(values, t0)));
        pts.extend((lo..hi).map(|i| (self.t[i], values[i])));
        pts.push((t1, self.interpolate(values, t1)));
        Ok(pts
            .windows(2)
            .map(|w| 0.5 * (w[1].0 - w[0].0) * (weight(w[0].0) * w[0].1 + weight(w[1].0) * w[1].1))
            .sum())
    }

    pub fn rms(&self, ch: Channel, t0: f64, t1: f64) -> Result<f64, WaveformError> {
        let values = self.channel(ch)?;
        let lo = self.t.partition_point(|&t| t <= t0);
        let hi = self.t.partition_point(|&t| t < t1);
        let mut pts = vec![(t0, self.interpolate(values, t0))];
        pts.extend((lo..hi).map(|i| (self.t[i], values[i])));
        pts.push((t1, self.interpolate(values, t1)));
        // exact for piecewise-linear signals
        let sq: f64 = pts
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].1, w[1].1);
                (w[1].0 - w[0].0) * (a * a + a * b + b * b) / 3.0
            })
            .sum();
        Ok((sq / (t1 - t0)).sqrt())
    }

    pub fn mean(&self, ch: Channel, t0: f64, t1: f64) -> Result<f64, WaveformError> {
        Ok(self.integrate(ch, t0, t1, |_| 1.0)? / (t1 - t0))
    }

    /// Extremes over the samples inside `[t0, t1]`.
    pub fn min_max(&self, ch: Channel, t0: f64, t1: f64) -> Result<(f64, f64), WaveformError> {
        let values = self.channel(ch)?;
        let lo = self.t.partition_point(|&t| t < t0);
        let hi = self.t.partition_point(|&t| t <= t1);
        Ok(values[lo..hi]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))))
    }
}

/// Amplitude and phase of the component at `fsw`, projected over the last
/// full period: the channel is modelled as `A·sin(2π·fsw·t + φ)` in absolute
/// time.
pub fn fundamental_component(w: &Waveform, ch: Channel, fsw: f64) -> Result<(f64, f64), WaveformError> {
    let period = 1.0 / fsw;
    let (first, last) = match (w.t.first(), w.t.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(WaveformError::TooShort { needed: 5, have: 0.0 }),
    };
    let have = (last - first) / period;
    // allow for rounding of the end time
    if have < 5.0 - 1e-6 {
        return Err(WaveformError::TooShort { needed: 5, have });
    }
    let t1 = last;
    let t0 = t1 - period;
    let rms_last = w.rms(ch, t0, t1)?;
    let rms_prev = w.rms(ch, t0 - period, t0)?;
    let relative = (rms_last - rms_prev).abs() / rms_last.max(f64::MIN_POSITIVE);
    if relative > 5e-3 {
        return Err(WaveformError::NotSettled { relative });
    }
    let omega = 2.0 * PI * fsw;
    let a = 2.0 / period * w.integrate(ch, t0, t1, |t| (omega * t).cos())?;
    let b = 2.0 / period * w.integrate(ch, t0, t1, |t| (omega * t).sin())?;
    Ok((a.hypot(b), a.atan2(b)))
}
