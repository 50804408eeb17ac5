//! Signal containers: sampled acceleration records, channel sets, and
//! fixed-length window sets with provenance for exact reassembly.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SstError};

/// Structural state tag. Hatted variants mark translated (synthetic) data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateLabel {
    Alpha,
    Beta,
    Gamma,
    AlphaHat,
    BetaHat,
    GammaHat,
}

impl StateLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            StateLabel::Alpha => "alpha",
            StateLabel::Beta => "beta",
            StateLabel::Gamma => "gamma",
            StateLabel::AlphaHat => "alpha_hat",
            StateLabel::BetaHat => "beta_hat",
            StateLabel::GammaHat => "gamma_hat",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(StateLabel::Alpha),
            "beta" => Ok(StateLabel::Beta),
            "gamma" => Ok(StateLabel::Gamma),
            "alpha_hat" => Ok(StateLabel::AlphaHat),
            "beta_hat" => Ok(StateLabel::BetaHat),
            "gamma_hat" => Ok(StateLabel::GammaHat),
            other => Err(SstError::InvalidConfig(format!(
                "unknown state label '{other}'"
            ))),
        }
    }

    /// The synthetic counterpart of a real state (alpha -> alpha_hat etc.).
    pub fn hatted(&self) -> StateLabel {
        match self {
            StateLabel::Alpha | StateLabel::AlphaHat => StateLabel::AlphaHat,
            StateLabel::Beta | StateLabel::BetaHat => StateLabel::BetaHat,
            StateLabel::Gamma | StateLabel::GammaHat => StateLabel::GammaHat,
        }
    }

    /// The measured counterpart of a label.
    pub fn unhatted(&self) -> StateLabel {
        match self {
            StateLabel::Alpha | StateLabel::AlphaHat => StateLabel::Alpha,
            StateLabel::Beta | StateLabel::BetaHat => StateLabel::Beta,
            StateLabel::Gamma | StateLabel::GammaHat => StateLabel::Gamma,
        }
    }

    pub fn is_hatted(&self) -> bool {
        matches!(
            self,
            StateLabel::AlphaHat | StateLabel::BetaHat | StateLabel::GammaHat
        )
    }
}

impl std::fmt::Display for StateLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sampled acceleration signal from a single virtual sensor channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeRecord {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
    pub channel_id: usize,
    pub structure_id: String,
    pub state_label: StateLabel,
}

impl TimeRecord {
    pub fn new(
        sample_rate: f64,
        samples: Vec<f64>,
        channel_id: usize,
        structure_id: impl Into<String>,
        state_label: StateLabel,
    ) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(SstError::InvalidConfig(format!(
                "sample rate must be a positive finite value, got {sample_rate}"
            )));
        }
        if samples.is_empty() {
            return Err(SstError::InvalidConfig(
                "a time record needs at least one sample".into(),
            ));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(SstError::NonFiniteSample);
        }
        Ok(TimeRecord {
            sample_rate,
            samples,
            channel_id,
            structure_id: structure_id.into(),
            state_label,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// A group of records sharing sample rate and length, one per channel,
/// with unique ascending channel ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    records: Vec<TimeRecord>,
}

impl ChannelSet {
    pub fn new(mut records: Vec<TimeRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(SstError::InvalidConfig(
                "a channel set needs at least one record".into(),
            ));
        }
        records.sort_by_key(|r| r.channel_id);
        let rate = records[0].sample_rate;
        let len = records[0].len();
        for pair in records.windows(2) {
            if pair[0].channel_id == pair[1].channel_id {
                return Err(SstError::InvalidConfig(format!(
                    "duplicate channel id {}",
                    pair[0].channel_id
                )));
            }
        }
        for r in &records {
            if r.sample_rate != rate {
                return Err(SstError::InvalidConfig(
                    "channel sample rates differ".into(),
                ));
            }
            if r.len() != len {
                return Err(SstError::LengthMismatch {
                    left: len,
                    right: r.len(),
                });
            }
        }
        Ok(ChannelSet { records })
    }

    pub fn records(&self) -> &[TimeRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TimeRecord> {
        self.records
    }

    pub fn channel_count(&self) -> usize {
        self.records.len()
    }

    pub fn sample_rate(&self) -> f64 {
        self.records[0].sample_rate
    }

    pub fn samples_per_channel(&self) -> usize {
        self.records[0].len()
    }

    pub fn structure_id(&self) -> &str {
        &self.records[0].structure_id
    }

    pub fn state_label(&self) -> StateLabel {
        self.records[0].state_label
    }

    /// Rebuilds the set with a different state label on every channel.
    pub fn relabeled(&self, label: StateLabel) -> ChannelSet {
        let records = self
            .records
            .iter()
            .map(|r| TimeRecord {
                state_label: label,
                ..r.clone()
            })
            .collect();
        ChannelSet { records }
    }
}

/// Source coordinates of one window: which channel it came from and its
/// position in that channel's window sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowProvenance {
    pub channel_id: usize,
    pub window_index: usize,
}

/// Ordered fixed-length segments cut from one or more records.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub window_length: usize,
    pub sample_rate: f64,
    windows: Vec<Vec<f64>>,
    provenance: Vec<WindowProvenance>,
}

impl WindowSet {
    pub fn new(
        window_length: usize,
        sample_rate: f64,
        windows: Vec<Vec<f64>>,
        provenance: Vec<WindowProvenance>,
    ) -> Result<Self> {
        if window_length == 0 {
            return Err(SstError::InvalidConfig("window length must be > 0".into()));
        }
        if windows.len() != provenance.len() {
            return Err(SstError::LengthMismatch {
                left: windows.len(),
                right: provenance.len(),
            });
        }
        for w in &windows {
            if w.len() != window_length {
                return Err(SstError::LengthMismatch {
                    left: window_length,
                    right: w.len(),
                });
            }
        }
        Ok(WindowSet {
            window_length,
            sample_rate,
            windows,
            provenance,
        })
    }

    pub fn windows(&self) -> &[Vec<f64>] {
        &self.windows
    }

    pub fn provenance(&self) -> &[WindowProvenance] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Merges several window sets (e.g. per-channel sets pooled for
    /// training). Window length and sample rate must agree.
    pub fn pooled(sets: &[WindowSet]) -> Result<WindowSet> {
        let first = sets
            .first()
            .ok_or_else(|| SstError::InvalidConfig("no window sets to pool".into()))?;
        let mut windows = Vec::new();
        let mut provenance = Vec::new();
        for s in sets {
            if s.window_length != first.window_length {
                return Err(SstError::LengthMismatch {
                    left: first.window_length,
                    right: s.window_length,
                });
            }
            windows.extend(s.windows.iter().cloned());
            provenance.extend(s.provenance.iter().copied());
        }
        WindowSet::new(first.window_length, first.sample_rate, windows, provenance)
    }
}

/// Cuts a record into consecutive windows of `window_seconds`. The record
/// length must divide exactly; no samples are dropped, so concatenation
/// reproduces the input bit-for-bit.
pub fn split_into_windows(record: &TimeRecord, window_seconds: f64) -> Result<WindowSet> {
    let product = window_seconds * record.sample_rate;
    let window_length = product.round() as usize;
    if window_length == 0 || (product - window_length as f64).abs() > 1e-9 {
        return Err(SstError::NonIntegralWindow { product });
    }
    if record.len() % window_length != 0 {
        return Err(SstError::NonDivisibleLength {
            length: record.len(),
            window_length,
        });
    }
    let count = record.len() / window_length;
    let mut windows = Vec::with_capacity(count);
    let mut provenance = Vec::with_capacity(count);
    for i in 0..count {
        windows.push(record.samples[i * window_length..(i + 1) * window_length].to_vec());
        provenance.push(WindowProvenance {
            channel_id: record.channel_id,
            window_index: i,
        });
    }
    WindowSet::new(window_length, record.sample_rate, windows, provenance)
}

/// Reassembles a single-channel window set back into a record. Window
/// indices must form the contiguous range 0..count-1.
pub fn concatenate_windows(
    ws: &WindowSet,
    structure_id: impl Into<String>,
    state_label: StateLabel,
) -> Result<TimeRecord> {
    if ws.is_empty() {
        return Err(SstError::InvalidConfig(
            "cannot concatenate an empty window set".into(),
        ));
    }
    let channel = ws.provenance[0].channel_id;
    let mut order: Vec<usize> = (0..ws.len()).collect();
    order.sort_by_key(|&i| ws.provenance[i].window_index);
    for (expected, &i) in order.iter().enumerate() {
        let p = ws.provenance[i];
        if p.channel_id != channel {
            return Err(SstError::ShapeMismatch(format!(
                "window set mixes channels {channel} and {}",
                p.channel_id
            )));
        }
        if p.window_index != expected {
            return Err(SstError::MissingWindow {
                channel,
                index: expected,
            });
        }
    }
    let mut samples = Vec::with_capacity(ws.len() * ws.window_length);
    for &i in &order {
        samples.extend_from_slice(&ws.windows[i]);
    }
    TimeRecord::new(ws.sample_rate, samples, channel, structure_id, state_label)
}
