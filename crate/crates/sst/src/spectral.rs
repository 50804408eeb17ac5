//! Welch spectral estimation and the magnitude-squared-coherence
//! similarity indices used to compare real and translated signals.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SstError};
use crate::signal::TimeRecord;

/// Taper applied to each Welch segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    Hann,
    Rectangular,
}

impl Taper {
    pub(crate) fn weights(&self, n: usize) -> Vec<f64> {
        match self {
            // periodic Hann
            Taper::Hann => (0..n)
                .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
                .collect(),
            Taper::Rectangular => vec![1.0; n],
        }
    }
}

/// Parameters shared by the Welch-based estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchParams {
    pub segment_length: usize,
    pub overlap_fraction: f64,
    pub taper: Taper,
    /// Bins where both auto-spectra fall below this floor get MSC = 0.
    pub power_floor: f64,
}

impl Default for WelchParams {
    fn default() -> Self {
        WelchParams {
            segment_length: 1024,
            overlap_fraction: 0.5,
            taper: Taper::Hann,
            power_floor: 1e-30,
        }
    }
}

impl WelchParams {
    pub fn validate(&self) -> Result<()> {
        if self.segment_length == 0 {
            return Err(SstError::InvalidConfig("segment length must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(SstError::InvalidConfig(format!(
                "overlap fraction must be in [0,1), got {}",
                self.overlap_fraction
            )));
        }
        Ok(())
    }

    pub fn hop(&self) -> usize {
        let hop = (self.segment_length as f64 * (1.0 - self.overlap_fraction)).round() as usize;
        hop.max(1)
    }

    /// Number of full segments available in a record of length `n`.
    pub fn segment_count(&self, n: usize) -> usize {
        if n < self.segment_length {
            0
        } else {
            (n - self.segment_length) / self.hop() + 1
        }
    }
}

/// A one-sided Welch spectral estimate. Auto-spectra have zero imaginary
/// part at every bin; cross-spectra are complex.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub frequencies: Vec<f64>,
    pub values: Vec<Complex64>,
    pub segment_count: usize,
    pub segment_length: usize,
    pub overlap_fraction: f64,
}

impl SpectralEstimate {
    /// Real parts of the values; meaningful for auto-spectra.
    pub fn psd_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn bin_width(&self) -> f64 {
        self.frequencies[1] - self.frequencies[0]
    }

    /// Trapezoidal integral of the (real) spectrum over frequency.
    pub fn integrated_power(&self) -> f64 {
        let df = self.bin_width();
        let v = self.psd_values();
        let mut total = 0.0;
        for i in 1..v.len() {
            total += 0.5 * (v[i - 1] + v[i]) * df;
        }
        total
    }
}

/// Per-bin magnitude-squared coherence.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceCurve {
    pub frequencies: Vec<f64>,
    pub msc_values: Vec<f64>,
    pub n_bins: usize,
}

impl CoherenceCurve {
    /// Arithmetic mean of the per-bin MSC values.
    pub fn mean(&self) -> f64 {
        self.msc_values.iter().sum::<f64>() / self.n_bins as f64
    }
}

/// Tapered, FFT-transformed Welch segments of one signal.
pub(crate) fn segment_spectra(
    samples: &[f64],
    params: &WelchParams,
) -> Result<Vec<Vec<Complex64>>> {
    params.validate()?;
    let seg = params.segment_length;
    if seg > samples.len() {
        return Err(SstError::SegmentTooLong {
            segment: seg,
            record: samples.len(),
        });
    }
    let hop = params.hop();
    let weights = params.taper.weights(seg);
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let n_onesided = seg / 2 + 1;
    let count = params.segment_count(samples.len());
    let mut out = Vec::with_capacity(count);
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    for s in 0..count {
        let start = s * hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(samples[start + i] * weights[i], 0.0);
        }
        fft.process(&mut buf);
        out.push(buf[..n_onesided].to_vec());
    }
    Ok(out)
}

fn one_sided_frequencies(seg: usize, sample_rate: f64) -> Vec<f64> {
    (0..=seg / 2).map(|k| k as f64 * sample_rate / seg as f64).collect()
}

/// Averages segment cross-products into a one-sided density estimate.
/// With `x == y` spectra this is the Welch PSD.
fn average_cross(
    sx: &[Vec<Complex64>],
    sy: &[Vec<Complex64>],
    seg: usize,
    sample_rate: f64,
    taper: Taper,
    overlap_fraction: f64,
) -> SpectralEstimate {
    let n_onesided = seg / 2 + 1;
    let weights = taper.weights(seg);
    let win_power: f64 = weights.iter().map(|w| w * w).sum();
    let scale = 1.0 / (sample_rate * win_power);
    let k = sx.len() as f64;
    let mut values = vec![Complex64::new(0.0, 0.0); n_onesided];
    for (a, b) in sx.iter().zip(sy) {
        for i in 0..n_onesided {
            values[i] += a[i] * b[i].conj();
        }
    }
    for (i, v) in values.iter_mut().enumerate() {
        let mut factor = scale / k;
        // double everything except DC and (for even seg) Nyquist
        let is_nyquist = seg % 2 == 0 && i == seg / 2;
        if i != 0 && !is_nyquist {
            factor *= 2.0;
        }
        *v *= factor;
    }
    SpectralEstimate {
        frequencies: one_sided_frequencies(seg, sample_rate),
        values,
        segment_count: sx.len(),
        segment_length: seg,
        overlap_fraction,
    }
}

/// One-sided Welch power spectral density of a record.
pub fn welch_psd(x: &TimeRecord, params: &WelchParams) -> Result<SpectralEstimate> {
    let sx = segment_spectra(&x.samples, params)?;
    let mut est = average_cross(
        &sx,
        &sx,
        params.segment_length,
        x.sample_rate,
        params.taper,
        params.overlap_fraction,
    );
    for v in &mut est.values {
        *v = Complex64::new(v.re.max(0.0), 0.0);
    }
    Ok(est)
}

/// One-sided Welch cross-spectral density S_xy of two records.
pub fn cross_psd(x: &TimeRecord, y: &TimeRecord, params: &WelchParams) -> Result<SpectralEstimate> {
    if x.len() != y.len() {
        return Err(SstError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.sample_rate != y.sample_rate {
        return Err(SstError::InvalidConfig(
            "cross spectrum needs matching sample rates".into(),
        ));
    }
    let sx = segment_spectra(&x.samples, params)?;
    let sy = segment_spectra(&y.samples, params)?;
    Ok(average_cross(
        &sx,
        &sy,
        params.segment_length,
        x.sample_rate,
        params.taper,
        params.overlap_fraction,
    ))
}

/// Per-bin magnitude-squared coherence |S_xy|^2 / (S_xx S_yy). Needs at
/// least two averaged segments; with one segment the estimate is
/// identically 1 regardless of the signals.
pub fn msc(x: &TimeRecord, y: &TimeRecord, params: &WelchParams) -> Result<CoherenceCurve> {
    if x.len() != y.len() {
        return Err(SstError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    params.validate()?;
    let segments = params.segment_count(x.len().min(y.len()));
    if segments < 2 {
        return Err(SstError::TooFewSegments { segments });
    }
    let sx = segment_spectra(&x.samples, params)?;
    let sy = segment_spectra(&y.samples, params)?;
    let seg = params.segment_length;
    let sxx = average_cross(&sx, &sx, seg, x.sample_rate, params.taper, params.overlap_fraction);
    let syy = average_cross(&sy, &sy, seg, y.sample_rate, params.taper, params.overlap_fraction);
    let sxy = average_cross(&sx, &sy, seg, x.sample_rate, params.taper, params.overlap_fraction);
    let msc_values: Vec<f64> = (0..sxy.values.len())
        .map(|i| {
            let pxx = sxx.values[i].re;
            let pyy = syy.values[i].re;
            if pxx < params.power_floor && pyy < params.power_floor {
                return 0.0;
            }
            let denom = pxx * pyy;
            if denom <= 0.0 {
                return 0.0;
            }
            (sxy.values[i].norm_sqr() / denom).clamp(0.0, 1.0)
        })
        .collect();
    let n_bins = msc_values.len();
    Ok(CoherenceCurve {
        frequencies: sxy.frequencies,
        msc_values,
        n_bins,
    })
}

/// Mean magnitude-squared coherence: the per-bin MSC values averaged to a
/// single score in [0, 1].
pub fn mmsc(x: &TimeRecord, y: &TimeRecord, params: &WelchParams) -> Result<f64> {
    Ok(msc(x, y, params)?.mean())
}
