//! Output-only modal identification by Frequency Domain Decomposition
//! and the comparison metrics used for real-vs-synthetic state reports:
//! CNF (change in natural frequency, %), MAC, and average MMSC.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SstError};
use crate::signal::ChannelSet;
use crate::spectral::{mmsc, segment_spectra, Taper, WelchParams};

/// Frequency Domain Decomposition settings. The segment length is
/// 2 x frequency_lines samples, giving exactly `frequency_lines`
/// one-sided lines above DC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FddConfig {
    pub taper: Taper,
    pub overlap_fraction: f64,
    pub frequency_lines: usize,
    /// Minimum peak prominence relative to the global maximum of the
    /// first singular value.
    pub peak_prominence: f64,
    pub min_peak_separation_hz: f64,
}

impl Default for FddConfig {
    fn default() -> Self {
        FddConfig {
            taper: Taper::Hann,
            overlap_fraction: 0.66,
            frequency_lines: 1024,
            peak_prominence: 0.05,
            min_peak_separation_hz: 0.25,
        }
    }
}

impl FddConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(SstError::InvalidConfig(
                "overlap_fraction must lie in [0, 1)".into(),
            ));
        }
        if self.frequency_lines < 2 {
            return Err(SstError::InvalidConfig(
                "frequency_lines must be at least 2".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.peak_prominence) {
            return Err(SstError::InvalidConfig(
                "peak_prominence must lie in [0, 1]".into(),
            ));
        }
        if self.min_peak_separation_hz < 0.0 {
            return Err(SstError::InvalidConfig(
                "min_peak_separation_hz must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn segment_length(&self) -> usize {
        2 * self.frequency_lines
    }

    pub fn welch_params(&self) -> WelchParams {
        WelchParams {
            segment_length: self.segment_length(),
            overlap_fraction: self.overlap_fraction,
            taper: self.taper,
            ..WelchParams::default()
        }
    }

    pub fn line_width_hz(&self, sample_rate: f64) -> f64 {
        sample_rate / self.segment_length() as f64
    }
}

/// Per-line singular values (descending) and first singular vectors of
/// the cross-spectral-density matrix.
#[derive(Debug, Clone)]
pub struct SingularValueSpectrum {
    pub frequencies: Vec<f64>,
    pub singular_values: Vec<Vec<f64>>,
    /// Unit-norm first singular vector per line, one complex entry per
    /// channel.
    pub first_vectors: Vec<Vec<Complex64>>,
}

impl SingularValueSpectrum {
    pub fn first_singular_values(&self) -> Vec<f64> {
        self.singular_values.iter().map(|s| s[0]).collect()
    }
}

/// One identified mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEstimate {
    /// 1-based mode index in ascending frequency order.
    pub order: usize,
    pub frequency: f64,
    /// Unit-norm real shape, largest-magnitude entry positive.
    pub shape: Vec<f64>,
}

/// Full cross-spectral-density FDD: one Hermitian channel-by-channel
/// matrix per frequency line, singular-value-decomposed line by line.
pub fn fdd(cs: &ChannelSet, config: &FddConfig) -> Result<SingularValueSpectrum> {
    config.validate()?;
    let params = config.welch_params();
    let seg = params.segment_length;
    let need = seg + params.hop();
    if cs.samples_per_channel() < need {
        return Err(SstError::TooFewSamples {
            have: cs.samples_per_channel(),
            need,
        });
    }
    let sample_rate = cs.sample_rate();
    let spectra: Result<Vec<Vec<Vec<Complex64>>>> = cs
        .records()
        .iter()
        .map(|r| segment_spectra(&r.samples, &params))
        .collect();
    let spectra = spectra?;
    let n_ch = spectra.len();
    let n_seg = spectra[0].len();
    let n_lines = seg / 2 + 1;

    // one-sided density scaling, matching the Welch estimator
    let weights = config.taper.weights(seg);
    let win_power: f64 = weights.iter().map(|w| w * w).sum();
    let base_scale = 1.0 / (sample_rate * win_power * n_seg as f64);

    let mut frequencies = Vec::with_capacity(n_lines);
    let mut singular_values = Vec::with_capacity(n_lines);
    let mut first_vectors = Vec::with_capacity(n_lines);
    for line in 0..n_lines {
        let is_nyquist = seg % 2 == 0 && line == seg / 2;
        let scale = if line != 0 && !is_nyquist {
            2.0 * base_scale
        } else {
            base_scale
        };
        let mut g = DMatrix::<Complex64>::zeros(n_ch, n_ch);
        for a in 0..n_ch {
            for b in 0..n_ch {
                let mut acc = Complex64::new(0.0, 0.0);
                for s in 0..n_seg {
                    acc += spectra[a][s][line] * spectra[b][s][line].conj();
                }
                g[(a, b)] = acc * scale;
            }
        }
        let svd = g.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let mut order: Vec<usize> = (0..n_ch).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[j]
                .partial_cmp(&svd.singular_values[i])
                .unwrap()
        });
        singular_values.push(order.iter().map(|&i| svd.singular_values[i]).collect());
        first_vectors.push(u.column(order[0]).iter().copied().collect());
        frequencies.push(line as f64 * sample_rate / seg as f64);
    }
    Ok(SingularValueSpectrum {
        frequencies,
        singular_values,
        first_vectors,
    })
}

/// Rotates a complex singular vector onto the real axis of its largest
/// entry, takes real parts, and normalizes with a fixed sign.
pub fn realize_shape(v: &[Complex64]) -> Result<Vec<f64>> {
    let (idx, _) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
        .ok_or(SstError::ZeroVector)?;
    if v[idx].norm() == 0.0 {
        return Err(SstError::ZeroVector);
    }
    let rotation = v[idx].conj() / v[idx].norm();
    let mut real: Vec<f64> = v.iter().map(|z| (z * rotation).re).collect();
    let norm = real.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(SstError::ZeroVector);
    }
    for x in &mut real {
        *x /= norm;
    }
    let largest = real
        .iter()
        .cloned()
        .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
        .unwrap();
    if largest < 0.0 {
        for x in &mut real {
            *x = -*x;
        }
    }
    Ok(real)
}

/// Topographic prominence of a local maximum: height above the higher
/// of the two valleys separating it from taller terrain (or the edge).
fn prominence(values: &[f64], peak: usize) -> f64 {
    let h = values[peak];
    let mut left_base = h;
    for j in (0..peak).rev() {
        left_base = left_base.min(values[j]);
        if values[j] > h {
            break;
        }
    }
    let mut right_base = h;
    for j in peak + 1..values.len() {
        right_base = right_base.min(values[j]);
        if values[j] > h {
            break;
        }
    }
    h - left_base.max(right_base)
}

/// Picks modes off the first singular value: local maxima whose
/// prominence clears the relative threshold, thinned to the configured
/// minimum separation (taller peaks win), returned in ascending
/// frequency order.
pub fn pick_peaks(svs: &SingularValueSpectrum, config: &FddConfig) -> Result<Vec<ModeEstimate>> {
    config.validate()?;
    let first = svs.first_singular_values();
    if first.is_empty() {
        return Err(SstError::InvalidConfig("empty spectrum".into()));
    }
    let global_max = first.iter().cloned().fold(0.0f64, f64::max);
    if global_max <= 0.0 {
        return Ok(Vec::new());
    }
    let threshold = config.peak_prominence * global_max;
    let mut candidates: Vec<usize> = (1..first.len().saturating_sub(1))
        .filter(|&i| first[i] > first[i - 1] && first[i] >= first[i + 1])
        .filter(|&i| prominence(&first, i) >= threshold)
        .collect();
    candidates.sort_by(|&a, &b| first[b].partial_cmp(&first[a]).unwrap());
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept
            .iter()
            .all(|&k| (svs.frequencies[k] - svs.frequencies[c]).abs() >= config.min_peak_separation_hz)
        {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    kept.iter()
        .enumerate()
        .map(|(order, &line)| {
            Ok(ModeEstimate {
                order: order + 1,
                frequency: svs.frequencies[line],
                shape: realize_shape(&svs.first_vectors[line])?,
            })
        })
        .collect()
}

/// Modal Assurance Criterion of two real shapes.
pub fn mac(shape_a: &[f64], shape_b: &[f64]) -> Result<f64> {
    if shape_a.len() != shape_b.len() {
        return Err(SstError::LengthMismatch {
            left: shape_a.len(),
            right: shape_b.len(),
        });
    }
    let aa: f64 = shape_a.iter().map(|x| x * x).sum();
    let bb: f64 = shape_b.iter().map(|x| x * x).sum();
    if aa == 0.0 || bb == 0.0 {
        return Err(SstError::ZeroVector);
    }
    let ab: f64 = shape_a.iter().zip(shape_b).map(|(x, y)| x * y).sum();
    Ok((ab * ab / (aa * bb)).clamp(0.0, 1.0))
}

/// Change in natural frequency, percent.
pub fn cnf(f_real: f64, f_synthetic: f64) -> Result<f64> {
    if !(f_real > 0.0) {
        return Err(SstError::NonPositiveReference(f_real));
    }
    Ok((f_synthetic - f_real).abs() / f_real * 100.0)
}

/// One real mode and its synthetic partner, if one was found within the
/// pairing window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub mode: usize,
    pub f_real_hz: f64,
    pub f_syn_hz: Option<f64>,
    pub cnf_pct: Option<f64>,
    pub mac: Option<f64>,
}

/// Real-vs-synthetic comparison: per-mode frequency/shape agreement and
/// per-channel coherence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario: Option<String>,
    pub mode_rows: Vec<ModeRow>,
    /// Synthetic modes with no real partner (frequency, Hz).
    pub unpaired_synthetic_hz: Vec<f64>,
    /// (channel_id, mmsc) per channel pair.
    pub per_channel_mmsc: Vec<(usize, f64)>,
    pub average_mmsc: f64,
}

/// Relative frequency window within which real and synthetic modes may
/// be paired.
const PAIRING_WINDOW: f64 = 0.10;

/// Compares a real channel set with a synthetic one: per-channel MMSC,
/// FDD + peak picking on both, greedy best-MAC mode pairing.
pub fn compare_states(
    real: &ChannelSet,
    synthetic: &ChannelSet,
    fdd_config: &FddConfig,
    mmsc_params: &WelchParams,
) -> Result<ComparisonReport> {
    if real.channel_count() != synthetic.channel_count()
        || real.samples_per_channel() != synthetic.samples_per_channel()
        || real.sample_rate() != synthetic.sample_rate()
    {
        return Err(SstError::ShapeMismatch(format!(
            "real ({} ch x {}) and synthetic ({} ch x {}) sets do not align",
            real.channel_count(),
            real.samples_per_channel(),
            synthetic.channel_count(),
            synthetic.samples_per_channel()
        )));
    }
    let mut per_channel_mmsc = Vec::with_capacity(real.channel_count());
    for (r, s) in real.records().iter().zip(synthetic.records()) {
        per_channel_mmsc.push((r.channel_id, mmsc(r, s, mmsc_params)?));
    }
    let average_mmsc =
        per_channel_mmsc.iter().map(|(_, v)| v).sum::<f64>() / per_channel_mmsc.len() as f64;

    let real_modes = pick_peaks(&fdd(real, fdd_config)?, fdd_config)?;
    let syn_modes = pick_peaks(&fdd(synthetic, fdd_config)?, fdd_config)?;

    let mut used = vec![false; syn_modes.len()];
    let mut mode_rows = Vec::with_capacity(real_modes.len());
    for rm in &real_modes {
        let mut best: Option<(usize, f64)> = None;
        for (j, sm) in syn_modes.iter().enumerate() {
            if used[j] || (sm.frequency - rm.frequency).abs() > PAIRING_WINDOW * rm.frequency {
                continue;
            }
            let m = mac(&rm.shape, &sm.shape)?;
            if best.map_or(true, |(_, b)| m > b) {
                best = Some((j, m));
            }
        }
        let row = match best {
            Some((j, m)) => {
                used[j] = true;
                ModeRow {
                    mode: rm.order,
                    f_real_hz: rm.frequency,
                    f_syn_hz: Some(syn_modes[j].frequency),
                    cnf_pct: Some(cnf(rm.frequency, syn_modes[j].frequency)?),
                    mac: Some(m),
                }
            }
            None => ModeRow {
                mode: rm.order,
                f_real_hz: rm.frequency,
                f_syn_hz: None,
                cnf_pct: None,
                mac: None,
            },
        };
        mode_rows.push(row);
    }
    let unpaired_synthetic_hz = syn_modes
        .iter()
        .enumerate()
        .filter(|(j, _)| !used[*j])
        .map(|(_, m)| m.frequency)
        .collect();

    Ok(ComparisonReport {
        scenario: None,
        mode_rows,
        unpaired_synthetic_hz,
        per_channel_mmsc,
        average_mmsc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{StateLabel, TimeRecord};
    use crate::sim::{
        analytic_modes, build_model, simulate, ExcitationPattern, ExcitationSpec, ModelConfig,
    };
    use crate::spectral::welch_psd;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn noise_record(n: usize, channel: usize, seed: u64) -> TimeRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        TimeRecord::new(256.0, samples, channel, "t", StateLabel::Alpha).unwrap()
    }

    fn three_dof() -> crate::sim::LatticeModel {
        build_model(&ModelConfig {
            dof_count: 3,
            mass: 1.0,
            stiffness: 4300.0,
            damping_ratio: 0.02,
            structure_id: "chain3".into(),
        })
        .unwrap()
    }

    #[test]
    fn mac_basics() {
        let phi = vec![0.3, -0.7, 1.2];
        assert!((mac(&phi, &phi).unwrap() - 1.0).abs() <= 1e-12);
        let scaled: Vec<f64> = phi.iter().map(|x| 2.0 * x).collect();
        assert!((mac(&phi, &scaled).unwrap() - 1.0).abs() <= 1e-12);
        let neg: Vec<f64> = phi.iter().map(|x| -3.5 * x).collect();
        assert!((mac(&phi, &neg).unwrap() - 1.0).abs() <= 1e-12);
        assert_eq!(mac(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(mac(&[1.0], &[1.0, 2.0]), Err(SstError::LengthMismatch { .. })));
        assert!(matches!(mac(&[0.0, 0.0], &[1.0, 2.0]), Err(SstError::ZeroVector)));
    }

    #[test]
    fn mac_bounds_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let a: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() - 0.5).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() - 0.5).collect();
            let m = mac(&a, &b).unwrap();
            assert!((0.0..=1.0).contains(&m));
        }
    }

    #[test]
    fn cnf_basics() {
        assert_eq!(cnf(3.17, 3.17).unwrap(), 0.0);
        assert!((cnf(2.0, 1.9).unwrap() - 5.0).abs() <= 1e-12);
        assert!((cnf(2.0, 2.1).unwrap() - 5.0).abs() <= 1e-12);
        assert!(matches!(cnf(0.0, 1.0), Err(SstError::NonPositiveReference(_))));
    }

    #[test]
    fn single_channel_first_sv_is_psd() {
        let r = noise_record(8192, 0, 1);
        let config = FddConfig {
            frequency_lines: 256,
            ..FddConfig::default()
        };
        let cs = ChannelSet::new(vec![r.clone()]).unwrap();
        let svs = fdd(&cs, &config).unwrap();
        let psd = welch_psd(&r, &config.welch_params()).unwrap();
        let psd_vals = psd.psd_values();
        assert_eq!(svs.frequencies.len(), psd_vals.len());
        for (s, p) in svs.first_singular_values().iter().zip(&psd_vals) {
            assert!((s - p).abs() <= 1e-10 * p.max(1.0), "{s} vs {p}");
        }
    }

    #[test]
    fn identical_channels_are_rank_one() {
        let r0 = noise_record(8192, 0, 2);
        let mut r1 = r0.clone();
        r1.channel_id = 1;
        let cs = ChannelSet::new(vec![r0, r1]).unwrap();
        let config = FddConfig {
            frequency_lines: 256,
            ..FddConfig::default()
        };
        let svs = fdd(&cs, &config).unwrap();
        for sv in &svs.singular_values {
            assert!(sv[1] <= 1e-10 * sv[0].max(1e-300) + 1e-20, "{sv:?}");
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let cs = ChannelSet::new(vec![noise_record(1000, 0, 3)]).unwrap();
        assert!(matches!(
            fdd(&cs, &FddConfig::default()),
            Err(SstError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn delta_peak_and_flat_spectrum() {
        let n = 101;
        let frequencies: Vec<f64> = (0..n).map(|i| i as f64 * 0.125).collect();
        let mut first = vec![1.0; n];
        first[40] = 50.0;
        let svs = SingularValueSpectrum {
            frequencies: frequencies.clone(),
            singular_values: first.iter().map(|&v| vec![v]).collect(),
            first_vectors: vec![vec![Complex64::new(1.0, 0.0)]; n],
        };
        let modes = pick_peaks(&svs, &FddConfig::default()).unwrap();
        assert_eq!(modes.len(), 1);
        assert!((modes[0].frequency - frequencies[40]).abs() <= 1e-12);
        assert_eq!(modes[0].order, 1);

        let flat = SingularValueSpectrum {
            frequencies,
            singular_values: vec![vec![1.0]; n],
            first_vectors: vec![vec![Complex64::new(1.0, 0.0)]; n],
        };
        assert!(pick_peaks(&flat, &FddConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn realize_shape_handles_phase() {
        let rot = Complex64::from_polar(1.0, 0.7);
        let v: Vec<Complex64> = [0.2, -0.5, 0.8].iter().map(|&x| rot * x).collect();
        let shape = realize_shape(&v).unwrap();
        let norm: f64 = shape.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() <= 1e-12);
        let expect = [0.2, -0.5, 0.8];
        let m = mac(&shape, &expect).unwrap();
        assert!((m - 1.0).abs() <= 1e-10);
        // largest-magnitude entry positive
        assert!(shape[2] > 0.0);
    }

    #[test]
    fn three_dof_fdd_matches_analytic_modes() {
        let model = three_dof();
        let truth = analytic_modes(&model).unwrap();
        let spec = ExcitationSpec {
            duration_s: 256.0,
            seed: 11,
            ..ExcitationSpec::default()
        };
        // independent forcing per DOF so the antisymmetric mode is excited
        let sim = simulate(
            &model,
            &spec,
            ExcitationPattern::IndependentPerDof,
            StateLabel::Alpha,
        )
        .unwrap();
        let config = FddConfig::default();
        let svs = fdd(&sim.responses, &config).unwrap();
        let modes = pick_peaks(&svs, &config).unwrap();
        assert_eq!(modes.len(), 3, "found {:?}", modes.iter().map(|m| m.frequency).collect::<Vec<_>>());
        let line = config.line_width_hz(256.0);
        for (m, (f, shape)) in modes
            .iter()
            .zip(truth.frequencies.iter().zip(&truth.mode_shapes))
        {
            assert!(
                (m.frequency - f).abs() <= line + 1e-9,
                "mode {}: {} vs analytic {f}",
                m.order,
                m.frequency
            );
            let agreement = mac(&m.shape, shape).unwrap();
            assert!(agreement >= 0.99, "mode {} MAC {agreement}", m.order);
        }
    }

    #[test]
    fn compare_states_reflexive_perfect() {
        let model = three_dof();
        let spec = ExcitationSpec {
            duration_s: 64.0,
            seed: 13,
            ..ExcitationSpec::default()
        };
        let sim = simulate(&model, &spec, ExcitationPattern::Uniform, StateLabel::Alpha).unwrap();
        let config = FddConfig {
            frequency_lines: 512,
            ..FddConfig::default()
        };
        let report = compare_states(
            &sim.responses,
            &sim.responses,
            &config,
            &WelchParams::default(),
        )
        .unwrap();
        assert!((report.average_mmsc - 1.0).abs() <= 1e-9);
        assert!(!report.mode_rows.is_empty());
        for row in &report.mode_rows {
            assert_eq!(row.cnf_pct, Some(0.0));
            assert!((row.mac.unwrap() - 1.0).abs() <= 1e-12);
            assert_eq!(row.f_syn_hz, Some(row.f_real_hz));
        }
        assert!(report.unpaired_synthetic_hz.is_empty());
        for (_, v) in &report.per_channel_mmsc {
            assert!((v - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn compare_states_noise_hits_bias_floor() {
        // independent noise: MMSC ~ 1/K with K averaged segments
        let n = 16384;
        let params = WelchParams::default(); // segment 1024, 50% overlap
        let k = params.segment_count(n) as f64;
        let real = ChannelSet::new(vec![noise_record(n, 0, 21)]).unwrap();
        let syn = ChannelSet::new(vec![noise_record(n, 0, 22)]).unwrap();
        let config = FddConfig {
            frequency_lines: 512,
            peak_prominence: 1.0, // no modes expected from noise
            ..FddConfig::default()
        };
        let mut acc = 0.0;
        let reps = 20;
        for rep in 0..reps {
            let r = ChannelSet::new(vec![noise_record(n, 0, 100 + rep)]).unwrap();
            let s = ChannelSet::new(vec![noise_record(n, 0, 200 + rep)]).unwrap();
            let report = compare_states(&r, &s, &config, &params).unwrap();
            acc += report.average_mmsc;
        }
        let mean = acc / reps as f64;
        assert!(
            (mean - 1.0 / k).abs() <= 0.3 / k,
            "mean MMSC {mean}, bias level {}",
            1.0 / k
        );
        drop((real, syn));
    }

    #[test]
    fn compare_states_shape_mismatch() {
        let a = ChannelSet::new(vec![noise_record(4096, 0, 31)]).unwrap();
        let b = ChannelSet::new(vec![noise_record(8192, 0, 32)]).unwrap();
        assert!(matches!(
            compare_states(&a, &b, &FddConfig::default(), &WelchParams::default()),
            Err(SstError::ShapeMismatch(_))
        ));
    }
}
