//! Applying a trained model to unseen data: per-window translation, the
//! scenario matrix (which source state maps to which synthetic state),
//! and reassembly into full-length records.

use serde::{Deserialize, Serialize};

use crate::dgcg::{generator_forward, Direction, ModelState};
use crate::error::{Result, SstError};
use crate::signal::{
    concatenate_windows, split_into_windows, ChannelSet, StateLabel, WindowSet,
};

/// One translation scenario: which structure, which measured state goes
/// in, and which synthetic (hatted) state comes out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub target_structure_id: String,
    pub source_state: StateLabel,
    pub produced_state: StateLabel,
    pub direction: Direction,
}

impl ScenarioSpec {
    pub fn new(
        target_structure_id: impl Into<String>,
        source_state: StateLabel,
        produced_state: StateLabel,
    ) -> Result<Self> {
        let direction = match (source_state, produced_state) {
            (StateLabel::Alpha, StateLabel::BetaHat | StateLabel::GammaHat) => {
                Direction::AlphaToBeta
            }
            (StateLabel::Beta | StateLabel::Gamma, StateLabel::AlphaHat) => {
                Direction::BetaToAlpha
            }
            _ => {
                return Err(SstError::InvalidConfig(format!(
                    "no scenario maps source '{}' to '{}'",
                    source_state.as_str(),
                    produced_state.as_str()
                )))
            }
        };
        Ok(ScenarioSpec {
            target_structure_id: target_structure_id.into(),
            source_state,
            produced_state,
            direction,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let rebuilt = ScenarioSpec::new(
            self.target_structure_id.clone(),
            self.source_state,
            self.produced_state,
        )?;
        if rebuilt.direction != self.direction {
            return Err(SstError::InvalidConfig(format!(
                "scenario direction {} is inconsistent with its states",
                self.direction
            )));
        }
        Ok(())
    }
}

/// A synthetic state produced from one scenario.
#[derive(Debug, Clone)]
pub struct TranslationResult {
    pub synthetic: ChannelSet,
    pub scenario: ScenarioSpec,
    pub checkpoint_id: String,
}

/// Translates every window independently through the direction's
/// generator, preserving provenance order.
pub fn translate_windows(
    state: &ModelState,
    ws: &WindowSet,
    direction: Direction,
) -> Result<WindowSet> {
    if ws.window_length != state.config.input_length {
        return Err(SstError::ShapeMismatch(format!(
            "window length {} does not match the model input length {}",
            ws.window_length, state.config.input_length
        )));
    }
    let gen = state.generator(direction);
    let translated: Result<Vec<Vec<f64>>> = ws
        .windows()
        .iter()
        .map(|w| generator_forward(&state.config, gen, w))
        .collect();
    WindowSet::new(
        ws.window_length,
        ws.sample_rate,
        translated?,
        ws.provenance().to_vec(),
    )
}

/// Runs one scenario on a measured channel set: split each channel into
/// model-length windows, translate, reassemble, relabel with the hatted
/// state.
pub fn run_scenario(
    state: &ModelState,
    source: &ChannelSet,
    scenario: &ScenarioSpec,
    checkpoint_id: impl Into<String>,
) -> Result<TranslationResult> {
    scenario.validate()?;
    if source.state_label() != scenario.source_state {
        return Err(SstError::StateMismatch {
            expected: scenario.source_state.as_str().into(),
            found: source.state_label().as_str().into(),
        });
    }
    let window_seconds = state.config.input_length as f64 / source.sample_rate();
    let mut synthetic = Vec::with_capacity(source.channel_count());
    for record in source.records() {
        let ws = split_into_windows(record, window_seconds)?;
        let translated = translate_windows(state, &ws, scenario.direction)?;
        let mut rebuilt = concatenate_windows(
            &translated,
            record.structure_id.clone(),
            scenario.produced_state,
        )?;
        rebuilt.channel_id = record.channel_id;
        synthetic.push(rebuilt);
    }
    Ok(TranslationResult {
        synthetic: ChannelSet::new(synthetic)?,
        scenario: scenario.clone(),
        checkpoint_id: checkpoint_id.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgcg::{init_params, ArchitectureConfig};
    use crate::signal::{TimeRecord, WindowProvenance};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rand_samples(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen::<f64>() - 0.5).collect()
    }

    fn window_set(windows: Vec<Vec<f64>>) -> WindowSet {
        let len = windows[0].len();
        let prov = (0..windows.len())
            .map(|i| WindowProvenance {
                channel_id: 3,
                window_index: i,
            })
            .collect();
        WindowSet::new(len, 256.0, windows, prov).unwrap()
    }

    fn channel_set(channels: usize, samples: usize, label: StateLabel) -> ChannelSet {
        let records = (0..channels)
            .map(|c| {
                TimeRecord::new(
                    256.0,
                    rand_samples(samples, 40 + c as u64),
                    c,
                    "bridge2",
                    label,
                )
                .unwrap()
            })
            .collect();
        ChannelSet::new(records).unwrap()
    }

    #[test]
    fn scenario_direction_inference() {
        let s = ScenarioSpec::new("bridge2", StateLabel::Alpha, StateLabel::BetaHat).unwrap();
        assert_eq!(s.direction, Direction::AlphaToBeta);
        let s = ScenarioSpec::new("bridge2", StateLabel::Alpha, StateLabel::GammaHat).unwrap();
        assert_eq!(s.direction, Direction::AlphaToBeta);
        for src in [StateLabel::Beta, StateLabel::Gamma] {
            let s = ScenarioSpec::new("bridge2", src, StateLabel::AlphaHat).unwrap();
            assert_eq!(s.direction, Direction::BetaToAlpha);
        }
        assert!(ScenarioSpec::new("b", StateLabel::Alpha, StateLabel::AlphaHat).is_err());
        assert!(ScenarioSpec::new("b", StateLabel::Beta, StateLabel::BetaHat).is_err());
        assert!(ScenarioSpec::new("b", StateLabel::Alpha, StateLabel::Beta).is_err());
    }

    #[test]
    fn inconsistent_direction_rejected() {
        let mut s = ScenarioSpec::new("b", StateLabel::Alpha, StateLabel::BetaHat).unwrap();
        s.direction = Direction::BetaToAlpha;
        assert!(s.validate().is_err());
    }

    #[test]
    fn windows_translate_independently() {
        let config = ArchitectureConfig::reduced();
        let state = init_params(&config, 3).unwrap();
        let windows: Vec<Vec<f64>> = (0..5).map(|i| rand_samples(64, i)).collect();
        let ws = window_set(windows.clone());
        let out = translate_windows(&state, &ws, Direction::AlphaToBeta).unwrap();
        assert_eq!(out.len(), 5);
        assert_eq!(out.provenance(), ws.provenance());
        for (w, o) in windows.iter().zip(out.windows()) {
            let direct = generator_forward(&config, &state.g_ab, w).unwrap();
            for (a, b) in direct.iter().zip(o) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn identity_model_translates_to_itself() {
        let config = ArchitectureConfig::passthrough(32);
        let state = crate::dgcg::ModelState::identity(&config).unwrap();
        let windows: Vec<Vec<f64>> = (0..3).map(|i| rand_samples(32, 10 + i)).collect();
        let ws = window_set(windows.clone());
        let out = translate_windows(&state, &ws, Direction::BetaToAlpha).unwrap();
        assert_eq!(out.windows(), &windows[..]);
    }

    #[test]
    fn permuted_windows_equal_ordered_translation() {
        let config = ArchitectureConfig::reduced();
        let state = init_params(&config, 5).unwrap();
        let windows: Vec<Vec<f64>> = (0..6).map(|i| rand_samples(64, 20 + i)).collect();
        let perm = [4usize, 0, 5, 2, 1, 3];
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| windows[i].clone()).collect();
        let a = translate_windows(&state, &window_set(windows), Direction::AlphaToBeta).unwrap();
        let b = translate_windows(&state, &window_set(permuted), Direction::AlphaToBeta).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert_eq!(a.windows()[i], b.windows()[j]);
        }
    }

    #[test]
    fn wrong_window_length_rejected() {
        let config = ArchitectureConfig::reduced();
        let state = init_params(&config, 1).unwrap();
        let ws = window_set((0..2).map(|i| rand_samples(32, i)).collect());
        assert!(matches!(
            translate_windows(&state, &ws, Direction::AlphaToBeta),
            Err(SstError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn scenario_preserves_shape_and_relabels() {
        let config = ArchitectureConfig::reduced(); // input 64
        let state = init_params(&config, 7).unwrap();
        let source = channel_set(3, 64 * 4, StateLabel::Alpha);
        let scenario = ScenarioSpec::new("bridge2", StateLabel::Alpha, StateLabel::BetaHat).unwrap();
        let result = run_scenario(&state, &source, &scenario, "ckpt-final").unwrap();
        assert_eq!(result.synthetic.channel_count(), 3);
        assert_eq!(result.synthetic.samples_per_channel(), 64 * 4);
        assert_eq!(result.synthetic.state_label(), StateLabel::BetaHat);
        assert_eq!(result.synthetic.sample_rate(), 256.0);
        assert_eq!(result.checkpoint_id, "ckpt-final");
        for (r, s) in source.records().iter().zip(result.synthetic.records()) {
            assert_eq!(r.channel_id, s.channel_id);
        }
    }

    #[test]
    fn scenario_is_deterministic() {
        let config = ArchitectureConfig::reduced();
        let state = init_params(&config, 9).unwrap();
        let source = channel_set(2, 128, StateLabel::Beta);
        let scenario = ScenarioSpec::new("bridge2", StateLabel::Beta, StateLabel::AlphaHat).unwrap();
        let a = run_scenario(&state, &source, &scenario, "c").unwrap();
        let b = run_scenario(&state, &source, &scenario, "c").unwrap();
        for (x, y) in a.synthetic.records().iter().zip(b.synthetic.records()) {
            assert_eq!(x.samples, y.samples);
        }
    }

    #[test]
    fn scenario_state_mismatch() {
        let config = ArchitectureConfig::reduced();
        let state = init_params(&config, 11).unwrap();
        let source = channel_set(2, 128, StateLabel::Beta);
        let scenario = ScenarioSpec::new("bridge2", StateLabel::Alpha, StateLabel::BetaHat).unwrap();
        assert!(matches!(
            run_scenario(&state, &source, &scenario, "c"),
            Err(SstError::StateMismatch { .. })
        ));
    }

    #[test]
    fn scenario_non_divisible_length() {
        let config = ArchitectureConfig::reduced();
        let state = init_params(&config, 13).unwrap();
        let source = channel_set(1, 100, StateLabel::Alpha); // 100 % 64 != 0
        let scenario = ScenarioSpec::new("bridge2", StateLabel::Alpha, StateLabel::BetaHat).unwrap();
        assert!(matches!(
            run_scenario(&state, &source, &scenario, "c"),
            Err(SstError::NonDivisibleLength { .. })
        ));
    }
}
