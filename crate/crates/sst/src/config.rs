//! TOML pipeline configuration shared by the command-line stages.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dgcg::ArchitectureConfig;
use crate::error::{Result, SstError};
use crate::modal_id::FddConfig;
use crate::signal::StateLabel;
use crate::sim::{preset, ExcitationPattern, ExcitationSpec, PRESET_NAMES};
use crate::spectral::WelchParams;
use crate::training::{LossWeights, TrainConfig};
use crate::translation::ScenarioSpec;

/// Which structures and states to simulate and under what excitation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSection {
    pub presets: Vec<String>,
    pub states: Vec<StateLabel>,
    /// Remaining stiffness fraction on damaged elements.
    pub stiffness_scale: f64,
    pub damping_ratio: f64,
    pub excitation: ExcitationSpec,
    #[serde(default)]
    pub pattern: ExcitationPattern,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            presets: vec![
                "bridge1".into(),
                "bridge2".into(),
                "bridge3".into(),
                "bridge4".into(),
            ],
            states: vec![StateLabel::Alpha, StateLabel::Beta, StateLabel::Gamma],
            stiffness_scale: 0.6,
            damping_ratio: 0.02,
            excitation: ExcitationSpec::default(),
            pattern: ExcitationPattern::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessSection {
    /// Window length in seconds; times the sample rate this must be an
    /// integer and must equal the architecture's input length.
    pub window_seconds: f64,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection {
            window_seconds: 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSection {
    /// Structure whose alpha and beta responses form the two domains.
    pub source_structure: String,
    #[serde(flatten)]
    pub config: TrainConfig,
    #[serde(default)]
    pub weights: LossWeights,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            source_structure: "bridge1".into(),
            config: TrainConfig::default(),
            weights: LossWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSection {
    pub target_structure_id: String,
    pub source_state: StateLabel,
    pub produced_state: StateLabel,
}

impl ScenarioSection {
    pub fn to_spec(&self) -> Result<ScenarioSpec> {
        ScenarioSpec::new(
            self.target_structure_id.clone(),
            self.source_state,
            self.produced_state,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationSection {
    #[serde(flatten)]
    pub fdd: FddConfig,
    pub mmsc_segment_length: usize,
    pub mmsc_overlap_fraction: f64,
    /// Emit SVG plots alongside the CSV/JSON reports.
    pub plots: bool,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            fdd: FddConfig::default(),
            mmsc_segment_length: 1024,
            mmsc_overlap_fraction: 0.5,
            plots: true,
        }
    }
}

impl EvaluationSection {
    pub fn mmsc_params(&self) -> WelchParams {
        WelchParams {
            segment_length: self.mmsc_segment_length,
            overlap_fraction: self.mmsc_overlap_fraction,
            ..WelchParams::default()
        }
    }
}

/// Everything one run needs, stage by stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub preprocess: PreprocessSection,
    #[serde(default)]
    pub architecture: ArchitectureConfig,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub scenarios: Vec<ScenarioSection>,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            simulation: SimulationSection::default(),
            preprocess: PreprocessSection::default(),
            architecture: ArchitectureConfig::default(),
            training: TrainingSection::default(),
            scenarios: vec![
                ScenarioSection {
                    target_structure_id: "bridge2".into(),
                    source_state: StateLabel::Alpha,
                    produced_state: StateLabel::BetaHat,
                },
                ScenarioSection {
                    target_structure_id: "bridge2".into(),
                    source_state: StateLabel::Beta,
                    produced_state: StateLabel::AlphaHat,
                },
            ],
            evaluation: EvaluationSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: PipelineConfig = toml::from_str(text)
            .map_err(|e| SstError::InvalidConfig(format!("config parse: {e}")))?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| SstError::InvalidConfig(format!("config serialization: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SstError::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    /// Window length in samples implied by the preprocessing section.
    pub fn window_samples(&self) -> Result<usize> {
        let product = self.preprocess.window_seconds * self.simulation.excitation.sample_rate_hz;
        let rounded = product.round();
        if rounded < 1.0 || (product - rounded).abs() > 1e-9 {
            return Err(SstError::NonIntegralWindow { product });
        }
        Ok(rounded as usize)
    }

    /// Full structural validation; cheap (no file access, no compute).
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(SstError::InvalidConfig(m));
        if self.simulation.presets.is_empty() {
            return fail("simulation.presets must not be empty".into());
        }
        for p in &self.simulation.presets {
            preset(p)?;
        }
        if self.simulation.states.is_empty() {
            return fail("simulation.states must not be empty".into());
        }
        for s in &self.simulation.states {
            if s.is_hatted() {
                return fail(format!("cannot simulate synthetic state '{}'", s.as_str()));
            }
        }
        if !(self.simulation.stiffness_scale > 0.0 && self.simulation.stiffness_scale <= 1.0) {
            return fail("simulation.stiffness_scale must lie in (0, 1]".into());
        }
        if !(self.simulation.damping_ratio > 0.0 && self.simulation.damping_ratio < 1.0) {
            return fail("simulation.damping_ratio must lie in (0, 1)".into());
        }
        self.simulation.excitation.validate()?;
        let window = self.window_samples()?;
        self.architecture.validate()?;
        if window != self.architecture.input_length {
            return fail(format!(
                "window of {window} samples does not match architecture input_length {}",
                self.architecture.input_length
            ));
        }
        let total_samples = (self.simulation.excitation.duration_s
            * self.simulation.excitation.sample_rate_hz)
            .round() as usize;
        if total_samples % window != 0 {
            return fail(format!(
                "record length {total_samples} is not divisible into {window}-sample windows"
            ));
        }
        self.training.config.validate()?;
        self.training.weights.validate()?;
        if !self
            .simulation
            .presets
            .contains(&self.training.source_structure)
        {
            return fail(format!(
                "training.source_structure '{}' is not among the simulated presets",
                self.training.source_structure
            ));
        }
        for s in &self.scenarios {
            s.to_spec()?;
            if !self.simulation.presets.contains(&s.target_structure_id) {
                return fail(format!(
                    "scenario target '{}' is not among the simulated presets",
                    s.target_structure_id
                ));
            }
            if !self.simulation.states.contains(&s.source_state) {
                return fail(format!(
                    "scenario source state '{}' is not simulated",
                    s.source_state.as_str()
                ));
            }
        }
        self.evaluation.fdd.validate()?;
        self.evaluation.mmsc_params().validate()?;
        Ok(())
    }

    /// A small configuration that runs end to end in minutes on one
    /// core: short records, shallow model, few epochs.
    pub fn desk_scale() -> Self {
        let mut config = PipelineConfig::default();
        config.out_dir = PathBuf::from("runs/desk");
        config.simulation.presets = vec!["bridge1".into(), "bridge2".into()];
        config.simulation.excitation.duration_s = 128.0;
        config.simulation.pattern = ExcitationPattern::IndependentPerDof;
        config.preprocess.window_seconds = 4.0;
        config.architecture = ArchitectureConfig {
            input_length: 1024,
            base_channels: 4,
            downsample_stages: 2,
            mapping_blocks: 1,
            mapping_kernel: 5,
            io_kernel: 15,
            resample_kernel: 8,
            critic_stages: 3,
            critic_base_channels: 4,
            output_scale: 1.0,
            ..ArchitectureConfig::default()
        };
        config.training.config.epochs = 2;
        config.training.config.monitor_subsample = 4;
        config.evaluation.fdd.frequency_lines = 1024;
        config
    }

    /// Container filename convention used by every stage.
    pub fn container_name(structure: &str, state: StateLabel) -> String {
        format!("{structure}_{}.sstsig", state.as_str())
    }

    /// Sidecar filename convention.
    pub fn sidecar_name(structure: &str, state: StateLabel) -> String {
        format!("{structure}_{}.truth.json", state.as_str())
    }
}

/// Re-exported so callers can enumerate valid preset names in messages.
pub fn preset_names() -> &'static [&'static str] {
    &PRESET_NAMES
}
