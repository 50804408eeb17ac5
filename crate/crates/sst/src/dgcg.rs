//! The cycle-generative networks: two generators and two critics built
//! from 1-D convolutions, GLU mapping blocks with additive skips, Mish
//! activations, and a bounded generator output.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ConvSpec, Tape, Var};
use crate::error::{Result, SstError};

/// Final generator nonlinearity. `ScaledTanh` is the default; `Linear`
/// exists for degenerate configurations that must represent the exact
/// identity map (shape tests, pass-through baselines).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    #[default]
    ScaledTanh,
    Linear,
}

/// Layer-size knobs for both generators and critics. Channel counts
/// double at every downsampling stage and halve back up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchitectureConfig {
    pub input_length: usize,
    /// Generator channels after the initial convolution.
    pub base_channels: usize,
    /// Stride-2 stages between the input and the mapping blocks.
    pub downsample_stages: usize,
    pub mapping_blocks: usize,
    /// Kernel of the length-preserving mapping-block convolutions (odd).
    pub mapping_kernel: usize,
    /// Kernel of the first and last generator convolutions (odd).
    pub io_kernel: usize,
    /// Kernel of the stride-2 resampling convolutions (even).
    pub resample_kernel: usize,
    pub critic_stages: usize,
    pub critic_base_channels: usize,
    /// Output bound applied after Tanh.
    pub output_scale: f64,
    #[serde(default)]
    pub output_activation: OutputActivation,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        ArchitectureConfig {
            input_length: 4096,
            base_channels: 32,
            downsample_stages: 2,
            mapping_blocks: 4,
            mapping_kernel: 5,
            io_kernel: 15,
            resample_kernel: 8,
            critic_stages: 4,
            critic_base_channels: 32,
            output_scale: 1.0,
            output_activation: OutputActivation::ScaledTanh,
        }
    }
}

impl ArchitectureConfig {
    /// A deliberately tiny configuration for gradient checks and fast
    /// tests (input 64, on the order of a few thousand parameters).
    pub fn reduced() -> Self {
        ArchitectureConfig {
            input_length: 64,
            base_channels: 4,
            downsample_stages: 1,
            mapping_blocks: 1,
            mapping_kernel: 3,
            io_kernel: 5,
            resample_kernel: 4,
            critic_stages: 2,
            critic_base_channels: 4,
            output_scale: 1.0,
            output_activation: OutputActivation::ScaledTanh,
        }
    }

    /// A pass-through shape: no resampling, linear output. With
    /// `identity_generator_params` the generator is the exact identity.
    pub fn passthrough(input_length: usize) -> Self {
        ArchitectureConfig {
            input_length,
            base_channels: 2,
            downsample_stages: 0,
            mapping_blocks: 1,
            mapping_kernel: 3,
            io_kernel: 1,
            resample_kernel: 4,
            critic_stages: 1,
            critic_base_channels: 2,
            output_scale: 1.0,
            output_activation: OutputActivation::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SstError::InvalidConfig(msg));
        if self.input_length == 0 {
            return fail("input_length must be positive".into());
        }
        if self.base_channels == 0 || self.critic_base_channels == 0 {
            return fail("channel counts must be positive".into());
        }
        if self.mapping_kernel % 2 == 0 || self.io_kernel % 2 == 0 {
            return fail("mapping and io kernels must be odd for same-length padding".into());
        }
        if self.resample_kernel % 2 != 0 || self.resample_kernel < 2 {
            return fail("resample kernel must be even and >= 2".into());
        }
        if self.input_length % (1 << self.downsample_stages) != 0 {
            return fail(format!(
                "input_length {} not divisible by 2^{} generator stages",
                self.input_length, self.downsample_stages
            ));
        }
        if self.input_length % (1 << self.critic_stages) != 0 {
            return fail(format!(
                "input_length {} not divisible by 2^{} critic stages",
                self.input_length, self.critic_stages
            ));
        }
        if self.input_length >> self.downsample_stages < self.mapping_kernel {
            return fail("mapping kernel exceeds the downsampled length".into());
        }
        if self.input_length >> self.critic_stages == 0 {
            return fail("too many critic stages for the input length".into());
        }
        if !(self.output_scale > 0.0) {
            return fail("output_scale must be positive".into());
        }
        Ok(())
    }

    fn same_spec(kernel: usize) -> ConvSpec {
        ConvSpec {
            stride: 1,
            padding: (kernel - 1) / 2,
        }
    }

    fn half_spec(&self) -> ConvSpec {
        ConvSpec {
            stride: 2,
            padding: (self.resample_kernel - 2) / 2,
        }
    }
}

/// Shape (and name) of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One network's parameters: an ordered tensor manifest over one flat
/// f64 buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub specs: Vec<TensorSpec>,
    pub data: Vec<f64>,
}

impl ParamSet {
    pub fn zeros(mut specs: Vec<TensorSpec>) -> Self {
        let mut offset = 0;
        for s in &mut specs {
            s.offset = offset;
            offset += s.len();
        }
        ParamSet {
            specs,
            data: vec![0.0; offset],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tensor(&self, i: usize) -> &[f64] {
        let s = &self.specs[i];
        &self.data[s.offset..s.offset + s.len()]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut [f64] {
        let s = self.specs[i].clone();
        &mut self.data[s.offset..s.offset + s.len()]
    }

    pub fn tensor_by_name(&self, name: &str) -> Option<&[f64]> {
        self.specs
            .iter()
            .position(|s| s.name == name)
            .map(|i| self.tensor(i))
    }

    /// One tape leaf per tensor, in manifest order.
    pub fn leaves(&self, tape: &Tape) -> Vec<Var> {
        self.specs
            .iter()
            .enumerate()
            .map(|(i, s)| tape.leaf(self.tensor(i).to_vec(), s.shape.clone()))
            .collect()
    }

    /// Scatters per-tensor gradient vars back into one flat buffer.
    pub fn flat_grad(&self, tape: &Tape, grads: &[Var]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, g) in grads.iter().enumerate() {
            let s = &self.specs[i];
            tape.with_data(*g, |d| {
                out[s.offset..s.offset + s.len()].copy_from_slice(d);
            });
        }
        out
    }

    fn init_uniform(&mut self, rng: &mut ChaCha8Rng) {
        for i in 0..self.specs.len() {
            let spec = self.specs[i].clone();
            let is_bias = spec.shape.len() == 1 && spec.name.ends_with(".b");
            if is_bias {
                continue; // biases start at zero
            }
            let fan_in = match spec.shape.len() {
                3 => {
                    if spec.name.contains("up") {
                        // transposed kernels are stored [Cin, Cout, K]
                        spec.shape[0] * spec.shape[2]
                    } else {
                        spec.shape[1] * spec.shape[2]
                    }
                }
                1 => spec.shape[0],
                _ => spec.len(),
            };
            let bound = (1.0 / fan_in as f64).sqrt();
            for v in self.tensor_mut(i) {
                *v = rng.gen_range(-bound..bound);
            }
        }
    }
}

/// Derived layer-by-layer structure of the generator.
#[derive(Debug, Clone)]
pub struct GeneratorPlan {
    pub config: ArchitectureConfig,
    /// (in_ch, out_ch, length_in) per downsampling stage.
    pub down_stages: Vec<(usize, usize, usize)>,
    pub mid_channels: usize,
    pub mid_length: usize,
}

impl GeneratorPlan {
    pub fn new(config: &ArchitectureConfig) -> Result<Self> {
        config.validate()?;
        let mut stages = Vec::new();
        let mut ch = config.base_channels;
        let mut len = config.input_length;
        for _ in 0..config.downsample_stages {
            stages.push((ch, ch * 2, len));
            ch *= 2;
            len /= 2;
        }
        Ok(GeneratorPlan {
            config: config.clone(),
            down_stages: stages,
            mid_channels: ch,
            mid_length: len,
        })
    }

    pub fn tensor_specs(&self) -> Vec<TensorSpec> {
        let c = &self.config;
        let mut specs = Vec::new();
        let mut push = |name: String, shape: Vec<usize>| {
            specs.push(TensorSpec {
                name,
                shape,
                offset: 0,
            })
        };
        push("init.w".into(), vec![c.base_channels, 1, c.io_kernel]);
        push("init.b".into(), vec![c.base_channels]);
        for (i, &(ci, co, _)) in self.down_stages.iter().enumerate() {
            push(format!("down{i}.w"), vec![co, ci, c.resample_kernel]);
            push(format!("down{i}.b"), vec![co]);
        }
        for m in 0..c.mapping_blocks {
            let ch = self.mid_channels;
            push(format!("map{m}.val.w"), vec![ch, ch, c.mapping_kernel]);
            push(format!("map{m}.val.b"), vec![ch]);
            push(format!("map{m}.gate.w"), vec![ch, ch, c.mapping_kernel]);
            push(format!("map{m}.gate.b"), vec![ch]);
        }
        for (i, &(ci, co, _)) in self.down_stages.iter().enumerate().rev() {
            // upsampling mirrors downsampling: co -> ci
            let idx = self.down_stages.len() - 1 - i;
            push(format!("up{idx}.w"), vec![co, ci, c.resample_kernel]);
            push(format!("up{idx}.b"), vec![ci]);
        }
        push("final.w".into(), vec![1, c.base_channels, c.io_kernel]);
        push("final.b".into(), vec![1]);
        specs
    }

    /// Builds the forward pass on a tape. `params` are leaves in manifest
    /// order; `x` is a `[1, input_length]` signal.
    pub fn forward(&self, tape: &Tape, params: &[Var], x: Var) -> Var {
        let c = &self.config;
        let same_io = ArchitectureConfig::same_spec(c.io_kernel);
        let same_map = ArchitectureConfig::same_spec(c.mapping_kernel);
        let half = c.half_spec();
        let mut p = params.iter().copied();
        let mut next = || p.next().expect("parameter manifest exhausted");

        let mut h = tape.conv(x, next(), same_io);
        h = tape.add_bias(h, next());
        for _ in 0..c.downsample_stages {
            h = tape.conv(h, next(), half);
            h = tape.add_bias(h, next());
            h = tape.mish(h);
        }
        for _ in 0..c.mapping_blocks {
            let values = {
                let v = tape.conv(h, next(), same_map);
                tape.add_bias(v, next())
            };
            let gates = {
                let g = tape.conv(h, next(), same_map);
                tape.add_bias(g, next())
            };
            let gated = tape.glu(values, gates);
            h = tape.add(h, gated); // additive skip
        }
        for &(_, _, len_in) in self.down_stages.iter().rev() {
            h = tape.conv_transposed(h, next(), half, len_in);
            h = tape.add_bias(h, next());
            h = tape.mish(h);
        }
        let mut out = tape.conv(h, next(), same_io);
        out = tape.add_bias(out, next());
        match c.output_activation {
            OutputActivation::ScaledTanh => {
                let t = tape.tanh(out);
                tape.scale(t, c.output_scale)
            }
            OutputActivation::Linear => out,
        }
    }

    /// Parameters that make this generator the exact identity map.
    /// Requires a pass-through shape (no resampling, linear output).
    pub fn identity_params(&self) -> Result<ParamSet> {
        if self.config.downsample_stages != 0
            || self.config.output_activation != OutputActivation::Linear
        {
            return Err(SstError::InvalidConfig(
                "identity parameters need a pass-through configuration".into(),
            ));
        }
        let mut params = ParamSet::zeros(self.tensor_specs());
        let center = (self.config.io_kernel - 1) / 2;
        // channel 0 carries the signal; mapping blocks stay zero so the
        // additive skip passes it through untouched
        let k = self.config.io_kernel;
        let idx_init = params.specs.iter().position(|s| s.name == "init.w").unwrap();
        params.tensor_mut(idx_init)[center] = 1.0;
        let idx_final = params.specs.iter().position(|s| s.name == "final.w").unwrap();
        params.tensor_mut(idx_final)[0 * k + center] = 1.0;
        Ok(params)
    }
}

/// Derived layer-by-layer structure of the critic.
#[derive(Debug, Clone)]
pub struct CriticPlan {
    pub config: ArchitectureConfig,
    /// (in_ch, out_ch) per stride-2 stage.
    pub stages: Vec<(usize, usize)>,
    pub final_channels: usize,
}

impl CriticPlan {
    pub fn new(config: &ArchitectureConfig) -> Result<Self> {
        config.validate()?;
        let mut stages = Vec::new();
        let mut ch = 1;
        for s in 0..config.critic_stages {
            let co = config.critic_base_channels << s;
            stages.push((ch, co));
            ch = co;
        }
        Ok(CriticPlan {
            config: config.clone(),
            stages,
            final_channels: ch,
        })
    }

    pub fn tensor_specs(&self) -> Vec<TensorSpec> {
        let c = &self.config;
        let mut specs = Vec::new();
        for (i, &(ci, co)) in self.stages.iter().enumerate() {
            specs.push(TensorSpec {
                name: format!("conv{i}.w"),
                shape: vec![co, ci, c.resample_kernel],
                offset: 0,
            });
            specs.push(TensorSpec {
                name: format!("conv{i}.b"),
                shape: vec![co],
                offset: 0,
            });
        }
        specs.push(TensorSpec {
            name: "head.w".into(),
            shape: vec![self.final_channels],
            offset: 0,
        });
        specs.push(TensorSpec {
            name: "head.b".into(),
            shape: vec![1],
            offset: 0,
        });
        specs
    }

    /// Scalar critic score of a `[1, input_length]` signal.
    pub fn forward(&self, tape: &Tape, params: &[Var], x: Var) -> Var {
        let half = self.config.half_spec();
        let mut p = params.iter().copied();
        let mut next = || p.next().expect("parameter manifest exhausted");
        let mut h = x;
        for _ in 0..self.stages.len() {
            h = tape.conv(h, next(), half);
            h = tape.add_bias(h, next());
            h = tape.mish(h);
        }
        let pooled = tape.mean_len(h); // [C]
        let head_w = next();
        let head_b = next();
        let score = tape.dot(pooled, head_w);
        tape.add(score, head_b)
    }
}

/// The four networks plus their configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ArchitectureConfig,
    pub seed: u64,
    pub g_ab: ParamSet,
    pub g_ba: ParamSet,
    pub c_ab: ParamSet,
    pub c_ba: ParamSet,
}

/// Translation direction between the two training domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AlphaToBeta,
    BetaToAlpha,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::AlphaToBeta => "alpha_to_beta",
            Direction::BetaToAlpha => "beta_to_alpha",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl ModelState {
    pub fn generator(&self, direction: Direction) -> &ParamSet {
        match direction {
            Direction::AlphaToBeta => &self.g_ab,
            Direction::BetaToAlpha => &self.g_ba,
        }
    }

    pub fn critic(&self, direction: Direction) -> &ParamSet {
        match direction {
            Direction::AlphaToBeta => &self.c_ab,
            Direction::BetaToAlpha => &self.c_ba,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.g_ab.len() + self.g_ba.len() + self.c_ab.len() + self.c_ba.len()
    }

    pub fn all_finite(&self) -> bool {
        [&self.g_ab, &self.g_ba, &self.c_ab, &self.c_ba]
            .iter()
            .all(|p| p.data.iter().all(|v| v.is_finite()))
    }

    /// Both generators exact identities, both critics zero. Needs a
    /// pass-through configuration.
    pub fn identity(config: &ArchitectureConfig) -> Result<ModelState> {
        let gplan = GeneratorPlan::new(config)?;
        let cplan = CriticPlan::new(config)?;
        let g = gplan.identity_params()?;
        let c = ParamSet::zeros(cplan.tensor_specs());
        Ok(ModelState {
            config: config.clone(),
            seed: 0,
            g_ab: g.clone(),
            g_ba: g,
            c_ab: c.clone(),
            c_ba: c,
        })
    }
}

/// Deterministic initialization: weights uniform in +-sqrt(1/fan_in),
/// biases zero.
pub fn init_params(config: &ArchitectureConfig, seed: u64) -> Result<ModelState> {
    let gplan = GeneratorPlan::new(config)?;
    let cplan = CriticPlan::new(config)?;
    let make = |specs: Vec<TensorSpec>, stream: u64| {
        let mut set = ParamSet::zeros(specs);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(stream + 1)));
        set.init_uniform(&mut rng);
        set
    };
    Ok(ModelState {
        config: config.clone(),
        seed,
        g_ab: make(gplan.tensor_specs(), 0),
        g_ba: make(gplan.tensor_specs(), 1),
        c_ab: make(cplan.tensor_specs(), 2),
        c_ba: make(cplan.tensor_specs(), 3),
    })
}

/// One generator pass outside any training tape.
pub fn generator_forward(
    config: &ArchitectureConfig,
    params: &ParamSet,
    window: &[f64],
) -> Result<Vec<f64>> {
    if window.len() != config.input_length {
        return Err(SstError::ShapeMismatch(format!(
            "window length {} != configured input length {}",
            window.len(),
            config.input_length
        )));
    }
    let plan = GeneratorPlan::new(config)?;
    let tape = Tape::new();
    let leaves = params.leaves(&tape);
    let x = tape.leaf(window.to_vec(), vec![1, window.len()]);
    let y = plan.forward(&tape, &leaves, x);
    Ok(tape.data(y))
}

/// One critic pass outside any training tape.
pub fn critic_forward(
    config: &ArchitectureConfig,
    params: &ParamSet,
    window: &[f64],
) -> Result<f64> {
    if window.len() != config.input_length {
        return Err(SstError::ShapeMismatch(format!(
            "window length {} != configured input length {}",
            window.len(),
            config.input_length
        )));
    }
    let plan = CriticPlan::new(config)?;
    let tape = Tape::new();
    let leaves = params.leaves(&tape);
    let x = tape.leaf(window.to_vec(), vec![1, window.len()]);
    let y = plan.forward(&tape, &leaves, x);
    Ok(tape.value(y))
}

/// x * tanh(softplus(x)), overflow-safe.
pub fn mish(x: f64) -> f64 {
    let softplus = x.max(0.0) + (-x.abs()).exp().ln_1p();
    x * softplus.tanh()
}

/// Elementwise values * sigmoid(gates).
pub fn glu(values: &[f64], gates: &[f64]) -> Result<Vec<f64>> {
    if values.len() != gates.len() {
        return Err(SstError::LengthMismatch {
            left: values.len(),
            right: gates.len(),
        });
    }
    Ok(values
        .iter()
        .zip(gates)
        .map(|(v, g)| v / (1.0 + (-g).exp()))
        .collect())
}
