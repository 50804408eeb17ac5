//! Cycle-consistent adversarial training: Wasserstein critic losses with
//! a gradient penalty, cycle and identity terms, an AdamW optimizer, and
//! per-iteration monitoring (FID and MMSC against reconstructions).

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::dgcg::{
    generator_forward, ArchitectureConfig, CriticPlan, Direction, GeneratorPlan, ModelState,
    ParamSet,
};
use crate::error::{Result, SstError};
use crate::signal::{StateLabel, TimeRecord, WindowSet};
use crate::spectral::{mmsc, WelchParams};

/// Loss-term weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_cyc: f64,
    pub lambda_id: f64,
    pub lambda_gp: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_cyc: 10.0,
            lambda_id: 10.0,
            lambda_gp: 30.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_cyc < 0.0 || self.lambda_id < 0.0 || self.lambda_gp < 0.0 {
            return Err(SstError::InvalidConfig(
                "loss weights must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Where the gradient-penalty norm is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GpMode {
    /// At the generated samples themselves (default).
    #[default]
    Generated,
    /// At uniform random interpolates between real and generated samples.
    Interpolated,
}

/// What the monitored FID/MMSC compare real windows against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MonitorTarget {
    /// alpha vs G_ba(G_ab(alpha)) and beta vs G_ab(G_ba(beta)) (default).
    #[default]
    CycleReconstruction,
    /// alpha vs G_ba(beta) and beta vs G_ab(alpha), paired by index.
    DirectionTranslation,
}

/// Optimization schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Critic updates per critic preceding each generator update.
    pub critic_iters: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub seed: u64,
    #[serde(default)]
    pub gp_mode: GpMode,
    #[serde(default)]
    pub monitor_target: MonitorTarget,
    /// Windows per domain used for the monitored FID/MMSC.
    pub monitor_subsample: usize,
    /// Checkpoint every this many epochs; 0 keeps only the final state.
    pub checkpoint_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 4,
            epochs: 160,
            learning_rate: 1e-5,
            critic_iters: 10,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 0.01,
            seed: 0,
            gp_mode: GpMode::Generated,
            monitor_target: MonitorTarget::CycleReconstruction,
            monitor_subsample: 8,
            checkpoint_interval: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(SstError::InvalidConfig(m.into()));
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1");
        }
        if self.epochs < 1 {
            return fail("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        if self.critic_iters < 1 {
            return fail("critic_iters must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("Adam betas must lie in [0, 1)");
        }
        if self.weight_decay < 0.0 {
            return fail("weight_decay must be non-negative");
        }
        if self.monitor_subsample < 2 {
            return fail("monitor_subsample must be at least 2");
        }
        Ok(())
    }
}

/// One row of the training monitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub iteration: usize,
    pub total_gen_loss: f64,
    pub total_critic_loss: f64,
    pub fid_alpha: f64,
    pub fid_beta: f64,
    pub mmsc_alpha: f64,
    pub mmsc_beta: f64,
}

impl MonitorRecord {
    pub fn all_finite(&self) -> bool {
        [
            self.total_gen_loss,
            self.total_critic_loss,
            self.fid_alpha,
            self.fid_beta,
            self.mmsc_alpha,
            self.mmsc_beta,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// A labeled mini-batch of equal-length windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub label: StateLabel,
    pub windows: Vec<Vec<f64>>,
}

impl Batch {
    pub fn new(label: StateLabel, windows: Vec<Vec<f64>>) -> Result<Self> {
        if windows.is_empty() {
            return Err(SstError::DomainEmpty(label.as_str().into()));
        }
        let len = windows[0].len();
        if windows.iter().any(|w| w.len() != len) {
            return Err(SstError::ShapeMismatch(
                "batch windows must share one length".into(),
            ));
        }
        Ok(Batch { label, windows })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

fn direction_labels(direction: Direction) -> (StateLabel, StateLabel) {
    match direction {
        Direction::AlphaToBeta => (StateLabel::Alpha, StateLabel::Beta),
        Direction::BetaToAlpha => (StateLabel::Beta, StateLabel::Alpha),
    }
}

fn check_direction(direction: Direction, source: &Batch, real_target: &Batch) -> Result<()> {
    let (src, tgt) = direction_labels(direction);
    if source.label != src || real_target.label != tgt {
        return Err(SstError::DomainMismatch(format!(
            "direction {direction} expects source '{}' and target '{}', got '{}' and '{}'",
            src.as_str(),
            tgt.as_str(),
            source.label.as_str(),
            real_target.label.as_str()
        )));
    }
    Ok(())
}

/// sqrt(sum of squares + tiny) — keeps the penalty differentiable at a
/// zero gradient without perturbing values at f64 precision.
fn guarded_l2_norm(tape: &Tape, a: Var) -> Var {
    let sq = tape.mul(a, a);
    let s = tape.sum_all(sq);
    let s = tape.add_const(s, 1e-24);
    tape.sqrt(s)
}

/// Tape expression for lambda * mean((||grad_x critic(x)|| - 1)^2) over
/// the given sample leaves. `critic` may be any scalar tape function.
pub fn gradient_penalty_of(
    tape: &Tape,
    critic: &dyn Fn(&Tape, Var) -> Var,
    samples: &[Var],
    lambda_gp: f64,
) -> Var {
    assert!(!samples.is_empty(), "gradient penalty needs samples");
    let mut acc = tape.scalar(0.0);
    for &x in samples {
        let score = critic(tape, x);
        let gx = tape.grad(score, &[x])[0];
        let norm = guarded_l2_norm(tape, gx);
        let d = tape.add_const(norm, -1.0);
        let sq = tape.mul(d, d);
        acc = tape.add(acc, sq);
    }
    tape.scale(acc, lambda_gp / samples.len() as f64)
}

/// Value of the gradient penalty for the convolutional critic.
pub fn gradient_penalty(
    arch: &ArchitectureConfig,
    critic_params: &ParamSet,
    samples: &[Vec<f64>],
    lambda_gp: f64,
) -> Result<f64> {
    Ok(gradient_penalty_impl(arch, critic_params, samples, lambda_gp, false)?.0)
}

/// Gradient penalty and its gradient with respect to the critic
/// parameters (flat, manifest order).
pub fn gradient_penalty_grad(
    arch: &ArchitectureConfig,
    critic_params: &ParamSet,
    samples: &[Vec<f64>],
    lambda_gp: f64,
) -> Result<(f64, Vec<f64>)> {
    let (v, g) = gradient_penalty_impl(arch, critic_params, samples, lambda_gp, true)?;
    Ok((v, g.unwrap()))
}

fn gradient_penalty_impl(
    arch: &ArchitectureConfig,
    critic_params: &ParamSet,
    samples: &[Vec<f64>],
    lambda_gp: f64,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    if samples.is_empty() {
        return Err(SstError::DomainEmpty("gradient-penalty batch".into()));
    }
    let plan = CriticPlan::new(arch)?;
    let tape = Tape::new();
    let leaves = critic_params.leaves(&tape);
    let sample_vars: Vec<Var> = samples
        .iter()
        .map(|w| tape.leaf(w.clone(), vec![1, w.len()]))
        .collect();
    let critic = |t: &Tape, x: Var| plan.forward(t, &leaves, x);
    let pen = gradient_penalty_of(&tape, &critic, &sample_vars, lambda_gp);
    let value = tape.value(pen);
    let grad = want_grad.then(|| {
        let gs = tape.grad(pen, &leaves);
        critic_params.flat_grad(&tape, &gs)
    });
    Ok((value, grad))
}

/// Tape expression for the full critic objective:
/// mean C(fake) - mean C(real) + gradient penalty at `gp_points`.
pub fn critic_objective_of(
    tape: &Tape,
    critic: &dyn Fn(&Tape, Var) -> Var,
    real: &[Var],
    fakes: &[Var],
    gp_points: &[Var],
    lambda_gp: f64,
) -> Var {
    let mean_scores = |xs: &[Var]| {
        let mut acc = tape.scalar(0.0);
        for &x in xs {
            let s = critic(tape, x);
            acc = tape.add(acc, s);
        }
        tape.scale(acc, 1.0 / xs.len() as f64)
    };
    let mean_fake = mean_scores(fakes);
    let mean_real = mean_scores(real);
    let wasserstein = tape.sub(mean_fake, mean_real);
    if lambda_gp == 0.0 {
        return wasserstein;
    }
    let pen = gradient_penalty_of(tape, critic, gp_points, lambda_gp);
    tape.add(wasserstein, pen)
}

fn translate_batch(
    arch: &ArchitectureConfig,
    gen: &ParamSet,
    windows: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    windows
        .iter()
        .map(|w| generator_forward(arch, gen, w))
        .collect()
}

fn critic_loss_impl(
    arch: &ArchitectureConfig,
    critic_params: &ParamSet,
    real: &[Vec<f64>],
    fakes: &[Vec<f64>],
    gp_points: &[Vec<f64>],
    lambda_gp: f64,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    let plan = CriticPlan::new(arch)?;
    let tape = Tape::new();
    let leaves = critic_params.leaves(&tape);
    let as_leaves = |ws: &[Vec<f64>]| -> Vec<Var> {
        ws.iter()
            .map(|w| tape.leaf(w.clone(), vec![1, w.len()]))
            .collect()
    };
    let real_vars = as_leaves(real);
    let fake_vars = as_leaves(fakes);
    let gp_vars = as_leaves(gp_points);
    let critic = |t: &Tape, x: Var| plan.forward(t, &leaves, x);
    let loss = critic_objective_of(&tape, &critic, &real_vars, &fake_vars, &gp_vars, lambda_gp);
    let value = tape.value(loss);
    let grad = want_grad.then(|| {
        let gs = tape.grad(loss, &leaves);
        critic_params.flat_grad(&tape, &gs)
    });
    Ok((value, grad))
}

fn gp_points_for(
    mode: GpMode,
    real: &[Vec<f64>],
    fakes: &[Vec<f64>],
    rng: Option<&mut ChaCha8Rng>,
) -> Vec<Vec<f64>> {
    match mode {
        GpMode::Generated => fakes.to_vec(),
        GpMode::Interpolated => {
            let mut rng = rng.expect("interpolated penalty needs an rng").clone();
            fakes
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    let r = &real[i % real.len()];
                    let eps: f64 = rng.gen();
                    f.iter()
                        .zip(r)
                        .map(|(fv, rv)| eps * rv + (1.0 - eps) * fv)
                        .collect()
                })
                .collect()
        }
    }
}

/// Critic loss for one direction: mean C(fake) - mean C(real) plus the
/// gradient penalty at the generated samples.
pub fn critic_loss(
    direction: Direction,
    real_target: &Batch,
    source: &Batch,
    state: &ModelState,
    weights: &LossWeights,
) -> Result<f64> {
    check_direction(direction, source, real_target)?;
    let fakes = translate_batch(&state.config, state.generator(direction), &source.windows)?;
    let gp_points = gp_points_for(GpMode::Generated, &real_target.windows, &fakes, None);
    Ok(critic_loss_impl(
        &state.config,
        state.critic(direction),
        &real_target.windows,
        &fakes,
        &gp_points,
        weights.lambda_gp,
        false,
    )?
    .0)
}

/// Critic loss and its gradient with respect to that direction's critic.
pub fn critic_loss_grad(
    direction: Direction,
    real_target: &Batch,
    source: &Batch,
    state: &ModelState,
    weights: &LossWeights,
) -> Result<(f64, Vec<f64>)> {
    check_direction(direction, source, real_target)?;
    let fakes = translate_batch(&state.config, state.generator(direction), &source.windows)?;
    let gp_points = gp_points_for(GpMode::Generated, &real_target.windows, &fakes, None);
    let (v, g) = critic_loss_impl(
        &state.config,
        state.critic(direction),
        &real_target.windows,
        &fakes,
        &gp_points,
        weights.lambda_gp,
        true,
    )?;
    Ok((v, g.unwrap()))
}

/// Sum of the two directions' critic losses.
pub fn total_critic_loss(
    state: &ModelState,
    batch_alpha: &Batch,
    batch_beta: &Batch,
    weights: &LossWeights,
) -> Result<f64> {
    let ab = critic_loss(
        Direction::AlphaToBeta,
        batch_beta,
        batch_alpha,
        state,
        weights,
    )?;
    let ba = critic_loss(
        Direction::BetaToAlpha,
        batch_alpha,
        batch_beta,
        state,
        weights,
    )?;
    Ok(ab + ba)
}

/// The four generator loss components and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorLossParts {
    pub adv_alpha_to_beta: f64,
    pub adv_beta_to_alpha: f64,
    pub cycle: f64,
    pub identity: f64,
    pub total: f64,
}

fn generator_losses_impl(
    state: &ModelState,
    batch_alpha: &Batch,
    batch_beta: &Batch,
    weights: &LossWeights,
    want_grad: bool,
) -> Result<(GeneratorLossParts, Option<(Vec<f64>, Vec<f64>)>)> {
    if batch_alpha.is_empty() || batch_beta.is_empty() {
        return Err(SstError::DomainEmpty("generator batch".into()));
    }
    let gplan = GeneratorPlan::new(&state.config)?;
    let cplan = CriticPlan::new(&state.config)?;
    let tape = Tape::new();
    let g_ab = state.g_ab.leaves(&tape);
    let g_ba = state.g_ba.leaves(&tape);
    let c_ab = state.c_ab.leaves(&tape);
    let c_ba = state.c_ba.leaves(&tape);

    let zero = || tape.scalar(0.0);
    let (mut adv_ab, mut adv_ba) = (zero(), zero());
    let (mut cyc_a, mut cyc_b) = (zero(), zero());
    let (mut id_a, mut id_b) = (zero(), zero());

    for w in &batch_alpha.windows {
        let x = tape.leaf(w.clone(), vec![1, w.len()]);
        let fake_b = gplan.forward(&tape, &g_ab, x);
        let score = cplan.forward(&tape, &c_ab, fake_b);
        adv_ab = tape.add(adv_ab, score);
        let back = gplan.forward(&tape, &g_ba, fake_b);
        cyc_a = tape.add(cyc_a, tape.l1_mean(back, x));
        let same = gplan.forward(&tape, &g_ba, x);
        id_a = tape.add(id_a, tape.l1_mean(same, x));
    }
    for w in &batch_beta.windows {
        let y = tape.leaf(w.clone(), vec![1, w.len()]);
        let fake_a = gplan.forward(&tape, &g_ba, y);
        let score = cplan.forward(&tape, &c_ba, fake_a);
        adv_ba = tape.add(adv_ba, score);
        let back = gplan.forward(&tape, &g_ab, fake_a);
        cyc_b = tape.add(cyc_b, tape.l1_mean(back, y));
        let same = gplan.forward(&tape, &g_ab, y);
        id_b = tape.add(id_b, tape.l1_mean(same, y));
    }

    let na = batch_alpha.len() as f64;
    let nb = batch_beta.len() as f64;
    let adv_ab = tape.scale(adv_ab, -1.0 / na);
    let adv_ba = tape.scale(adv_ba, -1.0 / nb);
    let cycle = tape.add(tape.scale(cyc_a, 1.0 / na), tape.scale(cyc_b, 1.0 / nb));
    let identity = tape.add(tape.scale(id_a, 1.0 / na), tape.scale(id_b, 1.0 / nb));
    let adv = tape.add(adv_ab, adv_ba);
    let weighted = tape.add(
        tape.scale(cycle, weights.lambda_cyc),
        tape.scale(identity, weights.lambda_id),
    );
    let total = tape.add(adv, weighted);

    let parts = GeneratorLossParts {
        adv_alpha_to_beta: tape.value(adv_ab),
        adv_beta_to_alpha: tape.value(adv_ba),
        cycle: tape.value(cycle),
        identity: tape.value(identity),
        total: tape.value(total),
    };
    let grads = want_grad.then(|| {
        let wrt: Vec<Var> = g_ab.iter().chain(g_ba.iter()).copied().collect();
        let gs = tape.grad(total, &wrt);
        let (gs_ab, gs_ba) = gs.split_at(g_ab.len());
        (
            state.g_ab.flat_grad(&tape, gs_ab),
            state.g_ba.flat_grad(&tape, gs_ba),
        )
    });
    Ok((parts, grads))
}

/// -mean critic score of translated source windows.
pub fn generator_adv_loss(direction: Direction, source: &Batch, state: &ModelState) -> Result<f64> {
    let (src, _) = direction_labels(direction);
    if source.label != src {
        return Err(SstError::DomainMismatch(format!(
            "direction {direction} expects source '{}', got '{}'",
            src.as_str(),
            source.label.as_str()
        )));
    }
    let cplan = CriticPlan::new(&state.config)?;
    let fakes = translate_batch(&state.config, state.generator(direction), &source.windows)?;
    let tape = Tape::new();
    let leaves = state.critic(direction).leaves(&tape);
    let mut acc = 0.0;
    for f in &fakes {
        let x = tape.leaf(f.clone(), vec![1, f.len()]);
        acc += tape.value(cplan.forward(&tape, &leaves, x));
    }
    Ok(-acc / fakes.len() as f64)
}

/// Mean L1 of both cycle reconstructions.
pub fn cycle_loss(state: &ModelState, batch_alpha: &Batch, batch_beta: &Batch) -> Result<f64> {
    let unit = LossWeights {
        lambda_cyc: 1.0,
        lambda_id: 0.0,
        lambda_gp: 0.0,
    };
    Ok(generator_losses_impl(state, batch_alpha, batch_beta, &unit, false)?.0.cycle)
}

/// Mean L1 of each generator applied to its own target domain.
pub fn identity_loss(state: &ModelState, batch_alpha: &Batch, batch_beta: &Batch) -> Result<f64> {
    let unit = LossWeights {
        lambda_cyc: 0.0,
        lambda_id: 1.0,
        lambda_gp: 0.0,
    };
    Ok(generator_losses_impl(state, batch_alpha, batch_beta, &unit, false)?.0.identity)
}

/// adv(ab) + adv(ba) + lambda_cyc * cycle + lambda_id * identity.
pub fn total_generator_loss(
    state: &ModelState,
    batch_alpha: &Batch,
    batch_beta: &Batch,
    weights: &LossWeights,
) -> Result<f64> {
    Ok(generator_losses_impl(state, batch_alpha, batch_beta, weights, false)?.0.total)
}

/// All generator loss components at once.
pub fn generator_loss_parts(
    state: &ModelState,
    batch_alpha: &Batch,
    batch_beta: &Batch,
    weights: &LossWeights,
) -> Result<GeneratorLossParts> {
    Ok(generator_losses_impl(state, batch_alpha, batch_beta, weights, false)?.0)
}

/// Total generator loss and its gradients for both generators.
pub fn total_generator_loss_grad(
    state: &ModelState,
    batch_alpha: &Batch,
    batch_beta: &Batch,
    weights: &LossWeights,
) -> Result<(GeneratorLossParts, Vec<f64>, Vec<f64>)> {
    let (parts, grads) = generator_losses_impl(state, batch_alpha, batch_beta, weights, true)?;
    let (ga, gb) = grads.unwrap();
    Ok((parts, ga, gb))
}

/// Decoupled-weight-decay Adam on one flat parameter buffer.
#[derive(Debug, Clone)]
pub struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub epsilon: f64,
}

impl AdamW {
    pub fn new(n: usize, config: &TrainConfig) -> Self {
        AdamW {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            weight_decay: config.weight_decay,
            epsilon: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.learning_rate
                * (mhat / (vhat.sqrt() + self.epsilon) + self.weight_decay * params[i]);
        }
    }
}

/// One critic update for one direction. Touches only that direction's
/// critic parameters.
pub fn critic_update(
    state: &mut ModelState,
    optimizer: &mut AdamW,
    direction: Direction,
    real_target: &Batch,
    source: &Batch,
    weights: &LossWeights,
    gp_mode: GpMode,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    check_direction(direction, source, real_target)?;
    let fakes = translate_batch(&state.config, state.generator(direction), &source.windows)?;
    let gp_points = gp_points_for(gp_mode, &real_target.windows, &fakes, Some(rng));
    let (value, grad) = critic_loss_impl(
        &state.config,
        state.critic(direction),
        &real_target.windows,
        &fakes,
        &gp_points,
        weights.lambda_gp,
        true,
    )?;
    let (v, g) = (value, grad.unwrap());
    let params = match direction {
        Direction::AlphaToBeta => &mut state.c_ab,
        Direction::BetaToAlpha => &mut state.c_ba,
    };
    optimizer.step(&mut params.data, &g);
    Ok(v)
}

/// One joint update of both generators.
pub fn generator_update(
    state: &mut ModelState,
    opt_ab: &mut AdamW,
    opt_ba: &mut AdamW,
    batch_alpha: &Batch,
    batch_beta: &Batch,
    weights: &LossWeights,
) -> Result<GeneratorLossParts> {
    let (parts, ga, gb) = total_generator_loss_grad(state, batch_alpha, batch_beta, weights)?;
    opt_ab.step(&mut state.g_ab.data, &ga);
    opt_ba.step(&mut state.g_ba.data, &gb);
    Ok(parts)
}

/// Monitored quality metrics for one parameter snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub fid_alpha: f64,
    pub fid_beta: f64,
    pub mmsc_alpha: f64,
    pub mmsc_beta: f64,
}

fn monitor_welch_params(window_length: usize) -> WelchParams {
    WelchParams {
        segment_length: (window_length / 2).min(1024),
        ..WelchParams::default()
    }
}

fn mean_paired_mmsc(real: &[Vec<f64>], recon: &[Vec<f64>], sample_rate: f64) -> Result<f64> {
    let params = monitor_welch_params(real[0].len());
    let mut acc = 0.0;
    for (r, s) in real.iter().zip(recon) {
        let rx = TimeRecord::new(sample_rate, r.clone(), 0, "monitor", StateLabel::Alpha)?;
        let ry = TimeRecord::new(sample_rate, s.clone(), 0, "monitor", StateLabel::Alpha)?;
        acc += mmsc(&rx, &ry, &params)?;
    }
    Ok(acc / real.len() as f64)
}

/// FID and MMSC between each domain and its reconstruction, computed on
/// up to `subsample` windows per domain.
pub fn evaluate_training_epoch(
    state: &ModelState,
    domain_alpha: &WindowSet,
    domain_beta: &WindowSet,
    target: MonitorTarget,
    subsample: usize,
) -> Result<EpochMetrics> {
    let arch = &state.config;
    let take = |ws: &WindowSet| -> Vec<Vec<f64>> {
        ws.windows().iter().take(subsample).cloned().collect()
    };
    let alpha = take(domain_alpha);
    let beta = take(domain_beta);
    if alpha.is_empty() {
        return Err(SstError::DomainEmpty("alpha".into()));
    }
    if beta.is_empty() {
        return Err(SstError::DomainEmpty("beta".into()));
    }
    let (alpha_hat, beta_hat) = match target {
        MonitorTarget::CycleReconstruction => {
            let ab = translate_batch(arch, &state.g_ab, &alpha)?;
            let alpha_hat = translate_batch(arch, &state.g_ba, &ab)?;
            let ba = translate_batch(arch, &state.g_ba, &beta)?;
            let beta_hat = translate_batch(arch, &state.g_ab, &ba)?;
            (alpha_hat, beta_hat)
        }
        MonitorTarget::DirectionTranslation => {
            let n = alpha.len().min(beta.len());
            let alpha_hat = translate_batch(arch, &state.g_ba, &beta[..n])?;
            let beta_hat = translate_batch(arch, &state.g_ab, &alpha[..n])?;
            (alpha_hat, beta_hat)
        }
    };
    let na = alpha.len().min(alpha_hat.len());
    let nb = beta.len().min(beta_hat.len());
    Ok(EpochMetrics {
        fid_alpha: crate::fid::frechet_gaussian(&alpha[..na], &alpha_hat[..na]),
        fid_beta: crate::fid::frechet_gaussian(&beta[..nb], &beta_hat[..nb]),
        mmsc_alpha: mean_paired_mmsc(&alpha[..na], &alpha_hat[..na], domain_alpha.sample_rate)?,
        mmsc_beta: mean_paired_mmsc(&beta[..nb], &beta_hat[..nb], domain_beta.sample_rate)?,
    })
}

/// A parameter snapshot taken during training.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub epoch: usize,
    pub state: ModelState,
}

/// Everything `train` produces.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub state: ModelState,
    pub monitor: Vec<MonitorRecord>,
    pub checkpoints: Vec<Checkpoint>,
    pub critic_updates: usize,
    pub generator_updates: usize,
}

fn sample_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|_| rng.gen_range(0..n)).collect()
}

fn gather(windows: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| windows[i].clone()).collect()
}

/// The full training loop: per generator iteration, `critic_iters`
/// updates of each critic on freshly sampled batches, then one joint
/// generator update, with one monitor row per generator iteration.
pub fn train(
    config: &TrainConfig,
    weights: &LossWeights,
    arch: &ArchitectureConfig,
    domain_alpha: &WindowSet,
    domain_beta: &WindowSet,
) -> Result<TrainOutput> {
    config.validate()?;
    weights.validate()?;
    arch.validate()?;
    if domain_alpha.is_empty() {
        return Err(SstError::DomainEmpty("alpha".into()));
    }
    if domain_beta.is_empty() {
        return Err(SstError::DomainEmpty("beta".into()));
    }
    for (name, ws) in [("alpha", domain_alpha), ("beta", domain_beta)] {
        if ws.window_length != arch.input_length {
            return Err(SstError::ShapeMismatch(format!(
                "{name} windows have length {}, architecture expects {}",
                ws.window_length, arch.input_length
            )));
        }
    }
    let alpha = domain_alpha.windows();
    let beta = domain_beta.windows();
    let batches_per_epoch = alpha.len().min(beta.len()) / config.batch_size;
    if batches_per_epoch == 0 {
        return Err(SstError::InvalidConfig(format!(
            "batch size {} exceeds the smaller domain ({} windows)",
            config.batch_size,
            alpha.len().min(beta.len())
        )));
    }

    let mut state = crate::dgcg::init_params(arch, config.seed)?;
    let mut opt_g_ab = AdamW::new(state.g_ab.len(), config);
    let mut opt_g_ba = AdamW::new(state.g_ba.len(), config);
    let mut opt_c_ab = AdamW::new(state.c_ab.len(), config);
    let mut opt_c_ba = AdamW::new(state.c_ba.len(), config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5354_5f54_5241_494e));

    let mut monitor = Vec::new();
    let mut checkpoints = Vec::new();
    let mut critic_updates = 0usize;
    let mut generator_updates = 0usize;
    let mut iteration = 0usize;

    for epoch in 1..=config.epochs {
        let mut order_a: Vec<usize> = (0..alpha.len()).collect();
        let mut order_b: Vec<usize> = (0..beta.len()).collect();
        order_a.shuffle(&mut rng);
        order_b.shuffle(&mut rng);

        for b in 0..batches_per_epoch {
            iteration += 1;
            let span = b * config.batch_size..(b + 1) * config.batch_size;
            let gen_alpha = Batch::new(StateLabel::Alpha, gather(alpha, &order_a[span.clone()]))?;
            let gen_beta = Batch::new(StateLabel::Beta, gather(beta, &order_b[span]))?;

            let mut last_critic = [0.0f64; 2];
            for (d, direction) in [Direction::AlphaToBeta, Direction::BetaToAlpha]
                .into_iter()
                .enumerate()
            {
                let (opt, src_windows, tgt_windows, src_label, tgt_label) = match direction {
                    Direction::AlphaToBeta => {
                        (&mut opt_c_ab, alpha, beta, StateLabel::Alpha, StateLabel::Beta)
                    }
                    Direction::BetaToAlpha => {
                        (&mut opt_c_ba, beta, alpha, StateLabel::Beta, StateLabel::Alpha)
                    }
                };
                for _ in 0..config.critic_iters {
                    let src_idx = sample_indices(&mut rng, src_windows.len(), config.batch_size);
                    let tgt_idx = sample_indices(&mut rng, tgt_windows.len(), config.batch_size);
                    let source = Batch::new(src_label, gather(src_windows, &src_idx))?;
                    let real = Batch::new(tgt_label, gather(tgt_windows, &tgt_idx))?;
                    last_critic[d] = critic_update(
                        &mut state,
                        opt,
                        direction,
                        &real,
                        &source,
                        weights,
                        config.gp_mode,
                        &mut rng,
                    )?;
                    critic_updates += 1;
                }
            }

            let parts = generator_update(
                &mut state,
                &mut opt_g_ab,
                &mut opt_g_ba,
                &gen_alpha,
                &gen_beta,
                weights,
            )?;
            generator_updates += 1;

            let total_critic = last_critic[0] + last_critic[1];
            if !parts.total.is_finite() {
                return Err(SstError::NonFiniteLoss {
                    iteration,
                    which: "generator".into(),
                });
            }
            if !total_critic.is_finite() {
                return Err(SstError::NonFiniteLoss {
                    iteration,
                    which: "critic".into(),
                });
            }
            let metrics = evaluate_training_epoch(
                &state,
                domain_alpha,
                domain_beta,
                config.monitor_target,
                config.monitor_subsample,
            )?;
            let record = MonitorRecord {
                iteration,
                total_gen_loss: parts.total,
                total_critic_loss: total_critic,
                fid_alpha: metrics.fid_alpha,
                fid_beta: metrics.fid_beta,
                mmsc_alpha: metrics.mmsc_alpha,
                mmsc_beta: metrics.mmsc_beta,
            };
            if !record.all_finite() {
                return Err(SstError::NonFiniteLoss {
                    iteration,
                    which: "monitor".into(),
                });
            }
            monitor.push(record);
        }

        if config.checkpoint_interval > 0 && epoch % config.checkpoint_interval == 0 {
            checkpoints.push(Checkpoint {
                epoch,
                state: state.clone(),
            });
        }
    }
    if checkpoints.last().map(|c| c.epoch) != Some(config.epochs) {
        checkpoints.push(Checkpoint {
            epoch: config.epochs,
            state: state.clone(),
        });
    }

    Ok(TrainOutput {
        state,
        monitor,
        checkpoints,
        critic_updates,
        generator_updates,
    })
}
