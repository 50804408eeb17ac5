//! Stage drivers behind the command-line interface. Each stage reads
//! and writes artifacts in one output directory:
//!
//! - simulate: `{structure}_{state}.sstsig` + `.truth.json` sidecars
//! - train:    `monitor.csv`, periodic `checkpoint_epoch*.sstckpt`,
//!   `model_final.sstckpt`
//! - translate: `{structure}_{state_hat}.sstsig` + `.scenario.json`
//! - evaluate: `report_{structure}_{state_hat}.{csv,json}` and optional
//!   SVG plots
//!
//! `pipeline` chains all four.

use std::path::{Path, PathBuf};

use crate::config::{EvaluationSection, PipelineConfig};
use crate::error::{Result, SstError};
use crate::io;
use crate::modal_id::{compare_states, fdd, pick_peaks, ComparisonReport};
use crate::plot;
use crate::signal::{split_into_windows, ChannelSet, StateLabel, WindowSet};
use crate::sim::{apply_state, build_model, preset, simulate, StateSpec};
use crate::training::train;
use crate::translation::run_scenario;

/// Deterministic per-structure excitation stream: all states of one
/// structure share an excitation realization so translated and measured
/// responses stay coherent, while different structures get independent
/// noise.
pub fn excitation_seed(base: u64, structure_id: &str) -> u64 {
    let digest = io::sha256_hex(structure_id.as_bytes());
    let salt = u64::from_str_radix(&digest[..16], 16).unwrap_or(0);
    base ^ salt
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| SstError::io(dir.display().to_string(), e))
}

fn container_path(out: &Path, structure: &str, state: StateLabel) -> PathBuf {
    out.join(PipelineConfig::container_name(structure, state))
}

fn read_container(out: &Path, structure: &str, state: StateLabel) -> Result<ChannelSet> {
    let path = container_path(out, structure, state);
    let (cs, _unit) = io::read_sstsig(&path)?;
    if cs.structure_id() != structure || cs.state_label() != state {
        return Err(SstError::BadFormat {
            path: path.display().to_string(),
            reason: format!(
                "container labeled ({}, {}) does not match its filename",
                cs.structure_id(),
                cs.state_label()
            ),
        });
    }
    Ok(cs)
}

/// Simulates every configured (structure, state) pair and writes one
/// container plus one modal-truth sidecar each.
pub fn cmd_simulate(config: &PipelineConfig, out: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    ensure_dir(out)?;
    let mut artifacts = Vec::new();
    for structure in &config.simulation.presets {
        let base = build_model(&preset(structure)?)?;
        let mut excitation = config.simulation.excitation.clone();
        excitation.seed = excitation_seed(excitation.seed, structure);
        for &label in &config.simulation.states {
            let spec = StateSpec::for_label(&base, label, config.simulation.stiffness_scale)?;
            let model = apply_state(&base, &spec)?;
            let result = simulate(&model, &excitation, config.simulation.pattern, label)?;
            let sig = container_path(out, structure, label);
            io::write_sstsig(&sig, &result.responses, "m/s^2")?;
            let sidecar = out.join(PipelineConfig::sidecar_name(structure, label));
            io::write_simulation_sidecar(
                &sidecar,
                &io::SimulationSidecar {
                    structure_id: structure.clone(),
                    state_label: label,
                    model,
                    state: spec,
                    excitation: result.excitation_used,
                    truth: result.truth,
                },
            )?;
            artifacts.push(sig);
            artifacts.push(sidecar);
        }
    }
    Ok(artifacts)
}

fn domain_windows(
    out: &Path,
    structure: &str,
    state: StateLabel,
    window_seconds: f64,
) -> Result<WindowSet> {
    let cs = read_container(out, structure, state)?;
    let sets: Vec<WindowSet> = cs
        .records()
        .iter()
        .map(|r| split_into_windows(r, window_seconds))
        .collect::<Result<_>>()?;
    WindowSet::pooled(&sets)
}

/// Trains the translation model on the configured source structure's
/// alpha and beta containers; writes the monitor log, any periodic
/// checkpoints, and the final model.
pub fn cmd_train(config: &PipelineConfig, out: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    ensure_dir(out)?;
    let window_seconds = config.preprocess.window_seconds;
    let source = &config.training.source_structure;
    let domain_alpha = domain_windows(out, source, StateLabel::Alpha, window_seconds)?;
    let domain_beta = domain_windows(out, source, StateLabel::Beta, window_seconds)?;
    let output = train(
        &config.training.config,
        &config.training.weights,
        &config.architecture,
        &domain_alpha,
        &domain_beta,
    )?;
    let mut artifacts = Vec::new();
    let monitor = out.join("monitor.csv");
    io::write_monitor_csv(&monitor, &output.monitor)?;
    artifacts.push(monitor);
    for ckpt in &output.checkpoints {
        let path = out.join(format!("checkpoint_epoch{:04}.sstckpt", ckpt.epoch));
        io::write_sstckpt(&path, &ckpt.state, ckpt.epoch)?;
        artifacts.push(path);
    }
    let final_path = out.join("model_final.sstckpt");
    io::write_sstckpt(&final_path, &output.state, config.training.config.epochs)?;
    artifacts.push(final_path);
    if config.evaluation.plots && !output.monitor.is_empty() {
        let path = out.join("monitor.svg");
        let series = vec![
            plot::Series::new(
                "generator loss",
                output
                    .monitor
                    .iter()
                    .map(|r| (r.iteration as f64, r.total_gen_loss))
                    .collect(),
            ),
            plot::Series::new(
                "critic loss",
                output
                    .monitor
                    .iter()
                    .map(|r| (r.iteration as f64, r.total_critic_loss))
                    .collect(),
            ),
        ];
        plot::line_chart(&path, "training monitor", "generator iteration", "loss", &series)?;
        artifacts.push(path);
    }
    Ok(artifacts)
}

/// Runs every configured scenario through the final trained model and
/// writes one synthetic container plus sidecar per scenario.
pub fn cmd_translate(config: &PipelineConfig, out: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    ensure_dir(out)?;
    let ckpt_path = out.join("model_final.sstckpt");
    let (state, epoch) = io::read_sstckpt(&ckpt_path)?;
    let checkpoint_id = format!("model_final@epoch{epoch}");
    let mut artifacts = Vec::new();
    for section in &config.scenarios {
        let scenario = section.to_spec()?;
        let source = read_container(out, &scenario.target_structure_id, scenario.source_state)?;
        let result = run_scenario(&state, &source, &scenario, checkpoint_id.clone())?;
        let sig = container_path(out, &scenario.target_structure_id, scenario.produced_state);
        io::write_sstsig(&sig, &result.synthetic, "m/s^2")?;
        let sidecar = out.join(format!(
            "{}_{}.scenario.json",
            scenario.target_structure_id,
            scenario.produced_state.as_str()
        ));
        io::write_scenario_sidecar(
            &sidecar,
            &io::ScenarioSidecar {
                scenario,
                checkpoint_id: result.checkpoint_id,
            },
        )?;
        artifacts.push(sig);
        artifacts.push(sidecar);
    }
    Ok(artifacts)
}

/// Compares one real/synthetic channel-set pair: modal identification on
/// both, mode pairing, and per-channel spectral coherence.
pub fn evaluate_pair(
    real: &ChannelSet,
    synthetic: &ChannelSet,
    evaluation: &EvaluationSection,
    scenario_name: Option<String>,
) -> Result<ComparisonReport> {
    let mut report = compare_states(real, synthetic, &evaluation.fdd, &evaluation.mmsc_params())?;
    report.scenario = scenario_name;
    Ok(report)
}

fn write_evaluation_plots(
    out: &Path,
    stem: &str,
    real: &ChannelSet,
    synthetic: &ChannelSet,
    evaluation: &EvaluationSection,
    report: &ComparisonReport,
    artifacts: &mut Vec<PathBuf>,
) -> Result<()> {
    let mmsc_path = out.join(format!("mmsc_{stem}.svg"));
    let labels: Vec<String> = report
        .per_channel_mmsc
        .iter()
        .map(|(c, _)| format!("ch{c}"))
        .collect();
    let values: Vec<f64> = report.per_channel_mmsc.iter().map(|&(_, v)| v).collect();
    plot::bar_chart(&mmsc_path, &format!("MMSC {stem}"), "MMSC", &labels, &values)?;
    artifacts.push(mmsc_path);

    let spec_path = out.join(format!("spectrum_{stem}.svg"));
    let sv_real = fdd(real, &evaluation.fdd)?;
    let sv_syn = fdd(synthetic, &evaluation.fdd)?;
    let peaks = pick_peaks(&sv_real, &evaluation.fdd)?;
    let to_db = |vals: Vec<f64>| -> Vec<f64> {
        vals.into_iter().map(|v| 10.0 * (v + 1e-300).log10()).collect()
    };
    let series = vec![
        plot::Series::new(
            "measured sv1",
            sv_real
                .frequencies
                .iter()
                .copied()
                .zip(to_db(sv_real.first_singular_values()))
                .collect(),
        ),
        plot::Series::new(
            "synthetic sv1",
            sv_syn
                .frequencies
                .iter()
                .copied()
                .zip(to_db(sv_syn.first_singular_values()))
                .collect(),
        ),
    ];
    let markers: Vec<f64> = peaks.iter().map(|p| p.frequency).collect();
    plot::line_chart_with_markers(
        &spec_path,
        &format!("first singular value {stem}"),
        "frequency (Hz)",
        "magnitude (dB)",
        &series,
        &markers,
    )?;
    artifacts.push(spec_path);
    Ok(())
}

/// Evaluates every configured scenario's synthetic container against the
/// measured container of the produced state; writes one CSV and one JSON
/// report per scenario plus optional plots.
pub fn cmd_evaluate(config: &PipelineConfig, out: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    ensure_dir(out)?;
    let mut artifacts = Vec::new();
    for section in &config.scenarios {
        let scenario = section.to_spec()?;
        let structure = &scenario.target_structure_id;
        let real = read_container(out, structure, scenario.produced_state.unhatted())?;
        let synthetic = read_container(out, structure, scenario.produced_state)?;
        let stem = format!("{structure}_{}", scenario.produced_state.as_str());
        let report = evaluate_pair(
            &real,
            &synthetic,
            &config.evaluation,
            Some(stem.clone()),
        )?;
        let csv = out.join(format!("report_{stem}.csv"));
        io::write_report_csv(&csv, &report)?;
        let json = out.join(format!("report_{stem}.json"));
        io::write_report_json(&json, &report)?;
        artifacts.push(csv);
        artifacts.push(json);
        if config.evaluation.plots {
            write_evaluation_plots(
                out,
                &stem,
                &real,
                &synthetic,
                &config.evaluation,
                &report,
                &mut artifacts,
            )?;
        }
    }
    Ok(artifacts)
}

/// Runs simulate, train, translate, and evaluate in order.
pub fn cmd_pipeline(config: &PipelineConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let mut artifacts = cmd_simulate(config, out)?;
    artifacts.extend(cmd_train(config, out)?);
    artifacts.extend(cmd_translate(config, out)?);
    artifacts.extend(cmd_evaluate(config, out)?);
    Ok(artifacts)
}
