//! On-disk artifact formats: signal containers, model checkpoints,
//! monitor/report CSVs, JSON sidecars, and run manifests.
//!
//! Signal container (`.sstsig`): one UTF-8 JSON header line terminated
//! by `\n`, then `channels x samples_per_channel` little-endian binary64
//! values, channel-major.
//!
//! Checkpoint (`.sstckpt`): one UTF-8 JSON header line with the
//! architecture, epoch, seed, and an ordered parameter manifest, then
//! all parameter arrays concatenated in manifest order, little-endian
//! binary64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dgcg::{ArchitectureConfig, CriticPlan, GeneratorPlan, ModelState, ParamSet};
use crate::error::{Result, SstError};
use crate::modal_id::ComparisonReport;
use crate::signal::{ChannelSet, StateLabel, TimeRecord};
use crate::sim::{ExcitationSpec, LatticeModel, ModalTruth, StateSpec};
use crate::training::MonitorRecord;
use crate::translation::ScenarioSpec;

pub const SIG_MAGIC: &str = "SSTSIG";
pub const CKPT_MAGIC: &str = "SSTCKPT";
pub const FORMAT_VERSION: u32 = 1;

fn io_err(path: &Path, e: std::io::Error) -> SstError {
    SstError::io(path.display().to_string(), e)
}

fn bad(path: &Path, reason: impl Into<String>) -> SstError {
    SstError::BadFormat {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SigHeader {
    magic: String,
    version: u32,
    sample_rate_hz: f64,
    channels: usize,
    samples_per_channel: usize,
    structure_id: String,
    state_label: String,
    unit: String,
}

/// Writes a channel set as an SSTSIG container.
pub fn write_sstsig(path: &Path, cs: &ChannelSet, unit: &str) -> Result<()> {
    let header = SigHeader {
        magic: SIG_MAGIC.into(),
        version: FORMAT_VERSION,
        sample_rate_hz: cs.sample_rate(),
        channels: cs.channel_count(),
        samples_per_channel: cs.samples_per_channel(),
        structure_id: cs.structure_id().into(),
        state_label: cs.state_label().as_str().into(),
        unit: unit.into(),
    };
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    serde_json::to_writer(&mut w, &header)
        .map_err(|e| bad(path, format!("header serialization: {e}")))?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    for record in cs.records() {
        for v in &record.samples {
            w.write_all(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn read_header_line(r: &mut impl Read, path: &Path) -> Result<String> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        match r.read(&mut byte).map_err(|e| io_err(path, e))? {
            0 => return Err(bad(path, "missing newline-terminated header")),
            _ => {
                if byte[0] == b'\n' {
                    break;
                }
                line.push(byte[0]);
                if line.len() > 1 << 20 {
                    return Err(bad(path, "header exceeds 1 MiB"));
                }
            }
        }
    }
    String::from_utf8(line).map_err(|_| bad(path, "header is not UTF-8"))
}

fn read_f64_block(r: &mut impl Read, count: usize, path: &Path) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes).map_err(|e| io_err(path, e))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Reads an SSTSIG container. Returns the channel set and the stored
/// unit string. Channels are numbered in stored order.
pub fn read_sstsig(path: &Path) -> Result<(ChannelSet, String)> {
    let mut r = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let header: SigHeader = serde_json::from_str(&read_header_line(&mut r, path)?)
        .map_err(|e| bad(path, format!("header: {e}")))?;
    if header.magic != SIG_MAGIC {
        return Err(bad(path, format!("magic '{}', expected '{SIG_MAGIC}'", header.magic)));
    }
    if header.version != FORMAT_VERSION {
        return Err(bad(path, format!("unsupported version {}", header.version)));
    }
    let label = StateLabel::parse(&header.state_label)
        .map_err(|_| bad(path, format!("unknown state label '{}'", header.state_label)))?;
    if header.channels == 0 || header.samples_per_channel == 0 {
        return Err(bad(path, "container has no data"));
    }
    let mut records = Vec::with_capacity(header.channels);
    for ch in 0..header.channels {
        let samples = read_f64_block(&mut r, header.samples_per_channel, path)?;
        records.push(TimeRecord::new(
            header.sample_rate_hz,
            samples,
            ch,
            header.structure_id.clone(),
            label,
        )?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| io_err(path, e))? != 0 {
        return Err(bad(path, "trailing bytes after the declared payload"));
    }
    Ok((ChannelSet::new(records)?, header.unit))
}

#[derive(Debug, Serialize, Deserialize)]
struct CkptHeader {
    magic: String,
    version: u32,
    config: ArchitectureConfig,
    epoch: usize,
    seed: u64,
    manifest: Vec<(String, Vec<usize>)>,
}

fn networks(state: &ModelState) -> [(&'static str, &ParamSet); 4] {
    [
        ("g_ab", &state.g_ab),
        ("g_ba", &state.g_ba),
        ("c_ab", &state.c_ab),
        ("c_ba", &state.c_ba),
    ]
}

fn full_manifest(state: &ModelState) -> Vec<(String, Vec<usize>)> {
    networks(state)
        .iter()
        .flat_map(|(prefix, set)| {
            set.specs
                .iter()
                .map(move |s| (format!("{prefix}/{}", s.name), s.shape.clone()))
        })
        .collect()
}

/// Writes a model checkpoint.
pub fn write_sstckpt(path: &Path, state: &ModelState, epoch: usize) -> Result<()> {
    let header = CkptHeader {
        magic: CKPT_MAGIC.into(),
        version: FORMAT_VERSION,
        config: state.config.clone(),
        epoch,
        seed: state.seed,
        manifest: full_manifest(state),
    };
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    serde_json::to_writer(&mut w, &header)
        .map_err(|e| bad(path, format!("header serialization: {e}")))?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    for (_, set) in networks(state) {
        for v in &set.data {
            w.write_all(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a model checkpoint. Returns the state and the stored epoch.
pub fn read_sstckpt(path: &Path) -> Result<(ModelState, usize)> {
    let mut r = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let header: CkptHeader = serde_json::from_str(&read_header_line(&mut r, path)?)
        .map_err(|e| bad(path, format!("header: {e}")))?;
    if header.magic != CKPT_MAGIC {
        return Err(bad(path, format!("magic '{}', expected '{CKPT_MAGIC}'", header.magic)));
    }
    if header.version != FORMAT_VERSION {
        return Err(bad(path, format!("unsupported version {}", header.version)));
    }
    let gplan = GeneratorPlan::new(&header.config)?;
    let cplan = CriticPlan::new(&header.config)?;
    let mut state = ModelState {
        config: header.config.clone(),
        seed: header.seed,
        g_ab: ParamSet::zeros(gplan.tensor_specs()),
        g_ba: ParamSet::zeros(gplan.tensor_specs()),
        c_ab: ParamSet::zeros(cplan.tensor_specs()),
        c_ba: ParamSet::zeros(cplan.tensor_specs()),
    };
    let expected = full_manifest(&state);
    if header.manifest != expected {
        return Err(bad(
            path,
            "parameter manifest does not match the declared architecture",
        ));
    }
    for set in [
        &mut state.g_ab,
        &mut state.g_ba,
        &mut state.c_ab,
        &mut state.c_ba,
    ] {
        let data = read_f64_block(&mut r, set.len(), path)?;
        set.data = data;
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| io_err(path, e))? != 0 {
        return Err(bad(path, "trailing bytes after the declared payload"));
    }
    if !state.all_finite() {
        return Err(bad(path, "checkpoint contains non-finite parameters"));
    }
    Ok((state, header.epoch))
}

pub const MONITOR_CSV_HEADER: &str =
    "iteration,total_gen_loss,total_critic_loss,fid_alpha,fid_beta,mmsc_alpha,mmsc_beta";

/// Writes the training monitor log, one row per generator iteration.
pub fn write_monitor_csv(path: &Path, records: &[MonitorRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    writeln!(w, "{MONITOR_CSV_HEADER}").map_err(|e| io_err(path, e))?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.iteration,
            r.total_gen_loss,
            r.total_critic_loss,
            r.fid_alpha,
            r.fid_beta,
            r.mmsc_alpha,
            r.mmsc_beta
        )
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub const REPORT_CSV_HEADER: &str = "mode,f_real_hz,f_syn_hz,cnf_pct,mac";

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the mode-comparison table; unpaired modes keep blank partner
/// columns.
pub fn write_report_csv(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    writeln!(w, "{REPORT_CSV_HEADER}").map_err(|e| io_err(path, e))?;
    for row in &report.mode_rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            row.mode,
            row.f_real_hz,
            opt_field(row.f_syn_hz),
            opt_field(row.cnf_pct),
            opt_field(row.mac)
        )
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| bad(path, format!("serialization: {e}")))?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let mut s = String::new();
    File::open(path)
        .map_err(|e| io_err(path, e))?
        .read_to_string(&mut s)
        .map_err(|e| io_err(path, e))?;
    serde_json::from_str(&s).map_err(|e| bad(path, format!("json: {e}")))
}

/// Writes the full comparison report (mode rows, per-channel MMSC,
/// unpaired modes) as JSON.
pub fn write_report_json(path: &Path, report: &ComparisonReport) -> Result<()> {
    write_json(path, report)
}

pub fn read_report_json(path: &Path) -> Result<ComparisonReport> {
    read_json(path)
}

/// Reproducibility sidecar written next to each simulated container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSidecar {
    pub structure_id: String,
    pub state_label: StateLabel,
    pub model: LatticeModel,
    pub state: StateSpec,
    pub excitation: ExcitationSpec,
    pub truth: ModalTruth,
}

pub fn write_simulation_sidecar(path: &Path, sidecar: &SimulationSidecar) -> Result<()> {
    write_json(path, sidecar)
}

pub fn read_simulation_sidecar(path: &Path) -> Result<SimulationSidecar> {
    read_json(path)
}

/// Sidecar written next to each translated container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSidecar {
    pub scenario: ScenarioSpec,
    pub checkpoint_id: String,
}

pub fn write_scenario_sidecar(path: &Path, sidecar: &ScenarioSidecar) -> Result<()> {
    write_json(path, sidecar)
}

pub fn read_scenario_sidecar(path: &Path) -> Result<ScenarioSidecar> {
    read_json(path)
}

/// Top-level record of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub deterministic: bool,
    pub tool_version: String,
    pub artifacts: Vec<String>,
}

/// Hex SHA-256 of raw bytes (used to fingerprint the active config).
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_run_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    write_json(path, manifest)
}

pub fn read_run_manifest(path: &Path) -> Result<RunManifest> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgcg::init_params;
    use crate::modal_id::ModeRow;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    fn channel_set(channels: usize, samples: usize) -> ChannelSet {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let records = (0..channels)
            .map(|c| {
                TimeRecord::new(
                    256.0,
                    (0..samples).map(|_| rng.gen::<f64>() - 0.5).collect(),
                    c,
                    "bridge1",
                    StateLabel::Beta,
                )
                .unwrap()
            })
            .collect();
        ChannelSet::new(records).unwrap()
    }

    #[test]
    fn sstsig_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("x.sstsig");
        let cs = channel_set(3, 512);
        write_sstsig(&path, &cs, "g").unwrap();
        let (back, unit) = read_sstsig(&path).unwrap();
        assert_eq!(unit, "g");
        assert_eq!(back.channel_count(), 3);
        assert_eq!(back.state_label(), StateLabel::Beta);
        assert_eq!(back.structure_id(), "bridge1");
        for (a, b) in cs.records().iter().zip(back.records()) {
            assert_eq!(a.samples, b.samples);
            assert_eq!(a.channel_id, b.channel_id);
        }
    }

    #[test]
    fn sstsig_header_is_json_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("x.sstsig");
        write_sstsig(&path, &channel_set(1, 8), "m/s^2").unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        assert_eq!(header["magic"], "SSTSIG");
        assert_eq!(header["version"], 1);
        assert_eq!(header["channels"], 1);
        assert_eq!(header["samples_per_channel"], 8);
        assert_eq!(header["state_label"], "beta");
        assert_eq!(header["unit"], "m/s^2");
        assert_eq!(bytes.len() - nl - 1, 8 * 8);
    }

    #[test]
    fn sstsig_corruption_detected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("x.sstsig");
        write_sstsig(&path, &channel_set(2, 16), "g").unwrap();
        // truncate the payload
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(read_sstsig(&path), Err(SstError::IoFailure { .. })));
        // wrong magic
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[2] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_sstsig(&path), Err(SstError::BadFormat { .. })));
    }

    #[test]
    fn sstckpt_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.sstckpt");
        let config = ArchitectureConfig::reduced();
        let state = init_params(&config, 42).unwrap();
        write_sstckpt(&path, &state, 17).unwrap();
        let (back, epoch) = read_sstckpt(&path).unwrap();
        assert_eq!(epoch, 17);
        assert_eq!(back.seed, 42);
        assert_eq!(back.config, config);
        assert_eq!(back.g_ab.data, state.g_ab.data);
        assert_eq!(back.g_ba.data, state.g_ba.data);
        assert_eq!(back.c_ab.data, state.c_ab.data);
        assert_eq!(back.c_ba.data, state.c_ba.data);
    }

    #[test]
    fn sstckpt_manifest_mismatch_detected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.sstckpt");
        let state = init_params(&ArchitectureConfig::reduced(), 1).unwrap();
        write_sstckpt(&path, &state, 1).unwrap();
        let text = std::fs::read(&path).unwrap();
        let nl = text.iter().position(|&b| b == b'\n').unwrap();
        let mut header: serde_json::Value = serde_json::from_slice(&text[..nl]).unwrap();
        header["manifest"][0][0] = serde_json::Value::String("g_ab/bogus.w".into());
        let mut out = serde_json::to_vec(&header).unwrap();
        out.push(b'\n');
        out.extend_from_slice(&text[nl + 1..]);
        std::fs::write(&path, &out).unwrap();
        assert!(matches!(read_sstckpt(&path), Err(SstError::BadFormat { .. })));
    }

    #[test]
    fn monitor_csv_format() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("monitor.csv");
        let records = vec![MonitorRecord {
            iteration: 1,
            total_gen_loss: 1.5,
            total_critic_loss: -0.25,
            fid_alpha: 0.125,
            fid_beta: 0.5,
            mmsc_alpha: 0.75,
            mmsc_beta: 0.875,
        }];
        write_monitor_csv(&path, &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), MONITOR_CSV_HEADER);
        assert_eq!(lines.next().unwrap(), "1,1.5,-0.25,0.125,0.5,0.75,0.875");
        assert!(lines.next().is_none());
    }

    #[test]
    fn report_csv_format() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let report = ComparisonReport {
            scenario: Some("scenario1".into()),
            mode_rows: vec![
                ModeRow {
                    mode: 1,
                    f_real_hz: 3.17,
                    f_syn_hz: Some(3.17),
                    cnf_pct: Some(0.0),
                    mac: Some(1.0),
                },
                ModeRow {
                    mode: 2,
                    f_real_hz: 8.5,
                    f_syn_hz: None,
                    cnf_pct: None,
                    mac: None,
                },
            ],
            unpaired_synthetic_hz: vec![],
            per_channel_mmsc: vec![(0, 1.0)],
            average_mmsc: 1.0,
        };
        write_report_csv(&path, &report).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "mode,f_real_hz,f_syn_hz,cnf_pct,mac");
        assert_eq!(lines[1], "1,3.17,3.17,0,1");
        assert_eq!(lines[2], "2,8.5,,,");

        let jpath = dir.path().join("report.json");
        write_report_json(&jpath, &report).unwrap();
        assert_eq!(read_report_json(&jpath).unwrap(), report);
    }

    #[test]
    fn sidecars_and_manifest_roundtrip() {
        let dir = tempdir().unwrap();
        let model = crate::sim::build_model(&crate::sim::preset("bridge1").unwrap()).unwrap();
        let sidecar = SimulationSidecar {
            structure_id: "bridge1".into(),
            state_label: StateLabel::Beta,
            state: StateSpec::beta(&model, 0.6),
            excitation: ExcitationSpec::default(),
            truth: crate::sim::analytic_modes(&model).unwrap(),
            model,
        };
        let p = dir.path().join("sim.json");
        write_simulation_sidecar(&p, &sidecar).unwrap();
        assert_eq!(read_simulation_sidecar(&p).unwrap(), sidecar);

        let sc = ScenarioSidecar {
            scenario: ScenarioSpec::new("bridge2", StateLabel::Alpha, StateLabel::BetaHat)
                .unwrap(),
            checkpoint_id: "final".into(),
        };
        let p = dir.path().join("scenario.json");
        write_scenario_sidecar(&p, &sc).unwrap();
        assert_eq!(read_scenario_sidecar(&p).unwrap(), sc);

        let manifest = RunManifest {
            command: "pipeline".into(),
            config_sha256: sha256_hex(b"config"),
            seed: 9,
            deterministic: true,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            artifacts: vec!["a.sstsig".into()],
        };
        let p = dir.path().join("run.json");
        write_run_manifest(&p, &manifest).unwrap();
        assert_eq!(read_run_manifest(&p).unwrap(), manifest);
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn missing_file_is_io_failure() {
        let p = Path::new("/nonexistent/definitely/missing.sstsig");
        assert!(matches!(read_sstsig(p), Err(SstError::IoFailure { .. })));
    }
}
