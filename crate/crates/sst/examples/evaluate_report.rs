//! Verify a synthetic signal against a measured one: identified-mode
//! pairing with frequency error (CNF) and shape agreement (MAC), plus
//! per-channel spectral coherence (MMSC).

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use sst::config::EvaluationSection;
use sst::io::{write_report_csv, REPORT_CSV_HEADER};
use sst::pipeline::evaluate_pair;
use sst::signal::{ChannelSet, StateLabel, TimeRecord};
use sst::sim::{build_model, preset, simulate, ExcitationPattern, ExcitationSpec};

fn main() -> sst::Result<()> {
    let model = build_model(&preset("bridge1")?)?;
    let excitation = ExcitationSpec {
        duration_s: 128.0,
        seed: 12,
        ..ExcitationSpec::default()
    };
    let real = simulate(
        &model,
        &excitation,
        ExcitationPattern::IndependentPerDof,
        StateLabel::Beta,
    )?
    .responses;

    // stand-in "synthetic" data: the measured responses plus 5% noise
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let records = real
        .records()
        .iter()
        .map(|r| {
            let rms = (r.samples.iter().map(|v| v * v).sum::<f64>() / r.samples.len() as f64)
                .sqrt();
            TimeRecord::new(
                r.sample_rate,
                r.samples
                    .iter()
                    .map(|&v| v + 0.05 * rms * (rng.gen::<f64>() - 0.5))
                    .collect(),
                r.channel_id,
                r.structure_id.clone(),
                StateLabel::BetaHat,
            )
        })
        .collect::<sst::Result<Vec<_>>>()?;
    let synthetic = ChannelSet::new(records)?;

    let evaluation = EvaluationSection::default();
    let report = evaluate_pair(&real, &synthetic, &evaluation, Some("demo".into()))?;

    println!("average MMSC: {:.4}", report.average_mmsc);
    println!("{REPORT_CSV_HEADER}");
    for row in &report.mode_rows {
        println!(
            "{},{:.4},{},{},{}",
            row.mode,
            row.f_real_hz,
            row.f_syn_hz.map(|v| format!("{v:.4}")).unwrap_or_default(),
            row.cnf_pct.map(|v| format!("{v:.4}")).unwrap_or_default(),
            row.mac.map(|v| format!("{v:.4}")).unwrap_or_default(),
        );
    }

    let dir = std::env::temp_dir().join("sst_evaluate_report");
    std::fs::create_dir_all(&dir).ok();
    let path = dir.join("report_demo.csv");
    write_report_csv(&path, &report)?;
    println!("wrote {}", path.display());
    Ok(())
}
