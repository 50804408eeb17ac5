//! Frequency-domain decomposition on a simulated chain: identify modal
//! frequencies and shapes from response data alone and compare them
//! against the analytic eigensolution.

use sst::modal_id::{fdd, mac, pick_peaks, FddConfig};
use sst::signal::StateLabel;
use sst::sim::{
    analytic_modes, build_model, simulate, ExcitationPattern, ExcitationSpec, ModelConfig,
};

fn main() -> sst::Result<()> {
    let model = build_model(&ModelConfig {
        dof_count: 3,
        mass: 1.0,
        stiffness: 4300.0,
        damping_ratio: 0.02,
        structure_id: "chain3".into(),
    })?;
    let truth = analytic_modes(&model)?;

    let excitation = ExcitationSpec {
        duration_s: 256.0,
        seed: 11,
        ..ExcitationSpec::default()
    };
    let result = simulate(
        &model,
        &excitation,
        ExcitationPattern::IndependentPerDof,
        StateLabel::Alpha,
    )?;

    let config = FddConfig::default();
    let spectrum = fdd(&result.responses, &config)?;
    let peaks = pick_peaks(&spectrum, &config)?;

    println!("analytic frequencies: {:?}", truth.frequencies);
    println!(
        "line width: {:.4} Hz",
        config.line_width_hz(result.responses.sample_rate())
    );
    for peak in &peaks {
        let nearest = truth
            .frequencies
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - peak.frequency)
                    .abs()
                    .total_cmp(&(b.1 - peak.frequency).abs())
            })
            .unwrap()
            .0;
        println!(
            "identified mode {}: {:.3} Hz (analytic {:.3} Hz, shape MAC {:.4})",
            peak.order,
            peak.frequency,
            truth.frequencies[nearest],
            mac(&peak.shape, &truth.mode_shapes[nearest])?
        );
    }
    Ok(())
}
