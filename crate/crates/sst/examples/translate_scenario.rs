//! Apply a trained (here: freshly initialized identity) model to an
//! unseen structure's response via a translation scenario, then save
//! and reload the synthetic container.

use sst::dgcg::{ArchitectureConfig, ModelState};
use sst::io::{read_sstsig, write_sstsig};
use sst::signal::StateLabel;
use sst::sim::{build_model, preset, simulate, ExcitationPattern, ExcitationSpec};
use sst::translation::{run_scenario, ScenarioSpec};

fn main() -> sst::Result<()> {
    // responses of an unseen structure in its baseline state
    let model = build_model(&preset("bridge2")?)?;
    let excitation = ExcitationSpec {
        duration_s: 8.0,
        seed: 21,
        ..ExcitationSpec::default()
    };
    let result = simulate(
        &model,
        &excitation,
        ExcitationPattern::Uniform,
        StateLabel::Alpha,
    )?;

    // identity-parameterized model: the translation pipeline end to end
    // without a training run
    let arch = ArchitectureConfig::passthrough(1024);
    let state = ModelState::identity(&arch)?;

    let scenario = ScenarioSpec::new("bridge2", StateLabel::Alpha, StateLabel::BetaHat)?;
    println!("scenario direction: {}", scenario.direction);

    let translated = run_scenario(&state, &result.responses, &scenario, "demo-identity")?;
    println!(
        "synthetic container: {} channels x {} samples, state {}",
        translated.synthetic.channel_count(),
        translated.synthetic.samples_per_channel(),
        translated.synthetic.state_label()
    );

    let dir = std::env::temp_dir().join("sst_translate_scenario");
    std::fs::create_dir_all(&dir).ok();
    let path = dir.join("bridge2_beta_hat.sstsig");
    write_sstsig(&path, &translated.synthetic, "m/s^2")?;
    let (back, unit) = read_sstsig(&path)?;
    println!(
        "round-tripped {} ({unit}); identical: {}",
        path.display(),
        back.records()[0].samples == translated.synthetic.records()[0].samples
    );
    Ok(())
}
