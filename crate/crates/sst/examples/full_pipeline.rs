//! Run every stage — simulate, train, translate, evaluate — through the
//! same drivers the command-line tool uses, with a configuration small
//! enough to finish in well under a minute.

use sst::config::PipelineConfig;
use sst::io::read_report_json;
use sst::pipeline::cmd_pipeline;
use sst::sim::ExcitationPattern;

fn main() -> sst::Result<()> {
    let out = std::env::temp_dir().join("sst_full_pipeline");
    let _ = std::fs::remove_dir_all(&out);

    let mut config = PipelineConfig::desk_scale();
    config.out_dir = out.clone();
    config.simulation.excitation.duration_s = 16.0;
    config.simulation.pattern = ExcitationPattern::IndependentPerDof;
    config.preprocess.window_seconds = 1.0;
    config.architecture.input_length = 256;
    config.architecture.io_kernel = 7;
    config.training.config.epochs = 1;
    config.training.config.batch_size = 2;
    config.training.config.critic_iters = 1;
    config.training.config.monitor_subsample = 2;
    config.evaluation.fdd.frequency_lines = 256;
    config.evaluation.mmsc_segment_length = 256;
    config.validate()?;

    let artifacts = cmd_pipeline(&config, &out)?;
    println!("wrote {} artifacts to {}", artifacts.len(), out.display());

    for section in &config.scenarios {
        let stem = format!(
            "{}_{}",
            section.target_structure_id,
            section.produced_state.as_str()
        );
        let report = read_report_json(&out.join(format!("report_{stem}.json")))?;
        println!(
            "{stem}: average MMSC {:.4}, {} paired mode rows",
            report.average_mmsc,
            report.mode_rows.len()
        );
    }
    Ok(())
}
