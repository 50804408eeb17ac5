//! Train the translation model on a toy task — map white noise to a
//! scaled, smoothed copy — and watch the monitored losses move.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use sst::dgcg::ArchitectureConfig;
use sst::signal::{WindowProvenance, WindowSet};
use sst::training::{train, LossWeights, TrainConfig};

fn window_set(windows: Vec<Vec<f64>>, length: usize) -> WindowSet {
    let provenance = (0..windows.len())
        .map(|i| WindowProvenance {
            channel_id: 0,
            window_index: i,
        })
        .collect();
    WindowSet::new(length, 256.0, windows, provenance).unwrap()
}

fn main() -> sst::Result<()> {
    let len = 256;
    let count = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let alpha: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..len).map(|_| rng.gen::<f64>() - 0.5).collect())
        .collect();
    // beta: halved and 3-tap smoothed version of fresh noise
    let beta: Vec<Vec<f64>> = (0..count)
        .map(|_| {
            let raw: Vec<f64> = (0..len).map(|_| rng.gen::<f64>() - 0.5).collect();
            (0..len)
                .map(|i: usize| {
                    let prev = raw[i.saturating_sub(1)];
                    let next = raw[(i + 1).min(len - 1)];
                    0.5 * (prev + raw[i] + next) / 3.0
                })
                .collect()
        })
        .collect();

    let arch = ArchitectureConfig {
        input_length: len,
        base_channels: 4,
        downsample_stages: 1,
        mapping_blocks: 1,
        mapping_kernel: 3,
        io_kernel: 7,
        critic_stages: 2,
        critic_base_channels: 4,
        ..ArchitectureConfig::default()
    };
    let config = TrainConfig {
        batch_size: 4,
        epochs: 10,
        learning_rate: 1e-4,
        critic_iters: 2,
        seed: 7,
        monitor_subsample: 4,
        ..TrainConfig::default()
    };

    let output = train(
        &config,
        &LossWeights::default(),
        &arch,
        &window_set(alpha, len),
        &window_set(beta, len),
    )?;
    println!("model parameters: {}", output.state.parameter_count());
    println!("generator updates: {}", output.generator_updates);
    println!("critic updates:    {}", output.critic_updates);
    for record in &output.monitor {
        println!(
            "iter {:3}  gen {:9.4}  critic {:9.4}  fid_b {:8.5}  mmsc_b {:.4}",
            record.iteration,
            record.total_gen_loss,
            record.total_critic_loss,
            record.fid_beta,
            record.mmsc_beta
        );
    }
    Ok(())
}
