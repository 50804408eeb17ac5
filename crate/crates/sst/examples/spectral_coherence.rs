//! Magnitude-squared coherence and its mean (MMSC): identical signals
//! score 1, correlated signals score in between, independent noise
//! approaches the estimator's bias floor.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use sst::signal::{StateLabel, TimeRecord};
use sst::spectral::{mmsc, WelchParams};

fn record(samples: Vec<f64>) -> TimeRecord {
    TimeRecord::new(256.0, samples, 0, "demo", StateLabel::Alpha).unwrap()
}

fn main() -> sst::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 65_536;
    let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let independent: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    // same signal plus weak independent noise: strongly correlated
    let noisy: Vec<f64> = x
        .iter()
        .map(|&v| v + 0.2 * (rng.gen::<f64>() - 0.5))
        .collect();

    let params = WelchParams::default();
    let a = record(x.clone());
    println!("mmsc(x, x)           = {:.6}", mmsc(&a, &record(x), &params)?);
    println!("mmsc(x, x + noise)   = {:.6}", mmsc(&a, &record(noisy), &params)?);
    println!("mmsc(x, independent) = {:.6}", mmsc(&a, &record(independent), &params)?);
    println!(
        "(independent-noise floor is about 1/K = {:.4} for K = {} averaged segments)",
        1.0 / params.segment_count(n) as f64,
        params.segment_count(n)
    );
    Ok(())
}
