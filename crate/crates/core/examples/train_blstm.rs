//! Train the two-layer bidirectional LSTM on MI-selected features at a
//! fixed annotation delay and save a checkpoint.
//!
//!     cargo run --release --example train_blstm -- /tmp/checkpoint.json

use std::fs::File;

use eye_affect::corpus::{synth_corpus, SynthConfig};
use eye_affect::lld::{ThresholdConfig, DEFAULT_PUPIL_RING};
use eye_affect::model::{train_blstm, Blstm, Checkpoint, ModelConfig, CHECKPOINT_VERSION};
use eye_affect::selection::{
    mi_filter, mi_scores, prepare, shift_frames, stacked_training, validate_model, SubjectData, DEFAULT_BINS,
};

fn main() -> eye_affect::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "checkpoint.json".into());
    let corpus = synth_corpus(&SynthConfig::default())?;
    let data: Vec<SubjectData> = corpus
        .subjects
        .iter()
        .map(|s| SubjectData::from_recording(&s.id, &s.frames, &s.traces, &ThresholdConfig::default(), &DEFAULT_PUPIL_RING))
        .collect::<eye_affect::Result<_>>()?;
    let (train, val) = data.split_at(8);

    let d_s = 2.0;
    let shift = shift_frames(d_s)?;
    let (x, y) = stacked_training(train, shift)?;
    let mask = mi_filter(&mi_scores(x.view(), &y, DEFAULT_BINS)?, 0.1);
    let catalog = train[0].features.catalog.select(&mask);
    println!("kept {:?}", catalog.names());

    let prep = prepare(train, val, &mask, shift)?;
    let cfg = ModelConfig {
        momentum: 0.9,
        max_epochs: 30,
        ..ModelConfig::default()
    };
    println!(
        "{} parameters, {} training sequences",
        Blstm::parameter_count(catalog.len(), &cfg.hidden_sizes),
        prep.train.len()
    );
    let run = train_blstm(&prep.train, &prep.val, &cfg)?;
    for h in &run.history {
        println!("epoch {:>3}  train MSE {:.4}  val MSE {:.4}", h.epoch, h.train_mse, h.val_mse);
    }
    let (ccc, sse) = validate_model(&run.model, &prep.val)?;
    println!("best epoch {}: validation CCC {ccc:.3}, MSE {sse:.4}", run.best_epoch);

    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        config: cfg,
        catalog_hash: train[0].features.catalog.hash(),
        feature_names: catalog.names().into_iter().map(String::from).collect(),
        input_scaler: prep.input_scaler,
        target_scaler: prep.target_scaler,
        shift_s: d_s,
        best_epoch: run.best_epoch,
        model: run.model,
    };
    checkpoint.write(File::create(&out)?)?;
    println!("saved {out}");
    Ok(())
}
