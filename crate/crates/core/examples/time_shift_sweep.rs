//! The DURING protocol on the synthetic corpus: pick the best MI threshold
//! without delay compensation, then re-run selection and training at
//! every annotation delay from 0 to 4.4 s. The planted delay is 2 s.
//!
//!     cargo run --release --example time_shift_sweep

use std::time::Instant;

use eye_affect::cli::report::markdown_tables;
use eye_affect::corpus::{synth_corpus, SynthConfig};
use eye_affect::lld::{ThresholdConfig, DEFAULT_PUPIL_RING};
use eye_affect::model::ModelConfig;
use eye_affect::selection::{best_of, Protocol, SubjectData, SweepConfig, SweepRow, Sweeper};

fn main() -> eye_affect::Result<()> {
    let started = Instant::now();
    let corpus = synth_corpus(&SynthConfig::default())?;
    let data: Vec<SubjectData> = corpus
        .subjects
        .iter()
        .map(|s| SubjectData::from_recording(&s.id, &s.frames, &s.traces, &ThresholdConfig::default(), &DEFAULT_PUPIL_RING))
        .collect::<eye_affect::Result<_>>()?;
    let (train, val) = data.split_at(8);

    // Plain gradient descent at the default rate needs hundreds of epochs
    // on a corpus this small; momentum gets there in a few dozen.
    let cfg = SweepConfig {
        model: ModelConfig {
            momentum: 0.9,
            max_epochs: 30,
            patience_epochs: 10,
            ..ModelConfig::default()
        },
        ..SweepConfig::default()
    };
    let mut sweeper = Sweeper::new(train, val, &cfg)?;
    let reports = sweeper.run(Protocol::During)?;

    let rows: Vec<SweepRow> = reports.iter().map(SweepRow::from).collect();
    print!("{}", markdown_tables(&rows));
    match best_of(&reports, Protocol::During) {
        Some(best) => println!(
            "best cell: threshold {:?}, D_s = {:.1} s, {} features, validation CCC {:.3}",
            best.threshold,
            best.shift_s,
            best.n_features,
            best.val_ccc.unwrap_or(f64::NAN)
        ),
        None => println!("no cell produced a model"),
    }
    println!("{} cells in {:.1?}", reports.len(), started.elapsed());
    Ok(())
}
