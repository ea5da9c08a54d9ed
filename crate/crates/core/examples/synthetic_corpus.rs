//! Generate the synthetic corpus and write it in the on-disk layout the
//! `pipeline` subcommand reads.
//!
//!     cargo run --release --example synthetic_corpus -- /tmp/synth

use std::path::PathBuf;

use eye_affect::cli::stages;
use eye_affect::corpus::{gold_standard, synth_corpus, SynthConfig};
use eye_affect::eval::human_baseline;

fn main() -> eye_affect::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "synth-corpus".into()).into();
    let cfg = SynthConfig::default();
    let corpus = synth_corpus(&cfg)?;

    println!(
        "{} subjects, {:.0} s each, annotation delay {} frames",
        corpus.subjects.len(),
        cfg.duration,
        corpus.lag_frames
    );
    println!("targets follow `{}`; unrelated channels: {:?}", corpus.driver, corpus.noise_channels);
    for s in corpus.subjects.iter().take(3) {
        let gold = gold_standard(&s.traces)?;
        let mean = gold.values.iter().sum::<f64>() / gold.len() as f64;
        println!(
            "{}: {} frames, gold mean {mean:+.3}, annotator agreement CCC {:.3}",
            s.id,
            s.frames.len(),
            human_baseline(&s.traces)?
        );
    }

    let written = stages::synth(&cfg, &out)?;
    println!("wrote {} files under {}", written.len(), out.display());
    Ok(())
}
