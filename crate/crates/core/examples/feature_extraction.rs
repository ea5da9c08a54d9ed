//! Sliding-window functionals: 292 features per frame once the first
//! 8 s window is full.

use eye_affect::corpus::{synth_corpus, SynthConfig};
use eye_affect::features::{extract_features, FeatureCatalog, Group, Kind};
use eye_affect::lld::{derive_descriptors, ThresholdConfig, DEFAULT_PUPIL_RING};

fn main() -> eye_affect::Result<()> {
    let catalog = FeatureCatalog::eye();
    println!("catalog: {} features, hash {}", catalog.len(), &catalog.hash()[..12]);
    for group in [Group::Gaze, Group::Pupil, Group::Closure] {
        println!("  {group:?}: {}", catalog.indices_of_group(group).len());
    }
    println!("  wavelet-domain: {}", catalog.indices_of_kind(Kind::Wavelet).len());

    let corpus = synth_corpus(&SynthConfig {
        n_subjects: 1,
        duration: 30.0,
        ..SynthConfig::default()
    })?;
    let frames = &corpus.subjects[0].frames;
    let series = derive_descriptors(frames, &ThresholdConfig::default(), &DEFAULT_PUPIL_RING)?;
    let started = std::time::Instant::now();
    let matrix = extract_features(&series)?;
    println!(
        "{} frames -> {} rows x {} columns in {:.2?}; row 0 ends at frame {}",
        frames.len(),
        matrix.n_rows(),
        matrix.width(),
        started.elapsed(),
        matrix.frame_offset
    );
    let row = matrix.rows.row(0);
    for (entry, value) in matrix.catalog.entries.iter().zip(row.iter()).take(8) {
        println!("  {:<28} {value:+.5}", entry.name);
    }

    let mut csv = Vec::new();
    matrix.write_csv(&mut csv)?;
    println!("CSV form: {} bytes", csv.len());
    Ok(())
}
