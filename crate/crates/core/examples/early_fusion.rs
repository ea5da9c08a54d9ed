//! Early fusion: append another modality's per-frame features to the eye
//! features and reuse the eye system's delay and MI threshold on the
//! combined columns.

use ndarray::Array2;

use eye_affect::cli::stages::{fuse, reuse_selection, Selection};
use eye_affect::corpus::{synth_corpus, Dimension, SynthConfig};
use eye_affect::features::{CatalogEntry, Channel, FeatureCatalog, FeatureMatrix, Group, Kind};
use eye_affect::lld::{ThresholdConfig, DEFAULT_PUPIL_RING};
use eye_affect::selection::{Protocol, SubjectData};

/// A stand-in for a second modality: two columns, one anticipating the
/// ratings by `lead` frames (as a physiological signal would, since raters
/// react late) and one noise.
fn external_for(subject: &SubjectData, lead: usize) -> FeatureMatrix {
    let n = subject.features.n_rows();
    let offset = subject.features.frame_offset;
    let mut rows = Array2::zeros((n, 2));
    for r in 0..n {
        rows[[r, 0]] = subject.gold[(offset + r + lead).min(subject.gold.len() - 1)];
        rows[[r, 1]] = ((r * 2654435761) % 1000) as f64 / 1000.0;
    }
    let entry = |name: &str| CatalogEntry {
        name: name.into(),
        group: Group::External,
        kind: Kind::External,
        channel: Channel::External,
    };
    FeatureMatrix {
        rows,
        catalog: FeatureCatalog {
            entries: vec![entry("physio.level"), entry("physio.noise")],
        },
        frame_offset: offset,
    }
}

fn main() -> eye_affect::Result<()> {
    let corpus = synth_corpus(&SynthConfig {
        n_subjects: 6,
        ..SynthConfig::default()
    })?;
    let mut fused = Vec::new();
    for s in &corpus.subjects {
        let eye = SubjectData::from_recording(&s.id, &s.frames, &s.traces, &ThresholdConfig::default(), &DEFAULT_PUPIL_RING)?;
        let features = fuse(&eye.features, &external_for(&eye, corpus.lag_frames))?;
        fused.push(SubjectData { features, ..eye });
    }
    let catalog = &fused[0].features.catalog;
    println!("fused width {} ({} eye + {} external)", catalog.len(), 292, catalog.len() - 292);

    let eye_choice = Selection {
        dimension: Dimension::Arousal,
        protocol: Protocol::During,
        threshold: Some(0.1),
        shift_s: 2.0,
        val_ccc: None,
        catalog_hash: FeatureCatalog::eye().hash(),
        retained: Vec::new(),
        reports: Vec::new(),
    };
    let reused = reuse_selection(&eye_choice, &fused)?;
    println!("at D_s = {} s and MI threshold 0.1 the fused system keeps:", reused.shift_s);
    for name in &reused.retained {
        println!("  {name}");
    }
    // Short recordings inflate plug-in MI; with too few frames unrelated
    // columns start to clear the threshold.

    // Frame ranges must agree exactly.
    let mut short = external_for(&fused[0], corpus.lag_frames);
    short.frame_offset += 1;
    if let Err(e) = fuse(&fused[0].features, &short) {
        println!("misaligned input rejected: {e}");
    }
    Ok(())
}
