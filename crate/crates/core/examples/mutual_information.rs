//! MI relevance of every feature against the gold standard, with and
//! without compensating the annotation delay.

use eye_affect::corpus::{synth_corpus, SynthConfig};
use eye_affect::features::FeatureCatalog;
use eye_affect::lld::{ThresholdConfig, DEFAULT_PUPIL_RING};
use eye_affect::selection::{
    mi_filter, mi_scores, mutual_information, shift_frames, stacked_training, SubjectData, DEFAULT_BINS,
};

fn main() -> eye_affect::Result<()> {
    // The estimator on its own: a variable against itself reaches ln(bins).
    let x: Vec<f64> = (0..4096).map(|i| ((i * 7919) % 4096) as f64).collect();
    let self_mi = mutual_information(&x, &x, DEFAULT_BINS)?;
    println!("MI(x, x) = {:.6} nats (ln 32 = {:.6})", self_mi.value, (DEFAULT_BINS as f64).ln());

    let corpus = synth_corpus(&SynthConfig {
        n_subjects: 4,
        ..SynthConfig::default()
    })?;
    let data: Vec<SubjectData> = corpus
        .subjects
        .iter()
        .map(|s| SubjectData::from_recording(&s.id, &s.frames, &s.traces, &ThresholdConfig::default(), &DEFAULT_PUPIL_RING))
        .collect::<eye_affect::Result<_>>()?;
    let catalog = FeatureCatalog::eye();

    for d_s in [0.0, 1.0, 2.0, 3.0] {
        let (x, y) = stacked_training(&data, shift_frames(d_s)?)?;
        let scores = mi_scores(x.view(), &y, DEFAULT_BINS)?;
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let kept = mi_filter(&scores, 0.1).iter().filter(|&&k| k).count();
        let top: Vec<String> = order[..3]
            .iter()
            .map(|&i| format!("{} {:.3}", catalog.entries[i].name, scores[i]))
            .collect();
        println!("D_s = {d_s:.1} s: {kept:>3} features above 0.1 nats; top: {}", top.join(", "));
    }
    Ok(())
}
