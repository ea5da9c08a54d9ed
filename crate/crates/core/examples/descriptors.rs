//! Per-frame eye descriptors: the seven numeric channels and the six
//! thresholded binary events.

use eye_affect::corpus::{synth_corpus, SynthConfig};
use eye_affect::lld::{derive_descriptors, ThresholdConfig, DEFAULT_PUPIL_RING};

fn rate(flags: &[bool]) -> f64 {
    flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64
}

fn main() -> eye_affect::Result<()> {
    let corpus = synth_corpus(&SynthConfig {
        n_subjects: 1,
        duration: 60.0,
        ..SynthConfig::default()
    })?;
    let subject = &corpus.subjects[0];
    let thresholds = ThresholdConfig::default();
    let series = derive_descriptors(&subject.frames, &thresholds, &DEFAULT_PUPIL_RING)?;

    let n = &series.numeric;
    println!("{} frames from {}", series.len(), subject.id);
    for (name, v) in [
        ("gaze_x", &n.gaze_x),
        ("gaze_y", &n.gaze_y),
        ("pupil_diam", &n.pupil_diam),
        ("blink_intensity", &n.blink_intensity),
    ] {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        println!("  {name:<16} mean {mean:+.4}  range [{lo:+.4}, {hi:+.4}]");
    }

    let b = &series.binary;
    println!("binary event rates (direct gaze from {:?}):", b.direct_gaze_source);
    for (name, v) in [
        ("direct_gaze", &b.direct_gaze),
        ("gaze_approach", &b.gaze_approach),
        ("eyes_fixated", &b.eyes_fixated),
        ("eye_closure", &b.eye_closure),
        ("pupil_dilation", &b.pupil_dilation),
        ("pupil_constriction", &b.pupil_constriction),
    ] {
        println!("  {name:<18} {:.3}", rate(v));
    }
    Ok(())
}
