//! Scoring continuous predictions: CCC, PCC and SSE, annotator agreement
//! as a human reference, and a rank-sum test between two systems'
//! per-subject scores.

use eye_affect::corpus::{gold_standard, synth_corpus, SynthConfig};
use eye_affect::eval::{ccc, human_baseline, pcc, sse, wilcoxon_rank_sum, EvalReport};

fn main() -> eye_affect::Result<()> {
    let corpus = synth_corpus(&SynthConfig {
        n_subjects: 10,
        duration: 60.0,
        ..SynthConfig::default()
    })?;
    let lag = corpus.lag_frames;

    // Two hand-made predictors from the driving gaze channel: one that
    // accounts for the rating delay and one that does not.
    let mut aligned = Vec::new();
    let mut naive = Vec::new();
    let mut agreement = Vec::new();
    for s in &corpus.subjects {
        let gold = gold_standard(&s.traces)?.values;
        let gaze: Vec<f64> = s.frames.iter().map(|f| f.gaze_x).collect();
        let n = gold.len().min(gaze.len());
        let scale = |g: f64| 0.8 * (40.0 * g).tanh();
        let delayed: Vec<f64> = (lag..n).map(|t| scale(gaze[t - lag])).collect();
        let immediate: Vec<f64> = (lag..n).map(|t| scale(gaze[t])).collect();
        let target = &gold[lag..n];
        aligned.push(ccc(&delayed, target)?);
        naive.push(ccc(&immediate, target)?);
        agreement.push(human_baseline(&s.traces)?);

        if s.id == corpus.subjects[0].id {
            let report = EvalReport::compute("aligned", s.traces[0].dimension, "demo", &delayed, target, sse(&delayed, target)?)?;
            println!(
                "{}: CCC {:.3}, PCC {:.3}, SSE {:.4} over {} frames",
                s.id,
                report.ccc,
                pcc(&delayed, target)?,
                report.sse,
                report.n_frames
            );
        }
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("mean CCC, delay-aware predictor: {:.3}", mean(&aligned));
    println!("mean CCC, naive predictor:       {:.3}", mean(&naive));
    println!("mean annotator agreement:        {:.3}", mean(&agreement));

    let test = wilcoxon_rank_sum(&aligned, &naive)?;
    println!("rank-sum W = {}, p = {:.2e} ({:?})", test.w, test.p_value, test.method);
    Ok(())
}
