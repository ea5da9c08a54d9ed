//! Seven-level periodized db10 decomposition of a 200-sample window, the
//! energy in each band, perfect reconstruction and the 173-value feature
//! block built from the bands.

use eye_affect::wavelet::{dwt_db10, idwt_db10, wavelet_feature_block, WAVELET_LEVELS};

fn main() -> eye_affect::Result<()> {
    // A chirp sweeping from slow drift to fast oscillation, like gaze
    // settling into saccades.
    let n = 200;
    let signal: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / 25.0;
            (2.0 * std::f64::consts::PI * (0.1 + 0.6 * t) * t).sin()
        })
        .collect();

    let dec = dwt_db10(&signal, WAVELET_LEVELS)?;
    let energy = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let total = energy(&signal);
    println!("signal energy {total:.3}");
    for (level, d) in dec.detail.iter().enumerate() {
        println!(
            "  detail {}: {:>3} coefficients, {:5.1}% of energy",
            level + 1,
            d.len(),
            100.0 * energy(d) / total
        );
    }
    let deepest = dec.approximation.last().expect("at least one level");
    println!("  approximation {}: {:5.1}%", dec.levels(), 100.0 * energy(deepest) / total);

    // Odd-length levels were padded by repeating their last sample, so
    // each synthesis step is cut back to the length of the level above.
    let mut approx = deepest.clone();
    for level in (0..dec.levels()).rev() {
        let parent_len = if level == 0 { signal.len() } else { dec.approximation[level - 1].len() };
        approx = idwt_db10(&approx, &dec.detail[level])?;
        approx.truncate(parent_len);
    }
    let err = signal.iter().zip(&approx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("reconstruction max error {err:.2e}");

    let block = wavelet_feature_block(&dec)?;
    println!("feature block: {} values", block.len());
    Ok(())
}
