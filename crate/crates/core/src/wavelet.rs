//! Daubechies-10 discrete wavelet transform of pupil-diameter windows and
//! the 173-value coefficient statistics block.
//!
//! The transform is periodized: a length-`N` input (odd lengths are padded
//! by repeating the last sample) yields `ceil(N/2)` approximation and
//! detail coefficients per level. A 200-frame window therefore decomposes
//! into levels of length 100, 50, 25, 13, 7, 4 and 2. Coefficient
//! alignment matches PyWavelets' `periodization` mode.

use std::io::Write;

use crate::error::{Error, Result};
use crate::features::stats::{Stat, Summary};

/// Daubechies scaling filter with 10 vanishing moments (20 taps, unit
/// norm, sum sqrt(2)).
#[allow(clippy::excessive_precision)]
pub const DB10_LOWPASS: [f64; 20] = [
    0.026670057900555554,
    0.1881768000776915,
    0.5272011889317256,
    0.6884590394536035,
    0.2811723436605775,
    -0.24984642432731538,
    -0.19594627437737705,
    0.12736934033579325,
    0.09305736460357235,
    -0.07139414716639708,
    -0.029457536821875813,
    0.033212674059341,
    0.0036065535669561697,
    -0.010733175483330575,
    0.001395351747052901,
    0.001992405295185056,
    -0.0006858566949597116,
    -0.00011646685512928545,
    0.00009358867032006959,
    -0.000013264202894521244,
];

const TAPS: usize = DB10_LOWPASS.len();

/// Paired wavelet filter: `g[n] = (-1)^(n+1) h[n]`.
fn highpass() -> [f64; TAPS] {
    let mut g = [0.0; TAPS];
    for (n, h) in DB10_LOWPASS.iter().enumerate() {
        g[n] = if n % 2 == 0 { -h } else { *h };
    }
    g
}

#[inline]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// One analysis step. Returns `(approximation, detail)`.
pub fn analysis_step(signal: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if signal.len() < 2 {
        return Err(Error::Argument(format!(
            "cannot decompose a signal of length {}",
            signal.len()
        )));
    }
    let mut padded;
    let x: &[f64] = if signal.len() % 2 == 1 {
        padded = signal.to_vec();
        padded.push(*signal.last().expect("non-empty"));
        &padded
    } else {
        signal
    };
    let n = x.len();
    let half = n / 2;
    let g = highpass();
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        // approx[k] = sum_m h[m] x[2k - 9 + m], detail[k] = sum_m g[m] x[2k + 10 - m]
        for m in 0..TAPS {
            a += DB10_LOWPASS[m] * x[wrap(2 * k as isize - 9 + m as isize, n)];
            d += g[m] * x[wrap(2 * k as isize + 10 - m as isize, n)];
        }
        approx[k] = a;
        detail[k] = d;
    }
    Ok((approx, detail))
}

/// Inverse of [`analysis_step`] for even-length signals: the transpose of
/// the orthogonal periodized analysis operator.
pub fn idwt_db10(approx: &[f64], detail: &[f64]) -> Result<Vec<f64>> {
    if approx.len() != detail.len() {
        return Err(Error::Argument(format!(
            "approximation has {} coefficients, detail has {}",
            approx.len(),
            detail.len()
        )));
    }
    let half = approx.len();
    if half == 0 {
        return Err(Error::Argument("no coefficients".into()));
    }
    let n = 2 * half;
    let g = highpass();
    let mut x = vec![0.0; n];
    for k in 0..half {
        for m in 0..TAPS {
            x[wrap(2 * k as isize - 9 + m as isize, n)] += DB10_LOWPASS[m] * approx[k];
            x[wrap(2 * k as isize + 10 - m as isize, n)] += g[m] * detail[k];
        }
    }
    Ok(x)
}

/// Coefficients for levels 1..=L, index 0 holding level 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    pub detail: Vec<Vec<f64>>,
    pub approximation: Vec<Vec<f64>>,
}

impl WaveletDecomposition {
    pub fn levels(&self) -> usize {
        self.detail.len()
    }
}

/// Deepest decomposition allowed for a signal: `floor(log2(len))`.
pub fn max_level(len: usize) -> usize {
    if len < 2 {
        0
    } else {
        (usize::BITS - 1 - len.leading_zeros()) as usize
    }
}

/// Multilevel decomposition, re-decomposing the approximation at each
/// level and keeping every level's approximation.
pub fn dwt_db10(signal: &[f64], levels: usize) -> Result<WaveletDecomposition> {
    if signal.len() < 2 {
        return Err(Error::Argument("signal must have at least 2 samples".into()));
    }
    let deepest = max_level(signal.len());
    if levels == 0 || levels > deepest {
        return Err(Error::Argument(format!(
            "{levels} levels requested; a length-{} signal allows 1..={deepest}",
            signal.len()
        )));
    }
    let mut detail = Vec::with_capacity(levels);
    let mut approximation = Vec::with_capacity(levels);
    let mut current = signal.to_vec();
    for _ in 0..levels {
        let (a, d) = analysis_step(&current)?;
        detail.push(d);
        approximation.push(a.clone());
        current = a;
    }
    Ok(WaveletDecomposition { detail, approximation })
}

pub const WAVELET_LEVELS: usize = 7;
pub const WAVELET_BLOCK_LEN: usize = 173;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Detail,
    Approximation,
}

impl Band {
    pub fn name(self) -> &'static str {
        match self {
            Band::Detail => "detail",
            Band::Approximation => "approx",
        }
    }
}

const DETAIL_STATS: [Stat; 13] = [
    Stat::Min,
    Stat::Max,
    Stat::Median,
    Stat::Q1,
    Stat::Q3,
    Stat::Skewness,
    Stat::Kurtosis,
    Stat::Sd,
    Stat::Iqr12,
    Stat::Iqr23,
    Stat::Iqr13,
    Stat::Rms,
    Stat::Zcr,
];

/// Statistic list per (band, level): no ZCR on approximation
/// coefficients, no kurtosis at the final level.
pub fn block_layout(levels: usize) -> Vec<(Band, usize, Vec<Stat>)> {
    let mut out = Vec::new();
    for band in [Band::Detail, Band::Approximation] {
        for level in 1..=levels {
            let stats = DETAIL_STATS
                .iter()
                .copied()
                .filter(|s| !(band == Band::Approximation && *s == Stat::Zcr))
                .filter(|s| !(level == levels && *s == Stat::Kurtosis))
                .collect();
            out.push((band, level, stats));
        }
    }
    out
}

const _: () = assert!(6 * 13 + 12 + 6 * 12 + 11 == WAVELET_BLOCK_LEN);

/// Names of the block's columns, in block order.
pub fn block_names() -> Vec<String> {
    block_layout(WAVELET_LEVELS)
        .into_iter()
        .flat_map(|(band, level, stats)| {
            stats
                .into_iter()
                .map(move |s| format!("pupil.wavelet.{}.l{level}.{}", band.name(), s.name()))
        })
        .collect()
}

/// The 173 coefficient statistics of a 7-level decomposition.
pub fn wavelet_feature_block(decomposition: &WaveletDecomposition) -> Result<Vec<f64>> {
    if decomposition.levels() != WAVELET_LEVELS || decomposition.approximation.len() != WAVELET_LEVELS {
        return Err(Error::Catalog(format!(
            "wavelet block needs {WAVELET_LEVELS} levels, got {}",
            decomposition.levels()
        )));
    }
    let mut out = Vec::with_capacity(WAVELET_BLOCK_LEN);
    for (band, level, stats) in block_layout(WAVELET_LEVELS) {
        let coeffs = match band {
            Band::Detail => &decomposition.detail[level - 1],
            Band::Approximation => &decomposition.approximation[level - 1],
        };
        let summary = Summary::compute(coeffs)?;
        out.extend(stats.iter().map(|&s| summary.get(s)));
    }
    debug_assert_eq!(out.len(), WAVELET_BLOCK_LEN);
    Ok(out)
}

/// Coefficient dump as `level,type,index,value` rows.
pub fn write_coefficients<W: Write>(decomposition: &WaveletDecomposition, output: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(output);
    wtr.write_record(["level", "type", "index", "value"])?;
    for (band, set) in [
        (Band::Detail, &decomposition.detail),
        (Band::Approximation, &decomposition.approximation),
    ] {
        for (l, coeffs) in set.iter().enumerate() {
            for (i, v) in coeffs.iter().enumerate() {
                wtr.write_record([(l + 1).to_string(), band.name().to_string(), i.to_string(), v.to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_signal() -> Vec<f64> {
        (0..200)
            .map(|i| {
                let t = i as f64;
                (0.37 * t).sin() + 0.01 * t + 0.5 * (1.3 * t).cos()
            })
            .collect()
    }

    #[test]
    fn filter_is_orthonormal() {
        let h = DB10_LOWPASS;
        assert!((h.iter().sum::<f64>() - std::f64::consts::SQRT_2).abs() < 1e-12);
        for shift in (0..TAPS).step_by(2) {
            let dot: f64 = (0..TAPS - shift).map(|n| h[n] * h[n + shift]).sum();
            let want = if shift == 0 { 1.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-12, "shift {shift}: {dot}");
        }
    }

    #[test]
    fn highpass_has_ten_vanishing_moments() {
        let g = highpass();
        for p in 0..10 {
            let moment: f64 = g.iter().enumerate().map(|(n, v)| v * (n as f64).powi(p)).sum();
            let scale = (TAPS as f64).powi(p);
            assert!(moment.abs() / scale < 1e-9, "moment {p}: {moment}");
        }
    }

    #[test]
    fn level_lengths_for_a_window() {
        let d = dwt_db10(&test_signal(), 7).unwrap();
        let lens: Vec<usize> = d.detail.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![100, 50, 25, 13, 7, 4, 2]);
        assert_eq!(max_level(200), 7);
    }

    #[test]
    fn matches_pywavelets_periodization() {
        // pywt.wavedec(x, 'db10', mode='periodization', level=7)
        let d = dwt_db10(&test_signal(), 7).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
        assert!(close(d.approximation[6][0], 17.219994738567035));
        assert!(close(d.approximation[6][1], 7.502668011590677));
        assert!(close(d.detail[6][0], -1.6532462350401982));
        assert!(close(d.detail[6][1], -2.735920335922447));
        assert!(close(d.detail[3][0], -4.2462162301643));
        assert!(close(d.detail[3][1], -0.8391692946126393));
        assert!(close(d.detail[3][2], -1.1786252108590323));
        assert!(close(d.detail[0][0], -0.19014284571133405));
        assert!(close(d.detail[0][1], 0.22555868904332244));
        assert!(close(d.approximation[2][0], 6.171709254651945));
        assert!(close(d.approximation[2][2], 6.008775271382519));
    }

    #[test]
    fn constant_signal() {
        let c = 3.25;
        let d = dwt_db10(&[c; 200], 7).unwrap();
        for level in &d.detail {
            assert!(level.iter().all(|v| v.abs() < 1e-9));
        }
        for (l, level) in d.approximation.iter().enumerate() {
            let want = c * 2f64.powf((l + 1) as f64 / 2.0);
            assert!(level.iter().all(|v| (v - want).abs() < 1e-9));
        }
    }

    #[test]
    fn zero_coefficients_reconstruct_zero() {
        assert_eq!(idwt_db10(&[0.0; 50], &[0.0; 50]).unwrap(), vec![0.0; 100]);
        assert!(idwt_db10(&[0.0; 3], &[0.0; 4]).is_err());
    }

    #[test]
    fn too_many_levels() {
        assert!(dwt_db10(&[1.0; 200], 8).is_err());
        assert!(dwt_db10(&[1.0], 1).is_err());
    }

    #[test]
    fn block_shape() {
        let d = dwt_db10(&test_signal(), 7).unwrap();
        let block = wavelet_feature_block(&d).unwrap();
        assert_eq!(block.len(), 173);
        let names = block_names();
        assert_eq!(names.len(), 173);
        assert!(!names.iter().any(|n| n.contains(".l7.kurtosis")));
        assert!(!names.iter().any(|n| n.contains("approx") && n.ends_with(".zcr")));
        assert!(names.contains(&"pupil.wavelet.detail.l3.rms".to_string()));

        let shallow = dwt_db10(&test_signal(), 6).unwrap();
        assert!(matches!(wavelet_feature_block(&shallow), Err(Error::Catalog(_))));
    }

    #[test]
    fn constant_input_detail_rms_vanishes() {
        let d = dwt_db10(&[4.0; 200], 7).unwrap();
        let block = wavelet_feature_block(&d).unwrap();
        for (name, v) in block_names().iter().zip(&block) {
            if name.contains("detail") && name.ends_with(".rms") {
                assert!(v.abs() < 1e-9, "{name} = {v}");
            }
        }
    }

    #[test]
    fn coefficient_dump() {
        let d = dwt_db10(&test_signal(), 2).unwrap();
        let mut buf = Vec::new();
        write_coefficients(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("level,type,index,value\n1,detail,0,"));
        assert_eq!(text.lines().count(), 1 + 2 * (100 + 50));
    }
}
