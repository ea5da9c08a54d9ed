//! Agreement metrics (CCC, PCC, SSE), the annotator-agreement baseline,
//! and the Wilcoxon rank-sum test.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::corpus::{AnnotationTrace, Dimension};
use crate::error::{Error, Result};

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    Ok(())
}

/// Population means, variances and covariance.
fn moments(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        vx += dx * dx;
        vy += dy * dy;
        cxy += dx * dy;
    }
    (mx, my, vx / n, vy / n, cxy / n)
}

/// Concordance correlation coefficient with a flag for the degenerate
/// case (both inputs constant and equal), where it is defined as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Concordance {
    pub value: f64,
    pub degenerate: bool,
}

pub fn concordance(x: &[f64], y: &[f64]) -> Result<Concordance> {
    check_pair(x, y)?;
    if x.len() < 2 {
        return Err(Error::Argument("need at least 2 values".into()));
    }
    let (mx, my, vx, vy, cxy) = moments(x, y);
    let denom = vx + vy + (mx - my).powi(2);
    if denom == 0.0 {
        return Ok(Concordance {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Concordance {
        value: 2.0 * cxy / denom,
        degenerate: false,
    })
}

/// `2 cov(x,y) / (var x + var y + (mean x - mean y)^2)`, population moments.
pub fn ccc(x: &[f64], y: &[f64]) -> Result<f64> {
    concordance(x, y).map(|c| c.value)
}

pub fn pcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    if x.len() < 2 {
        return Err(Error::Argument("need at least 2 values".into()));
    }
    let (_, _, vx, vy, cxy) = moments(x, y);
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::Undefined("Pearson correlation of a zero-variance input".into()));
    }
    Ok(cxy / (vx.sqrt() * vy.sqrt()))
}

/// Mean squared difference per frame.
pub fn sse(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    if x.is_empty() {
        return Err(Error::Argument("empty input".into()));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64)
}

/// Mean CCC over all unordered annotator pairs.
pub fn human_baseline(traces: &[AnnotationTrace]) -> Result<f64> {
    if traces.len() < 2 {
        return Err(Error::Argument(format!("need at least 2 annotators, got {}", traces.len())));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..traces.len() {
        for j in i + 1..traces.len() {
            total += ccc(&traces[i].values, &traces[j].values)?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSum {
    /// Mann-Whitney U of `a` against `b` (R's `W`).
    pub w: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: PValueMethod,
}

/// Largest combined sample size for which the exact null distribution is
/// enumerated (when there are no ties).
pub const EXACT_LIMIT: usize = 12;

/// Midranks (1-based) of the pooled sample and the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// Number of ways each U value arises when `na` of `na + nb` distinct ranks
/// are assigned to the first sample. Index = U.
fn u_distribution(na: usize, nb: usize) -> Vec<u64> {
    // counts[i][j][u]: i items of a and j of b placed, contributing u
    let max_u = na * nb;
    let mut table = vec![vec![vec![0u64; max_u + 1]; nb + 1]; na + 1];
    table[0][0][0] = 1;
    for i in 0..=na {
        for j in 0..=nb {
            if i == 0 && j == 0 {
                continue;
            }
            let mut cell = vec![0u64; max_u + 1];
            // the largest remaining value belongs to a: it beats all j b's
            if i > 0 {
                for u in 0..=max_u {
                    if u >= j {
                        cell[u] += table[i - 1][j][u - j];
                    }
                }
            }
            if j > 0 {
                for u in 0..=max_u {
                    cell[u] += table[i][j - 1][u];
                }
            }
            table[i][j] = cell;
        }
    }
    table[na][nb].clone()
}

/// Wilcoxon rank-sum (Mann-Whitney) test of `a` against `b`.
///
/// Exact two-sided p-value when the samples are small and tie-free,
/// otherwise the normal approximation with continuity and tie correction.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSum> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("both samples must be non-empty".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Argument("samples must be finite".into()));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let w = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let nanb = (na * nb) as f64;

    if na + nb <= EXACT_LIMIT && ties.is_empty() {
        let dist = u_distribution(na, nb);
        let total: u64 = dist.iter().sum();
        let u = w.round() as usize;
        let p = if w > nanb / 2.0 {
            dist[u..].iter().sum::<u64>() as f64 / total as f64
        } else {
            dist[..=u].iter().sum::<u64>() as f64 / total as f64
        };
        return Ok(RankSum {
            w,
            p_value: (2.0 * p).min(1.0),
            method: PValueMethod::Exact,
        });
    }

    let n = (na + nb) as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let sigma = (nanb / 12.0 * ((n + 1.0) - tie_term)).sqrt();
    let z0 = w - nanb / 2.0;
    let p_value = if sigma == 0.0 {
        1.0
    } else {
        let correction = 0.5 * z0.signum() * if z0 == 0.0 { 0.0 } else { 1.0 };
        let z = (z0 - correction) / sigma;
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.cdf(-z.abs())).min(1.0)
    };
    Ok(RankSum {
        w,
        p_value,
        method: PValueMethod::Normal,
    })
}

/// One evaluated system on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub dimension: Dimension,
    pub split: String,
    pub ccc: f64,
    pub pcc: Option<f64>,
    pub sse: f64,
    pub n_frames: usize,
}

impl EvalReport {
    /// Metrics of `prediction` against `target`; `sse` is computed on the
    /// supplied scale (pass standardized values for comparable magnitudes).
    pub fn compute(
        system: &str,
        dimension: Dimension,
        split: &str,
        prediction: &[f64],
        target: &[f64],
        sse_value: f64,
    ) -> Result<Self> {
        Ok(EvalReport {
            system: system.into(),
            dimension,
            split: split.into(),
            ccc: ccc(prediction, target)?,
            pcc: pcc(prediction, target).ok(),
            sse: sse_value,
            n_frames: target.len(),
        })
    }
}

const EVAL_HEADER: [&str; 6] = ["system", "dimension", "split", "sse", "ccc", "pcc"];

pub fn write_eval_csv<W: Write>(reports: &[EvalReport], output: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(output);
    wtr.write_record(EVAL_HEADER)?;
    for r in reports {
        wtr.write_record([
            r.system.clone(),
            r.dimension.to_string(),
            r.split.clone(),
            format!("{:.6}", r.sse),
            format!("{:.6}", r.ccc),
            r.pcc.map(|v| format!("{v:.6}")).unwrap_or_else(|| "NA".into()),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Rows of an eval CSV; `n_frames` is not part of the file and reads as 0.
pub fn read_eval_csv<R: Read>(input: R) -> Result<Vec<EvalReport>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |idx: usize| -> Result<f64> {
            let text = rec.get(idx).unwrap_or("");
            text.parse().map_err(|_| Error::Parse {
                row: i + 1,
                column: EVAL_HEADER[idx].into(),
                message: format!("cannot parse `{text}`"),
            })
        };
        out.push(EvalReport {
            system: rec.get(0).unwrap_or("").into(),
            dimension: rec.get(1).unwrap_or("").parse()?,
            split: rec.get(2).unwrap_or("").into(),
            sse: num(3)?,
            ccc: num(4)?,
            pcc: if rec.get(5) == Some("NA") { None } else { Some(num(5)?) },
            n_frames: 0,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_concordance() {
        assert_eq!(ccc(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
    }

    #[test]
    fn zero_covariance() {
        assert_eq!(ccc(&[0.0; 4], &[1.0, -1.0, 1.0, -1.0]).unwrap(), 0.0);
    }

    #[test]
    fn worked_example() {
        // sigma_xy = 1.625, var_x = 1.25, var_y = 2.1875, (dmu)^2 = 1.5625
        let want = 2.0 * 1.625 / (1.25 + 2.1875 + 1.5625);
        assert!((want - 0.65f64).abs() < 1e-15);
        let got = ccc(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 6.0]).unwrap();
        assert!((got - 0.65).abs() < 1e-12);
    }

    #[test]
    fn degenerate_constant_pair() {
        let c = concordance(&[2.0; 3], &[2.0; 3]).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.value, 0.0);
        assert!(ccc(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn pearson_cases() {
        let y = [0.5, -1.0, 2.0, 3.5];
        let x: Vec<f64> = y.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pcc(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((pcc(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(pcc(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::Undefined(_))));
        assert_eq!(sse(&y, &y).unwrap(), 0.0);
    }

    fn trace(values: Vec<f64>) -> AnnotationTrace {
        AnnotationTrace {
            dimension: Dimension::Arousal,
            annotator_id: "a".into(),
            values,
        }
    }

    #[test]
    fn baseline_identical_and_single() {
        let t = trace(vec![0.1, 0.4, -0.3, 0.2]);
        assert!((human_baseline(&[t.clone(), t.clone()]).unwrap() - 1.0).abs() < 1e-12);
        assert!(human_baseline(&[t]).is_err());
    }

    #[test]
    fn baseline_is_mean_of_pairwise() {
        let a = trace(vec![0.1, 0.5, -0.2, 0.3, 0.0, -0.4]);
        let b = trace(vec![0.2, 0.1, -0.1, 0.4, -0.3, -0.2]);
        let c = trace(vec![-0.1, 0.6, 0.0, 0.1, 0.2, -0.5]);
        let pairs = [
            ccc(&a.values, &b.values).unwrap(),
            ccc(&a.values, &c.values).unwrap(),
            ccc(&b.values, &c.values).unwrap(),
        ];
        let want = pairs.iter().sum::<f64>() / 3.0;
        assert!((human_baseline(&[a, b, c]).unwrap() - want).abs() < 1e-12);
    }

    /// Exact two-sided p by enumerating every subset of ranks.
    fn enumerate_p(na: usize, nb: usize, w: f64) -> f64 {
        let n = na + nb;
        let mut le = 0u32;
        let mut ge = 0u32;
        let mut total = 0u32;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != na {
                continue;
            }
            let rank_sum: usize = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).sum();
            let u = rank_sum as f64 - (na * (na + 1)) as f64 / 2.0;
            total += 1;
            if u <= w {
                le += 1;
            }
            if u >= w {
                ge += 1;
            }
        }
        let tail = if w > (na * nb) as f64 / 2.0 { ge } else { le };
        (2.0 * tail as f64 / total as f64).min(1.0)
    }

    #[test]
    fn exact_small_samples() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.w, 0.0);
        assert_eq!(r.method, PValueMethod::Exact);
        assert!((r.p_value - 1.0 / 3.0).abs() < 1e-12);
        assert!((enumerate_p(2, 2, 0.0) - 1.0 / 3.0).abs() < 1e-12);

        let a = [1.3, 7.2, 4.4, 9.1, 0.2];
        let b = [2.5, 3.3, 8.8, 5.0, 6.1, 10.4, 11.0];
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        assert!((r.p_value - enumerate_p(5, 7, r.w)).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_and_large_shift() {
        let a = [1.0, 2.0, 2.0, 3.0, 4.0, 5.0, 5.0, 6.0];
        let r = wilcoxon_rank_sum(&a, &a).unwrap();
        assert!(r.p_value >= 0.99);

        let b = [0.3, 1.1, 2.7, 3.9, 4.2, 5.8, 6.6, 7.4];
        let a: Vec<f64> = b.iter().map(|v| v + 1000.0).collect();
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        assert_eq!(r.w, 64.0);
        // every a exceeds every b: both tails of the exact null give 2/C(16,8)
        assert!(r.p_value < 0.001, "{}", r.p_value);
    }

    #[test]
    fn swap_maps_w() {
        let a = [0.5, 2.0, 3.1, 3.1, 8.0];
        let b = [1.0, 3.1, 4.0, 9.0];
        let ab = wilcoxon_rank_sum(&a, &b).unwrap();
        let ba = wilcoxon_rank_sum(&b, &a).unwrap();
        assert!((ab.w + ba.w - 20.0).abs() < 1e-12);
        assert!((ab.p_value - ba.p_value).abs() < 1e-12);
    }

    #[test]
    fn eval_csv_round_trip() {
        let r = EvalReport {
            system: "eye".into(),
            dimension: Dimension::Arousal,
            split: "validation".into(),
            ccc: 0.326,
            pcc: Some(0.41),
            sse: 0.313,
            n_frames: 0,
        };
        let mut buf = Vec::new();
        write_eval_csv(std::slice::from_ref(&r), &mut buf).unwrap();
        assert_eq!(read_eval_csv(buf.as_slice()).unwrap(), vec![r]);
    }
}
