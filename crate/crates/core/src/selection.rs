//! Annotation-delay compensation and mutual-information feature filtering,
//! plus the sweeps that interleave the two.
//!
//! Labels are shifted back in time by `D_s` seconds: the target of feature
//! row `r` becomes the gold standard at frame `frame_offset + r + D_s*25`,
//! and rows without a target are dropped.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{common_length, gold_standard, AnnotationTrace, FrameRecord, FRAME_RATE};
use crate::error::{Error, Result};
use crate::eval;
use crate::features::{extract_features, FeatureMatrix};
use crate::lld::{derive_descriptors, ThresholdConfig};
use crate::model::{train_blstm, Blstm, ModelConfig, Sequence, Standardizer};

pub const DEFAULT_BINS: usize = 32;
pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.1, 0.15, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftConfig {
    /// Seconds; each must be a whole number of frames.
    pub shifts: Vec<f64>,
}

impl Default for ShiftConfig {
    /// 0 to 4.4 s in 0.2 s steps.
    fn default() -> Self {
        Self {
            shifts: (0..23).map(|k| (k as f64 * 0.2 * 10.0).round() / 10.0).collect(),
        }
    }
}

impl ShiftConfig {
    pub fn frames(&self) -> Result<Vec<usize>> {
        self.shifts.iter().map(|&s| shift_frames(s)).collect()
    }
}

/// Whole frames in `d_s` seconds.
pub fn shift_frames(d_s: f64) -> Result<usize> {
    let f = d_s * FRAME_RATE;
    if !(f >= 0.0) || (f - f.round()).abs() > 1e-6 {
        return Err(Error::Argument(format!(
            "shift {d_s} s is not a non-negative whole number of frames"
        )));
    }
    Ok(f.round() as usize)
}

/// `y'[t] = y[t + d_s*25]`; the result is shorter by the shift.
pub fn shift_labels(trace: &AnnotationTrace, d_s: f64) -> Result<AnnotationTrace> {
    let k = shift_frames(d_s)?;
    if k >= trace.len() {
        return Err(Error::Argument(format!(
            "shift of {k} frames does not fit a trace of {} frames",
            trace.len()
        )));
    }
    Ok(AnnotationTrace {
        values: trace.values[k..].to_vec(),
        ..trace.clone()
    })
}

/// Feature rows paired with their (already shifted) labels; trailing rows
/// without a label are dropped.
pub fn align(features: ArrayView2<f64>, frame_offset: usize, labels: &[f64]) -> (Array2<f64>, Vec<f64>) {
    let n = features.nrows().min(labels.len().saturating_sub(frame_offset));
    let rows = features.slice(ndarray::s![..n, ..]).to_owned();
    let targets = labels[frame_offset..frame_offset + n].to_vec();
    (rows, targets)
}

/// Bin index per value: two-valued variables bin by value, anything else by
/// equal-frequency rank (tied values share the bin of their first rank).
pub fn quantile_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0usize; n];
    let mut distinct = 0usize;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let bin = i * bins / n;
        for &k in &order[i..j] {
            out[k] = bin;
        }
        distinct += 1;
        i = j;
    }
    if distinct == 2 {
        let low = values[order[0]];
        for (o, &v) in out.iter_mut().zip(values) {
            *o = usize::from(v != low);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutualInformation {
    /// Nats, never negative.
    pub value: f64,
    /// One of the variables was constant.
    pub degenerate: bool,
}

fn mi_from_bins(bx: &[usize], by: &[usize], bins: usize) -> MutualInformation {
    let n = bx.len();
    let mut joint = vec![0u32; bins * bins];
    let mut px = vec![0u32; bins];
    let mut py = vec![0u32; bins];
    for (&a, &b) in bx.iter().zip(by) {
        joint[a * bins + b] += 1;
        px[a] += 1;
        py[b] += 1;
    }
    let degenerate = px.iter().filter(|&&c| c > 0).count() < 2 || py.iter().filter(|&&c| c > 0).count() < 2;
    if degenerate {
        return MutualInformation {
            value: 0.0,
            degenerate,
        };
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for a in 0..bins {
        for b in 0..bins {
            let c = joint[a * bins + b];
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (c * nf / (px[a] as f64 * py[b] as f64)).ln();
            }
        }
    }
    MutualInformation {
        value: mi.max(0.0),
        degenerate,
    }
}

/// Plug-in mutual information on equal-frequency bins, in nats.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<MutualInformation> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if bins < 2 {
        return Err(Error::Argument("need at least 2 bins".into()));
    }
    if x.is_empty() {
        return Ok(MutualInformation {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(mi_from_bins(&quantile_bins(x, bins), &quantile_bins(y, bins), bins))
}

/// MI of every column against `target`.
pub fn mi_scores(features: ArrayView2<f64>, target: &[f64], bins: usize) -> Result<Vec<f64>> {
    if features.nrows() != target.len() {
        return Err(Error::Argument(format!(
            "{} feature rows against {} targets",
            features.nrows(),
            target.len()
        )));
    }
    let by = quantile_bins(target, bins);
    let columns: Vec<Vec<f64>> = features.axis_iter(Axis(1)).map(|c| c.to_vec()).collect();
    Ok(columns
        .par_iter()
        .map(|c| mi_from_bins(&quantile_bins(c, bins), &by, bins).value)
        .collect())
}

/// Keep features whose score reaches `threshold`.
pub fn mi_filter(scores: &[f64], threshold: f64) -> Vec<bool> {
    let mask: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
    if !scores.is_empty() && !mask.contains(&true) {
        log::warn!("threshold {threshold} removes every feature");
    }
    mask
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Filter on unshifted labels, sweep thresholds.
    Before,
    /// Re-filter on the shifted labels at every delay.
    During,
    /// Sweep thresholds at the best unfiltered delay.
    After,
    /// Delay sweep without filtering.
    None,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Before => "before",
            Protocol::During => "during",
            Protocol::After => "after",
            Protocol::None => "none",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "before" => Ok(Protocol::Before),
            "during" => Ok(Protocol::During),
            "after" => Ok(Protocol::After),
            "none" => Ok(Protocol::None),
            other => Err(Error::Argument(format!("unknown protocol `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    /// The threshold removed every feature.
    Empty,
    Diverged,
}

/// One trained and evaluated cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub protocol: Protocol,
    /// `None` means no filtering.
    pub threshold: Option<f64>,
    pub shift_s: f64,
    /// Training-set MI per catalog column; empty for unfiltered cells.
    pub mi_scores: Vec<f64>,
    pub retained: Vec<bool>,
    pub n_features: usize,
    pub val_ccc: Option<f64>,
    /// Mean squared frame error on standardized validation targets.
    pub val_sse: Option<f64>,
    pub status: CellStatus,
    pub best_epoch: usize,
}

impl SelectionReport {
    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

/// Feature rows and the per-frame gold standard of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectData {
    pub id: String,
    pub features: FeatureMatrix,
    pub gold: Vec<f64>,
}

impl SubjectData {
    /// Descriptors, windowed features and gold standard for one recording,
    /// truncated to the frames covered by both tracker output and labels.
    pub fn from_recording(
        id: &str,
        frames: &[FrameRecord],
        traces: &[AnnotationTrace],
        thresholds: &ThresholdConfig,
        pupil_ring: &[usize],
    ) -> Result<Self> {
        let gold = gold_standard(traces)?;
        let n = common_length(frames.len(), gold.len());
        let mut series = derive_descriptors(&frames[..n], thresholds, pupil_ring)?;
        series.truncate(n);
        Ok(Self {
            id: id.to_string(),
            features: extract_features(&series)?,
            gold: gold.values[..n].to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub thresholds: Vec<f64>,
    pub shifts: ShiftConfig,
    pub bins: usize,
    pub model: ModelConfig,
    /// Run DURING at every threshold instead of only BEFORE's best.
    pub during_all_thresholds: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            shifts: ShiftConfig::default(),
            bins: DEFAULT_BINS,
            model: ModelConfig::default(),
            during_all_thresholds: false,
        }
    }
}

/// Standardized sequences and fitted scalers for one selected column set.
pub struct Prepared {
    pub train: Vec<Sequence>,
    pub val: Vec<Sequence>,
    pub input_scaler: Standardizer,
    pub target_scaler: Standardizer,
}

/// Shift, select and standardize. Scalers come from the training subjects.
pub fn prepare(train: &[SubjectData], val: &[SubjectData], mask: &[bool], shift: usize) -> Result<Prepared> {
    let keep: Vec<usize> = mask.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i).collect();
    let cut = |s: &SubjectData| -> Result<(Array2<f64>, Vec<f64>)> {
        if s.features.width() != mask.len() {
            return Err(Error::Shape {
                expected: mask.len(),
                got: s.features.width(),
            });
        }
        let labels = s.gold.get(shift..).unwrap_or(&[]);
        let (rows, targets) = align(s.features.rows.view(), s.features.frame_offset, labels);
        Ok((rows.select(Axis(1), &keep), targets))
    };
    let train_raw: Vec<_> = train.iter().map(cut).collect::<Result<_>>()?;
    let val_raw: Vec<_> = val.iter().map(cut).collect::<Result<_>>()?;
    let input_scaler = Standardizer::fit(train_raw.iter().map(|(r, _)| r.view()))?;
    let target_scaler = Standardizer::fit_values(train_raw.iter().map(|(_, t)| t.as_slice()))?;
    let build = |raw: Vec<(Array2<f64>, Vec<f64>)>| -> Result<Vec<Sequence>> {
        raw.into_iter()
            .map(|(r, t)| Sequence::new(input_scaler.apply(r.view())?, target_scaler.apply_values(&t)))
            .collect()
    };
    Ok(Prepared {
        train: build(train_raw)?,
        val: build(val_raw)?,
        input_scaler,
        target_scaler,
    })
}

/// Stacked training rows and targets at `shift` frames, for MI scoring.
pub fn stacked_training(train: &[SubjectData], shift: usize) -> Result<(Array2<f64>, Vec<f64>)> {
    let mut blocks = Vec::new();
    let mut targets = Vec::new();
    for s in train {
        let labels = s.gold.get(shift..).unwrap_or(&[]);
        let (rows, t) = align(s.features.rows.view(), s.features.frame_offset, labels);
        blocks.push(rows);
        targets.extend(t);
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let stacked = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Format(e.to_string()))?;
    Ok((stacked, targets))
}

/// Validation CCC over all validation frames pooled, and the standardized
/// mean squared error.
pub fn validate_model(model: &Blstm, val: &[Sequence]) -> Result<(f64, f64)> {
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    for s in val {
        pred.extend(model.forward(&s.inputs)?);
        gold.extend_from_slice(&s.targets);
    }
    if gold.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: gold.len(),
        });
    }
    Ok((eval::ccc(&pred, &gold)?, eval::sse(&pred, &gold)?))
}

/// Runs sweep cells, reusing any cell already evaluated in this sweep.
pub struct Sweeper<'a> {
    train: &'a [SubjectData],
    val: &'a [SubjectData],
    config: &'a SweepConfig,
    cache: HashMap<(Option<u64>, usize), SelectionReport>,
    scores: HashMap<usize, Vec<f64>>,
}

impl<'a> Sweeper<'a> {
    pub fn new(train: &'a [SubjectData], val: &'a [SubjectData], config: &'a SweepConfig) -> Result<Self> {
        if train.is_empty() || val.is_empty() {
            return Err(Error::Argument("sweeps need training and validation subjects".into()));
        }
        config.model.validate()?;
        config.shifts.frames()?;
        let width = train[0].features.width();
        if let Some(s) = train.iter().chain(val).find(|s| s.features.width() != width) {
            return Err(Error::Shape {
                expected: width,
                got: s.features.width(),
            });
        }
        Ok(Self {
            train,
            val,
            config,
            cache: HashMap::new(),
            scores: HashMap::new(),
        })
    }

    fn width(&self) -> usize {
        self.train[0].features.width()
    }

    fn scores_at(&mut self, shift: usize) -> Result<Vec<f64>> {
        if let Some(s) = self.scores.get(&shift) {
            return Ok(s.clone());
        }
        let (x, y) = stacked_training(self.train, shift)?;
        let s = mi_scores(x.view(), &y, self.config.bins)?;
        self.scores.insert(shift, s.clone());
        Ok(s)
    }

    /// Filter (when a threshold is given), train and validate one cell.
    pub fn cell(&mut self, protocol: Protocol, threshold: Option<f64>, shift_s: f64) -> Result<SelectionReport> {
        let shift = shift_frames(shift_s)?;
        let key = (threshold.map(f64::to_bits), shift);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(SelectionReport {
                protocol,
                ..hit.clone()
            });
        }
        let (mi, retained) = match threshold {
            Some(t) => {
                let s = self.scores_at(shift)?;
                let mask = mi_filter(&s, t);
                (s, mask)
            }
            None => (Vec::new(), vec![true; self.width()]),
        };
        let n_features = retained.iter().filter(|&&k| k).count();
        let mut report = SelectionReport {
            protocol,
            threshold,
            shift_s,
            mi_scores: mi,
            retained,
            n_features,
            val_ccc: None,
            val_sse: None,
            status: CellStatus::Empty,
            best_epoch: 0,
        };
        if n_features > 0 {
            let prep = prepare(self.train, self.val, &report.retained, shift)?;
            match train_blstm(&prep.train, &prep.val, &self.config.model) {
                Ok(run) => {
                    let (ccc, sse) = validate_model(&run.model, &prep.val)?;
                    report.val_ccc = Some(ccc);
                    report.val_sse = Some(sse);
                    report.status = CellStatus::Ok;
                    report.best_epoch = run.best_epoch;
                }
                Err(Error::Divergence { epoch }) => {
                    log::warn!("cell threshold {threshold:?} shift {shift_s} diverged at epoch {epoch}");
                    report.status = CellStatus::Diverged;
                }
                Err(e) => return Err(e),
            }
        }
        log::info!(
            "{protocol} threshold={} shift={shift_s:.2} features={} ccc={}",
            fmt_opt(threshold),
            report.n_features,
            fmt_opt(report.val_ccc)
        );
        self.cache.insert(key, report.clone());
        Ok(report)
    }

    /// Threshold rows `{none, t...}` at shift 0.
    pub fn before(&mut self) -> Result<Vec<SelectionReport>> {
        let mut rows = vec![self.cell(Protocol::Before, None, 0.0)?];
        for &t in &self.config.thresholds.clone() {
            rows.push(self.cell(Protocol::Before, Some(t), 0.0)?);
        }
        Ok(rows)
    }

    /// Delay sweep at a fixed threshold (or unfiltered).
    pub fn shift_sweep(&mut self, protocol: Protocol, threshold: Option<f64>) -> Result<Vec<SelectionReport>> {
        self.config
            .shifts
            .shifts
            .clone()
            .into_iter()
            .map(|s| self.cell(protocol, threshold, s))
            .collect()
    }

    /// BEFORE rows, then the delay sweep at BEFORE's best threshold (or at
    /// every threshold when configured).
    pub fn during(&mut self) -> Result<Vec<SelectionReport>> {
        let mut rows = self.before()?;
        let thresholds = if self.config.during_all_thresholds {
            self.config.thresholds.clone()
        } else {
            vec![best_threshold(&rows).ok_or_else(|| Error::Argument("no thresholds configured".into()))?]
        };
        for t in thresholds {
            rows.extend(self.shift_sweep(Protocol::During, Some(t))?);
        }
        Ok(rows)
    }

    pub fn none(&mut self) -> Result<Vec<SelectionReport>> {
        self.shift_sweep(Protocol::None, None)
    }

    /// Unfiltered delay sweep, then threshold rows at its best delay.
    pub fn after(&mut self) -> Result<Vec<SelectionReport>> {
        let mut rows = self.none()?;
        let shift = best_cell(&rows).map(|r| r.shift_s).unwrap_or(0.0);
        rows.push(self.cell(Protocol::After, None, shift)?);
        for &t in &self.config.thresholds.clone() {
            rows.push(self.cell(Protocol::After, Some(t), shift)?);
        }
        Ok(rows)
    }

    pub fn run(&mut self, protocol: Protocol) -> Result<Vec<SelectionReport>> {
        match protocol {
            Protocol::Before => self.before(),
            Protocol::During => self.during(),
            Protocol::After => self.after(),
            Protocol::None => self.none(),
        }
    }
}

/// Run one protocol from scratch.
pub fn sweep_protocol(
    protocol: Protocol,
    train: &[SubjectData],
    val: &[SubjectData],
    config: &SweepConfig,
) -> Result<Vec<SelectionReport>> {
    Sweeper::new(train, val, config)?.run(protocol)
}

fn rank_key(r: &SelectionReport) -> (bool, f64, usize, f64, f64) {
    (
        !r.is_ok(),
        -r.val_ccc.unwrap_or(f64::NEG_INFINITY),
        r.n_features,
        r.shift_s,
        r.threshold.unwrap_or(f64::NEG_INFINITY),
    )
}

/// Best cell: highest validation CCC, then fewer features, then smaller
/// delay. Failed cells rank after every successful one.
pub fn best_cell<'r, I>(rows: I) -> Option<&'r SelectionReport>
where
    I: IntoIterator<Item = &'r SelectionReport>,
{
    rows.into_iter().min_by(|a, b| {
        let (ka, kb) = (rank_key(a), rank_key(b));
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.cmp(&kb.2))
            .then(ka.3.total_cmp(&kb.3))
            .then(ka.4.total_cmp(&kb.4))
    })
}

/// Best threshold among the filtered BEFORE rows. The unfiltered row is a
/// reference only; if every threshold fails the smallest one is returned.
pub fn best_threshold(rows: &[SelectionReport]) -> Option<f64> {
    best_cell(rows.iter().filter(|r| r.protocol == Protocol::Before && r.threshold.is_some())).and_then(|r| r.threshold)
}

/// The best cell of the rows belonging to `protocol`.
pub fn best_of(rows: &[SelectionReport], protocol: Protocol) -> Option<&SelectionReport> {
    best_cell(rows.iter().filter(|r| r.protocol == protocol))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x}"))
}

const SWEEP_HEADER: [&str; 6] = ["protocol", "threshold", "shift_s", "n_features", "val_sse", "val_ccc"];

/// One row of a sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub protocol: Protocol,
    pub threshold: Option<f64>,
    pub shift_s: f64,
    pub n_features: usize,
    pub val_sse: Option<f64>,
    pub val_ccc: Option<f64>,
}

impl From<&SelectionReport> for SweepRow {
    fn from(r: &SelectionReport) -> Self {
        Self {
            protocol: r.protocol,
            threshold: r.threshold,
            shift_s: r.shift_s,
            n_features: r.n_features,
            val_sse: r.val_sse,
            val_ccc: r.val_ccc,
        }
    }
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.6}"))
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], output: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(output);
    wtr.write_record(SWEEP_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.protocol.to_string(),
            r.threshold.map_or_else(|| "none".into(), |t| format!("{t}")),
            format!("{:.2}", r.shift_s),
            r.n_features.to_string(),
            fmt_metric(r.val_sse),
            fmt_metric(r.val_ccc),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != SWEEP_HEADER {
        return Err(Error::Format(format!("sweep header must be {}", SWEEP_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let parse = |c: usize| -> Result<f64> {
            cell(c).parse().map_err(|_| Error::Parse {
                row,
                column: SWEEP_HEADER[c].into(),
                message: format!("cannot parse `{}`", cell(c)),
            })
        };
        let opt = |c: usize, missing: &str| -> Result<Option<f64>> {
            if cell(c) == missing {
                Ok(None)
            } else {
                parse(c).map(Some)
            }
        };
        out.push(SweepRow {
            protocol: cell(0).parse()?,
            threshold: opt(1, "none")?,
            shift_s: parse(2)?,
            n_features: cell(3).parse().map_err(|_| Error::Parse {
                row,
                column: "n_features".into(),
                message: format!("cannot parse `{}`", cell(3)),
            })?,
            val_sse: opt(4, "NA")?,
            val_ccc: opt(5, "NA")?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Dimension;

    fn trace(values: Vec<f64>) -> AnnotationTrace {
        AnnotationTrace {
            dimension: Dimension::Arousal,
            annotator_id: "gold".into(),
            values,
        }
    }

    #[test]
    fn default_shift_grid() {
        let s = ShiftConfig::default();
        assert_eq!(s.shifts.len(), 23);
        assert_eq!(s.shifts[0], 0.0);
        assert_eq!(s.shifts[22], 4.4);
        assert_eq!(s.frames().unwrap()[10], 50);
        assert!(shift_frames(0.03).is_err());
    }

    #[test]
    fn shifting_labels() {
        let t = trace((0..100).map(f64::from).collect());
        assert_eq!(shift_labels(&t, 0.0).unwrap(), t);
        let s = shift_labels(&t, 0.2).unwrap();
        assert_eq!(s.len(), 95);
        assert_eq!(s.values[0], 5.0);
        let long = trace(vec![0.0; 1500]);
        assert_eq!(shift_labels(&long, 4.4).unwrap().len(), 1390);
        assert!(shift_labels(&t, 4.0).is_err());
    }

    #[test]
    fn alignment_drops_trailing_rows() {
        let f = Array2::from_shape_fn((10, 1), |(r, _)| r as f64);
        let labels: Vec<f64> = (0..12).map(f64::from).collect();
        let (rows, t) = align(f.view(), 5, &labels);
        assert_eq!(rows.nrows(), 7);
        assert_eq!(t, vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn mi_of_identity_is_log_bins() {
        let x: Vec<f64> = (0..3200).map(|i| ((i * 7919) % 3200) as f64 * 0.37).collect();
        let mi = mutual_information(&x, &x, 32).unwrap();
        assert!((mi.value - 32f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn constant_variable_is_degenerate() {
        let mi = mutual_information(&[1.0; 64], &(0..64).map(f64::from).collect::<Vec<_>>(), 32).unwrap();
        assert_eq!(mi.value, 0.0);
        assert!(mi.degenerate);
        assert!(mutual_information(&[1.0], &[1.0, 2.0], 32).is_err());
    }

    #[test]
    fn binary_variables_bin_by_value() {
        let b = quantile_bins(&[0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0], 32);
        assert_eq!(b, vec![0, 1, 1, 0, 1, 1, 1, 1]);
        let x = [0.0, 1.0, 0.0, 1.0];
        let mi = mutual_information(&x, &x, 32).unwrap();
        assert!((mi.value - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn filter_rule() {
        assert_eq!(mi_filter(&[0.05, 0.20, 0.15], 0.15), vec![false, true, true]);
        assert_eq!(mi_filter(&[0.05, 0.20, 0.15], 0.0), vec![true; 3]);
        assert_eq!(mi_filter(&[0.05, 0.20, 0.15], 0.5), vec![false; 3]);
    }

    fn report(protocol: Protocol, threshold: Option<f64>, shift_s: f64, ccc: Option<f64>, n: usize) -> SelectionReport {
        SelectionReport {
            protocol,
            threshold,
            shift_s,
            mi_scores: Vec::new(),
            retained: Vec::new(),
            n_features: n,
            val_ccc: ccc,
            val_sse: ccc.map(|c| 1.0 - c),
            status: if ccc.is_some() { CellStatus::Ok } else { CellStatus::Empty },
            best_epoch: 0,
        }
    }

    #[test]
    fn tie_breaks() {
        let rows = vec![
            report(Protocol::None, None, 1.0, Some(0.5), 10),
            report(Protocol::None, None, 0.4, Some(0.5), 8),
            report(Protocol::None, None, 0.2, Some(0.5), 8),
            report(Protocol::None, None, 0.0, None, 0),
        ];
        assert_eq!(best_cell(&rows).unwrap().shift_s, 0.2);
        let before = vec![
            report(Protocol::Before, None, 0.0, Some(0.3), 292),
            report(Protocol::Before, Some(0.1), 0.0, None, 0),
            report(Protocol::Before, Some(0.15), 0.0, None, 0),
        ];
        assert_eq!(best_threshold(&before), Some(0.1));
    }

    #[test]
    fn sweep_csv_round_trip() {
        let rows = vec![
            SweepRow::from(&report(Protocol::Before, None, 0.0, Some(0.25), 292)),
            SweepRow::from(&report(Protocol::During, Some(0.15), 2.2, None, 0)),
        ];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("protocol,threshold,shift_s,n_features,val_sse,val_ccc\n"));
        assert!(text.contains("during,0.15,2.20,0,NA,NA"));
        assert_eq!(read_sweep_csv(buf.as_slice()).unwrap(), rows);
    }
}
