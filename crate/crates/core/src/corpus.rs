//! Frame and annotation ingestion, subject partitions, and the synthetic
//! corpus generator.
//!
//! Frame CSVs follow the OpenFace 2.0 layout by default (`frame`,
//! `timestamp`, `confidence`, `gaze_angle_x`, `gaze_angle_y`, `AU45_r`,
//! `eye_lmk_X_0`...), but every column name goes through a [`ColumnMap`]
//! so other extractors can be adapted without code changes. Annotation
//! CSVs carry a `time` column followed by one column per annotator.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Corpus-wide frame and annotation rate.
pub const FRAME_RATE: f64 = 25.0;

/// Tolerance used when checking file timestamps against the 25 Hz grid.
/// OpenFace rounds timestamps to milliseconds.
pub const TIMESTAMP_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    /// Zero-based position in the subject's frame sequence.
    pub frame_index: u64,
    /// Always `frame_index / 25`.
    pub timestamp: f64,
    pub confidence: f64,
    /// Radians.
    pub gaze_x: f64,
    /// Radians.
    pub gaze_y: f64,
    /// Action-unit intensity on the 0-5 scale.
    pub blink_intensity: f64,
    /// Millimetres.
    pub pupil_diameter: Option<f64>,
    /// 3-D eye landmarks in millimetres.
    pub eye_landmarks: Option<Vec<[f64; 3]>>,
    pub direct_gaze: Option<bool>,
}

/// Mapping from logical frame fields to CSV header names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub frame: String,
    pub timestamp: String,
    pub confidence: String,
    pub gaze_x: String,
    pub gaze_y: String,
    pub blink_intensity: String,
    pub pupil_diameter: String,
    pub direct_gaze: String,
    /// Prefixes for the X, Y and Z landmark columns; indices are appended.
    pub landmark_prefixes: [String; 3],
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            frame: "frame".into(),
            timestamp: "timestamp".into(),
            confidence: "confidence".into(),
            gaze_x: "gaze_angle_x".into(),
            gaze_y: "gaze_angle_y".into(),
            blink_intensity: "AU45_r".into(),
            pupil_diameter: "pupil_diameter".into(),
            direct_gaze: "direct_gaze".into(),
            landmark_prefixes: ["eye_lmk_X_".into(), "eye_lmk_Y_".into(), "eye_lmk_Z_".into()],
        }
    }
}

struct ResolvedColumns {
    frame: usize,
    timestamp: Option<usize>,
    confidence: Option<usize>,
    gaze_x: usize,
    gaze_y: usize,
    blink: usize,
    pupil: Option<usize>,
    direct_gaze: Option<usize>,
    landmarks: Vec<[usize; 3]>,
}

fn find(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn require(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    find(headers, name).ok_or_else(|| Error::Format(format!("missing required column `{name}`")))
}

impl ColumnMap {
    fn resolve(&self, headers: &csv::StringRecord) -> Result<ResolvedColumns> {
        let mut landmarks = Vec::new();
        loop {
            let i = landmarks.len();
            let cols = [0, 1, 2].map(|axis| find(headers, &format!("{}{i}", self.landmark_prefixes[axis])));
            match cols {
                [Some(x), Some(y), Some(z)] => landmarks.push([x, y, z]),
                _ => break,
            }
        }
        Ok(ResolvedColumns {
            frame: require(headers, &self.frame)?,
            timestamp: find(headers, &self.timestamp),
            confidence: find(headers, &self.confidence),
            gaze_x: require(headers, &self.gaze_x)?,
            gaze_y: require(headers, &self.gaze_y)?,
            blink: require(headers, &self.blink_intensity)?,
            pupil: find(headers, &self.pupil_diameter),
            direct_gaze: find(headers, &self.direct_gaze),
            landmarks,
        })
    }
}

fn cell<'a>(record: &'a csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<&'a str> {
    record.get(idx).ok_or_else(|| Error::Parse {
        row,
        column: column.to_string(),
        message: "missing cell".into(),
    })
}

fn parse_real(text: &str, row: usize, column: &str) -> Result<f64> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("non-finite value `{text}`"),
        }),
        Err(_) => Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("cannot parse `{text}` as a number"),
        }),
    }
}

fn parse_flag(text: &str, row: usize, column: &str) -> Result<Option<bool>> {
    match text.to_ascii_lowercase().as_str() {
        "" | "na" | "nan" => Ok(None),
        "1" | "1.0" | "true" | "t" => Ok(Some(true)),
        "0" | "0.0" | "false" | "f" => Ok(Some(false)),
        _ => Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("cannot parse `{text}` as a boolean"),
        }),
    }
}

/// CSV reader over the whole input; `;` is used as the delimiter when the
/// header line has semicolons but no commas (the layout of some corpus
/// releases).
fn reader<R: Read>(mut input: R) -> Result<csv::Reader<std::io::Cursor<Vec<u8>>>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let header = bytes.split(|&b| b == b'\n').next().unwrap_or(&[]);
    let delimiter = if header.contains(&b';') && !header.contains(&b',') {
        b';'
    } else {
        b','
    };
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .delimiter(delimiter)
        .has_headers(true)
        .from_reader(std::io::Cursor::new(bytes)))
}

/// Parse a frame-descriptor CSV. Rows are numbered from 1 (first data row)
/// in error messages.
pub fn parse_frames<R: Read>(input: R, columns: &ColumnMap) -> Result<Vec<FrameRecord>> {
    let mut rdr = reader(input)?;
    let headers = rdr.headers()?.clone();
    let cols = columns.resolve(&headers)?;

    let mut out: Vec<FrameRecord> = Vec::new();
    let mut first: Option<(u64, Option<f64>)> = None;
    let mut previous: Option<u64> = None;

    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;

        let frame_text = cell(&record, cols.frame, row, &columns.frame)?;
        let frame = frame_text
            .parse::<u64>()
            .or_else(|_| {
                frame_text
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.fract() == 0.0 && *v >= 0.0)
                    .map(|v| v as u64)
                    .ok_or(())
            })
            .map_err(|_| Error::Parse {
                row,
                column: columns.frame.clone(),
                message: format!("cannot parse `{frame_text}` as a frame number"),
            })?;
        if let Some(prev) = previous {
            if frame != prev + 1 {
                return Err(Error::Sequencing {
                    row,
                    previous: prev,
                    got: frame,
                });
            }
        }
        previous = Some(frame);

        let timestamp = match cols.timestamp {
            Some(idx) => Some(parse_real(cell(&record, idx, row, &columns.timestamp)?, row, &columns.timestamp)?),
            None => None,
        };
        let (first_frame, first_ts) = *first.get_or_insert((frame, timestamp));
        let frame_index = frame - first_frame;
        let expected = frame_index as f64 / FRAME_RATE;
        if let (Some(ts), Some(ts0)) = (timestamp, first_ts) {
            if ((ts - ts0) - expected).abs() > TIMESTAMP_TOLERANCE {
                return Err(Error::RateMismatch(format!(
                    "row {row}: timestamp {ts} is not on the 25 Hz grid (expected {:.3})",
                    ts0 + expected
                )));
            }
        }

        let confidence = match cols.confidence {
            Some(idx) => parse_real(cell(&record, idx, row, &columns.confidence)?, row, &columns.confidence)?,
            None => 1.0,
        };
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Range {
                row,
                column: columns.confidence.clone(),
                value: confidence,
                expected: "[0, 1]".into(),
            });
        }
        let gaze_x = parse_real(cell(&record, cols.gaze_x, row, &columns.gaze_x)?, row, &columns.gaze_x)?;
        let gaze_y = parse_real(cell(&record, cols.gaze_y, row, &columns.gaze_y)?, row, &columns.gaze_y)?;
        let blink_intensity = parse_real(
            cell(&record, cols.blink, row, &columns.blink_intensity)?,
            row,
            &columns.blink_intensity,
        )?;
        if !(0.0..=5.0).contains(&blink_intensity) {
            return Err(Error::Range {
                row,
                column: columns.blink_intensity.clone(),
                value: blink_intensity,
                expected: "[0, 5]".into(),
            });
        }

        let pupil_diameter = match cols.pupil {
            Some(idx) => {
                let text = cell(&record, idx, row, &columns.pupil_diameter)?;
                if text.is_empty() {
                    None
                } else {
                    let v = parse_real(text, row, &columns.pupil_diameter)?;
                    if v <= 0.0 {
                        return Err(Error::Range {
                            row,
                            column: columns.pupil_diameter.clone(),
                            value: v,
                            expected: "> 0".into(),
                        });
                    }
                    Some(v)
                }
            }
            None => None,
        };

        let eye_landmarks = if cols.landmarks.is_empty() {
            None
        } else {
            let mut points = Vec::with_capacity(cols.landmarks.len());
            for (k, idx) in cols.landmarks.iter().enumerate() {
                let mut p = [0.0; 3];
                for axis in 0..3 {
                    let name = format!("{}{k}", columns.landmark_prefixes[axis]);
                    p[axis] = parse_real(cell(&record, idx[axis], row, &name)?, row, &name)?;
                }
                points.push(p);
            }
            Some(points)
        };

        let direct_gaze = match cols.direct_gaze {
            Some(idx) => parse_flag(cell(&record, idx, row, &columns.direct_gaze)?, row, &columns.direct_gaze)?,
            None => None,
        };

        out.push(FrameRecord {
            frame_index,
            timestamp: expected,
            confidence,
            gaze_x,
            gaze_y,
            blink_intensity,
            pupil_diameter,
            eye_landmarks,
            direct_gaze,
        });
    }
    Ok(out)
}

/// Write frames using the default OpenFace-style column names. Optional
/// columns are emitted only when at least one record carries them.
pub fn serialize_frames<W: Write>(records: &[FrameRecord], output: W) -> Result<()> {
    let map = ColumnMap::default();
    let mut wtr = csv::Writer::from_writer(output);
    let has_pupil = records.iter().any(|r| r.pupil_diameter.is_some());
    let has_direct = records.iter().any(|r| r.direct_gaze.is_some());
    let n_landmarks = records
        .iter()
        .filter_map(|r| r.eye_landmarks.as_ref().map(Vec::len))
        .max()
        .unwrap_or(0);

    let mut header = vec![
        map.frame.clone(),
        map.timestamp.clone(),
        map.confidence.clone(),
        map.gaze_x.clone(),
        map.gaze_y.clone(),
        map.blink_intensity.clone(),
    ];
    if has_pupil {
        header.push(map.pupil_diameter.clone());
    }
    if has_direct {
        header.push(map.direct_gaze.clone());
    }
    for prefix in &map.landmark_prefixes {
        for k in 0..n_landmarks {
            header.push(format!("{prefix}{k}"));
        }
    }
    wtr.write_record(&header)?;

    for r in records {
        let mut row = vec![
            r.frame_index.to_string(),
            r.timestamp.to_string(),
            r.confidence.to_string(),
            r.gaze_x.to_string(),
            r.gaze_y.to_string(),
            r.blink_intensity.to_string(),
        ];
        if has_pupil {
            row.push(r.pupil_diameter.map(|v| v.to_string()).unwrap_or_default());
        }
        if has_direct {
            row.push(match r.direct_gaze {
                Some(true) => "1".into(),
                Some(false) => "0".into(),
                None => String::new(),
            });
        }
        for axis in 0..3 {
            for k in 0..n_landmarks {
                let v = r.eye_landmarks.as_ref().and_then(|p| p.get(k)).map(|p| p[axis]);
                row.push(v.map(|v| v.to_string()).unwrap_or_default());
            }
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Arousal,
    Valence,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Arousal => "arousal",
            Dimension::Valence => "valence",
        })
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "arousal" => Ok(Dimension::Arousal),
            "valence" => Ok(Dimension::Valence),
            other => Err(Error::Argument(format!("unknown dimension `{other}`"))),
        }
    }
}

/// One annotator's 25 Hz rating trace for one affect dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTrace {
    pub dimension: Dimension,
    pub annotator_id: String,
    pub values: Vec<f64>,
}

impl AnnotationTrace {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Parse `time,<annotator>...` CSV content into one trace per annotator.
pub fn parse_annotations<R: Read>(input: R, dimension: Dimension) -> Result<Vec<AnnotationTrace>> {
    let mut rdr = reader(input)?;
    let headers = rdr.headers()?.clone();
    let time_idx = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("time"))
        .ok_or_else(|| Error::Format("annotation file has no `time` column".into()))?;
    let annotators: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != time_idx)
        .map(|(i, h)| (i, h.to_string()))
        .collect();
    if annotators.is_empty() {
        return Err(Error::Format("annotation file has no annotator columns".into()));
    }

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); annotators.len()];
    let mut t0 = None;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let t = parse_real(cell(&record, time_idx, row, "time")?, row, "time")?;
        let t0 = *t0.get_or_insert(t);
        let expected = i as f64 / FRAME_RATE;
        if ((t - t0) - expected).abs() > TIMESTAMP_TOLERANCE {
            return Err(Error::RateMismatch(format!(
                "annotation row {row}: time {t} is not on the 25 Hz grid"
            )));
        }
        for (k, (idx, name)) in annotators.iter().enumerate() {
            let v = parse_real(cell(&record, *idx, row, name)?, row, name)?;
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::Range {
                    row,
                    column: name.clone(),
                    value: v,
                    expected: "[-1, 1]".into(),
                });
            }
            values[k].push(v);
        }
    }

    Ok(annotators
        .into_iter()
        .zip(values)
        .map(|((_, annotator_id), values)| AnnotationTrace {
            dimension,
            annotator_id,
            values,
        })
        .collect())
}

/// Write traces in the `time,<annotator>...` layout. All traces must have
/// equal length.
pub fn write_annotations<W: Write>(traces: &[AnnotationTrace], output: W) -> Result<()> {
    let n = traces.first().map(AnnotationTrace::len).unwrap_or(0);
    if traces.iter().any(|t| t.len() != n) {
        return Err(Error::Argument("annotation traces differ in length".into()));
    }
    let mut wtr = csv::Writer::from_writer(output);
    let mut header = vec!["time".to_string()];
    header.extend(traces.iter().map(|t| t.annotator_id.clone()));
    wtr.write_record(&header)?;
    for i in 0..n {
        let mut row = vec![format!("{:.2}", i as f64 / FRAME_RATE)];
        row.extend(traces.iter().map(|t| t.values[i].to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Frame-wise mean over annotators. A single trace is returned unchanged
/// apart from its id, so pre-computed gold standards pass straight through.
pub fn gold_standard(traces: &[AnnotationTrace]) -> Result<AnnotationTrace> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Argument("no annotation traces".into()))?;
    let n = traces.iter().map(AnnotationTrace::len).min().unwrap_or(0);
    if traces.iter().any(|t| t.len() != first.len()) {
        log::warn!("annotator traces differ in length; truncating to {n} frames");
    }
    let k = traces.len() as f64;
    let values = (0..n)
        .map(|i| traces.iter().map(|t| t.values[i]).sum::<f64>() / k)
        .collect();
    Ok(AnnotationTrace {
        dimension: first.dimension,
        annotator_id: "gold".into(),
        values,
    })
}

/// Truncate a label trace and a frame-indexed series to their common length.
pub fn common_length(frames: usize, labels: usize) -> usize {
    if frames != labels {
        log::warn!("frame series has {frames} frames but annotations have {labels}; truncating to the shorter");
    }
    frames.min(labels)
}

/// Train / validation / test subject split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

fn ids(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// The 8 / 8 / 7 RECOLA split.
pub fn default_partition() -> Partition {
    Partition {
        train: ids(&["P16", "P17", "P19", "P21", "P23", "P26", "P30", "P65"]),
        validation: ids(&["P25", "P28", "P34", "P37", "P41", "P48", "P56", "P58"]),
        test: ids(&["P39", "P42", "P43", "P45", "P46", "P62", "P64"]),
    }
}

impl Partition {
    pub fn all(&self) -> impl Iterator<Item = &String> {
        self.train.iter().chain(&self.validation).chain(&self.test)
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks that the three sets are pairwise disjoint.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for id in self.all() {
            if !seen.insert(id.as_str()) {
                return Err(Error::Argument(format!("subject {id} appears in more than one partition")));
            }
        }
        Ok(())
    }

    /// Checks disjointness and that the union equals `subjects`.
    pub fn validate_against<'a>(&self, subjects: impl IntoIterator<Item = &'a str>) -> Result<()> {
        self.validate()?;
        let loaded: BTreeSet<&str> = subjects.into_iter().collect();
        let listed: BTreeSet<&str> = self.all().map(String::as_str).collect();
        if loaded != listed {
            let missing: Vec<_> = loaded.difference(&listed).collect();
            let absent: Vec<_> = listed.difference(&loaded).collect();
            return Err(Error::Argument(format!(
                "partition does not match loaded subjects (unlisted: {missing:?}, not loaded: {absent:?})"
            )));
        }
        Ok(())
    }

    /// Parse an INI file with `[train]`, `[validation]` and `[test]`
    /// sections, each holding `subjects = id, id, ...`.
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let conf = ini::Ini::load_from_str(text).map_err(|e| Error::Format(format!("partition file: {e}")))?;
        let section = |name: &str| -> Vec<String> {
            conf.section(Some(name))
                .and_then(|s| s.get("subjects"))
                .map(|v| {
                    v.split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect()
                })
                .unwrap_or_default()
        };
        let p = Partition {
            train: section("train"),
            validation: section("validation"),
            test: section("test"),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn to_ini_string(&self) -> String {
        format!(
            "[train]\nsubjects = {}\n\n[validation]\nsubjects = {}\n\n[test]\nsubjects = {}\n",
            self.train.join(", "),
            self.validation.join(", "),
            self.test.join(", ")
        )
    }
}

/// Parameters of the synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_subjects: usize,
    /// Seconds per subject.
    pub duration: f64,
    /// Annotation delay in seconds.
    pub lag: f64,
    pub n_annotators: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_subjects: 12,
            duration: 120.0,
            lag: 2.0,
            n_annotators: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSubject {
    pub id: String,
    pub frames: Vec<FrameRecord>,
    pub traces: Vec<AnnotationTrace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub subjects: Vec<SynthSubject>,
    /// First two thirds of the subjects train, the rest validate.
    pub partition: Partition,
    pub lag_frames: usize,
    /// Frame field the targets are generated from.
    pub driver: &'static str,
    /// Frame fields that carry no information about the targets.
    pub noise_channels: Vec<&'static str>,
}

pub const SYNTH_MAX_LAG: f64 = 4.4;
const SYNTH_MIN_DURATION: f64 = 16.0;

/// Deterministic desk-scale stand-in for a recorded corpus.
///
/// The arousal target of every annotator is `0.8 tanh(1.2 z[t - lag])`
/// plus annotator noise, where `z` is the white driver process behind
/// `gaze_x`. `gaze_y`, blink intensity, pupil diameter and the coded
/// direct-gaze flag are generated independently of `z`.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    if !(0.0..=SYNTH_MAX_LAG).contains(&cfg.lag) {
        return Err(Error::Argument(format!(
            "lag {} s outside the sweep range [0, {SYNTH_MAX_LAG}]",
            cfg.lag
        )));
    }
    if cfg.duration < SYNTH_MIN_DURATION {
        return Err(Error::Argument(format!(
            "duration {} s is shorter than two feature windows ({SYNTH_MIN_DURATION} s)",
            cfg.duration
        )));
    }
    if cfg.n_subjects == 0 || cfg.n_annotators == 0 {
        return Err(Error::Argument("need at least one subject and one annotator".into()));
    }

    let n = (cfg.duration * FRAME_RATE).round() as usize;
    let lag_frames = (cfg.lag * FRAME_RATE).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut subjects = Vec::with_capacity(cfg.n_subjects);
    for s in 0..cfg.n_subjects {
        // driver with pre-roll so the delayed target is defined from frame 0
        let z: Vec<f64> = (0..n + lag_frames).map(|_| std_normal.sample(&mut rng)).collect();
        let gaze_offset = rng.gen_range(-0.05..0.05);

        let mut gaze_y = 0.0f64;
        let mut pupil = 0.0f64;
        let pupil_base = rng.gen_range(3.0..4.5);
        let mut direct = rng.gen_bool(0.5);
        let mut blink_left = 0usize;
        let mut blink_len = 0usize;
        let mut blink_peak = 0.0;

        let mut frames = Vec::with_capacity(n);
        for t in 0..n {
            gaze_y = 0.97 * gaze_y + 0.03 * std_normal.sample(&mut rng);
            pupil = 0.995 * pupil + 0.03 * std_normal.sample(&mut rng);
            if rng.gen_bool(0.02) {
                direct = !direct;
            }
            if blink_left == 0 && rng.gen_bool(0.015) {
                blink_len = rng.gen_range(3..9);
                blink_left = blink_len;
                blink_peak = rng.gen_range(1.5..4.5);
            }
            let blink = if blink_left > 0 {
                let pos = (blink_len - blink_left) as f64 + 0.5;
                let half = blink_len as f64 / 2.0;
                blink_left -= 1;
                blink_peak * (1.0 - ((pos - half) / half).abs())
            } else {
                (0.15 * std_normal.sample(&mut rng)).abs()
            };
            let jitter = 0.01 * std_normal.sample(&mut rng);
            frames.push(FrameRecord {
                frame_index: t as u64,
                timestamp: t as f64 / FRAME_RATE,
                confidence: 0.98,
                gaze_x: gaze_offset + 0.15 * z[t + lag_frames],
                gaze_y: 0.1 * gaze_y,
                blink_intensity: blink.clamp(0.0, 5.0),
                pupil_diameter: Some((pupil_base + pupil + jitter).max(1.0)),
                eye_landmarks: None,
                direct_gaze: Some(direct),
            });
        }

        let traces = (0..cfg.n_annotators)
            .map(|a| {
                let values = (0..n)
                    .map(|t| {
                        let v = 0.8 * (1.2 * z[t]).tanh() + 0.1 * std_normal.sample(&mut rng);
                        v.clamp(-1.0, 1.0)
                    })
                    .collect();
                AnnotationTrace {
                    dimension: Dimension::Arousal,
                    annotator_id: format!("A{}", a + 1),
                    values,
                }
            })
            .collect();

        subjects.push(SynthSubject {
            id: format!("S{:02}", s + 1),
            frames,
            traces,
        });
    }

    let n_train = (2 * cfg.n_subjects + 1) / 3;
    let partition = Partition {
        train: subjects[..n_train].iter().map(|s| s.id.clone()).collect(),
        validation: subjects[n_train..].iter().map(|s| s.id.clone()).collect(),
        test: Vec::new(),
    };

    Ok(SynthCorpus {
        subjects,
        partition,
        lag_frames,
        driver: "gaze_x",
        noise_channels: vec!["gaze_y", "blink_intensity", "pupil_diameter", "direct_gaze"],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_ROWS: &str = "frame, timestamp, confidence, gaze_angle_x, gaze_angle_y, AU45_r\n\
                            1, 0.000, 0.98, 0.1, -0.2, 0.5\n\
                            2, 0.040, 0.98, 0.15, -0.1, 0.0\n";

    #[test]
    fn parses_openface_rows() {
        let frames = parse_frames(TWO_ROWS.as_bytes(), &ColumnMap::default()).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].gaze_x, 0.1);
        assert_eq!(frames[0].gaze_y, -0.2);
        assert_eq!(frames[0].frame_index, 0);
        assert_eq!(frames[1].timestamp, 0.04);
        assert!(frames[0].pupil_diameter.is_none());
        assert!(frames[0].eye_landmarks.is_none());
        assert!(frames[0].direct_gaze.is_none());
    }

    #[test]
    fn header_only_gives_empty() {
        let text = "frame,gaze_angle_x,gaze_angle_y,AU45_r\n";
        assert!(parse_frames(text.as_bytes(), &ColumnMap::default()).unwrap().is_empty());
    }

    #[test]
    fn malformed_cell_names_row_and_column() {
        let text = "frame,gaze_angle_x,gaze_angle_y,AU45_r\n0,abc,0.1,0\n";
        match parse_frames(text.as_bytes(), &ColumnMap::default()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "gaze_angle_x");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_monotone_frames_rejected() {
        let text = "frame,gaze_angle_x,gaze_angle_y,AU45_r\n3,0,0,0\n2,0,0,0\n";
        assert!(matches!(
            parse_frames(text.as_bytes(), &ColumnMap::default()),
            Err(Error::Sequencing { row: 2, .. })
        ));
    }

    #[test]
    fn wrong_frame_rate_rejected() {
        let text = "frame,timestamp,gaze_angle_x,gaze_angle_y,AU45_r\n1,0.0,0,0,0\n2,0.0333,0,0,0\n";
        assert!(matches!(
            parse_frames(text.as_bytes(), &ColumnMap::default()),
            Err(Error::RateMismatch(_))
        ));
    }

    #[test]
    fn missing_mapped_column_is_format_error() {
        let text = "frame,gaze_angle_x,AU45_r\n0,0,0\n";
        assert!(matches!(
            parse_frames(text.as_bytes(), &ColumnMap::default()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn custom_column_map() {
        let map = ColumnMap {
            gaze_x: "gx".into(),
            gaze_y: "gy".into(),
            blink_intensity: "blink".into(),
            ..ColumnMap::default()
        };
        let text = "frame,gx,gy,blink,direct_gaze\n0,0.3,0.4,1.0,1\n";
        let frames = parse_frames(text.as_bytes(), &map).unwrap();
        assert_eq!(frames[0].gaze_y, 0.4);
        assert_eq!(frames[0].direct_gaze, Some(true));
    }

    #[test]
    fn landmarks_are_collected() {
        let text = "frame,gaze_angle_x,gaze_angle_y,AU45_r,eye_lmk_X_0,eye_lmk_X_1,eye_lmk_Y_0,eye_lmk_Y_1,eye_lmk_Z_0,eye_lmk_Z_1\n\
                    0,0,0,0,1,2,3,4,5,6\n";
        let frames = parse_frames(text.as_bytes(), &ColumnMap::default()).unwrap();
        assert_eq!(frames[0].eye_landmarks.as_ref().unwrap(), &vec![[1.0, 3.0, 5.0], [2.0, 4.0, 6.0]]);
    }

    #[test]
    fn semicolon_annotations() {
        let text = "time;FM1;FF1\n0.00;0.1;0.2\n0.04;-0.3;0.0\n";
        let traces = parse_annotations(text.as_bytes(), Dimension::Valence).unwrap();
        assert_eq!(traces[1].annotator_id, "FF1");
        assert_eq!(traces[0].values, vec![0.1, -0.3]);
    }

    #[test]
    fn annotations_three_annotators() {
        let mut text = String::from("time,A,B,C\n");
        for i in 0..100 {
            text.push_str(&format!("{:.2},0.1,-0.2,0.3\n", i as f64 / 25.0));
        }
        let traces = parse_annotations(text.as_bytes(), Dimension::Arousal).unwrap();
        assert_eq!(traces.len(), 3);
        assert!(traces.iter().all(|t| t.len() == 100));
        assert_eq!(traces[1].annotator_id, "B");
    }

    #[test]
    fn annotation_out_of_range() {
        let text = "time,A\n0.00,0.2\n0.04,1.5\n";
        assert!(matches!(
            parse_annotations(text.as_bytes(), Dimension::Valence),
            Err(Error::Range { row: 2, .. })
        ));
    }

    #[test]
    fn annotation_single_column_and_missing_time() {
        let traces = parse_annotations("time,gold\n0,0.5\n".as_bytes(), Dimension::Valence).unwrap();
        assert_eq!(traces.len(), 1);
        assert!(matches!(
            parse_annotations("t,A\n0,0.5\n".as_bytes(), Dimension::Valence),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn partition_lists() {
        let p = default_partition();
        assert!(p.train.contains(&"P16".to_string()));
        assert_eq!((p.train.len(), p.validation.len(), p.test.len()), (8, 8, 7));
        assert_eq!(p.len(), 23);
        let val: BTreeSet<_> = p.validation.iter().collect();
        assert!(p.test.iter().all(|id| !val.contains(id)));
        p.validate().unwrap();
    }

    #[test]
    fn partition_ini_round_trip() {
        let p = default_partition();
        let back = Partition::from_ini_str(&p.to_ini_string()).unwrap();
        assert_eq!(p, back);
        let dup = "[train]\nsubjects = P1, P2\n[validation]\nsubjects = P2\n";
        assert!(Partition::from_ini_str(dup).is_err());
    }

    #[test]
    fn partition_must_cover_loaded_subjects() {
        let p = Partition {
            train: ids(&["A"]),
            validation: ids(&["B"]),
            test: vec![],
        };
        p.validate_against(["A", "B"]).unwrap();
        assert!(p.validate_against(["A", "B", "C"]).is_err());
    }

    #[test]
    fn synth_argument_checks() {
        let bad_lag = SynthConfig { lag: 5.0, ..SynthConfig::default() };
        assert!(matches!(synth_corpus(&bad_lag), Err(Error::Argument(_))));
        let short = SynthConfig { duration: 10.0, ..SynthConfig::default() };
        assert!(matches!(synth_corpus(&short), Err(Error::Argument(_))));
    }

    #[test]
    fn synth_partition_split() {
        let c = synth_corpus(&SynthConfig { duration: 16.0, ..SynthConfig::default() }).unwrap();
        assert_eq!(c.partition.train.len(), 8);
        assert_eq!(c.partition.validation.len(), 4);
        assert!(c.noise_channels.len() >= 3);
        assert_eq!(c.subjects[0].frames.len(), 400);
    }
}
