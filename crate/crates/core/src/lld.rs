//! Per-frame low-level descriptors: 7 numeric channels (gaze angles and
//! their deltas, pupil diameter and its delta, blink intensity) and 6
//! binary event channels.

use serde::{Deserialize, Serialize};

use crate::corpus::FrameRecord;
use crate::error::{Error, Result};

/// Default pupil ring: the first eight landmarks of the left eye.
pub const DEFAULT_PUPIL_RING: [usize; 8] = [0, 1, 2, 3, 4, 5, 6, 7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericLlds {
    pub gaze_x: Vec<f64>,
    pub gaze_y: Vec<f64>,
    pub d_gaze_x: Vec<f64>,
    pub d_gaze_y: Vec<f64>,
    pub pupil_diam: Vec<f64>,
    pub d_pupil_diam: Vec<f64>,
    pub blink_intensity: Vec<f64>,
}

/// Where the direct-gaze channel came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectGazeSource {
    HumanCoded,
    /// Gaze-angle heuristic, used only when no coded column was supplied.
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLlds {
    pub direct_gaze: Vec<bool>,
    pub gaze_approach: Vec<bool>,
    pub eyes_fixated: Vec<bool>,
    pub eye_closure: Vec<bool>,
    pub pupil_dilation: Vec<bool>,
    pub pupil_constriction: Vec<bool>,
    pub direct_gaze_source: DirectGazeSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorSeries {
    pub numeric: NumericLlds,
    pub binary: BinaryLlds,
}

impl NumericLlds {
    pub fn len(&self) -> usize {
        self.gaze_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaze_x.is_empty()
    }
}

impl DescriptorSeries {
    pub fn len(&self) -> usize {
        self.numeric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numeric.is_empty()
    }

    /// Keep the first `n` frames.
    pub fn truncate(&mut self, n: usize) {
        let num = &mut self.numeric;
        for v in [
            &mut num.gaze_x,
            &mut num.gaze_y,
            &mut num.d_gaze_x,
            &mut num.d_gaze_y,
            &mut num.pupil_diam,
            &mut num.d_pupil_diam,
            &mut num.blink_intensity,
        ] {
            v.truncate(n);
        }
        let bin = &mut self.binary;
        for v in [
            &mut bin.direct_gaze,
            &mut bin.gaze_approach,
            &mut bin.eyes_fixated,
            &mut bin.eye_closure,
            &mut bin.pupil_dilation,
            &mut bin.pupil_constriction,
        ] {
            v.truncate(n);
        }
    }
}

/// Thresholds for the derived binary descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// On the 0-5 intensity scale.
    pub closure_threshold: f64,
    /// Radians per frame.
    pub fixation_threshold: f64,
    /// Radians.
    pub approach_epsilon: f64,
    /// Millimetres per frame.
    pub pupil_delta: f64,
    /// Radians; heuristic direct-gaze cone.
    pub direct_gaze_angle: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            closure_threshold: 1.0,
            fixation_threshold: 0.005,
            approach_epsilon: 0.0,
            pupil_delta: 0.01,
            direct_gaze_angle: 0.087,
        }
    }
}

fn first_difference(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    if !values.is_empty() {
        out.push(0.0);
    }
    out.extend(values.windows(2).map(|w| w[1] - w[0]));
    out
}

/// Diameter of the circle through a landmark ring: twice the mean distance
/// from the selected points to their centroid.
pub fn pupil_diameter_from_landmarks(points: &[[f64; 3]], ring: &[usize]) -> Result<f64> {
    if ring.len() < 3 {
        return Err(Error::Geometry(format!("need at least 3 ring points, got {}", ring.len())));
    }
    let mut selected = Vec::with_capacity(ring.len());
    for &i in ring {
        let p = points
            .get(i)
            .ok_or_else(|| Error::Geometry(format!("ring index {i} out of range ({} landmarks)", points.len())))?;
        selected.push(*p);
    }
    let k = selected.len() as f64;
    let mut centroid = [0.0; 3];
    for p in &selected {
        for a in 0..3 {
            centroid[a] += p[a] / k;
        }
    }
    let mean_radius = selected
        .iter()
        .map(|p| {
            let d: f64 = (0..3).map(|a| (p[a] - centroid[a]).powi(2)).sum();
            d.sqrt()
        })
        .sum::<f64>()
        / k;
    Ok(2.0 * mean_radius)
}

/// Numeric descriptors. The pupil channel prefers an explicit
/// `pupil_diameter` and falls back to the landmark ring frame by frame.
pub fn derive_numeric_llds(frames: &[FrameRecord], ring: &[usize]) -> Result<NumericLlds> {
    if frames.is_empty() {
        return Err(Error::Argument("no frames".into()));
    }
    let gaze_x: Vec<f64> = frames.iter().map(|f| f.gaze_x).collect();
    let gaze_y: Vec<f64> = frames.iter().map(|f| f.gaze_y).collect();
    let blink_intensity = frames.iter().map(|f| f.blink_intensity).collect();
    let pupil_diam = frames
        .iter()
        .map(|f| match (&f.pupil_diameter, &f.eye_landmarks) {
            (Some(d), _) => Ok(*d),
            (None, Some(points)) => pupil_diameter_from_landmarks(points, ring),
            (None, None) => Err(Error::MissingChannel(format!(
                "frame {} has neither a pupil diameter nor eye landmarks",
                f.frame_index
            ))),
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(NumericLlds {
        d_gaze_x: first_difference(&gaze_x),
        d_gaze_y: first_difference(&gaze_y),
        d_pupil_diam: first_difference(&pupil_diam),
        gaze_x,
        gaze_y,
        pupil_diam,
        blink_intensity,
    })
}

/// Binary descriptors from the numeric ones. A supplied direct-gaze column
/// is authoritative; otherwise the gaze-cone heuristic fills it and the
/// source is flagged.
pub fn derive_binary_llds(
    numeric: &NumericLlds,
    cfg: &ThresholdConfig,
    direct_gaze_input: Option<&[bool]>,
) -> Result<BinaryLlds> {
    let n = numeric.len();
    let lengths = [
        numeric.gaze_y.len(),
        numeric.d_gaze_x.len(),
        numeric.d_gaze_y.len(),
        numeric.pupil_diam.len(),
        numeric.d_pupil_diam.len(),
        numeric.blink_intensity.len(),
    ];
    if lengths.iter().any(|&l| l != n) {
        return Err(Error::Argument("numeric descriptor channels differ in length".into()));
    }

    let norm: Vec<f64> = numeric
        .gaze_x
        .iter()
        .zip(&numeric.gaze_y)
        .map(|(x, y)| x.hypot(*y))
        .collect();

    let eye_closure = numeric.blink_intensity.iter().map(|&b| b >= cfg.closure_threshold).collect();
    let eyes_fixated = numeric
        .d_gaze_x
        .iter()
        .zip(&numeric.d_gaze_y)
        .map(|(dx, dy)| dx.hypot(*dy) < cfg.fixation_threshold)
        .collect();
    let gaze_approach = (0..n)
        .map(|t| t > 0 && norm[t] < norm[t - 1] - cfg.approach_epsilon)
        .collect();
    let pupil_dilation = numeric.d_pupil_diam.iter().map(|&d| d > cfg.pupil_delta).collect();
    let pupil_constriction = numeric.d_pupil_diam.iter().map(|&d| d < -cfg.pupil_delta).collect();

    let (direct_gaze, direct_gaze_source) = match direct_gaze_input {
        Some(coded) => {
            if coded.len() != n {
                return Err(Error::Argument(format!(
                    "direct-gaze column has {} frames, descriptors have {n}",
                    coded.len()
                )));
            }
            (coded.to_vec(), DirectGazeSource::HumanCoded)
        }
        None => (
            norm.iter().map(|&r| r < cfg.direct_gaze_angle).collect(),
            DirectGazeSource::Heuristic,
        ),
    };

    Ok(BinaryLlds {
        direct_gaze,
        gaze_approach,
        eyes_fixated,
        eye_closure,
        pupil_dilation,
        pupil_constriction,
        direct_gaze_source,
    })
}

/// Both descriptor families for one subject. The coded direct-gaze column
/// is used when every frame carries it.
pub fn derive_descriptors(frames: &[FrameRecord], cfg: &ThresholdConfig, ring: &[usize]) -> Result<DescriptorSeries> {
    let numeric = derive_numeric_llds(frames, ring)?;
    let coded: Option<Vec<bool>> = frames.iter().map(|f| f.direct_gaze).collect();
    if coded.is_none() {
        log::info!("no complete direct-gaze column; using the gaze-angle heuristic");
    }
    let binary = derive_binary_llds(&numeric, cfg, coded.as_deref())?;
    Ok(DescriptorSeries { numeric, binary })
}

const NUMERIC_COLUMNS: [&str; 7] = [
    "gaze_x",
    "gaze_y",
    "d_gaze_x",
    "d_gaze_y",
    "pupil_diam",
    "d_pupil_diam",
    "blink_intensity",
];
const BINARY_COLUMNS: [&str; 6] = [
    "direct_gaze",
    "gaze_approach",
    "eyes_fixated",
    "eye_closure",
    "pupil_dilation",
    "pupil_constriction",
];

/// Write a descriptor series as CSV (`frame`, numeric channels, binary
/// channels as 0/1, `direct_gaze_source`).
pub fn write_descriptors<W: std::io::Write>(series: &DescriptorSeries, output: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(output);
    let mut header = vec!["frame"];
    header.extend(NUMERIC_COLUMNS);
    header.extend(BINARY_COLUMNS);
    header.push("direct_gaze_source");
    wtr.write_record(&header)?;
    let n = &series.numeric;
    let b = &series.binary;
    let source = match b.direct_gaze_source {
        DirectGazeSource::HumanCoded => "human_coded",
        DirectGazeSource::Heuristic => "heuristic",
    };
    for t in 0..series.len() {
        let mut row = vec![t.to_string()];
        for ch in [
            &n.gaze_x,
            &n.gaze_y,
            &n.d_gaze_x,
            &n.d_gaze_y,
            &n.pupil_diam,
            &n.d_pupil_diam,
            &n.blink_intensity,
        ] {
            row.push(ch[t].to_string());
        }
        for ch in [
            &b.direct_gaze,
            &b.gaze_approach,
            &b.eyes_fixated,
            &b.eye_closure,
            &b.pupil_dilation,
            &b.pupil_constriction,
        ] {
            row.push(if ch[t] { "1".into() } else { "0".into() });
        }
        row.push(source.into());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Inverse of [`write_descriptors`].
pub fn read_descriptors<R: std::io::Read>(input: R) -> Result<DescriptorSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("descriptor file lacks `{name}`")))
    };
    let num_idx: Vec<usize> = NUMERIC_COLUMNS.iter().map(|c| idx(c)).collect::<Result<_>>()?;
    let bin_idx: Vec<usize> = BINARY_COLUMNS.iter().map(|c| idx(c)).collect::<Result<_>>()?;
    let src_idx = idx("direct_gaze_source")?;

    let mut num: Vec<Vec<f64>> = vec![Vec::new(); 7];
    let mut bin: Vec<Vec<bool>> = vec![Vec::new(); 6];
    let mut source = DirectGazeSource::HumanCoded;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        for (k, &c) in num_idx.iter().enumerate() {
            let text = rec.get(c).unwrap_or("");
            let v = text.parse::<f64>().map_err(|_| Error::Parse {
                row,
                column: NUMERIC_COLUMNS[k].into(),
                message: format!("cannot parse `{text}`"),
            })?;
            num[k].push(v);
        }
        for (k, &c) in bin_idx.iter().enumerate() {
            bin[k].push(rec.get(c) == Some("1"));
        }
        if rec.get(src_idx) == Some("heuristic") {
            source = DirectGazeSource::Heuristic;
        }
    }
    let mut num = num.into_iter();
    let mut bin = bin.into_iter();
    let mut next_num = || num.next().expect("seven numeric channels");
    let numeric = NumericLlds {
        gaze_x: next_num(),
        gaze_y: next_num(),
        d_gaze_x: next_num(),
        d_gaze_y: next_num(),
        pupil_diam: next_num(),
        d_pupil_diam: next_num(),
        blink_intensity: next_num(),
    };
    let mut next_bin = || bin.next().expect("six binary channels");
    let binary = BinaryLlds {
        direct_gaze: next_bin(),
        gaze_approach: next_bin(),
        eyes_fixated: next_bin(),
        eye_closure: next_bin(),
        pupil_dilation: next_bin(),
        pupil_constriction: next_bin(),
        direct_gaze_source: source,
    };
    Ok(DescriptorSeries { numeric, binary })
}
