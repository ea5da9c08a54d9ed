//! Sliding-window feature extraction and the 292-column feature catalog.
//!
//! Windows are 200 frames (8 s) advanced one frame at a time; only full
//! windows emit a row, and row `r` belongs to the window ending at frame
//! `frame_offset + r`.

pub mod stats;

use std::collections::HashSet;
use std::io::{Read, Write};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lld::DescriptorSeries;
use crate::wavelet::{self, WAVELET_BLOCK_LEN, WAVELET_LEVELS};
use stats::{
    event_stats, EventStat, Stat, Summary, BLINK_STATS, CHANNEL_STATS, EVENT_STATS_APPROACH, EVENT_STATS_LONG,
    EVENT_STATS_SHORT,
};

pub const WINDOW: usize = 200;
pub const STRIDE: usize = 1;
pub const FEATURE_COUNT: usize = 292;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Gaze,
    Pupil,
    Closure,
    /// Columns fused in from another modality.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Event,
    Stat,
    Wavelet,
    External,
}

/// Descriptor channel a feature is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    DirectGaze,
    GazeApproach,
    EyesFixated,
    EyeClosure,
    PupilDilation,
    PupilConstriction,
    GazeX,
    GazeY,
    DGazeX,
    DGazeY,
    PupilDiam,
    DPupilDiam,
    BlinkIntensity,
    PupilWavelet,
    External,
}

impl Channel {
    /// Frame-level inputs the channel depends on.
    pub fn frame_sources(self) -> &'static [&'static str] {
        match self {
            Channel::DirectGaze => &["direct_gaze"],
            Channel::GazeApproach | Channel::EyesFixated => &["gaze_x", "gaze_y"],
            Channel::EyeClosure | Channel::BlinkIntensity => &["blink_intensity"],
            Channel::PupilDilation
            | Channel::PupilConstriction
            | Channel::PupilDiam
            | Channel::DPupilDiam
            | Channel::PupilWavelet => &["pupil_diameter"],
            Channel::GazeX | Channel::DGazeX => &["gaze_x"],
            Channel::GazeY | Channel::DGazeY => &["gaze_y"],
            Channel::External => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub group: Group,
    pub kind: Kind,
    pub channel: Channel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    pub entries: Vec<CatalogEntry>,
}

const EVENT_BLOCK_A: [(Channel, Group, &str); 3] = [
    (Channel::DirectGaze, Group::Gaze, "gaze.direct"),
    (Channel::PupilDilation, Group::Pupil, "pupil.dilation"),
    (Channel::PupilConstriction, Group::Pupil, "pupil.constriction"),
];

const STAT_CHANNELS: [(Channel, Group, &str); 6] = [
    (Channel::PupilDiam, Group::Pupil, "pupil.diameter"),
    (Channel::DPupilDiam, Group::Pupil, "pupil.d_diameter"),
    (Channel::GazeX, Group::Gaze, "gaze.x"),
    (Channel::GazeY, Group::Gaze, "gaze.y"),
    (Channel::DGazeX, Group::Gaze, "gaze.dx"),
    (Channel::DGazeY, Group::Gaze, "gaze.dy"),
];

fn event_block_b() -> [(Channel, Group, &'static str, &'static [EventStat]); 3] {
    [
        (Channel::GazeApproach, Group::Gaze, "gaze.approach", &EVENT_STATS_APPROACH),
        (Channel::EyesFixated, Group::Gaze, "gaze.fixated", &EVENT_STATS_LONG),
        (Channel::EyeClosure, Group::Closure, "closure.eye_closure", &EVENT_STATS_LONG),
    ]
}

impl FeatureCatalog {
    /// The canonical eye feature catalog, in vector order: 12 short event
    /// features, 14 long event features, 84 channel statistics, 9 blink
    /// statistics, 173 wavelet statistics.
    pub fn eye() -> Self {
        let mut entries = Vec::with_capacity(FEATURE_COUNT);
        let mut push = |name: String, group, kind, channel| entries.push(CatalogEntry { name, group, kind, channel });

        for (channel, group, prefix) in EVENT_BLOCK_A {
            for s in EVENT_STATS_SHORT {
                push(format!("{prefix}.{}", s.name()), group, Kind::Event, channel);
            }
        }
        for (channel, group, prefix, set) in event_block_b() {
            for s in set {
                push(format!("{prefix}.{}", s.name()), group, Kind::Event, channel);
            }
        }
        for (channel, group, prefix) in STAT_CHANNELS {
            for s in CHANNEL_STATS {
                push(format!("{prefix}.{}", s.name()), group, Kind::Stat, channel);
            }
        }
        for s in BLINK_STATS {
            push(
                format!("closure.blink_intensity.{}", s.name()),
                Group::Closure,
                Kind::Stat,
                Channel::BlinkIntensity,
            );
        }
        for name in wavelet::block_names() {
            push(name, Group::Pupil, Kind::Wavelet, Channel::PupilWavelet);
        }
        FeatureCatalog { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn indices_of_group(&self, group: Group) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.group == group)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn indices_of_kind(&self, kind: Kind) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }

    /// Entries whose descriptor channel reads only the given frame fields.
    pub fn indices_sourced_only_from(&self, fields: &[&str]) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                let src = e.channel.frame_sources();
                !src.is_empty() && src.iter().all(|s| fields.contains(s))
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Keep the entries where `mask` is true.
    pub fn select(&self, mask: &[bool]) -> FeatureCatalog {
        FeatureCatalog {
            entries: self
                .entries
                .iter()
                .zip(mask)
                .filter(|(_, &keep)| keep)
                .map(|(e, _)| e.clone())
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.name.as_str()) {
                return Err(Error::Catalog(format!("duplicate feature name `{}`", e.name)));
            }
        }
        Ok(())
    }

    /// SHA-256 over the ordered column names.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.name.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }
}

/// Per-frame feature rows with their column catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Array2<f64>,
    pub catalog: FeatureCatalog,
    /// Frame index of row 0 (the end frame of the first full window).
    pub frame_offset: usize,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn width(&self) -> usize {
        self.rows.ncols()
    }

    /// Columns where `mask` is true.
    pub fn select(&self, mask: &[bool]) -> Result<FeatureMatrix> {
        if mask.len() != self.width() {
            return Err(Error::Shape {
                expected: self.width(),
                got: mask.len(),
            });
        }
        let keep: Vec<usize> = mask.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i).collect();
        Ok(FeatureMatrix {
            rows: self.rows.select(ndarray::Axis(1), &keep),
            catalog: self.catalog.select(mask),
            frame_offset: self.frame_offset,
        })
    }

    /// Write as CSV: `frame`, then one column per catalog entry.
    pub fn write_csv<W: Write>(&self, output: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(output);
        let mut header = vec!["frame".to_string()];
        header.extend(self.catalog.entries.iter().map(|e| e.name.clone()));
        wtr.write_record(&header)?;
        for (r, row) in self.rows.outer_iter().enumerate() {
            let mut rec = Vec::with_capacity(row.len() + 1);
            rec.push((self.frame_offset + r).to_string());
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Read a feature CSV. Columns whose names are in the eye catalog keep
    /// its group/kind tags; any other column is tagged external.
    pub fn read_csv<R: Read>(input: R) -> Result<FeatureMatrix> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("frame") {
            return Err(Error::Format("feature file must start with a `frame` column".into()));
        }
        let eye = FeatureCatalog::eye();
        let entries: Vec<CatalogEntry> = headers
            .iter()
            .skip(1)
            .map(|name| {
                eye.entries.iter().find(|e| e.name == name).cloned().unwrap_or(CatalogEntry {
                    name: name.to_string(),
                    group: Group::External,
                    kind: Kind::External,
                    channel: Channel::External,
                })
            })
            .collect();
        let catalog = FeatureCatalog { entries };
        catalog.validate()?;
        let width = catalog.len();

        let mut data = Vec::new();
        let mut frame_offset = None;
        let mut n_rows = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            let frame: usize = rec.get(0).unwrap_or("").parse().map_err(|_| Error::Parse {
                row,
                column: "frame".into(),
                message: "bad frame index".into(),
            })?;
            let offset = *frame_offset.get_or_insert(frame);
            if frame != offset + i {
                return Err(Error::Sequencing {
                    row,
                    previous: (offset + i) as u64 - 1,
                    got: frame as u64,
                });
            }
            if rec.len() != width + 1 {
                return Err(Error::Shape {
                    expected: width + 1,
                    got: rec.len(),
                });
            }
            for (c, text) in rec.iter().skip(1).enumerate() {
                let v: f64 = text.parse().map_err(|_| Error::Parse {
                    row,
                    column: catalog.entries[c].name.clone(),
                    message: format!("cannot parse `{text}`"),
                })?;
                data.push(v);
            }
            n_rows += 1;
        }
        let rows = Array2::from_shape_vec((n_rows, width), data).map_err(|e| Error::Format(e.to_string()))?;
        Ok(FeatureMatrix {
            rows,
            catalog,
            frame_offset: frame_offset.unwrap_or(WINDOW - 1),
        })
    }
}

/// Inclusive `(start, end)` frame pairs of every full window.
pub fn window_slices(series_length: usize, window: usize, stride: usize) -> Result<Vec<(usize, usize)>> {
    if window == 0 || stride == 0 {
        return Err(Error::Argument("window and stride must be positive".into()));
    }
    if series_length < window {
        return Err(Error::InsufficientData {
            needed: window,
            got: series_length,
        });
    }
    Ok((window - 1..series_length)
        .step_by(stride)
        .map(|end| (end + 1 - window, end))
        .collect())
}

/// Borrowed view of every descriptor channel over one window.
#[derive(Debug, Clone, Copy)]
pub struct DescriptorWindow<'a> {
    pub gaze_x: &'a [f64],
    pub gaze_y: &'a [f64],
    pub d_gaze_x: &'a [f64],
    pub d_gaze_y: &'a [f64],
    pub pupil_diam: &'a [f64],
    pub d_pupil_diam: &'a [f64],
    pub blink_intensity: &'a [f64],
    pub direct_gaze: &'a [bool],
    pub gaze_approach: &'a [bool],
    pub eyes_fixated: &'a [bool],
    pub eye_closure: &'a [bool],
    pub pupil_dilation: &'a [bool],
    pub pupil_constriction: &'a [bool],
}

impl<'a> DescriptorWindow<'a> {
    /// Frames `start..=end` of `series`.
    pub fn of(series: &'a DescriptorSeries, start: usize, end: usize) -> Result<Self> {
        if end < start || end >= series.len() {
            return Err(Error::Argument(format!(
                "window ({start}, {end}) outside a {}-frame series",
                series.len()
            )));
        }
        let r = start..end + 1;
        let n = &series.numeric;
        let b = &series.binary;
        let w = DescriptorWindow {
            gaze_x: &n.gaze_x[r.clone()],
            gaze_y: &n.gaze_y[r.clone()],
            d_gaze_x: &n.d_gaze_x[r.clone()],
            d_gaze_y: &n.d_gaze_y[r.clone()],
            pupil_diam: &n.pupil_diam[r.clone()],
            d_pupil_diam: &n.d_pupil_diam[r.clone()],
            blink_intensity: &n.blink_intensity[r.clone()],
            direct_gaze: &b.direct_gaze[r.clone()],
            gaze_approach: &b.gaze_approach[r.clone()],
            eyes_fixated: &b.eyes_fixated[r.clone()],
            eye_closure: &b.eye_closure[r.clone()],
            pupil_dilation: &b.pupil_dilation[r.clone()],
            pupil_constriction: &b.pupil_constriction[r],
        };
        Ok(w)
    }

    fn numeric(&self, channel: Channel) -> &'a [f64] {
        match channel {
            Channel::GazeX => self.gaze_x,
            Channel::GazeY => self.gaze_y,
            Channel::DGazeX => self.d_gaze_x,
            Channel::DGazeY => self.d_gaze_y,
            Channel::PupilDiam => self.pupil_diam,
            Channel::DPupilDiam => self.d_pupil_diam,
            Channel::BlinkIntensity => self.blink_intensity,
            other => unreachable!("{other:?} is not numeric"),
        }
    }

    fn flags(&self, channel: Channel) -> &'a [bool] {
        match channel {
            Channel::DirectGaze => self.direct_gaze,
            Channel::GazeApproach => self.gaze_approach,
            Channel::EyesFixated => self.eyes_fixated,
            Channel::EyeClosure => self.eye_closure,
            Channel::PupilDilation => self.pupil_dilation,
            Channel::PupilConstriction => self.pupil_constriction,
            other => unreachable!("{other:?} is not binary"),
        }
    }
}

/// The full 292-value vector for one window, given its wavelet block.
pub fn assemble_feature_vector(window: &DescriptorWindow<'_>, wavelet_block: &[f64]) -> Result<Vec<f64>> {
    if wavelet_block.len() != WAVELET_BLOCK_LEN {
        return Err(Error::Catalog(format!(
            "wavelet block has {} values, expected {WAVELET_BLOCK_LEN}",
            wavelet_block.len()
        )));
    }
    let mut out = Vec::with_capacity(FEATURE_COUNT);
    for (channel, _, _) in EVENT_BLOCK_A {
        out.extend(event_stats(window.flags(channel), &EVENT_STATS_SHORT)?.into_iter().map(|(_, v)| v));
    }
    for (channel, _, _, set) in event_block_b() {
        out.extend(event_stats(window.flags(channel), set)?.into_iter().map(|(_, v)| v));
    }
    for (channel, _, _) in STAT_CHANNELS {
        let s = Summary::compute(window.numeric(channel))?;
        out.extend(CHANNEL_STATS.iter().map(|&k| s.get(k)));
    }
    let blink = Summary::compute(window.blink_intensity)?;
    out.extend(BLINK_STATS.iter().map(|&k: &Stat| blink.get(k)));
    out.extend_from_slice(wavelet_block);

    if out.len() != FEATURE_COUNT {
        return Err(Error::Catalog(format!("assembled {} values, expected {FEATURE_COUNT}", out.len())));
    }
    Ok(out)
}

/// Features of one window, including its wavelet block.
pub fn window_features(window: &DescriptorWindow<'_>) -> Result<Vec<f64>> {
    let decomposition = wavelet::dwt_db10(window.pupil_diam, WAVELET_LEVELS)?;
    let block = wavelet::wavelet_feature_block(&decomposition)?;
    assemble_feature_vector(window, &block)
}

/// Feature rows for every full window of a subject. Windows are evaluated
/// in parallel; the result does not depend on the thread count.
pub fn extract_features(series: &DescriptorSeries) -> Result<FeatureMatrix> {
    let windows = window_slices(series.len(), WINDOW, STRIDE)?;
    let rows: Vec<Vec<f64>> = windows
        .par_iter()
        .map(|&(start, end)| window_features(&DescriptorWindow::of(series, start, end)?))
        .collect::<Result<_>>()?;
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    if let Some(bad) = flat.iter().position(|v| !v.is_finite()) {
        return Err(Error::Catalog(format!(
            "non-finite feature in row {} column {}",
            bad / FEATURE_COUNT,
            bad % FEATURE_COUNT
        )));
    }
    Ok(FeatureMatrix {
        rows: Array2::from_shape_vec((n, FEATURE_COUNT), flat).expect("row width is fixed"),
        catalog: FeatureCatalog::eye(),
        frame_offset: WINDOW - 1,
    })
}
