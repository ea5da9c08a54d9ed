//! Pipeline stages over on-disk artifacts. Each stage reads and writes the
//! file formats of the library modules, so any stage can be rerun alone.
//!
//! Dataset layout:
//!
//! ```text
//! DATA/partition.ini                  optional, defaults to the standard split
//! DATA/frames/<subject>.csv           tracker output, one row per frame
//! DATA/annotations/<dimension>/<subject>.csv
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use ndarray::{concatenate, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ProtocolChoice, RunConfig};
use super::report;
use crate::corpus::{
    default_partition, gold_standard, parse_annotations, parse_frames, serialize_frames, synth_corpus,
    write_annotations, AnnotationTrace, Dimension, Partition, SynthConfig,
};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport};
use crate::features::{extract_features, CatalogEntry, Channel, FeatureCatalog, FeatureMatrix, Group, Kind};
use crate::lld::{derive_descriptors, read_descriptors, write_descriptors};
use crate::model::{train_blstm, Checkpoint, CHECKPOINT_VERSION};
use crate::selection::{
    best_of, mi_filter, mi_scores, prepare, shift_frames, stacked_training, write_sweep_csv, Protocol,
    SelectionReport, SubjectData, SweepRow, Sweeper,
};

/// Environment variable naming a directory for cached feature matrices.
pub const CACHE_ENV: &str = "EYE_AFFECT_CACHE_DIR";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// `<stem> -> path` for every `.csv` file in `dir`, sorted by stem.
pub fn list_csv(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries =
        fs::read_dir(dir).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?;
    for entry in entries {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path.clone());
            }
        }
    }
    Ok(out)
}

pub fn load_partition(path: Option<&Path>) -> Result<Partition> {
    match path {
        Some(p) => Partition::from_ini_str(&fs::read_to_string(p)?),
        None => Ok(default_partition()),
    }
}

pub fn read_feature_dir(dir: &Path) -> Result<BTreeMap<String, FeatureMatrix>> {
    list_csv(dir)?
        .into_iter()
        .map(|(id, path)| {
            let m = FeatureMatrix::read_csv(open(&path)?)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            Ok((id, m))
        })
        .collect()
}

pub fn read_annotation_dir(dir: &Path, dimension: Dimension) -> Result<BTreeMap<String, Vec<AnnotationTrace>>> {
    list_csv(dir)?
        .into_iter()
        .map(|(id, path)| {
            let t = parse_annotations(open(&path)?, dimension)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            Ok((id, t))
        })
        .collect()
}

/// Feature rows and gold standard for the listed subjects; every subject
/// must have both a feature file and an annotation file.
pub fn subjects(
    ids: &[String],
    features: &BTreeMap<String, FeatureMatrix>,
    annotations: &BTreeMap<String, Vec<AnnotationTrace>>,
) -> Result<Vec<SubjectData>> {
    ids.iter()
        .map(|id| {
            let f = features
                .get(id)
                .ok_or_else(|| Error::Argument(format!("subject {id} has no feature file")))?;
            let a = annotations
                .get(id)
                .ok_or_else(|| Error::Argument(format!("subject {id} has no annotation file")))?;
            Ok(SubjectData {
                id: id.clone(),
                features: f.clone(),
                gold: gold_standard(a)?.values,
            })
        })
        .collect()
}

pub fn split_ids<'p>(partition: &'p Partition, split: &str) -> Result<&'p [String]> {
    match split {
        "train" => Ok(&partition.train),
        "validation" | "val" => Ok(&partition.validation),
        "test" => Ok(&partition.test),
        other => Err(Error::Argument(format!("unknown split `{other}`"))),
    }
}

/// Tracker CSVs to per-frame descriptor CSVs.
pub fn ingest(frames_dir: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (id, path) in list_csv(frames_dir)? {
        let frames = parse_frames(open(&path)?, &cfg.columns)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let series = derive_descriptors(&frames, &cfg.descriptors, &cfg.pupil_ring)?;
        let out = out_dir.join(format!("{id}.csv"));
        write_descriptors(&series, create(&out)?)?;
        written.push(out);
    }
    if written.is_empty() {
        return Err(Error::Argument(format!("no CSV files in {}", frames_dir.display())));
    }
    Ok(written)
}

/// Descriptor CSVs to windowed feature CSVs, reusing cached matrices when
/// a cache directory is configured.
pub fn features(descriptor_dir: &Path, out_dir: &Path, cache: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let catalog_hash = FeatureCatalog::eye().hash();
    for (id, path) in list_csv(descriptor_dir)? {
        let out = out_dir.join(format!("{id}.csv"));
        if let Some(dir) = out.parent() {
            fs::create_dir_all(dir)?;
        }
        let key = {
            let mut h = Sha256::new();
            h.update(fs::read(&path)?);
            h.update(catalog_hash.as_bytes());
            h.update(env!("CARGO_PKG_VERSION").as_bytes());
            hex::encode(h.finalize())
        };
        let cached = cache.map(|c| c.join("features").join(format!("{key}.csv")));
        if let Some(c) = cached.as_ref().filter(|c| c.is_file()) {
            log::info!("{id}: features from cache");
            fs::copy(c, &out)?;
        } else {
            let series = read_descriptors(open(&path)?)?;
            let m = extract_features(&series).map_err(|e| Error::Format(format!("{id}: {e}")))?;
            m.write_csv(create(&out)?)?;
            if let Some(c) = cached {
                if let Some(dir) = c.parent() {
                    fs::create_dir_all(dir)?;
                }
                fs::copy(&out, c)?;
            }
        }
        written.push(out);
    }
    if written.is_empty() {
        return Err(Error::Argument(format!("no CSV files in {}", descriptor_dir.display())));
    }
    Ok(written)
}

/// The chosen sweep cell in terms that survive a reload: column names
/// rather than positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub dimension: Dimension,
    pub protocol: Protocol,
    pub threshold: Option<f64>,
    pub shift_s: f64,
    pub val_ccc: Option<f64>,
    pub catalog_hash: String,
    pub retained: Vec<String>,
    /// Every evaluated cell, in sweep order.
    pub reports: Vec<SelectionReport>,
}

impl Selection {
    pub fn write(&self, path: &Path) -> Result<()> {
        serde_json::to_writer_pretty(create(path)?, self)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(open(path)?)?)
    }
}

fn run_protocols(sweeper: &mut Sweeper<'_>, choice: ProtocolChoice) -> Result<Vec<SelectionReport>> {
    match choice {
        ProtocolChoice::One(p) => sweeper.run(p),
        ProtocolChoice::All => {
            let mut rows = sweeper.during()?;
            rows.extend(sweeper.after()?);
            Ok(rows)
        }
    }
}

/// Run the configured sweep and pick the cell to train. The DURING grid
/// supplies the choice whenever it was run; otherwise the requested
/// protocol's own rows do.
pub fn select(
    train: &[SubjectData],
    val: &[SubjectData],
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<(Selection, Vec<PathBuf>)> {
    let mut sweeper = Sweeper::new(train, val, &cfg.sweep)?;
    let rows = run_protocols(&mut sweeper, cfg.protocol)?;
    let from = match cfg.protocol {
        ProtocolChoice::One(p) => p,
        ProtocolChoice::All => Protocol::During,
    };
    let best = best_of(&rows, from)
        .filter(|r| r.is_ok())
        .ok_or_else(|| Error::Undefined("no sweep cell produced a usable model".into()))?;
    let catalog = &train[0].features.catalog;
    let selection = Selection {
        dimension: cfg.dimension,
        protocol: best.protocol,
        threshold: best.threshold,
        shift_s: best.shift_s,
        val_ccc: best.val_ccc,
        catalog_hash: catalog.hash(),
        retained: catalog.select(&best.retained).names().into_iter().map(String::from).collect(),
        reports: rows.clone(),
    };
    let sweep_path = out_dir.join("sweep.csv");
    let table: Vec<SweepRow> = rows.iter().map(SweepRow::from).collect();
    write_sweep_csv(&table, create(&sweep_path)?)?;
    let selection_path = out_dir.join("selection.json");
    selection.write(&selection_path)?;
    Ok((selection, vec![sweep_path, selection_path]))
}

fn mask_for(catalog: &FeatureCatalog, names: &[String]) -> Result<Vec<bool>> {
    let mask: Vec<bool> = catalog.entries.iter().map(|e| names.contains(&e.name)).collect();
    let found = mask.iter().filter(|&&k| k).count();
    if found != names.len() {
        return Err(Error::Catalog(format!(
            "{} selected feature names are missing from the feature files",
            names.len() - found
        )));
    }
    Ok(mask)
}

/// Train on the selected columns at the selected delay; validation drives
/// early stopping. Writes `checkpoint.json` and `history.csv`.
pub fn train(
    train: &[SubjectData],
    val: &[SubjectData],
    selection: &Selection,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<(Checkpoint, Vec<PathBuf>)> {
    let catalog = &train[0].features.catalog;
    if catalog.hash() != selection.catalog_hash {
        return Err(Error::Catalog("selection was made on a different feature catalog".into()));
    }
    let mask = mask_for(catalog, &selection.retained)?;
    let shift = shift_frames(selection.shift_s)?;
    let prep = prepare(train, val, &mask, shift)?;
    let run = train_blstm(&prep.train, &prep.val, &cfg.sweep.model)?;
    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        config: cfg.sweep.model.clone(),
        catalog_hash: catalog.hash(),
        feature_names: selection.retained.clone(),
        input_scaler: prep.input_scaler,
        target_scaler: prep.target_scaler,
        shift_s: selection.shift_s,
        best_epoch: run.best_epoch,
        model: run.model,
    };
    let ck_path = out_dir.join("checkpoint.json");
    checkpoint.write(create(&ck_path)?)?;
    let hist_path = out_dir.join("history.csv");
    let mut wtr = csv::Writer::from_writer(create(&hist_path)?);
    wtr.write_record(["epoch", "train_mse", "val_mse"])?;
    for h in &run.history {
        wtr.write_record([h.epoch.to_string(), format!("{:.8}", h.train_mse), format!("{:.8}", h.val_mse)])?;
    }
    wtr.flush()?;
    Ok((checkpoint, vec![ck_path, hist_path]))
}

/// Score a checkpoint on some subjects. CCC and PCC are pooled over all
/// frames; SSE is the mean squared error on the standardized target scale.
pub fn evaluate(
    checkpoint: &Checkpoint,
    subjects: &[SubjectData],
    system: &str,
    dimension: Dimension,
    split: &str,
    predictions_dir: Option<&Path>,
) -> Result<EvalReport> {
    let shift = shift_frames(checkpoint.shift_s)?;
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    for s in subjects {
        if s.features.catalog.hash() != checkpoint.catalog_hash {
            return Err(Error::Checkpoint(format!(
                "subject {}: feature catalog does not match the checkpoint",
                s.id
            )));
        }
        let mask = mask_for(&s.features.catalog, &checkpoint.feature_names)?;
        let labels = s.gold.get(shift..).unwrap_or(&[]);
        let (rows, targets) = crate::selection::align(s.features.rows.view(), s.features.frame_offset, labels);
        let keep: Vec<usize> = mask.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i).collect();
        let p = checkpoint.predict(&rows.select(Axis(1), &keep))?;
        if let Some(dir) = predictions_dir {
            let mut wtr = csv::Writer::from_writer(create(&dir.join(format!("{}.csv", s.id)))?);
            wtr.write_record(["frame", "prediction", "gold"])?;
            for (r, (pv, gv)) in p.iter().zip(&targets).enumerate() {
                wtr.write_record([(s.features.frame_offset + r).to_string(), format!("{pv:.6}"), format!("{gv:.6}")])?;
            }
            wtr.flush()?;
        }
        pred.extend(p);
        gold.extend(targets);
    }
    let scale = &checkpoint.target_scaler;
    let sse = eval::sse(&scale.apply_values(&pred), &scale.apply_values(&gold))?;
    EvalReport::compute(system, dimension, split, &pred, &gold, sse)
}

/// Mean pairwise annotator agreement, averaged over subjects. SSE is the
/// mean pairwise squared difference in rating units.
pub fn human_baseline(
    annotations: &BTreeMap<String, Vec<AnnotationTrace>>,
    ids: &[String],
    dimension: Dimension,
    split: &str,
) -> Result<EvalReport> {
    if ids.is_empty() {
        return Err(Error::Argument(format!("split `{split}` has no subjects")));
    }
    let (mut ccc, mut pcc, mut sse, mut pcc_n, mut frames) = (0.0, 0.0, 0.0, 0usize, 0usize);
    for id in ids {
        let traces = annotations
            .get(id)
            .ok_or_else(|| Error::Argument(format!("subject {id} has no annotation file")))?;
        ccc += eval::human_baseline(traces)?;
        let mut s = 0.0;
        let mut pairs = 0usize;
        for i in 0..traces.len() {
            for j in i + 1..traces.len() {
                let n = traces[i].len().min(traces[j].len());
                s += eval::sse(&traces[i].values[..n], &traces[j].values[..n])?;
                if let Ok(p) = eval::pcc(&traces[i].values[..n], &traces[j].values[..n]) {
                    pcc += p;
                    pcc_n += 1;
                }
                pairs += 1;
            }
        }
        sse += s / pairs as f64;
        frames += traces.iter().map(AnnotationTrace::len).min().unwrap_or(0);
    }
    let k = ids.len() as f64;
    Ok(EvalReport {
        system: "humans".into(),
        dimension,
        split: split.into(),
        ccc: ccc / k,
        pcc: (pcc_n > 0).then(|| pcc / pcc_n as f64),
        sse: sse / k,
        n_frames: frames,
    })
}

/// Column-wise concatenation of eye and external features over identical
/// frame ranges. External columns are renamed `ext.<name>`.
pub fn fuse(eye: &FeatureMatrix, external: &FeatureMatrix) -> Result<FeatureMatrix> {
    let eye_range = (eye.frame_offset, eye.frame_offset + eye.n_rows());
    let ext_range = (external.frame_offset, external.frame_offset + external.n_rows());
    if eye_range != ext_range {
        return Err(Error::Alignment(format!(
            "eye features cover frames [{}, {}) but external features cover [{}, {})",
            eye_range.0, eye_range.1, ext_range.0, ext_range.1
        )));
    }
    let mut entries = eye.catalog.entries.clone();
    entries.extend(external.catalog.entries.iter().map(|e| CatalogEntry {
        name: if e.name.starts_with("ext.") {
            e.name.clone()
        } else {
            format!("ext.{}", e.name)
        },
        group: Group::External,
        kind: Kind::External,
        channel: Channel::External,
    }));
    let catalog = FeatureCatalog { entries };
    catalog.validate()?;
    let rows = concatenate(Axis(1), &[eye.rows.view(), external.rows.view()]).map_err(|e| Error::Format(e.to_string()))?;
    Ok(FeatureMatrix {
        rows,
        catalog,
        frame_offset: eye.frame_offset,
    })
}

/// Fuse every subject present in both directories.
pub fn fuse_dirs(eye_dir: &Path, external_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let eye = read_feature_dir(eye_dir)?;
    let ext = read_feature_dir(external_dir)?;
    let missing: Vec<&String> = eye.keys().filter(|k| !ext.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(Error::Alignment(format!("no external features for subjects {missing:?}")));
    }
    let mut written = Vec::new();
    for (id, m) in &eye {
        let fused = fuse(m, &ext[id]).map_err(|e| Error::Alignment(format!("{id}: {e}")))?;
        let out = out_dir.join(format!("{id}.csv"));
        fused.write_csv(create(&out)?)?;
        written.push(out);
    }
    Ok(written)
}

/// Keep the eye system's delay and MI threshold, re-scoring MI on the
/// fused columns.
pub fn reuse_selection(eye: &Selection, train: &[SubjectData]) -> Result<Selection> {
    let catalog = &train[0].features.catalog;
    let shift = shift_frames(eye.shift_s)?;
    let mask = match eye.threshold {
        Some(t) => {
            let (x, y) = stacked_training(train, shift)?;
            mi_filter(&mi_scores(x.view(), &y, crate::selection::DEFAULT_BINS)?, t)
        }
        None => vec![true; catalog.len()],
    };
    if !mask.contains(&true) {
        return Err(Error::Undefined("reused threshold removes every fused feature".into()));
    }
    Ok(Selection {
        catalog_hash: catalog.hash(),
        retained: catalog.select(&mask).names().into_iter().map(String::from).collect(),
        val_ccc: None,
        reports: Vec::new(),
        ..eye.clone()
    })
}

pub fn write_eval(reports: &[EvalReport], path: &Path) -> Result<()> {
    eval::write_eval_csv(reports, create(path)?)
}

/// Markdown tables and SVG chart for a sweep.
pub fn report(rows: &[SweepRow], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let tables = out_dir.join("tables.md");
    fs::write(&tables, report::markdown_tables(rows))?;
    let svg = out_dir.join("ccc_vs_shift.svg");
    fs::write(&svg, report::ccc_svg(rows))?;
    Ok(vec![tables, svg])
}

/// Write a synthetic corpus in the dataset layout.
pub fn synth(cfg: &SynthConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let corpus = synth_corpus(cfg)?;
    let mut written = Vec::new();
    for s in &corpus.subjects {
        let frames = out_dir.join("frames").join(format!("{}.csv", s.id));
        serialize_frames(&s.frames, create(&frames)?)?;
        let ann = out_dir
            .join("annotations")
            .join(Dimension::Arousal.to_string())
            .join(format!("{}.csv", s.id));
        write_annotations(&s.traces, create(&ann)?)?;
        written.extend([frames, ann]);
    }
    let partition = out_dir.join("partition.ini");
    fs::write(&partition, corpus.partition.to_ini_string())?;
    written.push(partition);
    Ok(written)
}

/// What a pipeline run read and wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    /// Input path (relative to the data directory) to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Stage name to output paths relative to the output directory.
    pub outputs: BTreeMap<String, Vec<String>>,
}

impl RunManifest {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: config.sweep.model.seed,
            config: config.clone(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn add_inputs(&mut self, root: &Path, files: impl IntoIterator<Item = PathBuf>) -> Result<()> {
        for f in files {
            let key = f.strip_prefix(root).unwrap_or(&f).to_string_lossy().replace('\\', "/");
            self.inputs.insert(key, sha256_file(&f)?);
        }
        Ok(())
    }

    pub fn add_outputs(&mut self, stage: &str, root: &Path, files: &[PathBuf]) {
        let list = self.outputs.entry(stage.to_string()).or_default();
        list.extend(
            files
                .iter()
                .map(|f| f.strip_prefix(root).unwrap_or(f).to_string_lossy().replace('\\', "/")),
        );
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        serde_json::to_writer_pretty(create(path)?, self)?;
        Ok(())
    }
}

/// Options of a full pipeline run.
#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    pub data: PathBuf,
    pub out: PathBuf,
    pub external: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

/// Artifacts written by [`pipeline`].
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub selection: Selection,
    pub evaluations: Vec<EvalReport>,
    pub manifest: RunManifest,
}

/// ingest, features, (fuse), select, train, eval, baseline-humans, report.
/// Errors carry the name of the failing stage.
pub fn pipeline(opts: &PipelineOptions, cfg: &RunConfig) -> std::result::Result<PipelineOutcome, (String, Error)> {
    let stage = |name: &str| {
        let name = name.to_string();
        move |e: Error| (name.clone(), e)
    };
    let out = &opts.out;
    let mut manifest = RunManifest::new(cfg);

    let partition_file = opts.data.join("partition.ini");
    let partition_path = partition_file.is_file().then_some(partition_file.as_path());
    let partition = load_partition(partition_path).map_err(stage("ingest"))?;
    let frames_dir = opts.data.join("frames");
    let ann_dir = opts.data.join("annotations").join(cfg.dimension.to_string());
    let mut inputs: Vec<PathBuf> = list_csv(&frames_dir).map_err(stage("ingest"))?.into_values().collect();
    inputs.extend(list_csv(&ann_dir).map_err(stage("ingest"))?.into_values());
    inputs.extend(partition_path.map(Path::to_path_buf));
    manifest.add_inputs(&opts.data, inputs).map_err(stage("ingest"))?;

    let written = ingest(&frames_dir, &out.join("descriptors"), cfg).map_err(stage("ingest"))?;
    manifest.add_outputs("ingest", out, &written);
    let written = features(&out.join("descriptors"), &out.join("features"), opts.cache.as_deref())
        .map_err(stage("features"))?;
    manifest.add_outputs("features", out, &written);

    let feats = read_feature_dir(&out.join("features")).map_err(stage("select"))?;
    let ann = read_annotation_dir(&ann_dir, cfg.dimension).map_err(stage("select"))?;
    partition
        .validate_against(feats.keys().map(String::as_str))
        .map_err(stage("select"))?;
    let train_set = subjects(&partition.train, &feats, &ann).map_err(stage("select"))?;
    let val_set = subjects(&partition.validation, &feats, &ann).map_err(stage("select"))?;
    let (selection, written) = select(&train_set, &val_set, cfg, &out.join("selection")).map_err(stage("select"))?;
    manifest.add_outputs("select", out, &written);

    let (checkpoint, written) =
        train(&train_set, &val_set, &selection, cfg, &out.join("model")).map_err(stage("train"))?;
    manifest.add_outputs("train", out, &written);

    let mut evaluations = Vec::new();
    let pred_dir = out.join("eval").join("predictions");
    evaluations.push(
        evaluate(&checkpoint, &val_set, "eye", cfg.dimension, "validation", Some(&pred_dir)).map_err(stage("eval"))?,
    );
    if !partition.test.is_empty() {
        let test_set = subjects(&partition.test, &feats, &ann).map_err(stage("eval"))?;
        evaluations.push(
            evaluate(&checkpoint, &test_set, "eye", cfg.dimension, "test", Some(&pred_dir)).map_err(stage("eval"))?,
        );
    }

    if let Some(ext_dir) = &opts.external {
        let fused_dir = out.join("fused");
        let written = fuse_dirs(&out.join("features"), ext_dir, &fused_dir).map_err(stage("fuse"))?;
        manifest.add_outputs("fuse", out, &written);
        let ext_inputs = list_csv(ext_dir).map_err(stage("fuse"))?.into_values();
        manifest.add_inputs(&opts.data, ext_inputs).map_err(stage("fuse"))?;
        let fused = read_feature_dir(&fused_dir).map_err(stage("fuse"))?;
        let f_train = subjects(&partition.train, &fused, &ann).map_err(stage("fuse"))?;
        let f_val = subjects(&partition.validation, &fused, &ann).map_err(stage("fuse"))?;
        let f_sel = if cfg.retune_fused {
            select(&f_train, &f_val, cfg, &out.join("fused_selection")).map_err(stage("select"))?.0
        } else {
            reuse_selection(&selection, &f_train).map_err(stage("select"))?
        };
        let (f_ck, written) = train(&f_train, &f_val, &f_sel, cfg, &out.join("fused_model")).map_err(stage("train"))?;
        manifest.add_outputs("train", out, &written);
        evaluations.push(evaluate(&f_ck, &f_val, "eye+external", cfg.dimension, "validation", None).map_err(stage("eval"))?);
        if !partition.test.is_empty() {
            let f_test = subjects(&partition.test, &fused, &ann).map_err(stage("eval"))?;
            evaluations.push(evaluate(&f_ck, &f_test, "eye+external", cfg.dimension, "test", None).map_err(stage("eval"))?);
        }
    }

    for split in ["train", "validation"] {
        let ids = split_ids(&partition, split).map_err(stage("baseline-humans"))?;
        if !ids.is_empty() && ann.get(&ids[0]).is_some_and(|t| t.len() >= 2) {
            evaluations.push(human_baseline(&ann, ids, cfg.dimension, split).map_err(stage("baseline-humans"))?);
        }
    }
    let eval_path = out.join("eval").join("eval.csv");
    write_eval(&evaluations, &eval_path).map_err(stage("eval"))?;
    manifest.add_outputs("eval", out, &[eval_path]);

    let rows: Vec<SweepRow> = selection.reports.iter().map(SweepRow::from).collect();
    let written = report(&rows, &out.join("report")).map_err(stage("report"))?;
    manifest.add_outputs("report", out, &written);

    manifest.write(&out.join("manifest.json")).map_err(stage("report"))?;
    Ok(PipelineOutcome {
        selection,
        evaluations,
        manifest,
    })
}

/// Look up the subjects of a split by name.
pub fn split_subjects(
    partition: &Partition,
    split: &str,
    features: &BTreeMap<String, FeatureMatrix>,
    annotations: &BTreeMap<String, Vec<AnnotationTrace>>,
) -> Result<Vec<SubjectData>> {
    subjects(split_ids(partition, split)?, features, annotations)
}
