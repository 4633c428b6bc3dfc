use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::segment::{center_object, normalize_snippet};
use crate::error::{Error, Result};
use crate::imageio;
use crate::shape_model::{build_shape_model, extract_landmarks, LandmarkShape, ShapeModelSet};
use crate::stage_model::{
    estimate_transition_model, StageLabel, StageSequence, StageTransitionModel, N_STAGES,
};
use crate::texture::StageIntensityTable;

/// Per-snippet annotation table inside an ingest directory.
pub const ANNOTATIONS_FILE: &str = "annotations.csv";
/// Mask table for building shape models from ready-made masks.
pub const MASKS_FILE: &str = "masks.csv";

/// One row of `annotations.csv` (`file,cell,frame,stage`).
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub file: PathBuf,
    pub cell: u32,
    pub frame: u32,
    pub stage: StageLabel,
}

#[derive(Debug, Deserialize)]
struct RawAnnotation {
    file: PathBuf,
    cell: u32,
    frame: u32,
    stage: i64,
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    reader
        .deserialize::<RawAnnotation>()
        .map(|row| {
            let r = row?;
            Ok(Annotation {
                file: r.file,
                cell: r.cell,
                frame: r.frame,
                stage: StageLabel::new(r.stage)?,
            })
        })
        .collect()
}

/// Stage sequences per cell, ordered by frame and split at frame gaps.
pub fn sequences_from_annotations(rows: &[Annotation]) -> Vec<StageSequence> {
    let mut by_cell: BTreeMap<u32, Vec<(u32, StageLabel)>> = BTreeMap::new();
    for a in rows {
        by_cell.entry(a.cell).or_default().push((a.frame, a.stage));
    }
    let mut out = Vec::new();
    for (_, mut frames) in by_cell {
        frames.sort_by_key(|f| f.0);
        let mut current: Vec<StageLabel> = Vec::new();
        let mut last: Option<u32> = None;
        for (f, s) in frames {
            if last.is_some_and(|l| f != l + 1) && !current.is_empty() {
                out.push(StageSequence::new(std::mem::take(&mut current)));
            }
            current.push(s);
            last = Some(f);
        }
        if !current.is_empty() {
            out.push(StageSequence::new(current));
        }
    }
    out
}

/// Builds one model per stage with at least two shapes; other stages are
/// left out with a warning.
pub fn shape_models_from(shapes: &[(StageLabel, LandmarkShape)]) -> Result<ShapeModelSet> {
    let mut models = Vec::new();
    for stage in StageLabel::ALL {
        let group: Vec<LandmarkShape> = shapes
            .iter()
            .filter(|(s, _)| *s == stage)
            .map(|(_, sh)| sh.clone())
            .collect();
        if group.len() < 2 {
            log::warn!(
                "stage {stage} has {} usable shape(s), no model built",
                group.len()
            );
            continue;
        }
        models.push(build_shape_model(&group, stage)?);
    }
    if models.is_empty() {
        return Err(Error::NoShapeModels);
    }
    Ok(ShapeModelSet::new(models))
}

#[derive(Debug, Clone)]
pub struct IngestResult {
    pub transition: StageTransitionModel,
    pub shapes: ShapeModelSet,
    pub intensity: StageIntensityTable,
    pub n_snippets: usize,
    /// Snippets where no usable object was found.
    pub skipped: Vec<PathBuf>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, sd)
}

/// Segments annotated snippets and estimates every model from them.
///
/// `dir` holds `annotations.csv` and the snippet images it lists. Each
/// snippet is resampled to 96×96, thresholded (Otsu), split by a seeded
/// watershed, and the object at the centre is landmarked. Per-stage
/// intensity statistics are the mean and spread of the snippets'
/// foreground means.
pub fn ingest_annotated(dir: &Path) -> Result<IngestResult> {
    let rows = read_annotations(&dir.join(ANNOTATIONS_FILE))?;
    if rows.is_empty() {
        return Err(Error::InvalidInput("annotation table is empty".into()));
    }
    let transition = estimate_transition_model(&sequences_from_annotations(&rows))?;

    let mut shapes = Vec::new();
    let mut means: [Vec<f64>; N_STAGES] = Default::default();
    let mut skipped = Vec::new();
    for a in &rows {
        let path = dir.join(&a.file);
        let image = normalize_snippet(&imageio::read_png_normalized(&path)?);
        let landmarks = center_object(&image)
            .ok_or(Error::EmptyMask)
            .and_then(|m| extract_landmarks(&m).map(|l| (m, l)));
        match landmarks {
            Ok((mask, l)) => {
                let (sum, n) = image
                    .iter()
                    .zip(mask.iter())
                    .filter(|(_, &m)| m)
                    .fold((0.0, 0usize), |(s, n), (&v, _)| (s + v, n + 1));
                means[a.stage.index()].push(sum / n as f64);
                shapes.push((a.stage, l));
            }
            Err(e) if e.is_validation() => {
                log::warn!("{}: {e}, snippet skipped", path.display());
                skipped.push(path);
            }
            Err(e) => return Err(e),
        }
    }

    let defaults = StageIntensityTable::default();
    let mut mean = [0.0; N_STAGES];
    let mut std = [0.0; N_STAGES];
    for s in StageLabel::ALL {
        let xs = &means[s.index()];
        if xs.is_empty() {
            log::warn!("no intensities for stage {s}, keeping built-in values");
            mean[s.index()] = defaults.mean(s);
            std[s.index()] = defaults.std(s);
        } else {
            let (m, sd) = mean_std(xs);
            mean[s.index()] = m.max(1e-6);
            std[s.index()] = sd;
        }
    }

    Ok(IngestResult {
        transition,
        shapes: shape_models_from(&shapes)?,
        intensity: StageIntensityTable::new(mean, std)?,
        n_snippets: rows.len(),
        skipped,
    })
}

#[derive(Debug, Deserialize)]
struct MaskRow {
    file: PathBuf,
    stage: i64,
}

/// Shape models from binary mask images listed in `masks.csv`
/// (`file,stage`; nonzero pixels are foreground).
pub fn shape_models_from_masks(dir: &Path) -> Result<ShapeModelSet> {
    let path = dir.join(MASKS_FILE);
    let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut shapes = Vec::new();
    for row in reader.deserialize::<MaskRow>() {
        let row = row?;
        let stage = StageLabel::new(row.stage)?;
        let mask = imageio::read_png_raw(&dir.join(&row.file))?.mapv(|v| v > 0);
        shapes.push((stage, extract_landmarks(&mask)?));
    }
    shape_models_from(&shapes)
}
