use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::imageio;
use crate::population_sim::SimOutput;
use crate::stage_model::StageLabel;

pub const DATASET_FORMAT: &str = "cellsynth-dataset/1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRACKS_FILE: &str = "tracks.txt";
pub const STAGES_FILE: &str = "stages.csv";

pub fn frame_file(t: usize) -> String {
    format!("t{t:03}.png")
}

pub fn mask_file(t: usize) -> String {
    format!("mask{t:03}.png")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub n_frames: usize,
    pub n_cells: usize,
    pub n_divisions: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub files: Vec<String>,
    /// Configuration that regenerates the dataset.
    pub config: SimConfig,
}

impl DatasetManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Lines `"id begin end parent"`, ordered by id.
pub fn tracks_text(out: &SimOutput) -> String {
    let mut tracks: Vec<_> = out.tracks.iter().collect();
    tracks.sort_by_key(|t| t.id);
    tracks.iter().fold(String::new(), |mut s, t| {
        writeln!(s, "{} {} {} {}", t.id, t.start, t.end(), t.parent).expect("string write");
        s
    })
}

/// `frame,id,stage` rows ordered by frame, then id.
pub fn stages_text(out: &SimOutput) -> String {
    let mut rows = BTreeMap::new();
    for tr in &out.tracks {
        for f in &tr.frames {
            rows.insert((f.frame, tr.id), f.stage.value());
        }
    }
    rows.iter()
        .fold(String::from("frame,id,stage\n"), |mut s, ((t, id), st)| {
            writeln!(s, "{t},{id},{st}").expect("string write");
            s
        })
}

/// Writes raw frames, instance masks, lineage, stages and the manifest.
pub fn export_dataset(out: &SimOutput, dir: &Path) -> Result<DatasetManifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::with_capacity(2 * out.frames.len() + 2);
    for (t, f) in out.frames.iter().enumerate() {
        imageio::write_png16(&dir.join(frame_file(t)), &imageio::to_u16(&f.raw))?;
        imageio::write_png16(&dir.join(mask_file(t)), &f.labels)?;
        files.push(frame_file(t));
        files.push(mask_file(t));
    }
    write_text(&dir.join(TRACKS_FILE), &tracks_text(out))?;
    write_text(&dir.join(STAGES_FILE), &stages_text(out))?;
    files.push(TRACKS_FILE.into());
    files.push(STAGES_FILE.into());

    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        n_frames: out.frames.len(),
        n_cells: out.tracks.len(),
        n_divisions: out.division_count(),
        seed: out.config.seed,
        width: out.config.width,
        height: out.config.height,
        files,
        config: out.config.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    write_text(&dir.join(MANIFEST_FILE), &(text + "\n"))?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackLine {
    pub id: u32,
    pub begin: usize,
    pub end: usize,
    pub parent: u32,
}

pub fn parse_tracks(text: &str) -> Result<Vec<TrackLine>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Vec<&str> = l.split_whitespace().collect();
            let bad = || Error::InvalidInput(format!("malformed track line {l:?}"));
            if v.len() != 4 {
                return Err(bad());
            }
            Ok(TrackLine {
                id: v[0].parse().map_err(|_| bad())?,
                begin: v[1].parse().map_err(|_| bad())?,
                end: v[2].parse().map_err(|_| bad())?,
                parent: v[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct StageRow {
    frame: usize,
    id: u32,
    stage: i64,
}

/// Cross-checks masks, lineage and stages of an exported dataset and
/// returns every violation found (empty when consistent).
pub fn check_dataset(dir: &Path) -> Result<Vec<String>> {
    let manifest = DatasetManifest::load(dir)?;
    let mut v = Vec::new();
    for f in &manifest.files {
        if !dir.join(f).is_file() {
            v.push(format!("missing file {f}"));
        }
    }
    let tpath = dir.join(TRACKS_FILE);
    let tracks = parse_tracks(&std::fs::read_to_string(&tpath).map_err(|e| Error::io(&tpath, e))?)?;
    let by_id: BTreeMap<u32, TrackLine> = tracks.iter().map(|t| (t.id, *t)).collect();
    if by_id.len() != tracks.len() {
        v.push("duplicate track ids".into());
    }
    let mut children: BTreeMap<u32, Vec<&TrackLine>> = BTreeMap::new();
    for t in &tracks {
        if t.begin > t.end || t.end >= manifest.n_frames {
            v.push(format!(
                "track {} spans invalid frames {}..{}",
                t.id, t.begin, t.end
            ));
        }
        if t.parent != 0 {
            children.entry(t.parent).or_default().push(t);
        }
    }
    for (p, kids) in &children {
        match by_id.get(p) {
            None => v.push(format!("parent {p} has no track")),
            Some(pt) => {
                if kids.len() != 2 {
                    v.push(format!("parent {p} has {} daughters", kids.len()));
                }
                for k in kids {
                    if k.begin != pt.end + 1 {
                        v.push(format!(
                            "daughter {} starts at {}, parent {p} ends at {}",
                            k.id, k.begin, pt.end
                        ));
                    }
                }
            }
        }
    }
    let live = |t: usize| -> BTreeSet<u32> {
        tracks
            .iter()
            .filter(|l| l.begin <= t && t <= l.end)
            .map(|l| l.id)
            .collect()
    };

    for t in 0..manifest.n_frames {
        let path = dir.join(mask_file(t));
        let Ok(mask) = imageio::read_png_raw(&path) else {
            v.push(format!("unreadable mask {}", path.display()));
            continue;
        };
        let present: BTreeSet<u32> = mask.iter().filter(|&&l| l > 0).map(|&l| l as u32).collect();
        let expected = live(t);
        for id in present.difference(&expected) {
            v.push(format!("frame {t}: label {id} in mask but not alive"));
        }
        for id in expected.difference(&present) {
            v.push(format!("frame {t}: cell {id} alive but absent from mask"));
        }
    }

    let spath = dir.join(STAGES_FILE);
    let file = std::fs::File::open(&spath).map_err(|e| Error::io(&spath, e))?;
    let mut seen = BTreeSet::new();
    for row in csv::Reader::from_reader(file).deserialize::<StageRow>() {
        let row = row?;
        if StageLabel::new(row.stage).is_err() {
            v.push(format!(
                "stage {} out of range at frame {}, cell {}",
                row.stage, row.frame, row.id
            ));
        }
        if !live(row.frame).contains(&row.id) {
            v.push(format!(
                "stage row for dead cell {} at frame {}",
                row.id, row.frame
            ));
        }
        if !seen.insert((row.frame, row.id)) {
            v.push(format!("duplicate stage row {},{}", row.frame, row.id));
        }
    }
    let expected_rows: usize = (0..manifest.n_frames).map(|t| live(t).len()).sum();
    if seen.len() != expected_rows {
        v.push(format!(
            "{} stage rows, expected {expected_rows}",
            seen.len()
        ));
    }
    Ok(v)
}

/// Side-by-side 8-bit montage of the given raw frames, contrast stretched
/// over all of them, separated by 4-pixel gaps.
pub fn render_preview(dir: &Path, frames: &[usize], out: &Path) -> Result<()> {
    if frames.is_empty() {
        return Err(Error::InvalidInput("no frames selected".into()));
    }
    let images = frames
        .iter()
        .map(|&t| imageio::read_png_raw(&dir.join(frame_file(t))))
        .collect::<Result<Vec<Array2<u16>>>>()?;
    let (h, w) = images[0].dim();
    if images.iter().any(|i| i.dim() != (h, w)) {
        return Err(Error::InvalidInput("frames differ in size".into()));
    }
    let lo = images
        .iter()
        .flat_map(|i| i.iter())
        .copied()
        .min()
        .unwrap_or(0) as f64;
    let hi = images
        .iter()
        .flat_map(|i| i.iter())
        .copied()
        .max()
        .unwrap_or(0) as f64;
    let gap = 4;
    let mut montage = Array2::<u8>::zeros((h, images.len() * (w + gap) - gap));
    for (k, img) in images.iter().enumerate() {
        let x0 = k * (w + gap);
        montage.slice_mut(s![.., x0..x0 + w]).assign(&img.mapv(|v| {
            if hi > lo {
                ((v as f64 - lo) / (hi - lo) * 255.0).round() as u8
            } else {
                0
            }
        }));
    }
    imageio::write_png8(out, &montage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population_sim::{simulate, CellFrame, CellTrack, FrameOutput, SimResources};
    use crate::shape_model::{LandmarkShape, TransitionWeights, N_LANDMARKS};

    fn track(
        id: u32,
        parent: u32,
        start: usize,
        end: usize,
        daughters: Option<(u32, u32)>,
    ) -> CellTrack {
        let frames = (start..=end)
            .map(|t| CellFrame {
                frame: t,
                stage: StageLabel::INTERPHASE,
                weights: TransitionWeights::one_hot(StageLabel::INTERPHASE),
                shape: LandmarkShape::from_radii(&[5.0; N_LANDMARKS]),
                position: [64.0, 64.0],
                orientation: 0.0,
                rotation_step: 0.0,
                intensity: 0.4,
                r_major: 5.0,
                r_minor: 5.0,
            })
            .collect();
        CellTrack {
            id,
            parent,
            start,
            frames,
            daughters,
            lineage_offset: 0.0,
        }
    }

    fn output(tracks: Vec<CellTrack>, n_frames: usize) -> SimOutput {
        let frames = (0..n_frames)
            .map(|_| FrameOutput {
                labels: Array2::zeros((4, 4)),
                clean: Array2::zeros((4, 4)),
                raw: Array2::zeros((4, 4)),
                corrections: Vec::new(),
            })
            .collect();
        SimOutput {
            config: SimConfig::default(),
            tracks,
            frames,
        }
    }

    #[test]
    fn single_track_encoding() {
        let out = output(vec![track(1, 0, 0, 2, None)], 3);
        assert_eq!(tracks_text(&out), "1 0 2 0\n");
        assert_eq!(stages_text(&out), "frame,id,stage\n0,1,1\n1,1,1\n2,1,1\n");
    }

    #[test]
    fn division_encoding() {
        let out = output(
            vec![
                track(1, 0, 0, 4, Some((2, 3))),
                track(2, 1, 5, 9, None),
                track(3, 1, 5, 9, None),
            ],
            10,
        );
        assert_eq!(tracks_text(&out), "1 0 4 0\n2 5 9 1\n3 5 9 1\n");
        assert_eq!(stages_text(&out).lines().count(), 1 + 5 + 2 * 5);
    }

    #[test]
    fn parse_tracks_round_trip_and_errors() {
        let lines = parse_tracks("1 0 4 0\n2 5 9 1\n").unwrap();
        assert_eq!(
            lines[1],
            TrackLine {
                id: 2,
                begin: 5,
                end: 9,
                parent: 1
            }
        );
        assert!(parse_tracks("1 0 4\n").is_err());
        assert!(parse_tracks("a b c d\n").is_err());
    }

    #[test]
    fn exported_dataset_is_consistent_and_reproducible() {
        let cfg = SimConfig {
            n_initial_cells: 2,
            n_frames: 12,
            width: 128,
            height: 128,
            seed: 5,
            ..Default::default()
        };
        let out = simulate(&cfg, &SimResources::from_config(&cfg).unwrap()).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let m = export_dataset(&out, a.path()).unwrap();
        export_dataset(&out, b.path()).unwrap();
        for f in m.files.iter().map(String::as_str).chain([MANIFEST_FILE]) {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap(),
                "{f}"
            );
        }
        assert_eq!(check_dataset(a.path()).unwrap(), Vec::<String>::new());
        assert_eq!(DatasetManifest::load(a.path()).unwrap(), m);

        // a tampered track file is caught
        std::fs::write(a.path().join(TRACKS_FILE), "1 0 11 0\n").unwrap();
        assert!(!check_dataset(a.path()).unwrap().is_empty());
    }

    #[test]
    fn preview_montage() {
        let cfg = SimConfig {
            n_initial_cells: 1,
            n_frames: 10,
            width: 128,
            height: 128,
            ..Default::default()
        };
        let out = simulate(&cfg, &SimResources::from_config(&cfg).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_dataset(&out, dir.path()).unwrap();
        let path = dir.path().join("preview.png");
        render_preview(dir.path(), &[0, 5, 9], &path).unwrap();
        let img = imageio::read_png_raw(&path).unwrap();
        assert_eq!(img.dim(), (128, 3 * 128 + 2 * 4));
    }

    #[test]
    fn unwritable_directory() {
        let file = tempfile::NamedTempFile::new().unwrap();
        let out = output(vec![track(1, 0, 0, 0, None)], 1);
        let err = export_dataset(&out, &file.path().join("sub")).unwrap_err();
        assert!(!err.is_validation());
    }
}
