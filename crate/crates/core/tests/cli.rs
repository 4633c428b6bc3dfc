use std::path::Path;

use cellsynth::cli::cli_main;
use cellsynth::dataset_io::{check_dataset, DatasetManifest};
use cellsynth::imageio;
use cellsynth::shape_model::{rasterize_mask, LandmarkShape, ShapeModelSet, N_LANDMARKS};
use cellsynth::stage_model::{StageLabel, StageTransitionModel};
use cellsynth::texture::{ConditioningPatch, PATCH_SIZE};

fn run(args: &[&str]) -> i32 {
    cli_main(std::iter::once("cellsynth").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("sim.json");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str =
    r#"{"n_initial_cells": 2, "n_frames": 10, "width": 128, "height": 128, "seed": 4}"#;

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["simulate", "--out", "x"]), 2);
    assert_eq!(
        run(&["simulate", "--config", "a.json", "--out", "x", "--bogus"]),
        2
    );
    assert_eq!(run(&["no-such-command"]), 2);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"n_frames": 0}"#);
    assert_eq!(
        run(&[
            "simulate",
            "--config",
            p(&cfg),
            "--out",
            p(&dir.path().join("o"))
        ]),
        2
    );
}

#[test]
fn missing_config_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("absent.json");
    assert_eq!(
        run(&[
            "simulate",
            "--config",
            p(&cfg),
            "--out",
            p(&dir.path().join("o"))
        ]),
        1
    );
}

#[test]
fn estimate_reproduces_hand_count() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("seq.csv");
    std::fs::write(&csv, "1,1,2\n").unwrap();
    let out = dir.path().join("model.json");
    assert_eq!(run(&["estimate", "--input", p(&csv), "--out", p(&out)]), 0);
    let model: StageTransitionModel =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(
        model.probability(StageLabel::INTERPHASE, StageLabel::INTERPHASE),
        0.5
    );
    assert_eq!(
        model.probability(StageLabel::INTERPHASE, StageLabel::PROPHASE),
        0.5
    );

    std::fs::write(&csv, "1,7\n").unwrap();
    assert_eq!(run(&["estimate", "--input", p(&csv), "--out", p(&out)]), 2);
}

#[test]
fn simulate_preview_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let data = dir.path().join("data");
    assert_eq!(
        run(&["simulate", "--config", p(&cfg), "--out", p(&data)]),
        0
    );
    let m = DatasetManifest::load(&data).unwrap();
    assert_eq!(m.n_frames, 10);
    assert_eq!(m.seed, 4);
    assert!(check_dataset(&data).unwrap().is_empty());
    assert_eq!(run(&["check", "--dataset", p(&data)]), 0);

    assert_eq!(
        run(&["preview", "--dataset", p(&data), "--frames", "0,5,9"]),
        0
    );
    let pngs: Vec<_> = std::fs::read_dir(&data)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("preview"))
        .collect();
    assert_eq!(pngs.len(), 1);
    assert_eq!(
        run(&["preview", "--dataset", p(&data), "--frames", "0,12"]),
        1
    );

    // --seed overrides the config
    let other = dir.path().join("other");
    assert_eq!(
        run(&[
            "simulate",
            "--config",
            p(&cfg),
            "--seed",
            "9",
            "--out",
            p(&other)
        ]),
        0
    );
    assert_eq!(DatasetManifest::load(&other).unwrap().seed, 9);
    assert_ne!(
        std::fs::read(data.join("t005.png")).unwrap(),
        std::fs::read(other.join("t005.png")).unwrap()
    );
}

#[test]
fn export_conditioning_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("cond");
    assert_eq!(
        run(&["export-conditioning", "--config", p(&cfg), "--out", p(&out)]),
        0
    );
    let keys: Vec<String> =
        serde_json::from_str(&std::fs::read_to_string(out.join("conditioning.json")).unwrap())
            .unwrap();
    assert!(keys.len() >= 20);
    for key in &keys {
        let c = ConditioningPatch::read_triplet(&out, key).unwrap();
        assert_eq!(c.stage_channel.dim(), (PATCH_SIZE, PATCH_SIZE));
        assert!(c.mean_intensity > 0.0 && c.mean_intensity <= 1.0);
    }
}

#[test]
fn build_ssm_from_masks() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("file,stage\n");
    for k in 0..4 {
        let radii: Vec<f64> = (0..N_LANDMARKS)
            .map(|i| 14.0 + k as f64 + 2.0 * (2.0 * i as f64 * 6f64.to_radians()).cos())
            .collect();
        let mask = rasterize_mask(
            &LandmarkShape::from_radii(&radii),
            PATCH_SIZE,
            PATCH_SIZE,
            [48.0, 48.0],
            0.0,
        );
        imageio::write_png8(
            &dir.path().join(format!("m{k}.png")),
            &mask.mapv(|m| if m { 255 } else { 0 }),
        )
        .unwrap();
        csv += &format!("m{k}.png,{}\n", 1 + k % 2);
    }
    std::fs::write(dir.path().join("masks.csv"), csv).unwrap();
    let out = dir.path().join("ssm.json");
    assert_eq!(
        run(&["build-ssm", "--input", p(dir.path()), "--out", p(&out)]),
        0
    );
    let set = ShapeModelSet::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(
        set.stages().map(|s| s.value()).collect::<Vec<_>>(),
        vec![1, 2]
    );

    // the model file drives a simulation
    let cfg = write_config(
        dir.path(),
        r#"{"n_initial_cells": 1, "n_frames": 3, "width": 128, "height": 128, "shape_models": "ssm.json"}"#,
    );
    assert_eq!(
        run(&[
            "simulate",
            "--config",
            p(&cfg),
            "--out",
            p(&dir.path().join("d"))
        ]),
        0
    );
}

#[test]
fn ingest_writes_models() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("file,cell,frame,stage\n");
    for k in 0..6 {
        let r = 14.0 + k as f64;
        let img = ndarray::Array2::from_shape_fn((PATCH_SIZE, PATCH_SIZE), |(y, x)| {
            if (x as f64 - 48.0).hypot((y as f64 - 48.0) * 1.3) <= r {
                0.5
            } else {
                0.05
            }
        });
        imageio::write_png16(
            &dir.path().join(format!("s{k}.png")),
            &imageio::to_u16(&img),
        )
        .unwrap();
        csv += &format!("s{k}.png,1,{k},{}\n", if k < 3 { 1 } else { 2 });
    }
    std::fs::write(dir.path().join("annotations.csv"), csv).unwrap();
    let out = dir.path().join("models");
    assert_eq!(
        run(&["ingest", "--input", p(dir.path()), "--out", p(&out)]),
        0
    );
    for f in ["transition.json", "ssm.json", "intensity.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}
