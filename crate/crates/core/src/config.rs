//! Simulation configuration (JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionParams;
use crate::error::{Error, Result};
use crate::stage_model::StageLabel;
use crate::texture::{ProceduralParams, StageIntensityTable};

/// Smallest accepted canvas side.
pub const MIN_CANVAS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    #[default]
    Radians,
    Degrees,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionParams {
    /// Variance (px²) of the per-frame displacement along each axis.
    pub variance: f64,
    /// Variance of the per-frame rotation, in `rotation_unit`².
    pub rotation_variance: f64,
    pub rotation_unit: AngleUnit,
}

impl Default for MotionParams {
    fn default() -> Self {
        MotionParams {
            variance: 2.0,
            rotation_variance: 1.0,
            rotation_unit: AngleUnit::Radians,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepulsionParams {
    /// Peak displacement (px) for overlapping major-axis discs.
    pub gain: f64,
    /// Extra peak displacement (px) once minor-axis discs overlap.
    pub inner_gain: f64,
    pub max_sweeps: usize,
    /// Sweeps stop once no cell moves further than this (px).
    pub tolerance: f64,
}

impl Default for RepulsionParams {
    fn default() -> Self {
        RepulsionParams {
            gain: 1.0,
            inner_gain: 3.0,
            max_sweeps: 10,
            tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "provider", rename_all = "lowercase", deny_unknown_fields)]
pub enum TextureSource {
    #[default]
    Procedural,
    /// Patch directory with an `index.json`; missing keys fall back to
    /// procedural texture.
    External { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_initial_cells: usize,
    pub n_frames: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// Founders start in this stage; `None` draws from the model.
    pub initial_stage: Option<StageLabel>,
    /// Founders are placed at least this far (px) from the border.
    pub placement_margin: f64,
    pub motion: MotionParams,
    pub repulsion: RepulsionParams,
    pub intensity: StageIntensityTable,
    /// Std of the per-lineage intensity offset, inherited by daughters.
    pub lineage_offset_std: f64,
    /// Variance of the per-run shape scale `epsilon`.
    pub epsilon_variance: f64,
    /// Modes used per stage; `None` uses all stored modes.
    pub n_modes: Option<usize>,
    /// Transition model JSON; built-in placeholder when absent.
    pub transition_model: Option<PathBuf>,
    /// Shape model JSON; built-in synthetic models when absent.
    pub shape_models: Option<PathBuf>,
    pub texture: TextureSource,
    pub procedural: ProceduralParams,
    pub acquisition: AcquisitionParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_initial_cells: 5,
            n_frames: 50,
            width: 256,
            height: 256,
            seed: 0,
            initial_stage: None,
            placement_margin: 24.0,
            motion: MotionParams::default(),
            repulsion: RepulsionParams::default(),
            intensity: StageIntensityTable::default(),
            lineage_offset_std: 0.03,
            epsilon_variance: 0.1,
            n_modes: None,
            transition_model: None,
            shape_models: None,
            texture: TextureSource::Procedural,
            procedural: ProceduralParams::default(),
            acquisition: AcquisitionParams::default(),
        }
    }
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(msg.into()))
    }
}

fn nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        check(
            self.n_initial_cells >= 1,
            "n_initial_cells must be at least 1",
        )?;
        check(self.n_frames >= 1, "n_frames must be at least 1")?;
        check(
            self.width >= MIN_CANVAS && self.height >= MIN_CANVAS,
            "canvas must be at least 128×128",
        )?;
        check(
            self.width <= 1 << 15 && self.height <= 1 << 15,
            "canvas too large",
        )?;
        check(self.n_initial_cells < u16::MAX as usize, "too many cells")?;
        check(
            nonneg(self.placement_margin)
                && 2.0 * self.placement_margin < self.width.min(self.height) as f64,
            "placement_margin must leave room on the canvas",
        )?;
        check(
            nonneg(self.motion.variance) && nonneg(self.motion.rotation_variance),
            "motion variances must be finite and nonnegative",
        )?;
        let r = &self.repulsion;
        check(
            nonneg(r.gain) && nonneg(r.inner_gain) && nonneg(r.tolerance),
            "repulsion parameters must be finite and nonnegative",
        )?;
        check(
            nonneg(self.lineage_offset_std),
            "lineage_offset_std must be nonnegative",
        )?;
        check(
            nonneg(self.epsilon_variance),
            "epsilon_variance must be nonnegative",
        )?;
        check(
            self.procedural
                .granularity
                .iter()
                .chain(self.procedural.contrast.iter())
                .all(|&v| nonneg(v)),
            "procedural texture parameters must be nonnegative",
        )?;
        self.acquisition.validate()
    }

    /// Rotation variance converted to radians².
    pub fn rotation_variance_rad(&self) -> f64 {
        match self.motion.rotation_unit {
            AngleUnit::Radians => self.motion.rotation_variance,
            AngleUnit::Degrees => {
                self.motion.rotation_variance * (std::f64::consts::PI / 180.0).powi(2)
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative model and patch paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.transition_model.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.shape_models.as_mut() {
            resolve(p);
        }
        if let TextureSource::External { dir } = &mut cfg.texture {
            resolve(dir);
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(SimConfig::from_json("{}").unwrap(), SimConfig::default());
    }

    #[test]
    fn round_trip() {
        let cfg = SimConfig {
            initial_stage: Some(StageLabel::METAPHASE),
            texture: TextureSource::External {
                dir: "patches".into(),
            },
            n_modes: Some(3),
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(SimConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_invalid() {
        for bad in [
            r#"{"n_frames": 0}"#,
            r#"{"width": 64}"#,
            r#"{"n_initial_cells": 0}"#,
            r#"{"motion": {"variance": -1}}"#,
            r#"{"initial_stage": 7}"#,
            r#"{"unknown_key": 1}"#,
            r#"{"acquisition": {"psf_sigma": -2}}"#,
            r#"{"intensity": {"mean": [0,0.4,0.5,0.5,0.5,0.4], "std": [0,0,0,0,0,0]}}"#,
        ] {
            let err = SimConfig::from_json(bad).unwrap_err();
            assert!(err.is_validation(), "{bad}: {err}");
        }
    }

    #[test]
    fn degrees_are_converted() {
        let cfg = SimConfig::from_json(
            r#"{"motion": {"rotation_variance": 4, "rotation_unit": "degrees"}}"#,
        )
        .unwrap();
        let sd = cfg.rotation_variance_rad().sqrt();
        assert!((sd - 2f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sim.json");
        std::fs::write(
            &path,
            r#"{"shape_models": "ssm.json", "texture": {"provider": "external", "dir": "p"}}"#,
        )
        .unwrap();
        let cfg = SimConfig::load(&path).unwrap();
        assert_eq!(cfg.shape_models.unwrap(), dir.path().join("ssm.json"));
        assert_eq!(
            cfg.texture,
            TextureSource::External {
                dir: dir.path().join("p")
            }
        );
    }
}
