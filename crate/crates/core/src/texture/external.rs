use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use ndarray::Array2;

use super::{
    ConditioningPatch, PatchKey, ProceduralParams, ProceduralProvider, Provenance, TexturePatch,
    TextureProvider, PATCH_SIZE,
};
use crate::error::{Error, Result};
use crate::imageio;

pub const PATCH_INDEX_FILE: &str = "index.json";

/// Patches generated outside this crate, keyed by `(cell, frame)`.
///
/// Requests for keys without a stored patch are textured procedurally and
/// logged once per key.
#[derive(Debug)]
pub struct ExternalProvider {
    patches: HashMap<PatchKey, TexturePatch>,
    fallback: ProceduralProvider,
    warned: Mutex<Vec<PatchKey>>,
}

impl ExternalProvider {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn get(&self, key: PatchKey) -> Option<&TexturePatch> {
        self.patches.get(&key)
    }
}

impl TextureProvider for ExternalProvider {
    fn texture(&self, key: PatchKey, cond: &ConditioningPatch) -> TexturePatch {
        if let Some(p) = self.patches.get(&key) {
            return p.clone();
        }
        let mut warned = self.warned.lock().expect("warning log poisoned");
        if !warned.contains(&key) {
            log::warn!("no external patch for {key}, using procedural texture");
            warned.push(key);
        }
        self.fallback.texture(key, cond)
    }
}

fn invalid(path: &Path, reason: impl Into<String>) -> Error {
    Error::InvalidPatch {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Raw little-endian f32, row-major, 96×96.
fn read_f32_patch(path: &Path) -> Result<Array2<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != PATCH_SIZE * PATCH_SIZE * 4 {
        return Err(invalid(
            path,
            format!("expected {} bytes", PATCH_SIZE * PATCH_SIZE * 4),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok(Array2::from_shape_vec((PATCH_SIZE, PATCH_SIZE), values).expect("size checked"))
}

fn read_patch(path: &Path) -> Result<TexturePatch> {
    let image = match path.extension().and_then(|e| e.to_str()) {
        Some("png") => imageio::read_png_normalized(path)?,
        Some("f32") => read_f32_patch(path)?,
        _ => {
            return Err(invalid(
                path,
                "unsupported patch file type (expected .png or .f32)",
            ))
        }
    };
    if image.dim() != (PATCH_SIZE, PATCH_SIZE) {
        return Err(invalid(
            path,
            format!("expected {PATCH_SIZE}×{PATCH_SIZE}, got {:?}", image.dim()),
        ));
    }
    if let Some(v) = image.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(invalid(path, format!("value {v} outside [0, 1]")));
    }
    TexturePatch::new(image, Provenance::External)
}

/// Loads every patch listed in `<dir>/index.json` (`"cellID_frame"` →
/// file name). A directory without an index yields an empty provider.
pub fn load_external_patches(dir: &Path, fallback: ProceduralParams) -> Result<ExternalProvider> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "patch directory not found"),
        ));
    }
    let index_path = dir.join(PATCH_INDEX_FILE);
    let mut patches = HashMap::new();
    if index_path.exists() {
        let malformed = |reason: String| Error::MalformedIndex {
            path: index_path.clone(),
            reason,
        };
        let text = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let index: BTreeMap<String, PathBuf> =
            serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
        for (key, file) in index {
            let key: PatchKey = key.parse().map_err(malformed)?;
            patches.insert(key, read_patch(&dir.join(file))?);
        }
    }
    Ok(ExternalProvider {
        patches,
        fallback: ProceduralProvider { params: fallback },
        warned: Mutex::new(Vec::new()),
    })
}
