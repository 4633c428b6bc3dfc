//! Reading annotated data, writing synthetic datasets, and checking
//! their ground truth.

mod export;
mod ingest;
mod segment;

pub use export::{
    check_dataset, export_dataset, frame_file, mask_file, parse_tracks, render_preview,
    stages_text, tracks_text, DatasetManifest, TrackLine, DATASET_FORMAT, MANIFEST_FILE,
    STAGES_FILE, TRACKS_FILE,
};
pub use ingest::{
    ingest_annotated, read_annotations, sequences_from_annotations, shape_models_from,
    shape_models_from_masks, Annotation, IngestResult, ANNOTATIONS_FILE, MASKS_FILE,
};
pub use segment::{
    center_object, count_regions, distance_to_background, normalize_snippet, otsu_mask,
    watershed_split, MARKER_FRACTION,
};
