//! Population simulation: lineage, motion, repulsion, intensities and
//! rendering of every frame with instance masks.

mod intensity;
mod lineage;
mod motion;
mod repulsion;

pub use intensity::{assign_intensity, lineage_offset};
pub use lineage::{plan_lineage, CellPlan};
pub use motion::{clamp_to_canvas, divide, place_founder, step_motion, CellState, MotionStep};
pub use repulsion::{min_separation, resolve_repulsion, Body, PairCorrection, RepulsionOutcome};

use std::collections::HashMap;

use ndarray::Array2;

use crate::acquisition::apply_acquisition;
use crate::config::{SimConfig, TextureSource};
use crate::defaults::{default_shape_models, default_transition_model};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};
use crate::shape_model::{
    blend_shape, rasterize_mask, run_weights, stage_weights_from_runs, LandmarkShape,
    ShapeModelSet, ShapeSampleParams, TransitionWeights,
};
use crate::stage_model::{StageLabel, StageRun, StageTransitionModel, N_STAGES};
use crate::texture::{
    load_external_patches, make_conditioning, ConditioningPatch, PatchKey, ProceduralProvider,
    TextureProvider, PATCH_SIZE,
};

/// Models and texture source used by [`simulate`].
pub struct SimResources {
    pub transition: StageTransitionModel,
    pub shapes: ShapeModelSet,
    pub texture: Box<dyn TextureProvider>,
}

impl SimResources {
    /// Loads the models and patches named in the config, falling back to
    /// the built-in models.
    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        let transition = match &cfg.transition_model {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text)?
            }
            None => default_transition_model(),
        };
        let shapes = match &cfg.shape_models {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                ShapeModelSet::from_json(&text)?
            }
            None => default_shape_models().clone(),
        };
        if shapes.is_empty() {
            return Err(Error::NoShapeModels);
        }
        let texture: Box<dyn TextureProvider> = match &cfg.texture {
            TextureSource::Procedural => Box::new(ProceduralProvider {
                params: cfg.procedural.clone(),
            }),
            TextureSource::External { dir } => {
                Box::new(load_external_patches(dir, cfg.procedural.clone())?)
            }
        };
        Ok(SimResources {
            transition,
            shapes,
            texture,
        })
    }
}

/// State of one cell in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFrame {
    pub frame: usize,
    pub stage: StageLabel,
    pub weights: TransitionWeights,
    /// Landmarks in the cell's own frame (before rotation).
    pub shape: LandmarkShape,
    pub position: [f64; 2],
    pub orientation: f64,
    /// Rotation drawn for this frame (0 on the first frame).
    pub rotation_step: f64,
    pub intensity: f64,
    pub r_major: f64,
    pub r_minor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellTrack {
    pub id: u32,
    pub parent: u32,
    pub start: usize,
    pub frames: Vec<CellFrame>,
    pub daughters: Option<(u32, u32)>,
    pub lineage_offset: f64,
}

impl CellTrack {
    pub fn end(&self) -> usize {
        self.start + self.frames.len() - 1
    }

    pub fn at(&self, t: usize) -> Option<&CellFrame> {
        t.checked_sub(self.start).and_then(|i| self.frames.get(i))
    }
}

/// Pair corrections of one frame's repulsion step, by cell id.
#[derive(Debug, Clone, PartialEq)]
pub struct IdPairCorrection {
    pub a: u32,
    pub b: u32,
    pub delta_a: [f64; 2],
    pub delta_b: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct FrameOutput {
    /// Cell ids, 0 for background.
    pub labels: Array2<u16>,
    /// Composed image before acquisition.
    pub clean: Array2<f64>,
    pub raw: Array2<f64>,
    pub corrections: Vec<IdPairCorrection>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub config: SimConfig,
    pub tracks: Vec<CellTrack>,
    pub frames: Vec<FrameOutput>,
}

impl SimOutput {
    pub fn track(&self, id: u32) -> Option<&CellTrack> {
        self.tracks.iter().find(|t| t.id == id)
    }

    pub fn division_count(&self) -> usize {
        self.tracks.iter().filter(|t| t.daughters.is_some()).count()
    }
}

/// Parameters of the run with the largest weight, per stage.
fn stage_params(
    runs: &[StageRun],
    run_w: &[f64],
    params: &[ShapeSampleParams],
) -> [ShapeSampleParams; N_STAGES] {
    let mut best: [Option<(f64, usize)>; N_STAGES] = [None; N_STAGES];
    for (k, (run, &w)) in runs.iter().zip(run_w).enumerate() {
        let slot = &mut best[run.stage.index()];
        if w > 0.0 && slot.is_none_or(|(bw, _)| w > bw) {
            *slot = Some((w, k));
        }
    }
    std::array::from_fn(|s| best[s].map(|(_, k)| params[k].clone()).unwrap_or_default())
}

struct ShapePlan {
    shapes: Vec<(LandmarkShape, TransitionWeights)>,
    last_params: ShapeSampleParams,
}

/// Per-frame blended shapes of one cell. A daughter's first frame is the
/// shared anaphase sample, so both daughters start with identical shapes.
fn plan_shapes(
    plan: &CellPlan,
    inherited: Option<&ShapeSampleParams>,
    cfg: &SimConfig,
    models: &ShapeModelSet,
) -> Result<ShapePlan> {
    let seq = plan.extended();
    let runs = seq.runs();
    let mut rng = substream(cfg.seed, Stream::Shape, &[plan.id as u64]);
    let eps_std = cfg.epsilon_variance.sqrt();
    let params: Vec<ShapeSampleParams> = runs
        .iter()
        .enumerate()
        .map(|(k, run)| match (k, inherited) {
            (0, Some(p)) => p.clone(),
            _ => {
                let n = models.get(run.stage).map_or(0, |m| m.n_modes());
                ShapeSampleParams::draw(n, eps_std, &mut rng)
            }
        })
        .collect();
    let mut shapes = Vec::with_capacity(plan.stages.len());
    for i in 0..plan.stages.len() {
        let (weights, per_stage) = if i == 0 && inherited.is_some() {
            let w = TransitionWeights::one_hot(StageLabel::ANAPHASE);
            let mut p: [ShapeSampleParams; N_STAGES] = Default::default();
            p[StageLabel::ANAPHASE.index()] = params[0].clone();
            (w, p)
        } else {
            let rw = run_weights(&runs, i);
            (
                stage_weights_from_runs(&runs, &rw),
                stage_params(&runs, &rw, &params),
            )
        };
        let shape = blend_shape(models, &weights, &per_stage, cfg.n_modes)?;
        shapes.push((shape, weights));
    }
    Ok(ShapePlan {
        shapes,
        last_params: params.last().cloned().unwrap_or_default(),
    })
}

/// Cell geometry for every frame: lineage, shapes, intensities, motion
/// and repulsion, without rendering. Returns the tracks and, per frame,
/// the pair corrections applied by the repulsion step.
pub fn simulate_population(
    cfg: &SimConfig,
    res: &SimResources,
) -> Result<(Vec<CellTrack>, Vec<Vec<IdPairCorrection>>)> {
    cfg.validate()?;
    if res.shapes.is_empty() {
        return Err(Error::NoShapeModels);
    }
    let canvas = [cfg.width, cfg.height];
    let plans = plan_lineage(
        &res.transition,
        cfg.n_initial_cells,
        cfg.n_frames,
        cfg.seed,
        cfg.initial_stage,
    )?;
    log::info!("{} cells planned over {} frames", plans.len(), cfg.n_frames);

    // shapes and intensities depend only on each cell's own streams
    let mut shape_plans: HashMap<u32, ShapePlan> = HashMap::new();
    let mut offsets: HashMap<u32, f64> = HashMap::new();
    let mut tracks: Vec<CellTrack> = Vec::with_capacity(plans.len());
    for plan in &plans {
        let inherited = (plan.parent != 0).then(|| &shape_plans[&plan.parent].last_params);
        let sp = plan_shapes(plan, inherited, cfg, &res.shapes)?;
        let mut irng = substream(cfg.seed, Stream::Intensity, &[plan.id as u64]);
        let offset = if plan.parent == 0 {
            lineage_offset(cfg.lineage_offset_std, &mut irng)
        } else {
            offsets[&plan.parent]
        };
        offsets.insert(plan.id, offset);
        let frames = plan
            .stages
            .iter()
            .zip(&sp.shapes)
            .enumerate()
            .map(|(i, (&stage, (shape, weights)))| {
                let (r_major, r_minor) = shape.polygon_moments().semi_axes();
                CellFrame {
                    frame: plan.start + i,
                    stage,
                    weights: *weights,
                    shape: shape.clone(),
                    position: [0.0; 2],
                    orientation: 0.0,
                    rotation_step: 0.0,
                    intensity: assign_intensity(stage, &cfg.intensity, offset, &mut irng),
                    r_major,
                    r_minor,
                }
            })
            .collect();
        shape_plans.insert(plan.id, sp);
        tracks.push(CellTrack {
            id: plan.id,
            parent: plan.parent,
            start: plan.start,
            frames,
            daughters: plan.daughters,
            lineage_offset: offset,
        });
    }
    drop(shape_plans);

    let index: HashMap<u32, usize> = tracks.iter().enumerate().map(|(i, t)| (t.id, i)).collect();
    let mut motion_rngs: HashMap<u32, _> = tracks
        .iter()
        .map(|t| (t.id, substream(cfg.seed, Stream::Motion, &[t.id as u64])))
        .collect();
    let rot_var = cfg.rotation_variance_rad();
    let mut all_corrections = Vec::with_capacity(cfg.n_frames);

    for t in 0..cfg.n_frames {
        let mut live: Vec<usize> = (0..tracks.len())
            .filter(|&k| tracks[k].start <= t && t <= tracks[k].end())
            .collect();
        live.sort_by_key(|&k| tracks[k].id);

        for &k in &live {
            let (id, start, parent) = (tracks[k].id, tracks[k].start, tracks[k].parent);
            let state = if t == start && parent == 0 {
                let mut prng = substream(cfg.seed, Stream::Placement, &[id as u64]);
                place_founder(canvas, cfg.placement_margin, &mut prng)
            } else if t == start {
                let mother = &tracks[index[&parent]];
                let last = mother.frames.last().expect("mother has frames");
                let (a, b) = divide(
                    &CellState {
                        position: last.position,
                        orientation: last.orientation,
                    },
                    last.r_minor,
                );
                let first = mother.daughters.expect("mother records daughters").0;
                let mut s = if id == first { a } else { b };
                s.position = clamp_to_canvas(s.position, canvas);
                s
            } else {
                let prev = &tracks[k].frames[t - start - 1];
                let mut s = CellState {
                    position: prev.position,
                    orientation: prev.orientation,
                };
                let step = step_motion(
                    &mut s,
                    cfg.motion.variance,
                    rot_var,
                    canvas,
                    motion_rngs.get_mut(&id).expect("stream per cell"),
                );
                tracks[k].frames[t - start].rotation_step = step.rotation;
                s
            };
            let f = &mut tracks[k].frames[t - start];
            f.position = state.position;
            f.orientation = state.orientation;
        }

        let bodies: Vec<Body> = live
            .iter()
            .map(|&k| {
                let f = &tracks[k].frames[t - tracks[k].start];
                Body {
                    position: f.position,
                    r_major: f.r_major,
                    r_minor: f.r_minor,
                }
            })
            .collect();
        let mut rrng = substream(cfg.seed, Stream::Repulsion, &[t as u64]);
        let outcome = resolve_repulsion(&bodies, &cfg.repulsion, Some(canvas), &mut rrng);
        for (&k, p) in live.iter().zip(&outcome.positions) {
            let start = tracks[k].start;
            tracks[k].frames[t - start].position = *p;
        }
        let corrections = outcome
            .pairs
            .iter()
            .map(|p| IdPairCorrection {
                a: tracks[live[p.i]].id,
                b: tracks[live[p.j]].id,
                delta_a: p.delta_i,
                delta_b: p.delta_j,
            })
            .collect();

        all_corrections.push(corrections);
    }
    Ok((tracks, all_corrections))
}

/// Runs the full simulation described by `cfg`.
pub fn simulate(cfg: &SimConfig, res: &SimResources) -> Result<SimOutput> {
    let (tracks, corrections) = simulate_population(cfg, res)?;
    let mut frames = Vec::with_capacity(cfg.n_frames);
    for (t, corrections) in corrections.into_iter().enumerate() {
        let mut cells: Vec<(u32, &CellFrame)> = tracks
            .iter()
            .filter_map(|tr| tr.at(t).map(|f| (tr.id, f)))
            .collect();
        cells.sort_by_key(|c| c.0);
        let (labels, clean) = render_frame(&cells, t, cfg, res.texture.as_ref())?;
        let mut arng = substream(cfg.seed, Stream::Acquisition, &[t as u64]);
        let raw = apply_acquisition(&clean, &cfg.acquisition, &mut arng);
        frames.push(FrameOutput {
            labels,
            clean,
            raw,
            corrections,
        });
    }
    Ok(SimOutput {
        config: cfg.clone(),
        tracks,
        frames,
    })
}

/// Conditioning of one cell in one frame and the canvas pixel the patch
/// centre maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedConditioning {
    pub conditioning: ConditioningPatch,
    pub centre: (i64, i64),
}

/// Rasterizes the cell into a 96×96 patch centred on its nearest pixel
/// (keeping the sub-pixel offset) and draws the noise channel. `None` if
/// the shape rasterizes to nothing.
pub fn cell_conditioning(
    id: u32,
    t: usize,
    f: &CellFrame,
    seed: u64,
) -> Result<Option<PlacedConditioning>> {
    let half = (PATCH_SIZE / 2) as f64;
    let [x, y] = f.position;
    let (cx, cy) = (x.round(), y.round());
    let local = [half + x - cx, half + y - cy];
    let mask = rasterize_mask(&f.shape, PATCH_SIZE, PATCH_SIZE, local, f.orientation);
    if !mask.iter().any(|&m| m) {
        return Ok(None);
    }
    let mut rng = substream(seed, Stream::Texture, &[id as u64, t as u64]);
    Ok(Some(PlacedConditioning {
        conditioning: make_conditioning(&mask, f.stage, f.intensity, &mut rng)?,
        centre: (cx as i64, cy as i64),
    }))
}

/// Binary 3×3 dilation.
fn dilate(mask: &Array2<bool>) -> Array2<bool> {
    let (h, w) = mask.dim();
    Array2::from_shape_fn((h, w), |(r, c)| {
        (r.saturating_sub(1)..(r + 2).min(h))
            .any(|rr| (c.saturating_sub(1)..(c + 2).min(w)).any(|cc| mask[[rr, cc]]))
    })
}

/// Composes one frame: each cell is rasterized into a patch centred on
/// its nearest pixel, textured, and pasted with per-pixel maximum
/// blending. Where masks overlap, a pixel belongs to the cell whose centre
/// is closest (lower id on ties).
pub fn render_frame(
    cells: &[(u32, &CellFrame)],
    t: usize,
    cfg: &SimConfig,
    provider: &dyn TextureProvider,
) -> Result<(Array2<u16>, Array2<f64>)> {
    let (w, h) = (cfg.width, cfg.height);
    let mut labels = Array2::<u16>::zeros((h, w));
    let mut clean = Array2::<f64>::zeros((h, w));
    let mut owner_dist = Array2::from_elem((h, w), f64::INFINITY);
    let half = (PATCH_SIZE / 2) as i64;

    for &(id, f) in cells {
        let [x, y] = f.position;
        let Some(placed) = cell_conditioning(id, t, f, cfg.seed)? else {
            log::warn!("cell {id} has an empty mask in frame {t}");
            continue;
        };
        let (cx, cy) = placed.centre;
        let mask = placed.conditioning.support();
        let key = PatchKey {
            cell: id,
            frame: t as u32,
        };
        let patch = provider.texture(key, &placed.conditioning);
        let support = dilate(&mask);
        for ((pr, pc), &v) in patch.image().indexed_iter() {
            let r = cy - half + pr as i64;
            let c = cx - half + pc as i64;
            if r < 0 || c < 0 || r >= h as i64 || c >= w as i64 {
                continue;
            }
            let (r, c) = (r as usize, c as usize);
            if support[[pr, pc]] && v > clean[[r, c]] {
                clean[[r, c]] = v;
            }
            if mask[[pr, pc]] {
                let d = (c as f64 - x).hypot(r as f64 - y);
                if d < owner_dist[[r, c]] {
                    owner_dist[[r, c]] = d;
                    labels[[r, c]] = id as u16;
                }
            }
        }
    }
    Ok((labels, clean))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SimConfig {
        SimConfig {
            n_initial_cells: 3,
            n_frames: 60,
            width: 160,
            height: 160,
            seed,
            ..Default::default()
        }
    }

    fn run(cfg: &SimConfig) -> SimOutput {
        simulate(cfg, &SimResources::from_config(cfg).unwrap()).unwrap()
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = small(7);
        let (a, b) = (run(&cfg), run(&cfg));
        assert_eq!(a.tracks, b.tracks);
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            assert_eq!(fa.labels, fb.labels);
            assert_eq!(fa.raw, fb.raw);
        }
        let c = run(&small(8));
        assert_ne!(a.tracks, c.tracks);
    }

    #[test]
    fn every_live_cell_is_in_its_mask() {
        let out = run(&small(3));
        for (t, f) in out.frames.iter().enumerate() {
            let mut present: Vec<u16> = f.labels.iter().copied().filter(|&v| v > 0).collect();
            present.sort_unstable();
            present.dedup();
            let mut live: Vec<u16> = out
                .tracks
                .iter()
                .filter(|tr| tr.at(t).is_some())
                .map(|tr| tr.id as u16)
                .collect();
            live.sort_unstable();
            assert_eq!(present, live, "frame {t}");
        }
    }

    #[test]
    fn daughters_start_identical_and_opposite() {
        let mut cfg = small(1);
        cfg.n_frames = 120;
        cfg.initial_stage = Some(StageLabel::PROMETAPHASE);
        let out = run(&cfg);
        assert!(out.division_count() > 0);
        for m in out.tracks.iter().filter(|t| t.daughters.is_some()) {
            let (a, b) = m.daughters.unwrap();
            let (a, b) = (out.track(a).unwrap(), out.track(b).unwrap());
            assert_eq!(a.start, m.end() + 1);
            let (fa, fb) = (&a.frames[0], &b.frames[0]);
            assert_eq!(fa.shape, fb.shape);
            assert_eq!(fa.stage, StageLabel::ANAPHASE);
            assert_eq!(fa.orientation, fb.orientation);
            assert_eq!(a.lineage_offset, m.lineage_offset);
        }
    }

    #[test]
    fn single_frame_run() {
        let mut cfg = small(2);
        cfg.n_frames = 1;
        let out = run(&cfg);
        assert_eq!(out.frames.len(), 1);
        assert_eq!(out.tracks.len(), 3);
    }

    #[test]
    fn positions_stay_on_canvas_and_apart() {
        let mut cfg = small(4);
        cfg.n_initial_cells = 12;
        cfg.width = 128;
        cfg.height = 128;
        cfg.placement_margin = 10.0;
        cfg.n_frames = 30;
        let out = run(&cfg);
        for t in 0..cfg.n_frames {
            let live: Vec<&CellFrame> = out.tracks.iter().filter_map(|tr| tr.at(t)).collect();
            for (i, a) in live.iter().enumerate() {
                assert!(
                    (0.0..=127.0).contains(&a.position[0])
                        && (0.0..=127.0).contains(&a.position[1])
                );
                for b in &live[i + 1..] {
                    let d = (a.position[0] - b.position[0]).hypot(a.position[1] - b.position[1]);
                    assert!(d >= 0.5 * (a.r_minor + b.r_minor), "frame {t}");
                }
            }
        }
    }
}
