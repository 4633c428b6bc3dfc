use cellsynth::config::RepulsionParams;
use cellsynth::defaults::default_shape_models;
use cellsynth::population_sim::{min_separation, resolve_repulsion, Body};
use cellsynth::rng::{substream, Stream};
use cellsynth::shape_model::{
    extract_landmarks, rasterize_mask, sample_shape, transition_weights, ShapeSampleParams,
};
use cellsynth::stage_model::{
    sample_stage_sequence, StageLabel, StageSequence, StageTransitionModel, N_STAGES,
};
use cellsynth::texture::PatchKey;
use proptest::prelude::*;

fn runs_strategy() -> impl Strategy<Value = Vec<(i64, usize)>> {
    prop::collection::vec((1i64..=6, 1usize..12), 1..10)
}

fn expand(runs: &[(i64, usize)]) -> StageSequence {
    let v: Vec<i64> = runs
        .iter()
        .flat_map(|&(s, n)| std::iter::repeat_n(s, n))
        .collect();
    StageSequence::from_values(&v).unwrap()
}

fn model_strategy() -> impl Strategy<Value = StageTransitionModel> {
    (
        prop::collection::vec(prop::collection::vec(0.01f64..1.0, N_STAGES), N_STAGES),
        prop::collection::vec((1u32..4, 0u32..5), N_STAGES),
    )
        .prop_map(|(rows, durations)| {
            let mut t = [[0.0; N_STAGES]; N_STAGES];
            for (i, row) in rows.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                for j in 0..N_STAGES {
                    t[i][j] = row[j] / sum;
                }
            }
            let min: [u32; N_STAGES] = std::array::from_fn(|i| durations[i].0);
            let max: [Option<u32>; N_STAGES] =
                std::array::from_fn(|i| Some(durations[i].0 + durations[i].1));
            StageTransitionModel::new(t, min, max).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_are_convex(runs in runs_strategy()) {
        let seq = expand(&runs);
        for t in 0..seq.len() {
            let w = transition_weights(&seq, t);
            prop_assert!((w.sum() - 1.0).abs() <= 1e-9);
            prop_assert!(w.as_array().iter().all(|&x| x >= 0.0));
            // only stages present in the sequence carry weight
            for s in StageLabel::ALL {
                if !seq.labels().contains(&s) {
                    prop_assert_eq!(w.get(s), 0.0);
                }
            }
        }
    }

    #[test]
    fn sampled_runs_respect_durations(model in model_strategy(), seed in any::<u64>(), n in 1usize..300) {
        let mut rng = substream(seed, Stream::Stage, &[]);
        let seq = sample_stage_sequence(&model, n, &mut rng, None).unwrap();
        prop_assert_eq!(seq.len(), n);
        let runs = seq.runs();
        for (k, r) in runs.iter().enumerate() {
            let max = model.max_duration(r.stage).unwrap();
            prop_assert!(r.len as u32 <= max);
            if k + 1 < runs.len() {
                prop_assert!(r.len as u32 >= model.min_duration(r.stage));
            }
        }
    }

    #[test]
    fn landmark_round_trip(stage in 0usize..N_STAGES, seed in any::<u64>(), eps in 0.0f64..0.5) {
        let stage = StageLabel::from_index(stage);
        let model = default_shape_models().get(stage).unwrap();
        let mut rng = substream(seed, Stream::Shape, &[]);
        let mut params = ShapeSampleParams::draw(model.n_modes(), 0.0, &mut rng);
        params.epsilon = eps;
        let shape = sample_shape(model, &params, model.n_modes()).unwrap().centered();
        let mask = rasterize_mask(&shape, 96, 96, [48.0, 48.0], 0.0);
        let back = extract_landmarks(&mask).unwrap();
        let rms = back.rms_distance(&shape);
        prop_assert!(rms <= 1.5, "rms {}", rms);
    }

    #[test]
    fn raster_area_tracks_polygon_area(stage in 0usize..N_STAGES, x in 40.0f64..56.0, y in 40.0f64..56.0, rot in 0.0f64..6.3) {
        let shape = default_shape_models().get(StageLabel::from_index(stage)).unwrap().mean_shape();
        let mask = rasterize_mask(&shape, 96, 96, [x, y], rot);
        let area = shape.polygon_moments().area;
        let px = mask.iter().filter(|&&m| m).count() as f64;
        prop_assert!((px - area).abs() <= 0.05 * area, "{} vs {}", px, area);
    }

    #[test]
    fn repulsion_is_balanced_and_separates(
        cells in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0, 5.0f64..15.0, 0.3f64..1.0), 1..16),
        seed in any::<u64>(),
    ) {
        let bodies: Vec<Body> = cells
            .iter()
            .map(|&(x, y, rm, f)| Body { position: [x, y], r_major: rm, r_minor: rm * f })
            .collect();
        let out = resolve_repulsion(&bodies, &RepulsionParams::default(), Some([128, 128]), &mut substream(seed, Stream::Repulsion, &[]));
        for p in &out.pairs {
            prop_assert!((p.delta_i[0] + p.delta_j[0]).abs() <= 1e-9);
            prop_assert!((p.delta_i[1] + p.delta_j[1]).abs() <= 1e-9);
        }
        for i in 0..bodies.len() {
            let a = out.positions[i];
            prop_assert!((0.0..=127.0).contains(&a[0]) && (0.0..=127.0).contains(&a[1]));
            for j in i + 1..bodies.len() {
                let b = out.positions[j];
                prop_assert!((a[0] - b[0]).hypot(a[1] - b[1]) >= min_separation(&bodies[i], &bodies[j]));
            }
        }
    }

    #[test]
    fn patch_keys_round_trip(cell in any::<u32>(), frame in any::<u32>()) {
        let k = PatchKey { cell, frame };
        prop_assert_eq!(k.to_string().parse::<PatchKey>().unwrap(), k);
    }
}

#[test]
fn shape_model_file_round_trip_is_exact() {
    let set = default_shape_models();
    let back = cellsynth::shape_model::ShapeModelSet::from_json(&set.to_json().unwrap()).unwrap();
    assert_eq!(&back, set);
}
