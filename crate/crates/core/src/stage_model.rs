//! Mitotic stage sequences: a six-state transition graph with hard
//! per-stage duration bounds, estimated from annotated tracks.

use std::fmt;
use std::io::Read;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_STAGES: usize = 6;

/// One of the six chromatin-morphology stages, encoded 1..=6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct StageLabel(u8);

impl StageLabel {
    pub const INTERPHASE: StageLabel = StageLabel(1);
    pub const PROPHASE: StageLabel = StageLabel(2);
    pub const PROMETAPHASE: StageLabel = StageLabel(3);
    pub const METAPHASE: StageLabel = StageLabel(4);
    pub const ANAPHASE: StageLabel = StageLabel(5);
    pub const TELOPHASE: StageLabel = StageLabel(6);

    pub const ALL: [StageLabel; N_STAGES] = [
        Self::INTERPHASE,
        Self::PROPHASE,
        Self::PROMETAPHASE,
        Self::METAPHASE,
        Self::ANAPHASE,
        Self::TELOPHASE,
    ];

    pub fn new(value: i64) -> Result<Self> {
        if (1..=N_STAGES as i64).contains(&value) {
            Ok(StageLabel(value as u8))
        } else {
            Err(Error::InvalidStage(value))
        }
    }

    /// Zero-based index into per-stage tables.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < N_STAGES, "stage index {index} out of range");
        StageLabel(index as u8 + 1)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn name(self) -> &'static str {
        match self.0 {
            1 => "interphase",
            2 => "prophase",
            3 => "prometaphase",
            4 => "metaphase",
            5 => "anaphase",
            _ => "telophase",
        }
    }
}

impl TryFrom<i64> for StageLabel {
    type Error = Error;
    fn try_from(value: i64) -> Result<Self> {
        StageLabel::new(value)
    }
}

impl From<StageLabel> for u8 {
    fn from(s: StageLabel) -> u8 {
        s.0
    }
}

impl fmt::Display for StageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A maximal run of equal labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageRun {
    pub stage: StageLabel,
    pub start: usize,
    pub len: usize,
}

impl StageRun {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Per-frame stage labels of one cell.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StageSequence(Vec<StageLabel>);

impl StageSequence {
    pub fn new(labels: Vec<StageLabel>) -> Self {
        StageSequence(labels)
    }

    pub fn from_values(values: &[i64]) -> Result<Self> {
        values
            .iter()
            .map(|&v| StageLabel::new(v))
            .collect::<Result<Vec<_>>>()
            .map(StageSequence)
    }

    pub fn labels(&self) -> &[StageLabel] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, stage: StageLabel) {
        self.0.push(stage);
    }

    pub fn runs(&self) -> Vec<StageRun> {
        let mut runs: Vec<StageRun> = Vec::new();
        for (t, &stage) in self.0.iter().enumerate() {
            match runs.last_mut() {
                Some(run) if run.stage == stage => run.len += 1,
                _ => runs.push(StageRun {
                    stage,
                    start: t,
                    len: 1,
                }),
            }
        }
        runs
    }

    /// Index of the run containing frame `t`.
    pub fn run_index_at(runs: &[StageRun], t: usize) -> Option<usize> {
        runs.iter().position(|r| r.start <= t && t < r.end())
    }
}

impl std::ops::Index<usize> for StageSequence {
    type Output = StageLabel;
    fn index(&self, i: usize) -> &StageLabel {
        &self.0[i]
    }
}

/// Row-stochastic stage transition matrix with duration bounds in frames.
///
/// `max_duration[s] == None` means unbounded. `initial`, when present, holds
/// nonnegative weights for drawing the first stage of a sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransitionModel", into = "RawTransitionModel")]
pub struct StageTransitionModel {
    transition: [[f64; N_STAGES]; N_STAGES],
    min_duration: [u32; N_STAGES],
    max_duration: [Option<u32>; N_STAGES],
    initial: Option<[f64; N_STAGES]>,
}

#[derive(Serialize, Deserialize)]
struct RawTransitionModel {
    transition: [[f64; N_STAGES]; N_STAGES],
    min_duration: [u32; N_STAGES],
    max_duration: [Option<u32>; N_STAGES],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<[f64; N_STAGES]>,
}

impl TryFrom<RawTransitionModel> for StageTransitionModel {
    type Error = Error;
    fn try_from(raw: RawTransitionModel) -> Result<Self> {
        StageTransitionModel::new(raw.transition, raw.min_duration, raw.max_duration)
            .and_then(|m| m.with_initial(raw.initial))
    }
}

impl From<StageTransitionModel> for RawTransitionModel {
    fn from(m: StageTransitionModel) -> Self {
        RawTransitionModel {
            transition: m.transition,
            min_duration: m.min_duration,
            max_duration: m.max_duration,
            initial: m.initial,
        }
    }
}

const ROW_SUM_TOLERANCE: f64 = 1e-9;

impl StageTransitionModel {
    pub fn new(
        transition: [[f64; N_STAGES]; N_STAGES],
        min_duration: [u32; N_STAGES],
        max_duration: [Option<u32>; N_STAGES],
    ) -> Result<Self> {
        for (i, row) in transition.iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "row {} has a negative or non-finite entry",
                    i + 1
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidModel(format!(
                    "row {} sums to {sum}, expected 1",
                    i + 1
                )));
            }
            if min_duration[i] < 1 {
                return Err(Error::InvalidModel(format!(
                    "min_duration of stage {} must be at least 1",
                    i + 1
                )));
            }
            if let Some(max) = max_duration[i] {
                if max < min_duration[i] {
                    return Err(Error::InvalidModel(format!(
                        "stage {}: max_duration {max} < min_duration {}",
                        i + 1,
                        min_duration[i]
                    )));
                }
            }
        }
        Ok(StageTransitionModel {
            transition,
            min_duration,
            max_duration,
            initial: None,
        })
    }

    /// Sets the initial-stage weights (`None` = uniform over all stages).
    pub fn with_initial(mut self, initial: Option<[f64; N_STAGES]>) -> Result<Self> {
        if let Some(w) = initial {
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidModel(
                    "initial weights must be nonnegative with positive sum".into(),
                ));
            }
        }
        self.initial = initial;
        Ok(self)
    }

    pub fn transition(&self) -> &[[f64; N_STAGES]; N_STAGES] {
        &self.transition
    }

    pub fn probability(&self, from: StageLabel, to: StageLabel) -> f64 {
        self.transition[from.index()][to.index()]
    }

    pub fn min_duration(&self, stage: StageLabel) -> u32 {
        self.min_duration[stage.index()]
    }

    pub fn max_duration(&self, stage: StageLabel) -> Option<u32> {
        self.max_duration[stage.index()]
    }

    pub fn initial_weights(&self) -> [f64; N_STAGES] {
        self.initial.unwrap_or([1.0; N_STAGES])
    }

    /// Same transition matrix with durations relaxed to `[1, ∞)`.
    pub fn without_duration_constraints(&self) -> Self {
        StageTransitionModel {
            min_duration: [1; N_STAGES],
            max_duration: [None; N_STAGES],
            ..self.clone()
        }
    }

    /// True when stage 4 can be followed by stage 5.
    pub fn allows_division(&self) -> bool {
        self.probability(StageLabel::METAPHASE, StageLabel::ANAPHASE) > 0.0
    }
}

/// Counts transitions over consecutive frames and run lengths per stage.
///
/// Stages that never have an outgoing transition get a self-loop of
/// probability 1 and bounds `[1, ∞)`.
pub fn estimate_transition_model(sequences: &[StageSequence]) -> Result<StageTransitionModel> {
    if sequences.is_empty() {
        return Err(Error::NoSequences);
    }
    let mut counts = [[0u64; N_STAGES]; N_STAGES];
    let mut min_run = [u32::MAX; N_STAGES];
    let mut max_run = [0u32; N_STAGES];
    let mut seen = [false; N_STAGES];

    for seq in sequences {
        for pair in seq.labels().windows(2) {
            counts[pair[0].index()][pair[1].index()] += 1;
        }
        for run in seq.runs() {
            let s = run.stage.index();
            seen[s] = true;
            min_run[s] = min_run[s].min(run.len as u32);
            max_run[s] = max_run[s].max(run.len as u32);
        }
    }
    if !seen.iter().any(|&s| s) {
        return Err(Error::NoSequences);
    }

    let mut transition = [[0.0; N_STAGES]; N_STAGES];
    let mut min_duration = [1u32; N_STAGES];
    let mut max_duration = [None; N_STAGES];
    for s in 0..N_STAGES {
        let total: u64 = counts[s].iter().sum();
        if total == 0 {
            transition[s][s] = 1.0;
            continue;
        }
        for t in 0..N_STAGES {
            transition[s][t] = counts[s][t] as f64 / total as f64;
        }
        min_duration[s] = min_run[s];
        max_duration[s] = Some(max_run[s]);
    }
    let initial = seen.map(|s| if s { 1.0 } else { 0.0 });
    StageTransitionModel::new(transition, min_duration, max_duration)?.with_initial(Some(initial))
}

/// Draws an index from nonnegative weights; `None` if they sum to zero.
fn draw_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Some(i);
        }
    }
    weights.iter().rposition(|&w| w > 0.0)
}

/// Stateful sampler that enforces the duration bounds frame by frame.
#[derive(Debug, Clone)]
pub struct StageSampler<'m> {
    model: &'m StageTransitionModel,
    current: StageLabel,
    run_length: u32,
}

impl<'m> StageSampler<'m> {
    /// Starts a fresh run of `stage` (the current frame is its first).
    pub fn start(model: &'m StageTransitionModel, stage: StageLabel) -> Self {
        Self::resume(model, stage, 1)
    }

    /// Continues a run of `stage` that has already lasted `run_length` frames.
    pub fn resume(model: &'m StageTransitionModel, stage: StageLabel, run_length: u32) -> Self {
        StageSampler {
            model,
            current: stage,
            run_length: run_length.max(1),
        }
    }

    pub fn current(&self) -> StageLabel {
        self.current
    }

    pub fn run_length(&self) -> u32 {
        self.run_length
    }

    fn enter(&mut self, next: StageLabel) -> StageLabel {
        if next == self.current {
            self.run_length += 1;
        } else {
            self.current = next;
            self.run_length = 1;
        }
        next
    }

    /// Label of the next frame.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StageLabel> {
        let s = self.current;
        if self.run_length < self.model.min_duration(s) {
            return Ok(self.enter(s));
        }
        if let Some(max) = self.model.max_duration(s) {
            if self.run_length >= max {
                return self.leave(rng);
            }
        }
        let row = &self.model.transition[s.index()];
        let next = draw_weighted(row, rng).expect("validated rows have unit mass");
        Ok(self.enter(StageLabel::from_index(next)))
    }

    /// Forces a transition out of the current stage, drawing from the row
    /// renormalized over non-self targets.
    pub fn leave<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StageLabel> {
        let s = self.current;
        let mut row = self.model.transition[s.index()];
        row[s.index()] = 0.0;
        let next = draw_weighted(&row, rng).ok_or(Error::AbsorbingStage(s))?;
        Ok(self.enter(StageLabel::from_index(next)))
    }
}

/// Draws the first stage from the model's initial weights.
pub fn sample_initial_stage<R: Rng + ?Sized>(
    model: &StageTransitionModel,
    rng: &mut R,
) -> StageLabel {
    let w = model.initial_weights();
    StageLabel::from_index(draw_weighted(&w, rng).expect("initial weights have positive sum"))
}

pub fn sample_stage_sequence<R: Rng + ?Sized>(
    model: &StageTransitionModel,
    n_frames: usize,
    rng: &mut R,
    initial: Option<StageLabel>,
) -> Result<StageSequence> {
    if n_frames == 0 {
        return Err(Error::InvalidConfig("n_frames must be at least 1".into()));
    }
    let first = initial.unwrap_or_else(|| sample_initial_stage(model, rng));
    let mut sampler = StageSampler::start(model, first);
    let mut labels = Vec::with_capacity(n_frames);
    labels.push(first);
    for _ in 1..n_frames {
        labels.push(sampler.step(rng)?);
    }
    Ok(StageSequence(labels))
}

/// Frames `t` where stage 4 at `t-1` is followed by stage 5 at `t`.
pub fn find_division_events(seq: &StageSequence) -> Vec<usize> {
    seq.labels()
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] == StageLabel::METAPHASE && w[1] == StageLabel::ANAPHASE)
        .map(|(i, _)| i + 1)
        .collect()
}

/// Reads annotated sequences: one row per cell, comma-separated labels.
pub fn read_sequences_csv<R: Read>(reader: R) -> Result<Vec<StageSequence>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .filter(|f| !f.is_empty())
            .map(|f| {
                f.parse::<i64>().map_err(|_| {
                    Error::InvalidInput(format!("row {}: '{f}' is not an integer", row + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if !values.is_empty() {
            out.push(StageSequence::from_values(&values)?);
        }
    }
    Ok(out)
}
