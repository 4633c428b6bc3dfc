use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::rng::{substream, Stream};
use crate::stage_model::{
    sample_initial_stage, StageLabel, StageSampler, StageSequence, StageTransitionModel,
};

/// Stage labels and family relations of one cell, before any geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPlan {
    pub id: u32,
    /// Parent id, 0 for founders.
    pub parent: u32,
    pub start: usize,
    /// One label per frame the cell is alive.
    pub stages: Vec<StageLabel>,
    /// For a mother: the anaphase run her daughters share, which follows
    /// her last frame. Empty otherwise.
    pub lookahead: Vec<StageLabel>,
    pub daughters: Option<(u32, u32)>,
}

impl CellPlan {
    pub fn end(&self) -> usize {
        self.start + self.stages.len() - 1
    }

    pub fn is_alive(&self, t: usize) -> bool {
        t >= self.start && t <= self.end()
    }

    /// Live labels followed by the lookahead run.
    pub fn extended(&self) -> StageSequence {
        StageSequence::new(self.stages.iter().chain(&self.lookahead).copied().collect())
    }
}

struct Pending {
    id: u32,
    parent: u32,
    start: usize,
    shared: Vec<StageLabel>,
}

/// Samples stage sequences for all founders and, recursively, for every
/// daughter.
///
/// A metaphase → anaphase step at frame `t` is a division: the mother's
/// last frame is `t − 1` and two daughters start at `t`. The mother's
/// sampler keeps running to draw the anaphase run both daughters share;
/// afterwards each daughter leaves anaphase on its own stream. Daughter
/// ids are assigned in order of discovery, founders being `1..=n`.
pub fn plan_lineage(
    model: &StageTransitionModel,
    n_founders: usize,
    n_frames: usize,
    seed: u64,
    initial: Option<StageLabel>,
) -> Result<Vec<CellPlan>> {
    if n_frames == 0 {
        return Err(Error::InvalidConfig("n_frames must be at least 1".into()));
    }
    let mut queue: VecDeque<Pending> = (1..=n_founders as u32)
        .map(|id| Pending {
            id,
            parent: 0,
            start: 0,
            shared: Vec::new(),
        })
        .collect();
    let mut next_id = n_founders as u32 + 1;
    let mut plans = Vec::new();

    while let Some(p) = queue.pop_front() {
        let mut rng = substream(seed, Stream::Stage, &[p.id as u64]);
        let mut stages = Vec::new();
        let mut sampler;
        let mut must_leave = false;
        if p.shared.is_empty() {
            let first = initial.unwrap_or_else(|| sample_initial_stage(model, &mut rng));
            sampler = StageSampler::start(model, first);
            stages.push(first);
        } else {
            sampler = StageSampler::resume(model, StageLabel::ANAPHASE, p.shared.len() as u32);
            stages.extend_from_slice(&p.shared);
            must_leave = true;
        }

        let mut lookahead = Vec::new();
        let mut daughters = None;
        let mut t = p.start + stages.len();
        while t < n_frames {
            let prev = sampler.current();
            let next = if must_leave {
                must_leave = false;
                sampler.leave(&mut rng)?
            } else {
                sampler.step(&mut rng)?
            };
            if prev == StageLabel::METAPHASE && next == StageLabel::ANAPHASE {
                lookahead.push(next);
                let mut u = t + 1;
                while u < n_frames {
                    if sampler.step(&mut rng)? != StageLabel::ANAPHASE {
                        break;
                    }
                    lookahead.push(StageLabel::ANAPHASE);
                    u += 1;
                }
                if next_id.checked_add(1).is_none_or(|v| v > u16::MAX as u32) {
                    return Err(Error::InvalidConfig(
                        "population exceeds 65535 cells".into(),
                    ));
                }
                let (a, b) = (next_id, next_id + 1);
                next_id += 2;
                for id in [a, b] {
                    queue.push_back(Pending {
                        id,
                        parent: p.id,
                        start: t,
                        shared: lookahead.clone(),
                    });
                }
                daughters = Some((a, b));
                break;
            }
            stages.push(next);
            t += 1;
        }
        plans.push(CellPlan {
            id: p.id,
            parent: p.parent,
            start: p.start,
            stages,
            lookahead,
            daughters,
        });
    }
    Ok(plans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defaults::default_transition_model;

    fn no_division_model() -> StageTransitionModel {
        let mut t = [[0.0; 6]; 6];
        for (i, row) in t.iter_mut().enumerate() {
            row[i] = 0.5;
            row[(i + 1) % 6] = 0.5;
        }
        // metaphase may only return to interphase
        t[3] = [0.5, 0.0, 0.0, 0.5, 0.0, 0.0];
        StageTransitionModel::new(t, [1; 6], [None; 6]).unwrap()
    }

    #[test]
    fn forbidden_division_gives_single_track() {
        let plans = plan_lineage(
            &no_division_model(),
            1,
            100,
            3,
            Some(StageLabel::INTERPHASE),
        )
        .unwrap();
        assert_eq!(plans.len(), 1);
        assert_eq!((plans[0].start, plans[0].end()), (0, 99));
    }

    #[test]
    fn single_frame() {
        let plans = plan_lineage(&default_transition_model(), 4, 1, 0, None).unwrap();
        assert_eq!(plans.len(), 4);
        assert!(plans
            .iter()
            .all(|p| p.stages.len() == 1 && p.daughters.is_none()));
    }

    #[test]
    fn divisions_are_consistent() {
        let plans = plan_lineage(&default_transition_model(), 5, 200, 11, None).unwrap();
        assert!(plans.len() > 5);
        for p in &plans {
            assert!(p.end() < 200);
            if let Some((a, b)) = p.daughters {
                let da = plans.iter().find(|q| q.id == a).unwrap();
                let db = plans.iter().find(|q| q.id == b).unwrap();
                assert_eq!(da.parent, p.id);
                assert_eq!(db.parent, p.id);
                assert_eq!(da.start, p.end() + 1);
                assert_eq!(db.start, p.end() + 1);
                assert_eq!(*p.stages.last().unwrap(), StageLabel::METAPHASE);
                let l = p.lookahead.len();
                assert!(l >= 1);
                assert_eq!(&da.stages[..l], &p.lookahead[..]);
                assert_eq!(&db.stages[..l], &p.lookahead[..]);
            } else {
                assert!(p.lookahead.is_empty());
                assert_eq!(p.end(), 199);
            }
            // no division hides inside a live sequence
            assert!(
                crate::stage_model::find_division_events(&StageSequence::new(p.stages.clone()))
                    .is_empty()
            );
        }
    }

    #[test]
    fn deterministic() {
        let a = plan_lineage(&default_transition_model(), 5, 150, 42, None).unwrap();
        let b = plan_lineage(&default_transition_model(), 5, 150, 42, None).unwrap();
        assert_eq!(a, b);
    }
}
