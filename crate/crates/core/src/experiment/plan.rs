use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::condition::Condition;

/// Scenes shown per trial.
pub const STEPS_PER_PLAN: usize = 15;
/// The break falls between this step and the next (1-based).
pub const BREAK_AFTER_STEP: usize = 7;

/// One scene rendered under one condition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Stimulus {
    pub scene: String,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    /// 1-based position in the trial.
    pub step: u32,
    pub scene: String,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub steps: Vec<PlanStep>,
    pub break_after: usize,
    pub seed: u64,
}

impl TrialPlan {
    pub fn has_break_after(&self, step: u32) -> bool {
        step as usize == self.break_after
    }

    pub fn stimuli(&self) -> impl Iterator<Item = Stimulus> + '_ {
        self.steps.iter().map(|s| Stimulus {
            scene: s.scene.clone(),
            condition: s.condition,
        })
    }
}

/// Every (scene, condition) pair, scene-major.
pub fn stimulus_corpus(scenes: &[String], grid: &[Condition]) -> Vec<Stimulus> {
    let mut seen = HashSet::new();
    scenes
        .iter()
        .filter(|s| seen.insert(s.as_str()))
        .flat_map(|scene| {
            grid.iter().map(move |&condition| Stimulus {
                scene: scene.clone(),
                condition,
            })
        })
        .collect()
}

pub fn build_trial_plan(
    scenes: &[String],
    grid: &[Condition],
    seed: u64,
) -> Result<TrialPlan, ExperimentError> {
    build_trial_plan_excluding(scenes, grid, seed, &HashSet::new())
}

/// Shuffles the stimulus corpus with a seeded ChaCha stream and takes the
/// first [`STEPS_PER_PLAN`] stimuli with distinct scenes. Stimuli in
/// `exclude` (e.g. already shown to the same participant) are skipped.
pub fn build_trial_plan_excluding(
    scenes: &[String],
    grid: &[Condition],
    seed: u64,
    exclude: &HashSet<Stimulus>,
) -> Result<TrialPlan, ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::Plan("empty condition grid".into()));
    }
    let mut corpus: Vec<Stimulus> = stimulus_corpus(scenes, grid)
        .into_iter()
        .filter(|s| !exclude.contains(s))
        .collect();
    let available: HashSet<&str> = corpus.iter().map(|s| s.scene.as_str()).collect();
    if available.len() < STEPS_PER_PLAN {
        return Err(ExperimentError::Plan(format!(
            "need {STEPS_PER_PLAN} distinct scenes, only {} available",
            available.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    corpus.shuffle(&mut rng);

    let mut used = HashSet::new();
    let steps = corpus
        .into_iter()
        .filter(|s| used.insert(s.scene.clone()))
        .take(STEPS_PER_PLAN)
        .zip(1u32..)
        .map(|(s, step)| PlanStep {
            step,
            scene: s.scene,
            condition: s.condition,
        })
        .collect();
    Ok(TrialPlan {
        steps,
        break_after: BREAK_AFTER_STEP,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenes(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("scene{i:02}")).collect()
    }

    #[test]
    fn fifty_scenes_give_three_hundred_stimuli() {
        let corpus = stimulus_corpus(&scenes(50), &Condition::default_grid());
        assert_eq!(corpus.len(), 300);
        let distinct: HashSet<_> = corpus.iter().collect();
        assert_eq!(distinct.len(), 300);
    }

    #[test]
    fn plan_is_deterministic_per_seed() {
        let grid = Condition::default_grid();
        let a = build_trial_plan(&scenes(50), &grid, 7).unwrap();
        let b = build_trial_plan(&scenes(50), &grid, 7).unwrap();
        let c = build_trial_plan(&scenes(50), &grid, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn plan_shape() {
        let grid = Condition::default_grid();
        for n in [15, 16, 50, 200] {
            let plan = build_trial_plan(&scenes(n), &grid, n as u64).unwrap();
            assert_eq!(plan.steps.len(), 15);
            assert_eq!(plan.break_after, 7);
            assert!(plan.has_break_after(7) && !plan.has_break_after(8));
            let distinct: HashSet<_> = plan.steps.iter().map(|s| &s.scene).collect();
            assert_eq!(distinct.len(), 15);
            assert!(plan.steps.iter().all(|s| grid.contains(&s.condition)));
            let numbers: Vec<u32> = plan.steps.iter().map(|s| s.step).collect();
            assert_eq!(numbers, (1..=15).collect::<Vec<_>>());
        }
    }

    #[test]
    fn too_few_scenes_is_an_error() {
        let err = build_trial_plan(&scenes(14), &Condition::default_grid(), 1).unwrap_err();
        assert!(matches!(err, ExperimentError::Plan(_)));
        assert!(build_trial_plan(&scenes(20), &[], 1).is_err());
    }

    #[test]
    fn excluded_stimuli_are_not_replanned() {
        let grid = vec![Condition::new(20.0, 200)];
        let all = scenes(30);
        let first = build_trial_plan(&all, &grid, 3).unwrap();
        let used: HashSet<Stimulus> = first.stimuli().collect();
        let second = build_trial_plan_excluding(&all, &grid, 4, &used).unwrap();
        assert!(second.stimuli().all(|s| !used.contains(&s)));
        let used: HashSet<Stimulus> = used.into_iter().chain(second.stimuli()).collect();
        assert!(build_trial_plan_excluding(&all, &grid, 5, &used).is_err());
    }

    #[test]
    fn plan_stimuli_come_from_the_corpus() {
        let grid = Condition::default_grid();
        let corpus: HashSet<Stimulus> = stimulus_corpus(&scenes(40), &grid).into_iter().collect();
        for seed in 0..20 {
            let plan = build_trial_plan(&scenes(40), &grid, seed).unwrap();
            assert!(plan.stimuli().all(|s| corpus.contains(&s)));
        }
    }
}
