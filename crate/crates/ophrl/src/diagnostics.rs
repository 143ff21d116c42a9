//! Bandit policy census: trains many independent agents on the
//! three-armed bandit and tallies their final greedy choices. The
//! canonical regression gate for the off-policy gating machinery.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envs::{self, AgentShape, Domain};
use crate::error::Result;
use crate::executor::{run_episode, CommitmentState, EpisodeParams, PolicyBundle, UpdatingMode};
use crate::exploration::PolicySpec;
use crate::harness::run_parallel;
use crate::learners::{Learner, LearnerVariant};
use crate::mdp::{self, ActionRef, LearningParams, QStore, StateId};

/// Final greedy-choice counts over many independent bandit runs.
#[derive(Clone, Debug, Default)]
pub struct PolicyCensus {
    pub runs: u32,
    /// Greedy root choice counts (arm B versus the subtask).
    pub final_root_choice_counts: HashMap<ActionRef, u32>,
    /// Greedy subtask choice counts (arm A versus arm C); empty for the
    /// flat agent.
    pub final_sub_choice_counts: HashMap<ActionRef, u32>,
}

impl PolicyCensus {
    pub fn root_count(&self, a: ActionRef) -> u32 {
        *self.final_root_choice_counts.get(&a).unwrap_or(&0)
    }

    /// Runs whose greedy root choice is the subtask.
    pub fn root_prefers_subtask(&self) -> u32 {
        self.final_root_choice_counts
            .iter()
            .filter(|(a, _)| a.is_task())
            .map(|(_, n)| *n)
            .sum()
    }

    /// Runs whose greedy root choice is a given primitive arm.
    pub fn root_prefers_arm(&self, arm: u8) -> u32 {
        self.root_count(ActionRef::Primitive(arm))
    }
}

/// Trains `runs` fresh bandit agents (alpha = 1, epsilon-greedy 0.1 at
/// both levels) for `episodes_per_run` episodes each and returns the
/// census of final greedy choices.
pub fn census(
    variant: LearnerVariant,
    shape: AgentShape,
    runs: u32,
    episodes_per_run: u32,
    base_seed: u64,
) -> Result<PolicyCensus> {
    let seeds: Vec<u64> = (0..runs as u64).map(|r| base_seed.wrapping_add(r)).collect();
    let choices = run_parallel(&seeds, |seed| census_run(variant, shape, episodes_per_run, seed))?;
    let mut out = PolicyCensus { runs, ..Default::default() };
    for (root_choice, sub_choice) in choices {
        *out.final_root_choice_counts.entry(root_choice).or_insert(0) += 1;
        if let Some(a) = sub_choice {
            *out.final_sub_choice_counts.entry(a).or_insert(0) += 1;
        }
    }
    Ok(out)
}

fn census_run(
    variant: LearnerVariant,
    shape: AgentShape,
    episodes: u32,
    seed: u64,
) -> Result<(ActionRef, Option<ActionRef>)> {
    let domain = Domain::Bandit;
    let mut env = envs::make_env(&domain);
    let h = envs::make_hierarchy(&domain, shape)?;
    let mut learner = Learner::new(variant, LearningParams { alpha: 1.0, gamma: 1.0, lambda: 0.9 })?;
    let mut store = QStore::new();
    let mut policies = PolicyBundle {
        root: PolicySpec::epsilon_greedy(0.1)?,
        subtask: PolicySpec::epsilon_greedy(0.1)?,
        tie_epsilon: 0.0,
    };
    let mut commitment = CommitmentState::new(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = EpisodeParams { step_limit: 4, updating: UpdatingMode::ActivePath };
    for _ in 0..episodes {
        env.reset(&mut rng);
        run_episode(params, &h, env.as_mut(), &mut learner, &mut policies, &mut commitment, &mut store, &mut rng)?;
    }
    let start = StateId(0);
    let root_choice = greedy_choice(&h, &store, h.root_id(), start)?;
    let sub_choice = match shape {
        AgentShape::Flat => None,
        AgentShape::Paper => {
            let sub = h.tasks().find(|t| !t.is_root()).expect("paper hierarchy has a subtask");
            Some(greedy_choice(&h, &store, sub.id(), start)?)
        }
    };
    Ok((root_choice, sub_choice))
}

fn greedy_choice(
    h: &crate::hierarchy::Hierarchy,
    store: &QStore,
    task: crate::mdp::TaskId,
    s: StateId,
) -> Result<ActionRef> {
    let task = h.task(task);
    let v = mdp::v_of(store, task, s)?;
    Ok(task
        .actions(s)
        .into_iter()
        .find(|&a| mdp::q_get(store, task, s, a) >= v)
        .expect("nonempty action set"))
}

/// Formats the census as an aligned text table.
pub fn format_census(variant: LearnerVariant, c: &PolicyCensus) -> String {
    let mut out = String::new();
    out.push_str(&format!("bandit census: {} over {} runs\n", variant.name(), c.runs));
    out.push_str(&format!(
        "  root prefers subtask: {:>6}  ({:.1}%)\n",
        c.root_prefers_subtask(),
        100.0 * c.root_prefers_subtask() as f64 / c.runs as f64
    ));
    out.push_str(&format!(
        "  root prefers arm B:   {:>6}  ({:.1}%)\n",
        c.root_prefers_arm(1),
        100.0 * c.root_prefers_arm(1) as f64 / c.runs as f64
    ));
    let a = c.final_sub_choice_counts.get(&ActionRef::Primitive(0)).unwrap_or(&0);
    let cc = c.final_sub_choice_counts.get(&ActionRef::Primitive(2)).unwrap_or(&0);
    out.push_str(&format!("  subtask prefers A: {a:>6}   C: {cc:>6}\n"));
    out
}
