//! Action-selection policies and the per-episode schedules that anneal
//! them: epsilon-greedy, Boltzmann with multiplicative cooling, forced
//! greedy, and the linear commitment schedule.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{self, ActionRef, QStore, StateId};
use crate::hierarchy::TaskDef;

/// Immutable policy snapshot; [`tick_episode`] returns the next episode's
/// snapshot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PolicySpec {
    /// With probability `epsilon`, pick uniformly among the currently
    /// non-greedy actions (falling back to the greedy set when every
    /// action is greedy); otherwise pick uniformly from the greedy set.
    EpsilonGreedy { epsilon: f64 },
    /// Sample proportionally to `exp((Q - max Q) / temperature)`.
    Boltzmann { temperature: f64, cooling: f64, floor: f64 },
    /// Uniform over the greedy set.
    ForcedGreedy,
}

impl PolicySpec {
    pub fn epsilon_greedy(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Param(format!("epsilon {epsilon} not in [0, 1]")));
        }
        Ok(PolicySpec::EpsilonGreedy { epsilon })
    }

    pub fn boltzmann(temperature: f64, cooling: f64, floor: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::Param(format!("temperature {temperature} must be positive")));
        }
        if !(cooling > 0.0 && cooling <= 1.0) {
            return Err(Error::Param(format!("cooling {cooling} not in (0, 1]")));
        }
        if !(floor >= 0.0) {
            return Err(Error::Param(format!("floor {floor} must be nonnegative")));
        }
        Ok(PolicySpec::Boltzmann { temperature, cooling, floor })
    }

    /// Current Boltzmann temperature, if any.
    pub fn temperature(&self) -> Option<f64> {
        match self {
            PolicySpec::Boltzmann { temperature, .. } => Some(*temperature),
            _ => None,
        }
    }
}

/// Selects one action for `task` in `s` under `policy`.
pub fn select<R: Rng + ?Sized>(
    policy: &PolicySpec,
    store: &QStore,
    task: &TaskDef,
    s: StateId,
    tie_epsilon: f64,
    rng: &mut R,
) -> Result<ActionRef> {
    let actions = task.actions(s);
    if actions.is_empty() {
        return Err(Error::Admissibility { task: task.name().to_string(), state: s.0 });
    }
    match *policy {
        PolicySpec::ForcedGreedy => {
            let greedy = mdp::greedy_set(store, task, s, tie_epsilon)?;
            Ok(greedy[rng.random_range(0..greedy.len())])
        }
        PolicySpec::EpsilonGreedy { epsilon } => {
            let greedy = mdp::greedy_set(store, task, s, tie_epsilon)?;
            if rng.random::<f64>() < epsilon {
                let non_greedy: Vec<ActionRef> =
                    actions.iter().copied().filter(|a| !greedy.contains(a)).collect();
                let pool = if non_greedy.is_empty() { &greedy } else { &non_greedy };
                Ok(pool[rng.random_range(0..pool.len())])
            } else {
                Ok(greedy[rng.random_range(0..greedy.len())])
            }
        }
        PolicySpec::Boltzmann { temperature, .. } => {
            let weights = boltzmann_weights(store, task, s, &actions, temperature);
            let total: f64 = weights.iter().sum();
            let mut draw = rng.random::<f64>() * total;
            for (a, w) in actions.iter().zip(&weights) {
                draw -= w;
                if draw <= 0.0 {
                    return Ok(*a);
                }
            }
            Ok(*actions.last().expect("nonempty action set"))
        }
    }
}

fn boltzmann_weights(store: &QStore, task: &TaskDef, s: StateId, actions: &[ActionRef], temperature: f64) -> Vec<f64> {
    let max = actions
        .iter()
        .map(|&a| mdp::q_get(store, task, s, a))
        .fold(f64::NEG_INFINITY, f64::max);
    actions
        .iter()
        .map(|&a| ((mdp::q_get(store, task, s, a) - max) / temperature).exp())
        .collect()
}

/// Selection probabilities under a Boltzmann policy, in action order.
/// Exposed for tests and diagnostics.
pub fn boltzmann_probabilities(store: &QStore, task: &TaskDef, s: StateId, temperature: f64) -> Result<Vec<f64>> {
    let actions = task.actions(s);
    if actions.is_empty() {
        return Err(Error::Admissibility { task: task.name().to_string(), state: s.0 });
    }
    let weights = boltzmann_weights(store, task, s, &actions, temperature);
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Advances per-episode policy state: Boltzmann temperature is multiplied
/// by its cooling rate and clamped at the floor; other policies are
/// unchanged.
pub fn tick_episode(policy: &PolicySpec) -> PolicySpec {
    match *policy {
        PolicySpec::Boltzmann { temperature, cooling, floor } => PolicySpec::Boltzmann {
            temperature: (temperature * cooling).max(floor),
            cooling,
            floor,
        },
        other => other,
    }
}

/// Piecewise-linear commitment schedule, clamped at both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommitmentSchedule {
    pub kappa_start: f64,
    pub kappa_end: f64,
    pub total_episodes: u32,
}

impl CommitmentSchedule {
    pub fn new(kappa_start: f64, kappa_end: f64, total_episodes: u32) -> Result<Self> {
        for (name, v) in [("kappa_start", kappa_start), ("kappa_end", kappa_end)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Param(format!("{name} {v} not in [0, 1]")));
            }
        }
        if total_episodes == 0 {
            return Err(Error::Param("commitment schedule needs total_episodes >= 1".into()));
        }
        Ok(Self { kappa_start, kappa_end, total_episodes })
    }

    /// Constant schedule pinned at `kappa`.
    pub fn constant(kappa: f64) -> Result<Self> {
        Self::new(kappa, kappa, 1)
    }

    /// Commitment probability for a 0-based episode index.
    pub fn kappa_at(&self, episode: u32) -> f64 {
        let frac = (episode as f64 / self.total_episodes as f64).min(1.0);
        self.kappa_start + (self.kappa_end - self.kappa_start) * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{Hierarchy, TaskDefBuilder};
    use crate::mdp::{q_update, TaskId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn row(n: u8) -> (Hierarchy, TaskId) {
        let mut b = Hierarchy::builder();
        let t = b.add_task(
            TaskDefBuilder::new("t")
                .actions(move |_| (0..n).map(ActionRef::Primitive).collect()),
        );
        b.set_root(t);
        (b.build().unwrap(), t)
    }

    #[test]
    fn boltzmann_symmetry_two_equal_actions() {
        let (h, t) = row(2);
        let store = QStore::new();
        let p = boltzmann_probabilities(&store, h.task(t), StateId(0), 0.7).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn boltzmann_direct_evaluation() {
        let (h, t) = row(2);
        let mut store = QStore::new();
        q_update(&mut store, h.task(t), StateId(0), ActionRef::Primitive(0), 1.0, 1.0).unwrap();
        let p = boltzmann_probabilities(&store, h.task(t), StateId(0), 0.5).unwrap();
        let e2 = (2.0f64).exp();
        assert!((p[0] - e2 / (e2 + 1.0)).abs() < 1e-12);
        assert!((p[0] - 0.8808).abs() < 1e-4);
    }

    #[test]
    fn epsilon_greedy_frequency_three_actions() {
        // 3 actions, unique greedy; explore branch draws only non-greedy
        // actions, so P(greedy) = 1 - epsilon = 0.9.
        let (h, t) = row(3);
        let mut store = QStore::new();
        q_update(&mut store, h.task(t), StateId(0), ActionRef::Primitive(2), 10.0, 1.0).unwrap();
        let policy = PolicySpec::epsilon_greedy(0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mut greedy_hits = 0u32;
        for _ in 0..n {
            if select(&policy, &store, h.task(t), StateId(0), 0.0, &mut rng).unwrap()
                == ActionRef::Primitive(2)
            {
                greedy_hits += 1;
            }
        }
        let rate = greedy_hits as f64 / n as f64;
        assert!((rate - 0.9).abs() < 0.005, "greedy rate {rate}");
    }

    #[test]
    fn cooling_examples() {
        let fixed = PolicySpec::boltzmann(0.5, 1.0, 1e-3).unwrap();
        assert_eq!(tick_episode(&fixed).temperature(), Some(0.5));

        let slow = PolicySpec::boltzmann(1.0, 0.999947, 1e-3).unwrap();
        assert_eq!(tick_episode(&slow).temperature(), Some(0.999947));

        let clamped = PolicySpec::boltzmann(0.011, 0.5, 0.01).unwrap();
        assert_eq!(tick_episode(&clamped).temperature(), Some(0.01));
    }

    #[test]
    fn kappa_schedule_endpoints_and_midpoint() {
        let sched = CommitmentSchedule::new(1.0, 0.0, 100_000).unwrap();
        assert_eq!(sched.kappa_at(0), 1.0);
        assert_eq!(sched.kappa_at(100_000), 0.0);
        assert_eq!(sched.kappa_at(150_000), 0.0);
        assert!((sched.kappa_at(50_000) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_starvation_sampled() {
        let (h, t) = row(3);
        let mut store = QStore::new();
        q_update(&mut store, h.task(t), StateId(0), ActionRef::Primitive(1), 5.0, 1.0).unwrap();
        for policy in [
            PolicySpec::epsilon_greedy(0.05).unwrap(),
            PolicySpec::boltzmann(0.5, 1.0, 1e-3).unwrap(),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut seen = [false; 3];
            for _ in 0..100_000 {
                if let ActionRef::Primitive(p) =
                    select(&policy, &store, h.task(t), StateId(0), 0.0, &mut rng).unwrap()
                {
                    seen[p as usize] = true;
                }
            }
            assert!(seen.iter().all(|&x| x), "not all actions sampled under {policy:?}");
        }
    }
}
