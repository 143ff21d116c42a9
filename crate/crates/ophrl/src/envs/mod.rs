//! The three benchmark domains as exhaustively enumerable episodic MDPs,
//! plus factories for their flat and hierarchical agents.

mod bandit;
mod cliff;
mod taxi;

pub use bandit::{Bandit, BanditArm};
pub use cliff::{Cliff, CliffConfig};
pub use taxi::{Taxi, TaxiState};

use crate::error::{Error, Result};
use crate::hierarchy::{Hierarchy, TerminalKind};
use crate::mdp::StateId;
use crate::oracle::FlatMdp;
use rand::RngCore;

/// A discrete episodic environment. Transitions are deterministic in all
/// shipped domains; randomness enters only through `reset` (the taxicab
/// start distribution).
pub trait Environment: Send {
    /// Starts a new episode and returns the start state.
    fn reset(&mut self, rng: &mut dyn RngCore) -> StateId;

    /// Current state (non-terminal between reset and a terminal step).
    fn state(&self) -> StateId;

    /// Forces the current state; testing and evaluation hook.
    fn set_state(&mut self, s: StateId);

    /// Executes one primitive action.
    fn step(&mut self, a: u8, rng: &mut dyn RngCore) -> (f64, StateId, TerminalKind);

    fn primitive_count(&self) -> u8;

    fn primitive_name(&self, a: u8) -> &'static str;

    /// Full transition table over the reachable non-terminal states.
    fn enumerate(&self) -> FlatMdp;
}

/// Benchmark domain selector.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Domain {
    Bandit,
    Cliff { width: u32 },
    Taxi,
}

impl Domain {
    pub fn name(&self) -> &'static str {
        match self {
            Domain::Bandit => "bandit",
            Domain::Cliff { .. } => "cliff",
            Domain::Taxi => "taxi",
        }
    }
}

/// Agent shape: a single flat task over the primitives, or the domain's
/// task hierarchy.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AgentShape {
    Flat,
    Paper,
}

impl AgentShape {
    pub fn name(&self) -> &'static str {
        match self {
            AgentShape::Flat => "flat",
            AgentShape::Paper => "paper",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(AgentShape::Flat),
            "paper" => Ok(AgentShape::Paper),
            _ => Err(Error::Config(format!("unknown agent shape `{s}`"))),
        }
    }
}

pub fn make_env(domain: &Domain) -> Box<dyn Environment> {
    match domain {
        Domain::Bandit => Box::new(Bandit::new()),
        Domain::Cliff { width } => Box::new(Cliff::new(CliffConfig { width: *width })),
        Domain::Taxi => Box::new(Taxi::new()),
    }
}

/// Builds the validated task graph for a domain and agent shape.
pub fn make_hierarchy(domain: &Domain, shape: AgentShape) -> Result<Hierarchy> {
    let h = match (domain, shape) {
        (Domain::Bandit, AgentShape::Flat) => bandit::flat_hierarchy()?,
        (Domain::Bandit, AgentShape::Paper) => bandit::paper_hierarchy()?,
        (Domain::Cliff { width }, AgentShape::Flat) => cliff::flat_hierarchy(*width)?,
        (Domain::Cliff { width }, AgentShape::Paper) => cliff::paper_hierarchy(*width)?,
        (Domain::Taxi, AgentShape::Flat) => taxi::flat_hierarchy()?,
        (Domain::Taxi, AgentShape::Paper) => taxi::paper_hierarchy()?,
    };
    Ok(h)
}

/// Enumerated non-terminal states of a domain, for validation sweeps.
pub fn sample_states(domain: &Domain) -> Vec<StateId> {
    make_env(domain).enumerate().states
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// `enumerate` and `step` must agree on every state-action pair.
    fn check_enumerate_agreement(domain: Domain) {
        let mut env = make_env(&domain);
        let mdp = env.enumerate();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for &s in &mdp.states {
            for a in 0..env.primitive_count() {
                let &(r, s2, term) = mdp.transitions.get(&(s, a)).expect("total transition table");
                env.set_state(s);
                let (r2, s2b, term2) = env.step(a, &mut rng);
                assert_eq!((r, s2, term), (r2, s2b, term2), "mismatch at {s} action {a}");
            }
        }
    }

    #[test]
    fn bandit_enumerate_agrees() {
        check_enumerate_agreement(Domain::Bandit);
    }

    #[test]
    fn cliff_enumerate_agrees() {
        check_enumerate_agreement(Domain::Cliff { width: 10 });
    }

    #[test]
    fn taxi_enumerate_agrees() {
        check_enumerate_agreement(Domain::Taxi);
    }

    #[test]
    fn shipped_hierarchies_validate_clean() {
        for (domain, shapes) in [
            (Domain::Bandit, [AgentShape::Flat, AgentShape::Paper]),
            (Domain::Cliff { width: 10 }, [AgentShape::Flat, AgentShape::Paper]),
            (Domain::Taxi, [AgentShape::Flat, AgentShape::Paper]),
        ] {
            let states = sample_states(&domain);
            assert!(!states.is_empty());
            for shape in shapes {
                let h = make_hierarchy(&domain, shape).unwrap();
                let diags = h.validate(&states);
                assert!(
                    diags.is_empty(),
                    "{} {} hierarchy: {:?}",
                    domain.name(),
                    shape.name(),
                    diags
                );
            }
        }
    }

    #[test]
    fn reward_sets_are_closed() {
        let cases: [(Domain, &[f64]); 3] = [
            (Domain::Bandit, &[1.0, 10.0, 100.0]),
            (Domain::Cliff { width: 10 }, &[-1.0, -200.0, 200.0]),
            (Domain::Taxi, &[-1.0, -10.0, -21.0, 19.0]),
        ];
        for (domain, allowed) in cases {
            let env = make_env(&domain);
            let mdp = env.enumerate();
            for ((s, a), (r, _, _)) in &mdp.transitions {
                assert!(allowed.contains(r), "{}: reward {r} at {s} action {a}", domain.name());
            }
        }
    }
}
