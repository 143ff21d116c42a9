//! Three-armed bandit: one decision, immediate termination.

use rand::RngCore;

use crate::error::Result;
use crate::hierarchy::{Hierarchy, TaskDefBuilder, TerminalKind};
use crate::mdp::{ActionRef, StateId};
use crate::oracle::FlatMdp;

use super::Environment;

pub const START: StateId = StateId(0);
pub const TERMINAL: StateId = StateId(1);

/// The three arms and their rewards.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BanditArm {
    A = 0,
    B = 1,
    C = 2,
}

pub const ARM_REWARDS: [f64; 3] = [1.0, 10.0, 100.0];

pub struct Bandit {
    state: StateId,
}

impl Bandit {
    pub fn new() -> Self {
        Self { state: START }
    }
}

impl Default for Bandit {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for Bandit {
    fn reset(&mut self, _rng: &mut dyn RngCore) -> StateId {
        self.state = START;
        self.state
    }

    fn state(&self) -> StateId {
        self.state
    }

    fn set_state(&mut self, s: StateId) {
        self.state = s;
    }

    fn step(&mut self, a: u8, _rng: &mut dyn RngCore) -> (f64, StateId, TerminalKind) {
        assert!(a < 3, "unknown bandit arm {a}");
        self.state = TERMINAL;
        (ARM_REWARDS[a as usize], TERMINAL, TerminalKind::Success)
    }

    fn primitive_count(&self) -> u8 {
        3
    }

    fn primitive_name(&self, a: u8) -> &'static str {
        ["A", "B", "C"][a as usize]
    }

    fn enumerate(&self) -> FlatMdp {
        let mut mdp = FlatMdp::new(3);
        mdp.states.push(START);
        for a in 0..3u8 {
            mdp.transitions.insert((START, a), (ARM_REWARDS[a as usize], TERMINAL, TerminalKind::Success));
        }
        mdp.start.push((START, 1.0));
        mdp
    }
}

/// Flat agent: a single root choosing among the three arms.
pub fn flat_hierarchy() -> Result<Hierarchy> {
    let mut b = Hierarchy::builder();
    let root = b.add_task(
        TaskDefBuilder::new("root")
            .admissible(|s| s == START)
            .actions(|_| vec![ActionRef::Primitive(0), ActionRef::Primitive(1), ActionRef::Primitive(2)]),
    );
    b.set_root(root);
    b.build()
}

/// Two-task hierarchy: the root chooses between arm B and a subtask that
/// in turn chooses between arms A and C.
pub fn paper_hierarchy() -> Result<Hierarchy> {
    let mut b = Hierarchy::builder();
    let sub = b.add_task(
        TaskDefBuilder::new("sub")
            .admissible(|s| s == START)
            .actions(|_| vec![ActionRef::Primitive(0), ActionRef::Primitive(2)]),
    );
    let root = b.add_task(
        TaskDefBuilder::new("root")
            .admissible(|s| s == START)
            .actions(move |_| vec![ActionRef::Primitive(1), ActionRef::Task(sub)]),
    );
    b.set_root(root);
    b.build()
}
