//! Width x 2 cliff walking. The agent starts at the bottom-left corner;
//! the goal is the bottom-right cell. Stepping south off the bottom row
//! falls off the cliff (-200, failure); entering the goal yields +200,
//! replacing the step penalty. North/east/west boundary moves are no-ops
//! at the usual -1.

use rand::RngCore;

use crate::error::Result;
use crate::hierarchy::{Hierarchy, TaskDefBuilder, TerminalKind};
use crate::mdp::{ActionRef, StateId};
use crate::oracle::FlatMdp;

use super::Environment;

pub const NORTH: u8 = 0;
pub const SOUTH: u8 = 1;
pub const EAST: u8 = 2;
pub const WEST: u8 = 3;

#[derive(Clone, Copy, Debug)]
pub struct CliffConfig {
    /// Number of columns; the paper-scale domain uses 100.
    pub width: u32,
}

pub struct Cliff {
    width: u32,
    state: StateId,
}

impl Cliff {
    pub fn new(cfg: CliffConfig) -> Self {
        assert!(cfg.width >= 2, "cliff needs width >= 2");
        Self { width: cfg.width, state: StateId(0) }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Cell (x, y) to state id; the goal cell doubles as the success
    /// terminal id since it is never occupied.
    pub fn encode(width: u32, x: u32, y: u32) -> StateId {
        StateId(y * width + x)
    }

    pub fn decode(width: u32, s: StateId) -> (u32, u32) {
        (s.0 % width, s.0 / width)
    }

    pub fn goal(width: u32) -> StateId {
        StateId(width - 1)
    }

    pub fn failure(width: u32) -> StateId {
        StateId(2 * width)
    }

    fn transition(width: u32, s: StateId, a: u8) -> (f64, StateId, TerminalKind) {
        let (x, y) = Self::decode(width, s);
        let (nx, ny) = match a {
            NORTH => (x as i64, y as i64 + 1),
            SOUTH => (x as i64, y as i64 - 1),
            EAST => (x as i64 + 1, y as i64),
            WEST => (x as i64 - 1, y as i64),
            _ => panic!("unknown cliff action {a}"),
        };
        if ny < 0 {
            return (-200.0, Self::failure(width), TerminalKind::Failure);
        }
        if nx == (width - 1) as i64 && ny == 0 {
            return (200.0, Self::goal(width), TerminalKind::Success);
        }
        if nx < 0 || nx >= width as i64 || ny > 1 {
            return (-1.0, s, TerminalKind::None);
        }
        (-1.0, Self::encode(width, nx as u32, ny as u32), TerminalKind::None)
    }
}

impl Environment for Cliff {
    fn reset(&mut self, _rng: &mut dyn RngCore) -> StateId {
        self.state = Self::encode(self.width, 0, 0);
        self.state
    }

    fn state(&self) -> StateId {
        self.state
    }

    fn set_state(&mut self, s: StateId) {
        self.state = s;
    }

    fn step(&mut self, a: u8, _rng: &mut dyn RngCore) -> (f64, StateId, TerminalKind) {
        let (r, s2, term) = Self::transition(self.width, self.state, a);
        self.state = s2;
        (r, s2, term)
    }

    fn primitive_count(&self) -> u8 {
        4
    }

    fn primitive_name(&self, a: u8) -> &'static str {
        ["north", "south", "east", "west"][a as usize]
    }

    fn enumerate(&self) -> FlatMdp {
        let mut mdp = FlatMdp::new(4);
        let goal = Self::goal(self.width);
        for y in 0..2 {
            for x in 0..self.width {
                let s = Self::encode(self.width, x, y);
                if s == goal {
                    continue;
                }
                mdp.states.push(s);
                for a in 0..4u8 {
                    mdp.transitions.insert((s, a), Self::transition(self.width, s, a));
                }
            }
        }
        mdp.start.push((Self::encode(self.width, 0, 0), 1.0));
        mdp
    }
}

fn non_terminal(width: u32) -> impl Fn(StateId) -> bool + Send + Sync + Clone {
    move |s: StateId| s.0 < 2 * width && s != Cliff::goal(width)
}

fn moves(_s: StateId) -> Vec<ActionRef> {
    vec![
        ActionRef::Primitive(NORTH),
        ActionRef::Primitive(SOUTH),
        ActionRef::Primitive(EAST),
        ActionRef::Primitive(WEST),
    ]
}

/// Flat agent: the root decides between the four moves.
pub fn flat_hierarchy(width: u32) -> Result<Hierarchy> {
    let mut b = Hierarchy::builder();
    let root = b.add_task(
        TaskDefBuilder::new("root")
            .admissible(non_terminal(width))
            .actions(moves),
    );
    b.set_root(root);
    b.build()
}

/// Hierarchical agent: the root chooses between a subtask that solves the
/// walk to the goal corner and a subtask that terminates by jumping off
/// the cliff. The jump subtask sees mirrored terminal rewards (+200 for
/// reaching the cliff, -200 for reaching the goal), so each subtask has a
/// coherent goal of its own while the root judges them by raw rewards.
pub fn paper_hierarchy(width: u32) -> Result<Hierarchy> {
    let mut b = Hierarchy::builder();
    let goal = b.add_task(
        TaskDefBuilder::new("goal")
            .admissible(non_terminal(width))
            .actions(moves),
    );
    let jump = b.add_task(
        TaskDefBuilder::new("cliff")
            .admissible(non_terminal(width))
            .actions(moves)
            .transform_reward(|ctx| match ctx.env_terminal {
                TerminalKind::Failure => 200.0,
                TerminalKind::Success => -200.0,
                TerminalKind::None => ctx.raw_reward,
            }),
    );
    let root = b.add_task(
        TaskDefBuilder::new("root")
            .admissible(non_terminal(width))
            .actions(move |_| vec![ActionRef::Task(goal), ActionRef::Task(jump)]),
    );
    b.set_root(root);
    b.build()
}
