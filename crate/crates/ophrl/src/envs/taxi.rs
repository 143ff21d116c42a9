//! Fuel-limited taxicab on the canonical 5x5 grid.
//!
//! Landmarks R, G, Y, B serve as passenger sources and destinations, a
//! refueling station sits near the middle, and six interior wall segments
//! block east-west movement. Moves consume one unit of fuel unless
//! blocked; running the tank below zero fails the episode. Pickup,
//! putdown and refuel cost -10 when impossible; a successful putdown
//! earns +19 and ends the episode.

use rand::{Rng, RngCore};

use crate::error::Result;
use crate::hierarchy::{Hierarchy, RewardContext, TaskDefBuilder, TerminalKind};
use crate::mdp::{ActionRef, StateId, TaskId};
use crate::oracle::FlatMdp;

use super::Environment;

pub const NORTH: u8 = 0;
pub const SOUTH: u8 = 1;
pub const EAST: u8 = 2;
pub const WEST: u8 = 3;
pub const PICKUP: u8 = 4;
pub const PUTDOWN: u8 = 5;
pub const REFUEL: u8 = 6;

/// Landmarks in index order R, G, Y, B.
pub const LANDMARKS: [(u8, u8); 4] = [(0, 4), (4, 4), (0, 0), (3, 0)];
pub const STATION: (u8, u8) = (2, 1);
pub const FUEL_CAPACITY: u8 = 12;

/// Wall east of each listed cell blocks east/west movement across it.
const WALLS_EAST_OF: [(u8, u8); 6] = [(1, 3), (1, 4), (0, 0), (0, 1), (2, 0), (2, 1)];

const PASSENGER_IN_TAXI: u8 = 4;

pub const SUCCESS: StateId = StateId(6500);
pub const FAILURE: StateId = StateId(6501);

/// Decoded taxi configuration.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TaxiState {
    pub x: u8,
    pub y: u8,
    /// 0..=3: waiting at that landmark; 4: riding in the taxi.
    pub passenger: u8,
    /// Destination landmark index.
    pub destination: u8,
    pub fuel: u8,
}

impl TaxiState {
    pub fn encode(&self) -> StateId {
        let id = ((((self.x as u32 * 5) + self.y as u32) * 5 + self.passenger as u32) * 4
            + self.destination as u32)
            * 13
            + self.fuel as u32;
        StateId(id)
    }

    pub fn decode(s: StateId) -> Option<TaxiState> {
        if s == SUCCESS || s == FAILURE || s.0 >= 6500 {
            return None;
        }
        let mut v = s.0;
        let fuel = (v % 13) as u8;
        v /= 13;
        let destination = (v % 4) as u8;
        v /= 4;
        let passenger = (v % 5) as u8;
        v /= 5;
        let y = (v % 5) as u8;
        v /= 5;
        let x = v as u8;
        Some(TaxiState { x, y, passenger, destination, fuel })
    }

    pub fn in_taxi(&self) -> bool {
        self.passenger == PASSENGER_IN_TAXI
    }

    pub fn at(&self, cell: (u8, u8)) -> bool {
        (self.x, self.y) == cell
    }
}

fn wall_east_of(x: u8, y: u8) -> bool {
    WALLS_EAST_OF.contains(&(x, y))
}

fn transition(s: TaxiState, a: u8) -> (f64, StateId, TerminalKind) {
    match a {
        NORTH | SOUTH | EAST | WEST => {
            let (nx, ny) = match a {
                NORTH => (s.x as i8, s.y as i8 + 1),
                SOUTH => (s.x as i8, s.y as i8 - 1),
                EAST => (s.x as i8 + 1, s.y as i8),
                _ => (s.x as i8 - 1, s.y as i8),
            };
            let blocked = nx < 0
                || nx > 4
                || ny < 0
                || ny > 4
                || (a == EAST && wall_east_of(s.x, s.y))
                || (a == WEST && wall_east_of(nx as u8, ny as u8));
            if blocked {
                return (-1.0, s.encode(), TerminalKind::None);
            }
            if s.fuel == 0 {
                return (-21.0, FAILURE, TerminalKind::Failure);
            }
            let moved = TaxiState { x: nx as u8, y: ny as u8, fuel: s.fuel - 1, ..s };
            (-1.0, moved.encode(), TerminalKind::None)
        }
        PICKUP => {
            if !s.in_taxi() && s.at(LANDMARKS[s.passenger as usize]) {
                let picked = TaxiState { passenger: PASSENGER_IN_TAXI, ..s };
                (-1.0, picked.encode(), TerminalKind::None)
            } else {
                (-10.0, s.encode(), TerminalKind::None)
            }
        }
        PUTDOWN => {
            if s.in_taxi() && s.at(LANDMARKS[s.destination as usize]) {
                (19.0, SUCCESS, TerminalKind::Success)
            } else {
                (-10.0, s.encode(), TerminalKind::None)
            }
        }
        REFUEL => {
            if s.at(STATION) {
                let filled = TaxiState { fuel: FUEL_CAPACITY, ..s };
                (-1.0, filled.encode(), TerminalKind::None)
            } else {
                (-10.0, s.encode(), TerminalKind::None)
            }
        }
        _ => panic!("unknown taxi action {a}"),
    }
}

pub struct Taxi {
    state: StateId,
}

impl Taxi {
    pub fn new() -> Self {
        Self { state: StateId(0) }
    }
}

impl Default for Taxi {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for Taxi {
    fn reset(&mut self, rng: &mut dyn RngCore) -> StateId {
        let x = rng.random_range(0..5u8);
        let y = rng.random_range(0..5u8);
        let passenger = rng.random_range(0..4u8);
        let destination = rng.random_range(0..4u8);
        let fuel = rng.random_range(5..=FUEL_CAPACITY);
        self.state = TaxiState { x, y, passenger, destination, fuel }.encode();
        self.state
    }

    fn state(&self) -> StateId {
        self.state
    }

    fn set_state(&mut self, s: StateId) {
        self.state = s;
    }

    fn step(&mut self, a: u8, _rng: &mut dyn RngCore) -> (f64, StateId, TerminalKind) {
        let s = TaxiState::decode(self.state).expect("step from a terminal taxi state");
        let (r, s2, term) = transition(s, a);
        self.state = s2;
        (r, s2, term)
    }

    fn primitive_count(&self) -> u8 {
        7
    }

    fn primitive_name(&self, a: u8) -> &'static str {
        ["north", "south", "east", "west", "pickup", "putdown", "refuel"][a as usize]
    }

    fn enumerate(&self) -> FlatMdp {
        let mut mdp = FlatMdp::new(7);
        let mut seen = vec![false; 6500];
        let mut queue: Vec<StateId> = Vec::new();
        let start_weight = 1.0 / (25.0 * 4.0 * 4.0 * 8.0);
        for x in 0..5u8 {
            for y in 0..5u8 {
                for passenger in 0..4u8 {
                    for destination in 0..4u8 {
                        for fuel in 5..=FUEL_CAPACITY {
                            let s = TaxiState { x, y, passenger, destination, fuel }.encode();
                            mdp.start.push((s, start_weight));
                            if !seen[s.0 as usize] {
                                seen[s.0 as usize] = true;
                                queue.push(s);
                            }
                        }
                    }
                }
            }
        }
        while let Some(s) = queue.pop() {
            mdp.states.push(s);
            let st = TaxiState::decode(s).unwrap();
            for a in 0..7u8 {
                let (r, s2, term) = transition(st, a);
                mdp.transitions.insert((s, a), (r, s2, term));
                if term == TerminalKind::None && !seen[s2.0 as usize] {
                    seen[s2.0 as usize] = true;
                    queue.push(s2);
                }
            }
        }
        mdp.states.sort();
        mdp
    }
}

fn non_terminal(s: StateId) -> bool {
    TaxiState::decode(s).is_some()
}

const ALL_PRIMITIVES: [u8; 7] = [NORTH, SOUTH, EAST, WEST, PICKUP, PUTDOWN, REFUEL];

/// Flat agent over all seven primitives.
pub fn flat_hierarchy() -> Result<Hierarchy> {
    let mut b = Hierarchy::builder();
    let root = b.add_task(
        TaskDefBuilder::new("root")
            .admissible(non_terminal)
            .actions(|_| ALL_PRIMITIVES.iter().map(|&p| ActionRef::Primitive(p)).collect()),
    );
    b.set_root(root);
    b.build()
}

/// Rejects illegal-action penalties raised by a primitive the task did
/// not choose itself, and the fuel-failure step.
fn subtask_reject(ctx: &RewardContext) -> bool {
    if ctx.raw_reward == -10.0 {
        return ctx.a != ActionRef::Primitive(ctx.leaf_primitive);
    }
    false
}

/// Transforms the completing step's -1 to 0; `completed` decides from the
/// successor whether this task just finished.
fn complete_to_zero(ctx: &RewardContext, completed: bool) -> f64 {
    if completed && ctx.raw_reward == -1.0 {
        0.0
    } else {
        ctx.raw_reward
    }
}

/// Task hierarchy: Get / Put / Refuel under the root, each delegating
/// movement to a navigation subtask. Navigation subtasks share Q-values
/// by destination cell.
pub fn paper_hierarchy() -> Result<Hierarchy> {
    let mut b = Hierarchy::builder();

    // navigation tasks: one per landmark plus the station
    let mut nav_targets: Vec<(u8, u8)> = LANDMARKS.to_vec();
    nav_targets.push(STATION);
    let mut nav: Vec<TaskId> = Vec::new();
    for &target in &nav_targets {
        let id = b.add_task(
            TaskDefBuilder::new(format!("navigate_{}_{}", target.0, target.1))
                .share_key(format!("nav:{},{}", target.0, target.1))
                .admissible(move |s| TaxiState::decode(s).is_some_and(|st| !st.at(target)))
                .actions(|_| {
                    vec![
                        ActionRef::Primitive(NORTH),
                        ActionRef::Primitive(SOUTH),
                        ActionRef::Primitive(EAST),
                        ActionRef::Primitive(WEST),
                    ]
                })
                .reject_reward(|ctx| ctx.raw_reward == -10.0 || ctx.raw_reward == -21.0)
                .transform_reward(move |ctx| {
                    let arrived = TaxiState::decode(ctx.s_prime).is_none_or(|st| st.at(target));
                    complete_to_zero(ctx, arrived)
                }),
        );
        nav.push(id);
    }
    let nav: [TaskId; 5] = nav.try_into().expect("five navigation tasks");
    let nav_station = nav[4];

    let get = b.add_task(
        TaskDefBuilder::new("get")
            .admissible(|s| TaxiState::decode(s).is_some_and(|st| !st.in_taxi()))
            .actions(move |s| {
                let st = TaxiState::decode(s).expect("get polled in a terminal state");
                let mut acts = Vec::with_capacity(2);
                if !st.at(LANDMARKS[st.passenger as usize]) {
                    acts.push(ActionRef::Task(nav[st.passenger as usize]));
                }
                acts.push(ActionRef::Primitive(PICKUP));
                acts
            })
            .reject_reward(subtask_reject)
            .transform_reward(|ctx| {
                let completed = TaxiState::decode(ctx.s_prime).is_none_or(|st| st.in_taxi());
                complete_to_zero(ctx, completed)
            }),
    );

    let put = b.add_task(
        TaskDefBuilder::new("put")
            .admissible(|s| TaxiState::decode(s).is_some_and(|st| st.in_taxi()))
            .actions(move |s| {
                let st = TaxiState::decode(s).expect("put polled in a terminal state");
                let mut acts = Vec::with_capacity(2);
                if !st.at(LANDMARKS[st.destination as usize]) {
                    acts.push(ActionRef::Task(nav[st.destination as usize]));
                }
                acts.push(ActionRef::Primitive(PUTDOWN));
                acts
            })
            .reject_reward(subtask_reject)
            .transform_reward(|ctx| {
                let completed = TaxiState::decode(ctx.s_prime).is_none_or(|st| !st.in_taxi());
                complete_to_zero(ctx, completed)
            }),
    );

    let refuel = b.add_task(
        TaskDefBuilder::new("refuel")
            .admissible(|s| TaxiState::decode(s).is_some_and(|st| st.fuel < FUEL_CAPACITY))
            .actions(move |s| {
                let st = TaxiState::decode(s).expect("refuel polled in a terminal state");
                let mut acts = Vec::with_capacity(2);
                if !st.at(STATION) {
                    acts.push(ActionRef::Task(nav_station));
                }
                acts.push(ActionRef::Primitive(REFUEL));
                acts
            })
            .reject_reward(subtask_reject)
            .transform_reward(|ctx| {
                let completed =
                    TaxiState::decode(ctx.s_prime).is_none_or(|st| st.fuel == FUEL_CAPACITY);
                complete_to_zero(ctx, completed)
            }),
    );

    let root = b.add_task(
        TaskDefBuilder::new("root")
            .admissible(non_terminal)
            .actions(move |s| {
                let st = TaxiState::decode(s).expect("root polled in a terminal state");
                let mut acts = Vec::with_capacity(2);
                if st.in_taxi() {
                    acts.push(ActionRef::Task(put));
                } else {
                    acts.push(ActionRef::Task(get));
                }
                if st.fuel < FUEL_CAPACITY {
                    acts.push(ActionRef::Task(refuel));
                }
                acts
            }),
    );
    b.set_root(root);
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(x: u8, y: u8, passenger: u8, destination: u8, fuel: u8) -> TaxiState {
        TaxiState { x, y, passenger, destination, fuel }
    }

    #[test]
    fn encode_decode_round_trip() {
        let st = state(3, 1, 2, 0, 7);
        assert_eq!(TaxiState::decode(st.encode()), Some(st));
        assert_eq!(TaxiState::decode(SUCCESS), None);
    }

    #[test]
    fn refuel_at_station_fills_tank() {
        let mut env = Taxi::new();
        env.set_state(state(2, 1, 0, 1, 3).encode());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (r, s2, term) = env.step(REFUEL, &mut rng);
        assert_eq!(r, -1.0);
        assert_eq!(term, TerminalKind::None);
        assert_eq!(TaxiState::decode(s2).unwrap().fuel, 12);
    }

    #[test]
    fn illegal_pickup_costs_ten() {
        let mut env = Taxi::new();
        env.set_state(state(2, 2, 0, 1, 5).encode());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (r, s2, _) = env.step(PICKUP, &mut rng);
        assert_eq!(r, -10.0);
        assert_eq!(s2, state(2, 2, 0, 1, 5).encode());
    }

    #[test]
    fn successful_putdown_pays_nineteen() {
        let (gx, gy) = LANDMARKS[1];
        let mut env = Taxi::new();
        env.set_state(state(gx, gy, 4, 1, 5).encode());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (r, s2, term) = env.step(PUTDOWN, &mut rng);
        assert_eq!(r, 19.0);
        assert_eq!(s2, SUCCESS);
        assert_eq!(term, TerminalKind::Success);
    }

    #[test]
    fn empty_tank_move_fails_with_extra_penalty() {
        let mut env = Taxi::new();
        env.set_state(state(2, 2, 0, 1, 0).encode());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (r, s2, term) = env.step(NORTH, &mut rng);
        assert_eq!(r, -21.0);
        assert_eq!(s2, FAILURE);
        assert_eq!(term, TerminalKind::Failure);
    }

    #[test]
    fn blocked_move_keeps_fuel() {
        // wall east of (0, 0)
        let mut env = Taxi::new();
        env.set_state(state(0, 0, 0, 1, 4).encode());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (r, s2, term) = env.step(EAST, &mut rng);
        assert_eq!(r, -1.0);
        assert_eq!(term, TerminalKind::None);
        assert_eq!(TaxiState::decode(s2).unwrap(), state(0, 0, 0, 1, 4));
    }

    #[test]
    fn walls_are_two_sided() {
        // east of (1, 4) is walled: west from (2, 4) must be blocked too
        let mut env = Taxi::new();
        env.set_state(state(2, 4, 0, 1, 4).encode());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, s2, _) = env.step(WEST, &mut rng);
        assert_eq!(TaxiState::decode(s2).unwrap().x, 2);
    }

    #[test]
    fn fuel_never_negative_and_reachable_set_bounded() {
        let env = Taxi::new();
        let mdp = env.enumerate();
        assert!(mdp.states.len() <= 6500);
        for &s in &mdp.states {
            let st = TaxiState::decode(s).unwrap();
            assert!(st.fuel <= FUEL_CAPACITY);
        }
    }

    #[test]
    fn navigation_tasks_share_by_destination() {
        let h = paper_hierarchy().unwrap();
        // source-R navigation (inside get) and destination-R navigation
        // (inside put) are the same task, sharing "nav:0,4"
        let nav_r: Vec<_> = h.tasks().filter(|t| t.share_key() == "nav:0,4").collect();
        assert_eq!(nav_r.len(), 1);
        // five navigation tasks, one per landmark plus the station
        let navs = h.tasks().filter(|t| t.share_key().starts_with("nav:")).count();
        assert_eq!(navs, 5);
    }

    #[test]
    fn navigate_rejects_penalties_and_zeroes_arrival() {
        use crate::hierarchy::{apply_reward_hooks, HookResult};
        let h = paper_hierarchy().unwrap();
        let nav_r = h.tasks().find(|t| t.share_key() == "nav:0,4").unwrap();
        let from = state(0, 3, 0, 1, 5);
        let arrived = state(0, 4, 0, 1, 4);
        let ctx = RewardContext {
            task: nav_r.id(),
            s: from.encode(),
            a: ActionRef::Primitive(NORTH),
            raw_reward: -1.0,
            s_prime: arrived.encode(),
            env_terminal: TerminalKind::None,
            subtask_completed: true,
            leaf_primitive: NORTH,
        };
        assert_eq!(apply_reward_hooks(nav_r, &ctx).unwrap(), HookResult::Accepted(0.0));

        let mut penalty = ctx;
        penalty.raw_reward = -10.0;
        assert_eq!(apply_reward_hooks(nav_r, &penalty).unwrap(), HookResult::Rejected);
    }
}
