//! Discrete state/action vocabulary and the shared Q-value table.
//!
//! A [`QStore`] maps `(share key, state, action)` cells to expected-return
//! estimates. Tasks that share a key (for example navigation subtasks with
//! the same destination) read and write the same cells.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::hierarchy::TaskDef;

/// Opaque discrete state identifier. Environments define the encoding;
/// equal observations of the same configuration yield equal ids.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct StateId(pub u32);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of a task within its [`crate::hierarchy::Hierarchy`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct TaskId(pub usize);

/// An action available to a task: either a primitive environment action or
/// a subtask to be polled.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum ActionRef {
    Primitive(u8),
    Task(TaskId),
}

impl ActionRef {
    pub fn is_task(&self) -> bool {
        matches!(self, ActionRef::Task(_))
    }
}

impl fmt::Display for ActionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionRef::Primitive(p) => write!(f, "p{p}"),
            ActionRef::Task(TaskId(t)) => write!(f, "t{t}"),
        }
    }
}

/// Learning-rate, discount and trace-decay parameters for one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearningParams {
    /// Step size in (0, 1].
    pub alpha: f64,
    /// Discount in [0, 1].
    pub gamma: f64,
    /// Trace decay in [0, 1]; only the Watkins learner reads it.
    pub lambda: f64,
}

impl LearningParams {
    pub fn new(alpha: f64, gamma: f64, lambda: f64) -> Result<Self> {
        let p = Self { alpha, gamma, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Param(format!("alpha {} not in (0, 1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Param(format!("gamma {} not in [0, 1]", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Param(format!("lambda {} not in [0, 1]", self.lambda)));
        }
        Ok(())
    }
}

impl Default for LearningParams {
    fn default() -> Self {
        Self { alpha: 0.1, gamma: 1.0, lambda: 0.9 }
    }
}

/// Tabular action-value store keyed by `(share index, state, action)`.
///
/// Absent cells read as `default` (0.0 unless configured otherwise) and
/// every update touches exactly one cell.
#[derive(Clone, Debug)]
pub struct QStore {
    table: HashMap<(u16, StateId, ActionRef), f64>,
    default: f64,
}

impl QStore {
    pub fn new() -> Self {
        Self::with_default(0.0)
    }

    pub fn with_default(default: f64) -> Self {
        assert!(default.is_finite(), "default Q value must be finite");
        Self { table: HashMap::new(), default }
    }

    pub fn default_value(&self) -> f64 {
        self.default
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn raw_get(&self, share: u16, s: StateId, a: ActionRef) -> f64 {
        *self.table.get(&(share, s, a)).unwrap_or(&self.default)
    }

    /// Moves one cell toward `target` by `alpha` and returns the new value.
    pub fn raw_update(&mut self, share: u16, s: StateId, a: ActionRef, target: f64, alpha: f64) -> Result<f64> {
        if !target.is_finite() {
            return Err(Error::Param(format!("backup target {target} is not finite")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Param(format!("alpha {alpha} not in (0, 1]")));
        }
        let cell = self.table.entry((share, s, a)).or_insert(self.default);
        *cell = (1.0 - alpha) * *cell + alpha * target;
        Ok(*cell)
    }

    /// Deterministically ordered `task_key,state,action,value` lines with
    /// values at 17 significant digits.
    pub fn dump<W: std::io::Write>(&self, share_names: &[String], mut w: W) -> Result<()> {
        let mut cells: Vec<_> = self.table.iter().collect();
        cells.sort_by_key(|((share, s, a), _)| (*share, *s, *a));
        for ((share, s, a), v) in cells {
            let key = share_names
                .get(*share as usize)
                .map(String::as_str)
                .unwrap_or("?");
            writeln!(w, "{key},{s},{a},{}", format_real(*v))?;
        }
        Ok(())
    }
}

impl Default for QStore {
    fn default() -> Self {
        Self::new()
    }
}

/// Formats a real at 17 significant digits, round-trip exact for f64.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Stored value for `(task, s, a)`, or the store default when absent.
pub fn q_get(store: &QStore, task: &TaskDef, s: StateId, a: ActionRef) -> f64 {
    store.raw_get(task.share_index(), s, a)
}

/// Convex step of the task's cell toward `target`: `(1-alpha)*old + alpha*target`.
pub fn q_update(store: &mut QStore, task: &TaskDef, s: StateId, a: ActionRef, target: f64, alpha: f64) -> Result<f64> {
    store.raw_update(task.share_index(), s, a, target, alpha)
}

/// Highest stored value among the task's actions in `s`.
pub fn v_of(store: &QStore, task: &TaskDef, s: StateId) -> Result<f64> {
    let actions = task.actions(s);
    if actions.is_empty() {
        return Err(Error::Admissibility { task: task.name().to_string(), state: s.0 });
    }
    Ok(actions
        .iter()
        .map(|&a| q_get(store, task, s, a))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// All actions whose value is within `tie_epsilon` of the state value.
pub fn greedy_set(store: &QStore, task: &TaskDef, s: StateId, tie_epsilon: f64) -> Result<Vec<ActionRef>> {
    let v = v_of(store, task, s)?;
    Ok(task
        .actions(s)
        .into_iter()
        .filter(|&a| q_get(store, task, s, a) >= v - tie_epsilon)
        .collect())
}

/// Membership test equivalent to `greedy_set(..).contains(&a)` without the
/// allocation; used on hot paths (gate checks, exploring flags).
pub fn is_greedy(store: &QStore, task: &TaskDef, s: StateId, a: ActionRef, tie_epsilon: f64) -> Result<bool> {
    let v = v_of(store, task, s)?;
    Ok(q_get(store, task, s, a) >= v - tie_epsilon)
}
