//! Task-graph definitions: admissible states, per-state action sets, and
//! per-task reward rejection/transformation hooks.
//!
//! A task is admissible in the states it may run in; leaving that set
//! completes the task. The action set offered in a state may mix primitive
//! actions and subtasks, and must never offer a subtask that is itself
//! inadmissible there.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::mdp::{ActionRef, StateId, TaskId};

/// Environment-level episode outcome attached to a transition.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TerminalKind {
    None,
    Success,
    Failure,
}

impl fmt::Display for TerminalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TerminalKind::None => "none",
            TerminalKind::Success => "success",
            TerminalKind::Failure => "failure",
        };
        f.write_str(s)
    }
}

/// Everything a reward hook may inspect about the transition it is asked
/// to judge.
#[derive(Clone, Copy, Debug)]
pub struct RewardContext {
    pub task: TaskId,
    pub s: StateId,
    /// The action this task chose (primitive or subtask).
    pub a: ActionRef,
    pub raw_reward: f64,
    pub s_prime: StateId,
    pub env_terminal: TerminalKind,
    /// Whether `a` finished at `s_prime` (primitives always do).
    pub subtask_completed: bool,
    /// The primitive that actually executed at the leaf this step.
    pub leaf_primitive: u8,
}

/// Outcome of a task's reward hooks for one transition.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum HookResult {
    Rejected,
    Accepted(f64),
}

type AdmissibleFn = dyn Fn(StateId) -> bool + Send + Sync;
type ActionsFn = dyn Fn(StateId) -> Vec<ActionRef> + Send + Sync;
type RejectFn = dyn Fn(&RewardContext) -> bool + Send + Sync;
type TransformFn = dyn Fn(&RewardContext) -> f64 + Send + Sync;

/// One node of the task graph.
pub struct TaskDef {
    id: TaskId,
    name: String,
    share_key: String,
    share_index: u16,
    is_root: bool,
    admissible: Box<AdmissibleFn>,
    actions: Box<ActionsFn>,
    reject: Box<RejectFn>,
    transform: Box<TransformFn>,
}

impl TaskDef {
    pub fn id(&self) -> TaskId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn share_key(&self) -> &str {
        &self.share_key
    }

    /// Interned index of the share key within the owning hierarchy.
    pub fn share_index(&self) -> u16 {
        self.share_index
    }

    pub fn is_root(&self) -> bool {
        self.is_root
    }

    /// Membership in the task's admissible state set.
    pub fn admissible(&self, s: StateId) -> bool {
        (self.admissible)(s)
    }

    /// Ordered action set offered in `s`.
    pub fn actions(&self, s: StateId) -> Vec<ActionRef> {
        (self.actions)(s)
    }
}

impl fmt::Debug for TaskDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaskDef")
            .field("id", &self.id)
            .field("name", &self.name)
            .field("share_key", &self.share_key)
            .field("is_root", &self.is_root)
            .finish()
    }
}

/// Builder for a [`TaskDef`]; hooks default to identity, the share key
/// defaults to the task name.
pub struct TaskDefBuilder {
    name: String,
    share_key: Option<String>,
    admissible: Box<AdmissibleFn>,
    actions: Box<ActionsFn>,
    reject: Box<RejectFn>,
    transform: Box<TransformFn>,
}

impl TaskDefBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            share_key: None,
            admissible: Box::new(|_| true),
            actions: Box::new(|_| Vec::new()),
            reject: Box::new(|_| false),
            transform: Box::new(|ctx| ctx.raw_reward),
        }
    }

    pub fn share_key(mut self, key: impl Into<String>) -> Self {
        self.share_key = Some(key.into());
        self
    }

    pub fn admissible(mut self, f: impl Fn(StateId) -> bool + Send + Sync + 'static) -> Self {
        self.admissible = Box::new(f);
        self
    }

    pub fn actions(mut self, f: impl Fn(StateId) -> Vec<ActionRef> + Send + Sync + 'static) -> Self {
        self.actions = Box::new(f);
        self
    }

    pub fn reject_reward(mut self, f: impl Fn(&RewardContext) -> bool + Send + Sync + 'static) -> Self {
        self.reject = Box::new(f);
        self
    }

    pub fn transform_reward(mut self, f: impl Fn(&RewardContext) -> f64 + Send + Sync + 'static) -> Self {
        self.transform = Box::new(f);
        self
    }
}

/// Immutable task graph with a designated root.
pub struct Hierarchy {
    tasks: Vec<TaskDef>,
    root: TaskId,
    share_keys: Vec<String>,
}

impl Hierarchy {
    pub fn builder() -> HierarchyBuilder {
        HierarchyBuilder::default()
    }

    pub fn root_id(&self) -> TaskId {
        self.root
    }

    pub fn root(&self) -> &TaskDef {
        &self.tasks[self.root.0]
    }

    pub fn task(&self, id: TaskId) -> &TaskDef {
        &self.tasks[id.0]
    }

    pub fn try_task(&self, id: TaskId) -> Option<&TaskDef> {
        self.tasks.get(id.0)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskDef> {
        self.tasks.iter()
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Interned share-key names, indexed by [`TaskDef::share_index`].
    pub fn share_keys(&self) -> &[String] {
        &self.share_keys
    }

    /// Structural diagnostics over a state sample: cycles, dangling task
    /// references, and subtasks offered where they are inadmissible.
    /// An empty result means the hierarchy is valid over the sample.
    pub fn validate(&self, sample_states: &[StateId]) -> Vec<Diagnostic> {
        let mut out = Vec::new();

        // edge set over the sample (task -> subtask)
        let mut edges: Vec<HashSet<usize>> = vec![HashSet::new(); self.tasks.len()];
        for task in &self.tasks {
            for &s in sample_states {
                if !task.admissible(s) {
                    continue;
                }
                for a in task.actions(s) {
                    if let ActionRef::Task(sub) = a {
                        match self.try_task(sub) {
                            None => out.push(Diagnostic {
                                kind: DiagnosticKind::DanglingTask,
                                detail: format!("task `{}` offers unknown task id {}", task.name(), sub.0),
                            }),
                            Some(subdef) => {
                                edges[task.id.0].insert(sub.0);
                                if !subdef.admissible(s) {
                                    out.push(Diagnostic {
                                        kind: DiagnosticKind::InadmissibleSubtask,
                                        detail: format!(
                                            "task `{}` offers `{}` in state {s} where it is inadmissible",
                                            task.name(),
                                            subdef.name()
                                        ),
                                    });
                                }
                            }
                        }
                    }
                }
                if task.actions(s).is_empty() {
                    out.push(Diagnostic {
                        kind: DiagnosticKind::EmptyActionSet,
                        detail: format!("task `{}` is admissible in state {s} but offers no actions", task.name()),
                    });
                }
            }
        }

        // cycle check by DFS from the root over the sampled edge set
        let mut color = vec![0u8; self.tasks.len()]; // 0 unvisited, 1 on stack, 2 done
        let mut stack = vec![(self.root.0, false)];
        while let Some((node, leaving)) = stack.pop() {
            if leaving {
                color[node] = 2;
                continue;
            }
            if color[node] == 1 {
                continue;
            }
            color[node] = 1;
            stack.push((node, true));
            for &next in &edges[node] {
                match color[next] {
                    0 => stack.push((next, false)),
                    1 => out.push(Diagnostic {
                        kind: DiagnosticKind::Cycle,
                        detail: format!(
                            "cycle through `{}` -> `{}`",
                            self.tasks[node].name(),
                            self.tasks[next].name()
                        ),
                    }),
                    _ => {}
                }
            }
        }

        out
    }
}

impl fmt::Debug for Hierarchy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Hierarchy")
            .field("tasks", &self.tasks)
            .field("root", &self.root)
            .finish()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DiagnosticKind {
    Cycle,
    DanglingTask,
    InadmissibleSubtask,
    EmptyActionSet,
}

#[derive(Clone, Debug)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub detail: String,
}

#[derive(Default)]
pub struct HierarchyBuilder {
    tasks: Vec<TaskDef>,
    share_keys: Vec<String>,
    root: Option<TaskId>,
}

impl HierarchyBuilder {
    /// Registers a task and returns its id. Ids are assigned in insertion
    /// order, so subtasks referenced by closures should be added first.
    pub fn add_task(&mut self, b: TaskDefBuilder) -> TaskId {
        let id = TaskId(self.tasks.len());
        let share_key = b.share_key.unwrap_or_else(|| b.name.clone());
        let share_index = match self.share_keys.iter().position(|k| k == &share_key) {
            Some(i) => i as u16,
            None => {
                self.share_keys.push(share_key.clone());
                (self.share_keys.len() - 1) as u16
            }
        };
        self.tasks.push(TaskDef {
            id,
            name: b.name,
            share_key,
            share_index,
            is_root: false,
            admissible: b.admissible,
            actions: b.actions,
            reject: b.reject,
            transform: b.transform,
        });
        id
    }

    pub fn set_root(&mut self, id: TaskId) {
        self.root = Some(id);
    }

    pub fn build(mut self) -> Result<Hierarchy> {
        let root = self.root.ok_or_else(|| Error::Config("hierarchy has no root task".into()))?;
        if root.0 >= self.tasks.len() {
            return Err(Error::Config(format!("root task id {} is unknown", root.0)));
        }
        self.tasks[root.0].is_root = true;
        Ok(Hierarchy { tasks: self.tasks, root, share_keys: self.share_keys })
    }
}

/// How a task relates to the state reached after one primitive step.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TransitionClass {
    /// The task left its admissible set: it completed at `s_prime`.
    TaskCompleted,
    /// The task continues and its chosen subtask can keep running.
    TaskContinuesActionContinues,
    /// The task continues; the chosen action (primitive or finished
    /// subtask) is done.
    TaskContinuesActionDone,
    /// Neither continuation nor completion applies; no backup is made.
    TaskAborted,
}

/// Classifies one transition from the perspective of `task` having chosen
/// `a`. `offered_by_parent` answers "is this task still offered by its
/// parent context at `s_prime`?" (always true for the root).
pub fn classify_transition(
    h: &Hierarchy,
    task: &TaskDef,
    a: ActionRef,
    s_prime: StateId,
    offered_by_parent: bool,
) -> Result<TransitionClass> {
    if !task.admissible(s_prime) {
        return Ok(TransitionClass::TaskCompleted);
    }
    if let ActionRef::Task(sub) = a {
        let subdef = h
            .try_task(sub)
            .ok_or_else(|| Error::Config(format!("unresolved task id {} chosen by `{}`", sub.0, task.name())))?;
        if subdef.admissible(s_prime) && task.actions(s_prime).contains(&a) {
            return Ok(TransitionClass::TaskContinuesActionContinues);
        }
    }
    if offered_by_parent {
        Ok(TransitionClass::TaskContinuesActionDone)
    } else {
        Ok(TransitionClass::TaskAborted)
    }
}

/// Runs the task's hooks: rejection short-circuits, otherwise the
/// transformed reward is returned.
pub fn apply_reward_hooks(task: &TaskDef, ctx: &RewardContext) -> Result<HookResult> {
    if (task.reject)(ctx) {
        return Ok(HookResult::Rejected);
    }
    let r = (task.transform)(ctx);
    if !r.is_finite() {
        return Err(Error::Hook { task: task.name().to_string() });
    }
    Ok(HookResult::Accepted(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(raw: f64) -> RewardContext {
        RewardContext {
            task: TaskId(0),
            s: StateId(0),
            a: ActionRef::Primitive(0),
            raw_reward: raw,
            s_prime: StateId(1),
            env_terminal: TerminalKind::None,
            subtask_completed: true,
            leaf_primitive: 0,
        }
    }

    #[test]
    fn identity_hooks_accept_unchanged() {
        let mut b = Hierarchy::builder();
        let t = b.add_task(TaskDefBuilder::new("t").actions(|_| vec![ActionRef::Primitive(0)]));
        b.set_root(t);
        let h = b.build().unwrap();
        assert_eq!(apply_reward_hooks(h.task(t), &ctx(-1.0)).unwrap(), HookResult::Accepted(-1.0));
    }

    #[test]
    fn rejection_short_circuits_transformation() {
        use std::sync::atomic::{AtomicBool, Ordering};
        static TOUCHED: AtomicBool = AtomicBool::new(false);
        let mut b = Hierarchy::builder();
        let t = b.add_task(
            TaskDefBuilder::new("t")
                .actions(|_| vec![ActionRef::Primitive(0)])
                .reject_reward(|c| c.raw_reward == -10.0)
                .transform_reward(|c| {
                    TOUCHED.store(true, Ordering::SeqCst);
                    c.raw_reward
                }),
        );
        b.set_root(t);
        let h = b.build().unwrap();
        assert_eq!(apply_reward_hooks(h.task(t), &ctx(-10.0)).unwrap(), HookResult::Rejected);
        assert!(!TOUCHED.load(Ordering::SeqCst));
        assert_eq!(apply_reward_hooks(h.task(t), &ctx(-1.0)).unwrap(), HookResult::Accepted(-1.0));
        assert!(TOUCHED.load(Ordering::SeqCst));
    }

    #[test]
    fn non_finite_transform_is_a_hook_error() {
        let mut b = Hierarchy::builder();
        let t = b.add_task(
            TaskDefBuilder::new("t")
                .actions(|_| vec![ActionRef::Primitive(0)])
                .transform_reward(|_| f64::NAN),
        );
        b.set_root(t);
        let h = b.build().unwrap();
        assert!(apply_reward_hooks(h.task(t), &ctx(-1.0)).is_err());
    }

    #[test]
    fn self_loop_yields_cycle_diagnostic() {
        let mut b = Hierarchy::builder();
        let t = b.add_task(
            TaskDefBuilder::new("root").actions(|_| vec![ActionRef::Task(TaskId(0))]),
        );
        b.set_root(t);
        let h = b.build().unwrap();
        let diags = h.validate(&[StateId(0)]);
        assert!(diags.iter().any(|d| d.kind == DiagnosticKind::Cycle));
    }

    #[test]
    fn inadmissible_subtask_is_reported() {
        let mut b = Hierarchy::builder();
        let sub = b.add_task(
            TaskDefBuilder::new("sub")
                .admissible(|_| false)
                .actions(|_| vec![ActionRef::Primitive(0)]),
        );
        let root = b.add_task(
            TaskDefBuilder::new("root").actions(move |_| vec![ActionRef::Task(sub)]),
        );
        b.set_root(root);
        let h = b.build().unwrap();
        let diags = h.validate(&[StateId(0)]);
        assert_eq!(
            diags.iter().filter(|d| d.kind == DiagnosticKind::InadmissibleSubtask).count(),
            1
        );
    }

    #[test]
    fn classification_branches() {
        let mut b = Hierarchy::builder();
        let sub = b.add_task(
            TaskDefBuilder::new("sub")
                .admissible(|s| s.0 < 5)
                .actions(|_| vec![ActionRef::Primitive(0)]),
        );
        let root = b.add_task(
            TaskDefBuilder::new("root")
                .admissible(|s| s.0 < 10)
                .actions(move |_| vec![ActionRef::Task(sub), ActionRef::Primitive(0)]),
        );
        b.set_root(root);
        let h = b.build().unwrap();
        let root_t = h.task(root);

        // root leaves its admissible set
        assert_eq!(
            classify_transition(&h, root_t, ActionRef::Task(sub), StateId(10), true).unwrap(),
            TransitionClass::TaskCompleted
        );
        // subtask still admissible and offered
        assert_eq!(
            classify_transition(&h, root_t, ActionRef::Task(sub), StateId(3), true).unwrap(),
            TransitionClass::TaskContinuesActionContinues
        );
        // subtask completed, root still offered
        assert_eq!(
            classify_transition(&h, root_t, ActionRef::Task(sub), StateId(7), true).unwrap(),
            TransitionClass::TaskContinuesActionDone
        );
        // primitives are always "done" when the task continues
        assert_eq!(
            classify_transition(&h, root_t, ActionRef::Primitive(0), StateId(3), true).unwrap(),
            TransitionClass::TaskContinuesActionDone
        );
        // no parent support and nothing to continue: aborted
        assert_eq!(
            classify_transition(&h, root_t, ActionRef::Primitive(0), StateId(3), false).unwrap(),
            TransitionClass::TaskAborted
        );
    }
}
