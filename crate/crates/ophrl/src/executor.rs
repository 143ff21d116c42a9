//! The recursive polling step: action selection at every level of the
//! hierarchy on every primitive step, exploring-flag propagation, backup
//! request generation, commitment, and updating-mode dispatch.
//!
//! Each step descends from the root choosing one action per level (either
//! re-polling the level's policy or, with probability kappa, continuing
//! the remembered subtask), executes exactly one primitive, and on the
//! way back up hands each level's backup request to the learner. A
//! level's request carries the OR of the non-greedy flags strictly below
//! it; whether that flag suppresses the update is the learner's call.

use rand::Rng;

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::exploration::{self, PolicySpec};
use crate::hierarchy::{
    apply_reward_hooks, classify_transition, Hierarchy, HookResult, RewardContext, TerminalKind,
    TransitionClass,
};
use crate::learners::Learner;
use crate::mdp::{self, ActionRef, QStore, StateId, TaskId};

/// Which backup equation a request calls for.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BackupKind {
    /// The chosen subtask keeps running: same-action bootstrap.
    Continuation,
    /// The chosen action finished while the task continues: max bootstrap.
    Completion,
    /// The task itself completed: immediate reward only.
    Terminal,
}

/// One subtask-level decision recorded for later re-judgement.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Decision {
    pub task: TaskId,
    pub s: StateId,
    pub a: ActionRef,
}

/// One pending TD backup.
#[derive(Clone, Debug)]
pub struct BackupRequest {
    pub task: TaskId,
    pub s: StateId,
    pub a: ActionRef,
    pub kind: BackupKind,
    /// Reward after the task's transformation hook.
    pub r_prime: f64,
    pub s_prime: StateId,
    /// Every decision strictly below the requesting level this step.
    pub gate_decisions: Vec<Decision>,
    /// OR of non-greedy flags strictly below the requesting level.
    pub exploring_below: bool,
}

/// One entry of the root-to-leaf decision path.
#[derive(Clone, Copy, Debug)]
pub struct PathEntry {
    pub task: TaskId,
    pub s: StateId,
    pub a: ActionRef,
    /// Whether the choice was in the level's greedy set, judged after the
    /// level's own backup was handed to the learner.
    pub was_greedy: bool,
}

/// Everything one polling step produced.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub raw_reward: f64,
    pub s_prime: StateId,
    pub terminal: TerminalKind,
    /// OR of non-greedy flags strictly below the root.
    pub exploring_in_subtask: bool,
    pub backup_requests: Vec<BackupRequest>,
    /// Root-to-leaf decisions; exactly one primitive at the leaf.
    pub decision_path: Vec<PathEntry>,
}

/// Remembered in-progress subtasks and the commitment probability.
#[derive(Clone, Debug, Default)]
pub struct CommitmentState {
    /// Root-down prefix of (task, chosen subtask) pairs still in progress.
    pub active: Vec<(TaskId, ActionRef)>,
    /// Per-level probability of continuing the remembered subtask.
    pub kappa: f64,
}

impl CommitmentState {
    pub fn new(kappa: f64) -> Self {
        Self { active: Vec::new(), kappa }
    }
}

/// Per-level policies: the root policy and one shared subtask policy.
#[derive(Clone, Debug)]
pub struct PolicyBundle {
    pub root: PolicySpec,
    pub subtask: PolicySpec,
    pub tie_epsilon: f64,
}

impl PolicyBundle {
    pub fn uniform(policy: PolicySpec) -> Self {
        Self { root: policy, subtask: policy, tie_epsilon: 0.0 }
    }

    fn at_depth(&self, depth: usize) -> &PolicySpec {
        if depth == 0 {
            &self.root
        } else {
            &self.subtask
        }
    }

    /// Advances per-episode policy state (Boltzmann cooling).
    pub fn tick_episode(&mut self) {
        self.root = exploration::tick_episode(&self.root);
        self.subtask = exploration::tick_episode(&self.subtask);
    }

    /// The experiment's reported exploration temperature: the root policy
    /// temperature if it cools, otherwise the subtask policy's, else 0.
    pub fn temperature(&self) -> f64 {
        self.root
            .temperature()
            .or_else(|| self.subtask.temperature())
            .unwrap_or(0.0)
    }
}

/// How a step's experience is spread over the registered tasks.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum UpdatingMode {
    /// Only tasks on the executing path learn.
    ActivePath,
    /// Every admissible task offering the executed primitive also learns.
    AllGoals,
}

impl UpdatingMode {
    pub fn name(&self) -> &'static str {
        match self {
            UpdatingMode::ActivePath => "active_path",
            UpdatingMode::AllGoals => "all_goals",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "active_path" => Ok(UpdatingMode::ActivePath),
            "all_goals" => Ok(UpdatingMode::AllGoals),
            _ => Err(Error::Config(format!("unknown updating mode `{s}`"))),
        }
    }
}

struct StepCtx<'a, R: Rng> {
    h: &'a Hierarchy,
    env: &'a mut dyn Environment,
    policies: &'a PolicyBundle,
    commitment: &'a mut CommitmentState,
    learner: &'a mut Learner,
    store: &'a mut QStore,
    rng: &'a mut R,
    path: Vec<PathEntry>,
    requests: Vec<BackupRequest>,
    leaf_primitive: u8,
}

struct LevelOut {
    raw_reward: f64,
    s_prime: StateId,
    terminal: TerminalKind,
    exploring: bool,
}

/// Runs one polling step from the root: selects one action per level,
/// executes exactly one primitive, and unwinds emitting at most one
/// backup request per level.
pub fn ophrl_step<R: Rng>(
    h: &Hierarchy,
    env: &mut dyn Environment,
    policies: &PolicyBundle,
    commitment: &mut CommitmentState,
    learner: &mut Learner,
    store: &mut QStore,
    rng: &mut R,
) -> Result<StepOutcome> {
    let s = env.state();
    if !h.root().admissible(s) {
        return Err(Error::EpisodeStructure(format!(
            "root task `{}` is inadmissible in current state {s}",
            h.root().name()
        )));
    }
    let mut ctx = StepCtx {
        h,
        env,
        policies,
        commitment,
        learner,
        store,
        rng,
        path: Vec::new(),
        requests: Vec::new(),
        leaf_primitive: 0,
    };
    let out = descend(&mut ctx, h.root_id(), 0, true, &|_| true)?;

    // remember the surviving prefix of in-progress subtasks
    let kappa = ctx.commitment.kappa;
    let mut active = Vec::new();
    for entry in &ctx.path {
        let ActionRef::Task(sub) = entry.a else { break };
        if h.task(entry.task).admissible(out.s_prime) && h.task(sub).admissible(out.s_prime) {
            active.push((entry.task, entry.a));
        } else {
            break;
        }
    }
    *ctx.commitment = CommitmentState { active, kappa };

    Ok(StepOutcome {
        raw_reward: out.raw_reward,
        s_prime: out.s_prime,
        terminal: out.terminal,
        exploring_in_subtask: out.exploring,
        backup_requests: ctx.requests,
        decision_path: ctx.path,
    })
}

fn descend<R: Rng>(
    ctx: &mut StepCtx<'_, R>,
    task_id: TaskId,
    depth: usize,
    stack_aligned: bool,
    offered_by_parent: &dyn Fn(StateId) -> bool,
) -> Result<LevelOut> {
    let task = ctx.h.task(task_id);
    let s = ctx.env.state();
    let actions = task.actions(s);
    if actions.is_empty() {
        return Err(Error::Admissibility { task: task.name().to_string(), state: s.0 });
    }

    // continue the remembered subtask with probability kappa, provided it
    // is still admissible and still offered here
    let mut chosen: Option<ActionRef> = None;
    if ctx.commitment.kappa > 0.0 && stack_aligned {
        if let Some(&(tid, prev)) = ctx.commitment.active.get(depth) {
            if tid == task_id {
                let viable = match prev {
                    ActionRef::Task(sub) => ctx.h.task(sub).admissible(s) && actions.contains(&prev),
                    ActionRef::Primitive(_) => false,
                };
                if viable && ctx.rng.random::<f64>() < ctx.commitment.kappa {
                    chosen = Some(prev);
                }
            }
        }
    }
    let a = match chosen {
        Some(a) => a,
        None => exploration::select(
            ctx.policies.at_depth(depth),
            ctx.store,
            task,
            s,
            ctx.policies.tie_epsilon,
            ctx.rng,
        )?,
    };
    let child_aligned = stack_aligned
        && ctx
            .commitment
            .active
            .get(depth)
            .is_some_and(|&(tid, prev)| tid == task_id && prev == a);

    let my_index = ctx.path.len();
    ctx.path.push(PathEntry { task: task_id, s, a, was_greedy: false });

    let child = match a {
        ActionRef::Primitive(p) => {
            let (raw_reward, s_prime, terminal) = ctx.env.step(p, ctx.rng);
            ctx.leaf_primitive = p;
            LevelOut { raw_reward, s_prime, terminal, exploring: false }
        }
        ActionRef::Task(sub) => {
            let offers_sub = |s2: StateId| {
                ctx.h.task(sub).admissible(s2) && ctx.h.task(task_id).actions(s2).contains(&a)
            };
            descend(ctx, sub, depth + 1, child_aligned, &offers_sub)?
        }
    };

    // lines 10-21: classify, run hooks, and hand the learner this level's
    // backup request (the learner decides what exploration suppresses)
    let class = classify_transition(ctx.h, task, a, child.s_prime, offered_by_parent(child.s_prime))?;
    let kind = match class {
        TransitionClass::TaskCompleted => Some(BackupKind::Terminal),
        TransitionClass::TaskContinuesActionContinues => Some(BackupKind::Continuation),
        TransitionClass::TaskContinuesActionDone => Some(BackupKind::Completion),
        TransitionClass::TaskAborted => None,
    };
    if let Some(kind) = kind {
        let reward_ctx = RewardContext {
            task: task_id,
            s,
            a,
            raw_reward: child.raw_reward,
            s_prime: child.s_prime,
            env_terminal: child.terminal,
            subtask_completed: match a {
                ActionRef::Primitive(_) => true,
                ActionRef::Task(sub) => !ctx.h.task(sub).admissible(child.s_prime),
            },
            leaf_primitive: ctx.leaf_primitive,
        };
        if let HookResult::Accepted(r_prime) = apply_reward_hooks(task, &reward_ctx)? {
            let gate_decisions = ctx.path[my_index + 1..]
                .iter()
                .map(|e| Decision { task: e.task, s: e.s, a: e.a })
                .collect();
            let req = BackupRequest {
                task: task_id,
                s,
                a,
                kind,
                r_prime,
                s_prime: child.s_prime,
                gate_decisions,
                exploring_below: child.exploring,
            };
            ctx.learner.on_request(ctx.h, &req, child.exploring, ctx.store)?;
            ctx.requests.push(req);
        }
    }

    // line 22: this level's exploring flag, judged after its own backup
    let was_greedy = mdp::is_greedy(ctx.store, task, s, a, ctx.policies.tie_epsilon)?;
    ctx.path[my_index].was_greedy = was_greedy;
    Ok(LevelOut {
        raw_reward: child.raw_reward,
        s_prime: child.s_prime,
        terminal: child.terminal,
        exploring: !was_greedy || child.exploring,
    })
}

/// Expands a step's requests according to the updating mode. Active-path
/// returns the executed path's requests unchanged; all-goals additionally
/// synthesizes a request for every off-path task that is admissible in
/// `s` and offers the executed primitive there, judged by that task's own
/// completion test and reward hooks.
pub fn dispatch_updating_mode(
    mode: UpdatingMode,
    h: &Hierarchy,
    outcome: &StepOutcome,
) -> Result<Vec<BackupRequest>> {
    let mut all = outcome.backup_requests.clone();
    if mode == UpdatingMode::ActivePath {
        return Ok(all);
    }
    let leaf = outcome
        .decision_path
        .last()
        .ok_or_else(|| Error::EpisodeStructure("empty decision path".into()))?;
    let ActionRef::Primitive(prim) = leaf.a else {
        return Err(Error::EpisodeStructure("decision path does not end in a primitive".into()));
    };
    let s = leaf.s;
    for t in h.tasks() {
        if outcome.decision_path.iter().any(|e| e.task == t.id()) {
            continue;
        }
        if !t.admissible(s) || !t.actions(s).contains(&leaf.a) {
            continue;
        }
        let kind = if t.admissible(outcome.s_prime) {
            BackupKind::Completion
        } else {
            BackupKind::Terminal
        };
        let reward_ctx = RewardContext {
            task: t.id(),
            s,
            a: leaf.a,
            raw_reward: outcome.raw_reward,
            s_prime: outcome.s_prime,
            env_terminal: outcome.terminal,
            subtask_completed: true,
            leaf_primitive: prim,
        };
        if let HookResult::Accepted(r_prime) = apply_reward_hooks(t, &reward_ctx)? {
            all.push(BackupRequest {
                task: t.id(),
                s,
                a: leaf.a,
                kind,
                r_prime,
                s_prime: outcome.s_prime,
                gate_decisions: Vec::new(),
                exploring_below: false,
            });
        }
    }
    Ok(all)
}

/// Per-episode metrics recorded by the harness.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub run_id: String,
    pub seed: u64,
    pub episode: u32,
    pub steps: u32,
    pub episode_return: f64,
    pub terminal_kind: TerminalKind,
    pub temperature: f64,
    pub kappa: f64,
}

/// Episode-level knobs for [`run_episode`].
#[derive(Clone, Copy, Debug)]
pub struct EpisodeParams {
    pub step_limit: u32,
    pub updating: UpdatingMode,
}

impl Default for EpisodeParams {
    fn default() -> Self {
        Self { step_limit: 10_000, updating: UpdatingMode::ActivePath }
    }
}

/// Runs one episode to termination or the step limit (recorded as a
/// truncation, terminal kind `none`). The caller must have reset the
/// environment. Ticks the policy cooling once and clears episode-scoped
/// learner state on exit.
#[allow(clippy::too_many_arguments)]
pub fn run_episode<R: Rng>(
    params: EpisodeParams,
    h: &Hierarchy,
    env: &mut dyn Environment,
    learner: &mut Learner,
    policies: &mut PolicyBundle,
    commitment: &mut CommitmentState,
    store: &mut QStore,
    rng: &mut R,
) -> Result<(f64, u32, TerminalKind)> {
    let mut total = 0.0;
    let mut steps = 0u32;
    let mut terminal = TerminalKind::None;
    commitment.active.clear();
    while steps < params.step_limit {
        let outcome = ophrl_step(h, env, policies, commitment, learner, store, rng)?;
        let expanded = dispatch_updating_mode(params.updating, h, &outcome)?;
        for req in &expanded[outcome.backup_requests.len()..] {
            learner.on_request(h, req, req.exploring_below, store)?;
        }
        learner.sweep(h, store)?;
        total += outcome.raw_reward;
        steps += 1;
        if outcome.terminal != TerminalKind::None {
            terminal = outcome.terminal;
            break;
        }
    }
    learner.on_episode_end();
    policies.tick_episode();
    Ok((total, steps, terminal))
}
