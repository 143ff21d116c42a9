//! The temporal-difference learner variants behind one backup-request
//! interface.
//!
//! All six variants consume the same per-step [`BackupRequest`]s produced
//! by the executor; they differ in how they react to exploration below the
//! requesting level:
//!
//! * `naive_q0` applies every backup (the documented failure mode),
//! * `fixed_q0` and `fixed_osio` skip gated backups,
//! * `watkins_fixed` skips and clears its eligibility trace,
//! * `tsdt` skips inserting gated entries into its replay trace,
//! * `gtsdt` stores everything plus the subtask decisions needed to
//!   re-judge each entry later, and blocks entries whose recorded
//!   decisions currently look non-greedy.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::executor::{BackupKind, BackupRequest};
use crate::hierarchy::Hierarchy;
use crate::mdp::{self, ActionRef, LearningParams, QStore, StateId};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LearnerVariant {
    NaiveQ0,
    FixedQ0,
    FixedOsio,
    WatkinsFixed,
    Tsdt,
    Gtsdt,
}

impl LearnerVariant {
    pub const ALL: [LearnerVariant; 6] = [
        LearnerVariant::NaiveQ0,
        LearnerVariant::FixedQ0,
        LearnerVariant::FixedOsio,
        LearnerVariant::WatkinsFixed,
        LearnerVariant::Tsdt,
        LearnerVariant::Gtsdt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LearnerVariant::NaiveQ0 => "naive_q0",
            LearnerVariant::FixedQ0 => "fixed_q0",
            LearnerVariant::FixedOsio => "fixed_osio",
            LearnerVariant::WatkinsFixed => "watkins_fixed",
            LearnerVariant::Tsdt => "tsdt",
            LearnerVariant::Gtsdt => "gtsdt",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown learner variant `{s}`")))
    }
}

impl fmt::Display for LearnerVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One stored replay record: the request plus a blocked flag that is
/// recomputed from the current store before each sweep.
#[derive(Clone, Debug)]
pub struct TraceEntry {
    pub req: BackupRequest,
    pub blocked: bool,
}

/// A TD learner confined to one run.
pub struct Learner {
    variant: LearnerVariant,
    params: LearningParams,
    tie_epsilon: f64,
    /// Eligibilities for the Watkins variant, keyed like Q cells.
    eligibility: HashMap<(u16, StateId, ActionRef), f64>,
    /// Episode-scoped replay trace for tsdt/gtsdt, in insertion order.
    replay: Vec<TraceEntry>,
    /// Cap on entries processed per sweep (newest first); None = all.
    max_sweep_entries: Option<usize>,
}

const ELIGIBILITY_PRUNE: f64 = 1e-8;

impl Learner {
    pub fn new(variant: LearnerVariant, params: LearningParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            variant,
            params,
            tie_epsilon: 0.0,
            eligibility: HashMap::new(),
            replay: Vec::new(),
            max_sweep_entries: None,
        })
    }

    pub fn with_max_sweep_entries(mut self, cap: Option<usize>) -> Self {
        self.max_sweep_entries = cap;
        self
    }

    pub fn with_tie_epsilon(mut self, tie_epsilon: f64) -> Self {
        self.tie_epsilon = tie_epsilon;
        self
    }

    pub fn variant(&self) -> LearnerVariant {
        self.variant
    }

    pub fn params(&self) -> LearningParams {
        self.params
    }

    pub fn trace_len(&self) -> usize {
        match self.variant {
            LearnerVariant::WatkinsFixed => self.eligibility.len(),
            _ => self.replay.len(),
        }
    }

    pub fn replay_entries(&self) -> &[TraceEntry] {
        &self.replay
    }

    /// Handles one backup request. `exploring_below` is the OR of the
    /// non-greedy flags strictly below the requesting level this step.
    pub fn on_request(
        &mut self,
        h: &Hierarchy,
        req: &BackupRequest,
        exploring_below: bool,
        store: &mut QStore,
    ) -> Result<()> {
        match self.variant {
            LearnerVariant::NaiveQ0 => self.apply_q0(h, req, store),
            LearnerVariant::FixedQ0 => {
                if exploring_below {
                    return Ok(());
                }
                self.apply_q0(h, req, store)
            }
            LearnerVariant::FixedOsio => {
                if exploring_below {
                    return Ok(());
                }
                let task = h.task(req.task);
                let target = compute_target(req.kind, req.r_prime, self.params.gamma, store, task, req.s_prime, req.a)?;
                mdp::q_update(store, task, req.s, req.a, target, self.params.alpha)?;
                Ok(())
            }
            LearnerVariant::WatkinsFixed => {
                if exploring_below {
                    self.eligibility.clear();
                    return Ok(());
                }
                self.apply_watkins(h, req, store)
            }
            LearnerVariant::Tsdt => {
                if exploring_below {
                    return Ok(());
                }
                let mut stored = req.clone();
                stored.gate_decisions.clear();
                self.replay.push(TraceEntry { req: stored, blocked: false });
                Ok(())
            }
            LearnerVariant::Gtsdt => {
                self.replay.push(TraceEntry { req: req.clone(), blocked: false });
                Ok(())
            }
        }
    }

    /// Q(0) backup: max-valued target at the successor, immediate reward
    /// only on task termination.
    fn apply_q0(&self, h: &Hierarchy, req: &BackupRequest, store: &mut QStore) -> Result<()> {
        let task = h.task(req.task);
        let target = match req.kind {
            BackupKind::Terminal => req.r_prime,
            _ => req.r_prime + self.params.gamma * mdp::v_of(store, task, req.s_prime)?,
        };
        mdp::q_update(store, task, req.s, req.a, target, self.params.alpha)?;
        Ok(())
    }

    fn apply_watkins(&mut self, h: &Hierarchy, req: &BackupRequest, store: &mut QStore) -> Result<()> {
        let task = h.task(req.task);
        let target = compute_target(req.kind, req.r_prime, self.params.gamma, store, task, req.s_prime, req.a)?;
        let cell = (task.share_index(), req.s, req.a);
        let delta = target - store.raw_get(cell.0, cell.1, cell.2);
        self.eligibility.insert(cell, 1.0);
        let alpha = self.params.alpha;
        for (&(share, s, a), &e) in self.eligibility.iter() {
            let old = store.raw_get(share, s, a);
            store.raw_update(share, s, a, old + delta * e, alpha)?;
        }
        let decay = self.params.gamma * self.params.lambda;
        self.eligibility.retain(|_, e| {
            *e *= decay;
            *e >= ELIGIBILITY_PRUNE
        });
        // standard Watkins cut: a non-greedy choice at the requesting
        // level invalidates everything upstream of it
        if !mdp::is_greedy(store, task, req.s, req.a, self.tie_epsilon)? {
            self.eligibility.clear();
        }
        Ok(())
    }

    /// One replay pass, newest to oldest, recomputing targets from the
    /// current store. GTSDT first re-judges every entry's gate decisions
    /// against the current store. Returns the number of applied backups.
    pub fn sweep(&mut self, h: &Hierarchy, store: &mut QStore) -> Result<usize> {
        match self.variant {
            LearnerVariant::Tsdt | LearnerVariant::Gtsdt => {}
            _ => return Ok(0),
        }
        if self.variant == LearnerVariant::Gtsdt {
            for entry in &mut self.replay {
                let mut blocked = false;
                for d in &entry.req.gate_decisions {
                    if !mdp::is_greedy(store, h.task(d.task), d.s, d.a, self.tie_epsilon)? {
                        blocked = true;
                        break;
                    }
                }
                entry.blocked = blocked;
            }
        }
        let budget = self.max_sweep_entries.unwrap_or(usize::MAX);
        let mut applied = 0usize;
        for i in (0..self.replay.len()).rev() {
            if self.replay.len() - 1 - i >= budget {
                break;
            }
            if self.replay[i].blocked {
                continue;
            }
            let req = self.replay[i].req.clone();
            let task = h.task(req.task);
            let target = compute_target(req.kind, req.r_prime, self.params.gamma, store, task, req.s_prime, req.a)?;
            mdp::q_update(store, task, req.s, req.a, target, self.params.alpha)?;
            applied += 1;
        }
        Ok(applied)
    }

    /// Clears all episode-scoped trace state; the Q store is untouched.
    pub fn on_episode_end(&mut self) {
        self.eligibility.clear();
        self.replay.clear();
    }
}

impl fmt::Debug for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Learner")
            .field("variant", &self.variant)
            .field("params", &self.params)
            .field("trace_len", &self.trace_len())
            .finish()
    }
}

/// TD target for one backup request kind:
///
/// * continuation: `r' + gamma * Q_task(s', a)` (same-action bootstrap),
/// * completion: `r' + gamma * V_task(s')`,
/// * terminal: `r'` alone (no bootstrapping past task completion).
pub fn compute_target(
    kind: BackupKind,
    r_prime: f64,
    gamma: f64,
    store: &QStore,
    task: &crate::hierarchy::TaskDef,
    s_prime: StateId,
    a: ActionRef,
) -> Result<f64> {
    match kind {
        BackupKind::Terminal => Ok(r_prime),
        BackupKind::Completion => Ok(r_prime + gamma * mdp::v_of(store, task, s_prime)?),
        BackupKind::Continuation => {
            if !a.is_task() {
                return Err(Error::Param(format!(
                    "continuation backup for task `{}` names primitive action {a}",
                    task.name()
                )));
            }
            Ok(r_prime + gamma * mdp::q_get(store, task, s_prime, a))
        }
    }
}
