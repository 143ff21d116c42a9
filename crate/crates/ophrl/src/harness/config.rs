//! Experiment configuration: a flat key/value text format with dotted
//! keys, chosen for diff-friendly experiment matrices.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::envs::{AgentShape, Domain};
use crate::error::{Error, Result};
use crate::exploration::{CommitmentSchedule, PolicySpec};
use crate::executor::UpdatingMode;
use crate::learners::LearnerVariant;
use crate::mdp::LearningParams;

/// Everything one experiment needs: domain, agent, learner, policies,
/// schedules, episode counts and seeds.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub name: String,
    pub domain: Domain,
    pub agent: AgentShape,
    pub learner: LearnerVariant,
    pub params: LearningParams,
    pub root_policy: PolicySpec,
    pub subtask_policy: PolicySpec,
    pub updating: UpdatingMode,
    pub commitment: CommitmentSchedule,
    pub episodes: u32,
    pub seeds: Vec<u64>,
    pub step_limit: u32,
    pub smoothing_window: u32,
    pub tie_epsilon: f64,
    pub max_sweep_entries: Option<usize>,
    /// Episodes of the post-training greedy evaluation.
    pub eval_episodes: u32,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("experiment name must not be empty".into()));
        }
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.step_limit == 0 {
            return Err(Error::Config("step_limit must be >= 1".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be >= 1".into()));
        }
        if let Domain::Cliff { width } = self.domain {
            if width < 2 {
                return Err(Error::Config("cliff.width must be >= 2".into()));
            }
        }
        self.params.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.tie_epsilon >= 0.0) {
            return Err(Error::Config("tie_epsilon must be >= 0".into()));
        }
        Ok(())
    }

    /// Parses the flat `key = value` format; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1))
            })?;
            kv.insert(key.trim().to_string(), value.trim().to_string());
        }
        Self::from_map(&mut kv)
    }

    fn from_map(kv: &mut BTreeMap<String, String>) -> Result<Self> {
        fn take(kv: &mut BTreeMap<String, String>, key: &str) -> Option<String> {
            kv.remove(key)
        }
        fn req(kv: &mut BTreeMap<String, String>, key: &str) -> Result<String> {
            take(kv, key).ok_or_else(|| Error::Config(format!("missing key `{key}`")))
        }
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{value}`")))
        }

        let name = req(kv, "name")?;
        let domain = match req(kv, "domain")?.as_str() {
            "bandit" => Domain::Bandit,
            "cliff" => {
                let w = take(kv, "cliff.width").unwrap_or_else(|| "100".into());
                Domain::Cliff { width: num("cliff.width", &w)? }
            }
            "taxi" => Domain::Taxi,
            other => return Err(Error::Config(format!("unknown domain `{other}`"))),
        };
        let agent = AgentShape::parse(&req(kv, "agent")?)?;
        let learner = LearnerVariant::parse(&req(kv, "learner")?)?;
        let params = LearningParams {
            alpha: num("alpha", &take(kv, "alpha").unwrap_or_else(|| "0.1".into()))?,
            gamma: num("gamma", &take(kv, "gamma").unwrap_or_else(|| "1.0".into()))?,
            lambda: num("lambda", &take(kv, "lambda").unwrap_or_else(|| "0.9".into()))?,
        };
        let root_policy = parse_policy(kv, "policy.root")?;
        let subtask_policy = parse_policy(kv, "policy.subtask")?;
        let updating = UpdatingMode::parse(&take(kv, "updating").unwrap_or_else(|| "active_path".into()))?;
        let commitment = CommitmentSchedule::new(
            num("commitment.start", &take(kv, "commitment.start").unwrap_or_else(|| "0".into()))?,
            num("commitment.end", &take(kv, "commitment.end").unwrap_or_else(|| "0".into()))?,
            num("commitment.episodes", &take(kv, "commitment.episodes").unwrap_or_else(|| "1".into()))?,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        let episodes = num("episodes", &req(kv, "episodes")?)?;
        let seeds = req(kv, "seeds")?
            .split(',')
            .map(|s| num::<u64>("seeds", s.trim()))
            .collect::<Result<Vec<u64>>>()?;
        let step_limit = num("step_limit", &take(kv, "step_limit").unwrap_or_else(|| "10000".into()))?;
        let smoothing_window =
            num("smoothing_window", &take(kv, "smoothing_window").unwrap_or_else(|| "100".into()))?;
        let tie_epsilon = num("tie_epsilon", &take(kv, "tie_epsilon").unwrap_or_else(|| "0".into()))?;
        let max_sweep_entries = match take(kv, "max_sweep_entries") {
            None => None,
            Some(v) if v == "unbounded" => None,
            Some(v) => Some(num::<usize>("max_sweep_entries", &v)?),
        };
        let eval_episodes =
            num("eval_episodes", &take(kv, "eval_episodes").unwrap_or_else(|| "100".into()))?;
        let out_dir = PathBuf::from(take(kv, "out_dir").unwrap_or_else(|| "out".into()));

        if let Some(stray) = kv.keys().next() {
            return Err(Error::Config(format!("unknown key `{stray}`")));
        }

        let cfg = Self {
            name,
            domain,
            agent,
            learner,
            params,
            root_policy,
            subtask_policy,
            updating,
            commitment,
            episodes,
            seeds,
            step_limit,
            smoothing_window,
            tie_epsilon,
            max_sweep_entries,
            eval_episodes,
            out_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides on top of this config.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        let mut kv = self.to_map();
        for (k, v) in overrides {
            kv.insert(k.clone(), v.clone());
        }
        Self::from_map(&mut kv)
    }

    fn to_map(&self) -> BTreeMap<String, String> {
        let mut kv = BTreeMap::new();
        write_policy(&mut kv, "policy.root", &self.root_policy);
        write_policy(&mut kv, "policy.subtask", &self.subtask_policy);
        let mut put = |k: &str, v: String| {
            kv.insert(k.to_string(), v);
        };
        put("name", self.name.clone());
        put("domain", self.domain.name().to_string());
        if let Domain::Cliff { width } = self.domain {
            put("cliff.width", width.to_string());
        }
        put("agent", self.agent.name().to_string());
        put("learner", self.learner.name().to_string());
        put("alpha", self.params.alpha.to_string());
        put("gamma", self.params.gamma.to_string());
        put("lambda", self.params.lambda.to_string());
        put("updating", self.updating.name().to_string());
        put("commitment.start", self.commitment.kappa_start.to_string());
        put("commitment.end", self.commitment.kappa_end.to_string());
        put("commitment.episodes", self.commitment.total_episodes.to_string());
        put("episodes", self.episodes.to_string());
        put(
            "seeds",
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        );
        put("step_limit", self.step_limit.to_string());
        put("smoothing_window", self.smoothing_window.to_string());
        put("tie_epsilon", self.tie_epsilon.to_string());
        if let Some(cap) = self.max_sweep_entries {
            put("max_sweep_entries", cap.to_string());
        }
        put("eval_episodes", self.eval_episodes.to_string());
        put("out_dir", self.out_dir.display().to_string());
        kv
    }

    /// Renders the config back to its text format, keys sorted.
    pub fn to_text(&self) -> String {
        let kv = self.to_map();
        let mut out = String::new();
        for (k, v) in kv {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

fn parse_policy(kv: &mut BTreeMap<String, String>, prefix: &str) -> Result<PolicySpec> {
    let variant = kv
        .remove(&format!("{prefix}.variant"))
        .unwrap_or_else(|| "forced_greedy".into());
    let mut get = |suffix: &str, default: &str| -> Result<f64> {
        let key = format!("{prefix}.{suffix}");
        let v = kv.remove(&key).unwrap_or_else(|| default.into());
        v.parse().map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{v}`")))
    };
    match variant.as_str() {
        "epsilon_greedy" => {
            PolicySpec::epsilon_greedy(get("epsilon", "0.1")?).map_err(|e| Error::Config(e.to_string()))
        }
        "boltzmann" => PolicySpec::boltzmann(
            get("temperature", "0.5")?,
            get("cooling", "1.0")?,
            get("floor", "0.001")?,
        )
        .map_err(|e| Error::Config(e.to_string())),
        "forced_greedy" => Ok(PolicySpec::ForcedGreedy),
        other => Err(Error::Config(format!("unknown policy variant `{other}` for {prefix}"))),
    }
}

fn write_policy(kv: &mut BTreeMap<String, String>, prefix: &str, policy: &PolicySpec) {
    match policy {
        PolicySpec::EpsilonGreedy { epsilon } => {
            kv.insert(format!("{prefix}.variant"), "epsilon_greedy".into());
            kv.insert(format!("{prefix}.epsilon"), epsilon.to_string());
        }
        PolicySpec::Boltzmann { temperature, cooling, floor } => {
            kv.insert(format!("{prefix}.variant"), "boltzmann".into());
            kv.insert(format!("{prefix}.temperature"), temperature.to_string());
            kv.insert(format!("{prefix}.cooling"), cooling.to_string());
            kv.insert(format!("{prefix}.floor"), floor.to_string());
        }
        PolicySpec::ForcedGreedy => {
            kv.insert(format!("{prefix}.variant"), "forced_greedy".into());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# a desk-scale cliff run
name = demo
domain = cliff
cliff.width = 20
agent = paper
learner = gtsdt
alpha = 0.1
policy.root.variant = epsilon_greedy
policy.root.epsilon = 0.1
policy.subtask.variant = boltzmann
policy.subtask.temperature = 0.5
updating = all_goals
episodes = 100
seeds = 1, 2, 3
";

    #[test]
    fn parse_round_trip() {
        let cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.name, "demo");
        assert_eq!(cfg.domain, Domain::Cliff { width: 20 });
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.updating, UpdatingMode::AllGoals);
        let text = cfg.to_text();
        let cfg2 = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg2.to_text(), text);
    }

    #[test]
    fn zero_episodes_rejected() {
        let bad = SAMPLE.replace("episodes = 100", "episodes = 0");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        let bad = format!("{SAMPLE}\nmystery = 1\n");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }

    #[test]
    fn overrides_apply() {
        let cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        let cfg2 = cfg
            .with_overrides(&[("learner".into(), "fixed_q0".into()), ("episodes".into(), "7".into())])
            .unwrap();
        assert_eq!(cfg2.learner, LearnerVariant::FixedQ0);
        assert_eq!(cfg2.episodes, 7);
    }
}
