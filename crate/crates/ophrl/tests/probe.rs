//! Scratch measurement harness (removed before release).

use ophrl::envs::{AgentShape, Domain};
use ophrl::exploration::{CommitmentSchedule, PolicySpec};
use ophrl::executor::UpdatingMode;
use ophrl::harness::{self, ExperimentConfig};
use ophrl::learners::LearnerVariant;
use ophrl::mdp::LearningParams;
use ophrl::oracle;
use std::path::PathBuf;

fn cliff_cfg(learner: LearnerVariant, agent: AgentShape, seeds: u64) -> ExperimentConfig {
    ExperimentConfig {
        name: format!("probe_cliff_{}_{}", learner.name(), agent.name()),
        domain: Domain::Cliff { width: 20 },
        agent,
        learner,
        params: LearningParams { alpha: 0.1, gamma: 1.0, lambda: 0.9 },
        root_policy: if agent == AgentShape::Paper {
            PolicySpec::epsilon_greedy(0.1).unwrap()
        } else {
            PolicySpec::boltzmann(0.5, 1.0, 1e-3).unwrap()
        },
        subtask_policy: PolicySpec::boltzmann(0.5, 1.0, 1e-3).unwrap(),
        updating: UpdatingMode::AllGoals,
        commitment: CommitmentSchedule::constant(0.0).unwrap(),
        episodes: 20_000,
        seeds: (1..=seeds).collect(),
        step_limit: 10_000,
        smoothing_window: 100,
        tie_epsilon: 0.0,
        max_sweep_entries: None,
        eval_episodes: 1,
        out_dir: PathBuf::from("/tmp/probe"),
    }
}

#[test]
#[ignore]
fn probe_cliff_desk() {
    let optimal = {
        let env = ophrl::envs::make_env(&Domain::Cliff { width: 20 });
        let mdp = env.enumerate();
        let res = oracle::value_iteration(&mdp, 1.0, 1e-9, 100_000).unwrap();
        res.start_value(&mdp)
    };
    println!("cliff w20 optimal = {optimal}");
    for (learner, agent) in [
        (LearnerVariant::FixedQ0, AgentShape::Flat),
        (LearnerVariant::NaiveQ0, AgentShape::Paper),
        (LearnerVariant::FixedQ0, AgentShape::Paper),
        (LearnerVariant::Gtsdt, AgentShape::Paper),
    ] {
        let cfg = cliff_cfg(learner, agent, 10);
        let t0 = std::time::Instant::now();
        let outs = harness::run_parallel(&cfg.seeds, |s| harness::train_seed(&cfg, s)).unwrap();
        let hits = outs.iter().filter(|o| o.greedy_return == optimal).count();
        let mean_auc = outs.iter().map(|o| o.auc).sum::<f64>() / outs.len() as f64;
        let greedys: Vec<f64> = outs.iter().map(|o| o.greedy_return).collect();
        let aucs: Vec<i64> = outs.iter().map(|o| o.auc as i64).collect();
        println!(
            "{:>9} {:>5}: optimal {hits}/10 mean_auc {mean_auc:>12.0} greedy {greedys:?} aucs {aucs:?} ({:.1}s)",
            learner.name(),
            agent.name(),
            t0.elapsed().as_secs_f64()
        );
    }
}

fn taxi_cfg(learner: LearnerVariant, reduced: bool, seeds: u64) -> ExperimentConfig {
    let episodes = 20_000u32;
    let full_rate = if reduced { 0.999924 } else { 0.999947 };
    let cooling = harness::desk_cooling(full_rate, 100_000, episodes);
    ExperimentConfig {
        name: format!("probe_taxi_{}_{}", learner.name(), if reduced { "red" } else { "full" }),
        domain: Domain::Taxi,
        agent: AgentShape::Paper,
        learner,
        params: LearningParams { alpha: 0.1, gamma: 1.0, lambda: 0.9 },
        root_policy: PolicySpec::boltzmann(50.0, cooling, 1e-3).unwrap(),
        subtask_policy: PolicySpec::ForcedGreedy,
        updating: UpdatingMode::ActivePath,
        commitment: if reduced {
            CommitmentSchedule::new(1.0, 0.0, episodes).unwrap()
        } else {
            CommitmentSchedule::constant(1.0).unwrap()
        },
        episodes,
        seeds: (1..=seeds).collect(),
        step_limit: 10_000,
        smoothing_window: 100,
        tie_epsilon: 0.0,
        max_sweep_entries: None,
        eval_episodes: 500,
        out_dir: PathBuf::from("/tmp/probe"),
    }
}

#[test]
#[ignore]
fn probe_taxi_desk() {
    for learner in [LearnerVariant::FixedQ0, LearnerVariant::FixedOsio, LearnerVariant::Gtsdt] {
        for reduced in [false, true] {
            let cfg = taxi_cfg(learner, reduced, 8);
            let t0 = std::time::Instant::now();
            let outs = harness::run_parallel(&cfg.seeds, |s| harness::train_seed(&cfg, s)).unwrap();
            let mean_greedy = outs.iter().map(|o| o.greedy_return).sum::<f64>() / outs.len() as f64;
            let mean_auc = outs.iter().map(|o| o.auc).sum::<f64>() / outs.len() as f64;
            let mean_succ = outs.iter().map(|o| o.success_rate).sum::<f64>() / outs.len() as f64;
            println!(
                "{:>10} {}: greedy {mean_greedy:>8.2} success {mean_succ:.3} auc {mean_auc:>12.0} ({:.1}s)",
                learner.name(),
                if reduced { "red " } else { "full" },
                t0.elapsed().as_secs_f64()
            );
        }
    }
}

#[test]
#[ignore]
fn probe_cliff_inspect() {
    use ophrl::mdp::{q_get, ActionRef, StateId};
    for learner in [LearnerVariant::NaiveQ0, LearnerVariant::FixedQ0, LearnerVariant::Gtsdt] {
        let cfg = cliff_cfg(learner, AgentShape::Paper, 1);
        let out = harness::train_seed(&cfg, 2).unwrap();
        let csv = String::from_utf8(out.csv_chunk.clone()).unwrap();
        let (mut succ, mut fail, mut trunc) = (0u32, 0u32, 0u32);
        for line in csv.lines() {
            if line.contains(",success,") {
                succ += 1;
            } else if line.contains(",failure,") {
                fail += 1;
            } else {
                trunc += 1;
            }
        }
        let h = ophrl::envs::make_hierarchy(&cfg.domain, cfg.agent).unwrap();
        let root = h.root();
        let goal_t = ActionRef::Task(ophrl::mdp::TaskId(0));
        let cliff_t = ActionRef::Task(ophrl::mdp::TaskId(1));
        println!(
            "{}: succ {succ} fail {fail} trunc {trunc} auc {:.0} greedy {}",
            learner.name(),
            out.auc,
            out.greedy_return
        );
        for x in [0u32, 5, 10, 15, 18] {
            let s = StateId(x); // bottom row
            println!(
                "   ({x},0): Q_root(goal) {:8.2}  Q_root(cliff) {:8.2}",
                q_get(&out.store, root, s, goal_t),
                q_get(&out.store, root, s, cliff_t)
            );
        }
    }
}

#[test]
#[ignore]
fn probe_cliff_eps_subtasks() {
    let optimal = 182.0;
    for (learner, agent) in [
        (LearnerVariant::FixedQ0, AgentShape::Flat),
        (LearnerVariant::NaiveQ0, AgentShape::Paper),
        (LearnerVariant::FixedQ0, AgentShape::Paper),
        (LearnerVariant::Gtsdt, AgentShape::Paper),
    ] {
        let mut cfg = cliff_cfg(learner, agent, 10);
        cfg.subtask_policy = PolicySpec::epsilon_greedy(0.1).unwrap();
        if agent == AgentShape::Flat {
            cfg.root_policy = PolicySpec::epsilon_greedy(0.1).unwrap();
        }
        let t0 = std::time::Instant::now();
        let outs = harness::run_parallel(&cfg.seeds, |s| harness::train_seed(&cfg, s)).unwrap();
        let hits = outs.iter().filter(|o| o.greedy_return == optimal).count();
        let mean_auc = outs.iter().map(|o| o.auc).sum::<f64>() / outs.len() as f64;
        let greedys: Vec<f64> = outs.iter().map(|o| o.greedy_return).collect();
        println!(
            "eps-subs {:>9} {:>5}: optimal {hits}/10 mean_auc {mean_auc:>12.0} greedy {greedys:?} ({:.1}s)",
            learner.name(),
            agent.name(),
            t0.elapsed().as_secs_f64()
        );
    }
}

#[test]
#[ignore]
fn probe_cliff_alpha() {
    let optimal = 182.0;
    for alpha in [0.25, 0.5] {
        for (learner, agent) in [
            (LearnerVariant::FixedQ0, AgentShape::Flat),
            (LearnerVariant::NaiveQ0, AgentShape::Paper),
            (LearnerVariant::FixedQ0, AgentShape::Paper),
            (LearnerVariant::Gtsdt, AgentShape::Paper),
        ] {
            let mut cfg = cliff_cfg(learner, agent, 10);
            cfg.params.alpha = alpha;
            let t0 = std::time::Instant::now();
            let outs = harness::run_parallel(&cfg.seeds, |s| harness::train_seed(&cfg, s)).unwrap();
            let hits = outs.iter().filter(|o| o.greedy_return == optimal).count();
            let mean_auc = outs.iter().map(|o| o.auc).sum::<f64>() / outs.len() as f64;
            let greedys: Vec<f64> = outs.iter().map(|o| o.greedy_return).collect();
            println!(
                "alpha {alpha} {:>9} {:>5}: optimal {hits}/10 mean_auc {mean_auc:>12.0} greedy {greedys:?} ({:.1}s)",
                learner.name(),
                agent.name(),
                t0.elapsed().as_secs_f64()
            );
        }
    }
}
