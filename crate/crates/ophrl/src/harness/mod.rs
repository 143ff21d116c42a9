//! Experiment front end: configs, presets, multi-seed execution, CSV and
//! SVG emission, and summary statistics.

mod config;
mod svg;

pub use config::ExperimentConfig;
pub use svg::{emit_svg, render_svg};

use std::io::Write;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::envs::{self, AgentShape, Domain};
use crate::error::{Error, Result};
use crate::exploration::{CommitmentSchedule, PolicySpec};
use crate::executor::{
    run_episode, CommitmentState, EpisodeParams, PolicyBundle, RunRecord, UpdatingMode,
};
use crate::learners::{Learner, LearnerVariant};
use crate::mdp::{format_real, LearningParams, QStore};
use crate::oracle;

/// Everything one trained seed produced.
pub struct SeedOutcome {
    pub seed: u64,
    /// Per-episode raw returns, in episode order.
    pub returns: Vec<f64>,
    /// CSV rows for this seed, header excluded.
    pub csv_chunk: Vec<u8>,
    /// Mean greedy-policy return after training.
    pub greedy_return: f64,
    pub success_rate: f64,
    /// Area under the learning curve: the sum of episode returns.
    pub auc: f64,
    /// Final Q table.
    pub store: QStore,
}

#[derive(Clone, Debug)]
pub struct SeedSummary {
    pub seed: u64,
    pub greedy_return: f64,
    pub success_rate: f64,
    pub auc: f64,
}

#[derive(Clone, Debug)]
pub struct Summary {
    pub name: String,
    pub per_seed: Vec<SeedSummary>,
    pub mean_greedy_return: f64,
    pub mean_success_rate: f64,
    pub mean_auc: f64,
    pub csv_path: PathBuf,
    pub svg_path: PathBuf,
    pub summary_path: PathBuf,
}

pub const CSV_HEADER: &str = "run_id,seed,episode,steps,return,terminal_kind,temperature,kappa";

fn csv_quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn write_csv_row(out: &mut Vec<u8>, rec: &RunRecord) {
    let line = format!(
        "{},{},{},{},{},{},{},{}\n",
        csv_quote(&rec.run_id),
        rec.seed,
        rec.episode,
        rec.steps,
        format_real(rec.episode_return),
        rec.terminal_kind,
        format_real(rec.temperature),
        format_real(rec.kappa),
    );
    out.extend_from_slice(line.as_bytes());
}

/// Trains one seed to completion and evaluates its final greedy policy.
pub fn train_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let mut env = envs::make_env(&cfg.domain);
    let h = envs::make_hierarchy(&cfg.domain, cfg.agent)?;
    let mut learner = Learner::new(cfg.learner, cfg.params)?
        .with_max_sweep_entries(cfg.max_sweep_entries)
        .with_tie_epsilon(cfg.tie_epsilon);
    let mut store = QStore::new();
    let mut policies = PolicyBundle {
        root: cfg.root_policy,
        subtask: cfg.subtask_policy,
        tie_epsilon: cfg.tie_epsilon,
    };
    let mut commitment = CommitmentState::new(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = EpisodeParams { step_limit: cfg.step_limit, updating: cfg.updating };
    let run_id = format!("{}-s{}", cfg.name, seed);

    let mut csv_chunk = Vec::new();
    let mut returns = Vec::with_capacity(cfg.episodes as usize);
    for episode in 0..cfg.episodes {
        commitment.kappa = cfg.commitment.kappa_at(episode);
        let temperature = policies.temperature();
        env.reset(&mut rng);
        let (episode_return, steps, terminal_kind) = run_episode(
            params,
            &h,
            env.as_mut(),
            &mut learner,
            &mut policies,
            &mut commitment,
            &mut store,
            &mut rng,
        )?;
        let rec = RunRecord {
            run_id: run_id.clone(),
            seed,
            episode,
            steps,
            episode_return,
            terminal_kind,
            temperature,
            kappa: commitment.kappa,
        };
        write_csv_row(&mut csv_chunk, &rec);
        returns.push(episode_return);
    }

    let mut eval_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let (greedy_return, success_rate) = oracle::evaluate_learned(
        &h,
        &store,
        env.as_mut(),
        cfg.eval_episodes,
        cfg.step_limit,
        &mut eval_rng,
    )?;
    let auc = returns.iter().sum();
    Ok(SeedOutcome { seed, returns, csv_chunk, greedy_return, success_rate, auc, store })
}

/// Runs the closure over all seeds, in parallel up to `OPHRL_THREADS`
/// (default: rayon's global pool). Results come back in seed order.
pub fn run_parallel<T, F>(seeds: &[u64], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let cap = std::env::var("OPHRL_THREADS").ok().and_then(|s| s.parse::<usize>().ok());
    match cap {
        Some(n) if n >= 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Runtime(format!("thread pool: {e}")))?;
            pool.install(|| seeds.par_iter().map(|&s| f(s)).collect())
        }
        _ => seeds.par_iter().map(|&s| f(s)).collect(),
    }
}

/// Trailing moving average with the given window (window 0 or 1 returns
/// the input unchanged).
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return xs.to_vec();
    }
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    for i in 0..xs.len() {
        acc += xs[i];
        if i >= window {
            acc -= xs[i - window];
        }
        out.push(acc / window.min(i + 1) as f64);
    }
    out
}

/// Runs every seed of the experiment, streams records to CSV in seed
/// order, and writes the smoothed mean learning curve and summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Summary> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join(format!("{}.csv", cfg.name));
    let svg_path = cfg.out_dir.join(format!("{}.svg", cfg.name));
    let summary_path = cfg.out_dir.join(format!("{}.summary.txt", cfg.name));
    // fail on unwritable output before any simulation starts
    let mut csv = std::fs::File::create(&csv_path)?;

    let outcomes = run_parallel(&cfg.seeds, |seed| train_seed(cfg, seed))?;

    writeln!(csv, "{CSV_HEADER}")?;
    for o in &outcomes {
        csv.write_all(&o.csv_chunk)?;
    }
    csv.flush()?;

    let curve = mean_curve(&outcomes, cfg.episodes as usize);
    let smoothed = moving_average(&curve, cfg.smoothing_window as usize);
    let points = downsample(&smoothed, 2000);
    emit_svg(&[(cfg.name.clone(), points)], &svg_path)?;

    let per_seed: Vec<SeedSummary> = outcomes
        .iter()
        .map(|o| SeedSummary {
            seed: o.seed,
            greedy_return: o.greedy_return,
            success_rate: o.success_rate,
            auc: o.auc,
        })
        .collect();
    let n = per_seed.len() as f64;
    let summary = Summary {
        name: cfg.name.clone(),
        mean_greedy_return: per_seed.iter().map(|s| s.greedy_return).sum::<f64>() / n,
        mean_success_rate: per_seed.iter().map(|s| s.success_rate).sum::<f64>() / n,
        mean_auc: per_seed.iter().map(|s| s.auc).sum::<f64>() / n,
        per_seed,
        csv_path,
        svg_path,
        summary_path: summary_path.clone(),
    };

    let mut text = String::new();
    text.push_str(&format!("experiment {}\n", summary.name));
    text.push_str(&format!(
        "domain {} agent {} learner {} episodes {} seeds {}\n",
        cfg.domain.name(),
        cfg.agent.name(),
        cfg.learner.name(),
        cfg.episodes,
        cfg.seeds.len()
    ));
    text.push_str("seed,greedy_return,success_rate,auc\n");
    for s in &summary.per_seed {
        text.push_str(&format!(
            "{},{},{},{}\n",
            s.seed,
            format_real(s.greedy_return),
            format_real(s.success_rate),
            format_real(s.auc)
        ));
    }
    text.push_str(&format!("mean_greedy_return {}\n", format_real(summary.mean_greedy_return)));
    text.push_str(&format!("mean_success_rate {}\n", format_real(summary.mean_success_rate)));
    text.push_str(&format!("mean_auc {}\n", format_real(summary.mean_auc)));
    std::fs::write(&summary_path, text)?;

    Ok(summary)
}

fn mean_curve(outcomes: &[SeedOutcome], episodes: usize) -> Vec<f64> {
    let mut curve = vec![0.0; episodes];
    for o in outcomes {
        for (i, &r) in o.returns.iter().enumerate() {
            curve[i] += r;
        }
    }
    let n = outcomes.len() as f64;
    for v in &mut curve {
        *v /= n;
    }
    curve
}

fn downsample(xs: &[f64], max_points: usize) -> Vec<(f64, f64)> {
    let stride = xs.len().div_ceil(max_points).max(1);
    xs.iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i == xs.len() - 1)
        .map(|(i, &v)| (i as f64, v))
        .collect()
}

/// Named experiment presets. Full-scale presets carry the published
/// parameters; desk-scale variants shrink the domain or episode budget
/// and re-derive cooling so the terminal temperature is preserved
/// (`c_desk = c_full^(full_episodes / desk_episodes)`).
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let seeds = |n: u64| (1..=n).collect::<Vec<u64>>();
    let cfg = match name {
        "bandit_fig3" => ExperimentConfig {
            name: name.into(),
            domain: Domain::Bandit,
            agent: AgentShape::Paper,
            learner: LearnerVariant::FixedQ0,
            params: LearningParams { alpha: 1.0, gamma: 1.0, lambda: 0.9 },
            root_policy: PolicySpec::epsilon_greedy(0.1)?,
            subtask_policy: PolicySpec::epsilon_greedy(0.1)?,
            updating: UpdatingMode::ActivePath,
            commitment: CommitmentSchedule::constant(0.0)?,
            episodes: 1000,
            seeds: seeds(10),
            step_limit: 10,
            smoothing_window: 25,
            tie_epsilon: 0.0,
            max_sweep_entries: None,
            eval_episodes: 1,
            out_dir: PathBuf::from("out"),
        },
        "cliff_fig6" | "cliff_desk" => {
            let desk = name == "cliff_desk";
            ExperimentConfig {
                name: name.into(),
                domain: Domain::Cliff { width: if desk { 20 } else { 100 } },
                agent: AgentShape::Paper,
                learner: LearnerVariant::Gtsdt,
                params: LearningParams { alpha: 0.1, gamma: 1.0, lambda: 0.9 },
                root_policy: PolicySpec::epsilon_greedy(0.1)?,
                subtask_policy: PolicySpec::boltzmann(0.5, 1.0, 1e-3)?,
                updating: UpdatingMode::AllGoals,
                commitment: CommitmentSchedule::constant(0.0)?,
                episodes: if desk { 20_000 } else { 100_000 },
                seeds: seeds(10),
                step_limit: 10_000,
                smoothing_window: 100,
                tie_epsilon: 0.0,
                max_sweep_entries: None,
                eval_episodes: 1,
                out_dir: PathBuf::from("out"),
            }
        }
        "taxi_fig9" | "taxi_fig9_desk" => {
            let desk = name == "taxi_fig9_desk";
            let episodes = if desk { 20_000 } else { 100_000 };
            let cooling = desk_cooling(0.999947, 100_000, episodes);
            ExperimentConfig {
                name: name.into(),
                domain: Domain::Taxi,
                agent: AgentShape::Paper,
                learner: LearnerVariant::Gtsdt,
                params: LearningParams { alpha: 0.1, gamma: 1.0, lambda: 0.9 },
                root_policy: PolicySpec::boltzmann(50.0, cooling, 1e-3)?,
                subtask_policy: PolicySpec::ForcedGreedy,
                updating: UpdatingMode::ActivePath,
                commitment: CommitmentSchedule::constant(1.0)?,
                episodes,
                seeds: seeds(20),
                step_limit: 10_000,
                smoothing_window: 100,
                tie_epsilon: 0.0,
                max_sweep_entries: None,
                eval_episodes: 200,
                out_dir: PathBuf::from("out"),
            }
        }
        other => return Err(Error::Config(format!("unknown preset `{other}`"))),
    };
    Ok(cfg)
}

/// Re-derives a per-episode cooling rate for a shorter run so the final
/// temperature matches the full-scale schedule.
pub fn desk_cooling(full_rate: f64, full_episodes: u32, desk_episodes: u32) -> f64 {
    full_rate.powf(full_episodes as f64 / desk_episodes as f64)
}
