//! Training driver for one (setting, seed) run.
//!
//! Per episode: re-seed the exploration schedule, reset the environment,
//! then per step: act with noise, step the environment, store the
//! transition, and run one minibatch update (which itself soft-updates the
//! targets). Every episode appends one log record; at the evaluation
//! cadence the actor is checkpointed and evaluated noiselessly.
//!
//! All randomness derives from the run seed through fixed ChaCha streams,
//! so a run is fully reproducible: two runs with the same config and seed
//! produce byte-identical CSVs.

use crate::config::{AlgorithmTag, TrainConfig};
use crate::evaluate::{evaluate_actor, EvalStats};
use crate::runlog::{evals_to_csv, EpisodeRecord, EvalRecord, RunLog};
use crate::HarnessError;
use digrad_core::agent::{Agent, AgentConfig};
use digrad_core::env::{score_of, Env, KinematicTree, RewardSpec};
use digrad_core::nn::save_network;
use digrad_core::noise::NoiseProcess;
use digrad_core::replay::{BufferSpec, ReplayBuffer, Transition};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::time::Instant;

// Independent randomness streams per run seed.
const STREAM_INIT: u64 = 1;
const STREAM_ENV: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_BUFFER: u64 = 4;
const STREAM_EVAL_BASE: u64 = 1000;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Counters asserting Algorithm 1's step discipline: one buffer insertion
/// per environment step, at most one minibatch update per step, and one
/// target soft-update per executed update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub env_steps: u64,
    pub buffer_inserts: u64,
    pub train_updates: u64,
    pub soft_updates: u64,
    pub warmup_steps: u64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub setting: AlgorithmTag,
    pub seed: u64,
    pub log: RunLog,
    pub evals: Vec<EvalRecord>,
    pub stats: RunStats,
    pub wall_clock_s: f64,
    pub train_csv: PathBuf,
    pub eval_csv: PathBuf,
    pub final_checkpoint: PathBuf,
}

pub fn run_prefix(setting: AlgorithmTag, seed: u64) -> String {
    format!("{setting}_{seed}")
}

/// Build the environment described by a config.
pub fn build_env(cfg: &TrainConfig) -> Result<Env, HarnessError> {
    let tree = cfg.env.load()?;
    let reward = RewardSpec::for_tree_with(
        &tree,
        cfg.reward_reach_frac,
        cfg.reward_success_bonus,
        cfg.reward_all_tasks_bonus,
        cfg.reward_penalty_coef,
    );
    Ok(Env::new(tree, reward, cfg.steps_per_episode as usize))
}

fn build_agent(
    cfg: &TrainConfig,
    setting: AlgorithmTag,
    env: &Env,
    rng: &mut ChaCha8Rng,
) -> Result<Agent, HarnessError> {
    let mut agent_cfg = AgentConfig::new(
        env.obs_dim(),
        env.tree().action_partition(),
        setting.algorithm(),
    );
    agent_cfg.hidden = cfg.hidden;
    agent_cfg.action_bound = env.tree().velocity_limit();
    agent_cfg.gamma = cfg.gamma;
    agent_cfg.tau = cfg.tau;
    agent_cfg.actor_lr = cfg.actor_learning_rate();
    agent_cfg.critic_lr = cfg.critic_learning_rate();
    agent_cfg.rmsprop_rho = cfg.rmsprop_rho;
    agent_cfg.rmsprop_eps = cfg.rmsprop_eps;
    agent_cfg.bootstrap = cfg.bootstrap;
    Ok(Agent::new(agent_cfg, rng)?)
}

/// Execute one full training run and write its artifacts into `outdir`.
pub fn run_training(
    cfg: &TrainConfig,
    setting: AlgorithmTag,
    seed: u64,
    outdir: &Path,
) -> Result<RunOutcome, HarnessError> {
    std::fs::create_dir_all(outdir).map_err(|e| HarnessError::io(outdir, e))?;
    let started = Instant::now();
    let prefix = run_prefix(setting, seed);

    let mut env = build_env(cfg)?;
    let n_tasks = env.n_tasks();
    let is_ddpg = setting == AlgorithmTag::Ddpg;
    let n_rewards = if is_ddpg { 1 } else { n_tasks };

    let mut init_rng = stream_rng(seed, STREAM_INIT);
    let mut agent = build_agent(cfg, setting, &env, &mut init_rng)?;
    let mut env_rng = stream_rng(seed, STREAM_ENV);
    let sigma0 = cfg.noise_sigma_scale * env.tree().velocity_limit();
    let mut noise = NoiseProcess::uniform(
        env.action_dim(),
        sigma0,
        cfg.noise_decay,
        stream_rng(seed, STREAM_NOISE),
    );
    let mut buffer = ReplayBuffer::new(
        cfg.buffer_capacity,
        BufferSpec {
            state_dim: env.obs_dim(),
            action_dim: env.action_dim(),
            n_rewards,
            n_tasks,
        },
        stream_rng(seed, STREAM_BUFFER),
    );

    let checkpoint = |actor: &digrad_core::nn::DenseNetwork,
                      episode: u32|
     -> Result<PathBuf, HarnessError> {
        let path = outdir.join(format!("{prefix}_{episode}.ckpt"));
        save_network(&path, actor)?;
        Ok(path)
    };

    let mut log = RunLog::new(n_tasks, agent.n_heads());
    let mut evals: Vec<EvalRecord> = Vec::new();
    let mut stats = RunStats::default();
    let mut final_checkpoint = checkpoint(agent.actor(), 0)?;
    // Last parameters known to be finite, for the abort checkpoint.
    let mut last_good = agent.actor().clone();

    for episode in 1..=cfg.episodes {
        let ep_start = Instant::now();
        noise.begin_episode(episode - 1);
        env.reset(&mut env_rng);

        let mut steps = 0u32;
        let mut reward_sum = 0.0;
        let mut score_sum = vec![0.0; n_tasks];
        let mut final_error = vec![0.0; n_tasks];
        let mut loss_sum = vec![0.0; agent.n_heads()];
        let mut grad_norm_sum = 0.0;
        let mut updates_this_episode = 0u32;

        for _ in 0..cfg.steps_per_episode {
            let obs = env.observe();
            let action = agent.act(&obs, Some(&mut noise));
            let outcome = env.step(&action)?;
            let next_obs = env.observe();
            stats.env_steps += 1;

            let rewards = if is_ddpg {
                vec![outcome.ddpg_reward]
            } else {
                outcome.rewards.clone()
            };
            reward_sum += rewards.iter().sum::<f64>() / rewards.len() as f64;
            for (s, e) in score_sum.iter_mut().zip(&outcome.errors) {
                *s += score_of(*e);
            }
            final_error.clone_from_slice(&outcome.errors);

            buffer.push(Transition {
                state: obs,
                action,
                rewards,
                next_state: next_obs,
                task_done: outcome.task_done.clone(),
                episode_done: outcome.episode_done,
            });
            stats.buffer_inserts += 1;

            let report = agent.train_step(&mut buffer, cfg.batch_size)?;
            if report.skipped {
                stats.warmup_steps += 1;
            } else {
                stats.train_updates += 1;
                stats.soft_updates += 1;
                updates_this_episode += 1;
                for (acc, l) in loss_sum.iter_mut().zip(&report.critic_losses) {
                    *acc += l;
                }
                grad_norm_sum += report.actor_grad_norm;
                if !report.critic_losses.iter().all(|l| l.is_finite()) || !agent.params_finite()
                {
                    let abort_path = outdir.join(format!("{prefix}_abort.ckpt"));
                    save_network(&abort_path, &last_good)?;
                    return Err(HarnessError::RunAborted {
                        setting: setting.to_string(),
                        seed,
                        episode,
                        checkpoint: abort_path,
                    });
                }
            }

            steps += 1;
            if outcome.episode_done {
                break;
            }
        }

        let updates = updates_this_episode.max(0) as f64;
        let record = EpisodeRecord {
            episode,
            steps,
            avg_reward: reward_sum / steps as f64,
            mean_score: score_sum.iter().map(|s| s / steps as f64).collect(),
            final_error,
            critic_loss: loss_sum
                .iter()
                .map(|l| if updates_this_episode > 0 { l / updates } else { f64::NAN })
                .collect(),
            actor_grad_norm: if updates_this_episode > 0 {
                grad_norm_sum / updates
            } else {
                f64::NAN
            },
            wall_clock_s: ep_start.elapsed().as_secs_f64(),
        };
        log.records.push(record);
        last_good = agent.actor().clone();

        if episode % cfg.eval_every == 0 || episode == cfg.episodes {
            final_checkpoint = checkpoint(agent.actor(), episode)?;
            let mut eval_rng = stream_rng(seed, STREAM_EVAL_BASE + episode as u64);
            let stats = evaluate_actor(agent.actor(), &env, cfg.eval_episodes, &mut eval_rng)?;
            evals.push(eval_record(episode, &stats));
        }
    }

    let train_csv = outdir.join(format!("{prefix}_train.csv"));
    std::fs::write(&train_csv, log.to_csv()).map_err(|e| HarnessError::io(&train_csv, e))?;
    let eval_csv = outdir.join(format!("{prefix}_eval.csv"));
    std::fs::write(&eval_csv, evals_to_csv(n_tasks, &evals))
        .map_err(|e| HarnessError::io(&eval_csv, e))?;

    let wall_clock_s = started.elapsed().as_secs_f64();
    let meta = outdir.join(format!("{prefix}_meta.txt"));
    let meta_text = format!(
        "setting {setting}\nseed {seed}\nepisodes {}\nenv_steps {}\nbuffer_inserts {}\ntrain_updates {}\nsoft_updates {}\nwarmup_steps {}\nwall_clock_s {wall_clock_s}\n--- config ---\n{}",
        log.records.len(),
        stats.env_steps,
        stats.buffer_inserts,
        stats.train_updates,
        stats.soft_updates,
        stats.warmup_steps,
        cfg.to_file_string()
    );
    std::fs::write(&meta, meta_text).map_err(|e| HarnessError::io(&meta, e))?;

    Ok(RunOutcome {
        setting,
        seed,
        log,
        evals,
        stats,
        wall_clock_s,
        train_csv,
        eval_csv,
        final_checkpoint,
    })
}

fn eval_record(episode: u32, stats: &EvalStats) -> EvalRecord {
    EvalRecord {
        episode,
        success_rate: stats.success_rate,
        mean_error: stats.mean_final_error.clone(),
        median_error: stats.median_final_error.clone(),
        mean_score: stats.mean_score.clone(),
    }
}

/// Load a tree by builtin name or `.tree` file path (CLI helper).
pub fn resolve_tree(spec: &str) -> Result<KinematicTree, HarnessError> {
    if let Some(tree) = KinematicTree::builtin(spec) {
        return Ok(tree);
    }
    let path = Path::new(spec);
    if path.exists() {
        return Ok(KinematicTree::from_file(path)?);
    }
    Err(HarnessError::UnknownEnv(spec.to_string()))
}
