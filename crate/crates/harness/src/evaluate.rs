//! Noiseless greedy evaluation of a trained actor.

use crate::HarnessError;
use digrad_core::env::Env;
use digrad_core::nn::{load_network, DenseNetwork};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalStats {
    pub episodes: u32,
    /// Fraction of episodes ending with every task inside its tolerance.
    pub success_rate: f64,
    pub mean_final_error: Vec<f64>,
    pub median_final_error: Vec<f64>,
    pub mean_score: Vec<f64>,
}

/// Roll out `episodes` noiseless episodes on a fresh copy of `env_template`
/// and aggregate the final per-task errors.
pub fn evaluate_actor(
    actor: &DenseNetwork,
    env_template: &Env,
    episodes: u32,
    rng: &mut ChaCha8Rng,
) -> Result<EvalStats, HarnessError> {
    let mut env = env_template.clone();
    if actor.input_dim() != env.obs_dim() {
        return Err(HarnessError::DimMismatch {
            what: "actor input vs observation",
            expected: env.obs_dim(),
            found: actor.input_dim(),
        });
    }
    if actor.output_dim() != env.action_dim() {
        return Err(HarnessError::DimMismatch {
            what: "actor output vs action",
            expected: env.action_dim(),
            found: actor.output_dim(),
        });
    }
    let n_tasks = env.n_tasks();
    let mut final_errors: Vec<Vec<f64>> = vec![Vec::new(); n_tasks];
    let mut successes = 0u32;
    for _ in 0..episodes {
        env.reset(rng);
        let mut last = env.errors();
        let mut all_done = false;
        for _ in 0..env.step_budget() {
            let obs = env.observe();
            let action = actor.output(&obs)?;
            let outcome = env.step(&action)?;
            last = outcome.errors.clone();
            if outcome.episode_done {
                all_done = outcome.task_done.iter().all(|&d| d);
                break;
            }
        }
        if all_done {
            successes += 1;
        }
        for (t, e) in last.iter().enumerate() {
            final_errors[t].push(*e);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let median = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = s.len();
        if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        }
    };
    Ok(EvalStats {
        episodes,
        success_rate: successes as f64 / episodes as f64,
        mean_final_error: final_errors.iter().map(|v| mean(v)).collect(),
        median_final_error: final_errors.iter().map(|v| median(v)).collect(),
        mean_score: final_errors
            .iter()
            .map(|v| mean(&v.iter().map(|e| digrad_core::env::score_of(*e)).collect::<Vec<_>>()))
            .collect(),
    })
}

/// Load a checkpointed actor and evaluate it on `env_template`.
pub fn evaluate_checkpoint(
    checkpoint: &Path,
    env_template: &Env,
    episodes: u32,
    rng: &mut ChaCha8Rng,
) -> Result<EvalStats, HarnessError> {
    let actor = load_network(checkpoint)?;
    evaluate_actor(&actor, env_template, episodes, rng)
}
