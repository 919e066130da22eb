//! Actor-critic agent: differential policy gradients over a shared action
//! space, plus the single-reward DPG baseline.
//!
//! The actor update assembles one compound action-gradient per state: each
//! non-shared coordinate takes the gradient of its owning task's action
//! value, and each shared coordinate takes the sum of the sharing tasks'
//! gradients — divided by the number of sharing tasks `k` when the
//! direction heuristic is on. The scaling is applied to the summed shared
//! vector, so the heuristic changes magnitude by exactly `1/k` and never
//! direction.
//!
//! Arithmetic order is pinned throughout (tasks ascending, batch ascending)
//! so reduction identities can be asserted exactly in tests.

use crate::critic::{CriticBundle, CriticMode};
use crate::nn::{
    soft_update, Activation, DenseNetwork, Direction, GradientSet, LayerSpec, NnError,
    RmsPropState,
};
use crate::noise::NoiseProcess;
use crate::partition::{ActionPartition, CoordOwner};
use crate::replay::{ReplayBuffer, Transition};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("operation requires a {expected} agent, got {found}")]
    WrongMode {
        expected: &'static str,
        found: &'static str,
    },
    #[error("critic loss is non-finite ({0}); step aborted")]
    NonFiniteLoss(f64),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Which update rule drives the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Differential policy gradient over the task partition.
    DiGrad { critic: CriticMode, heuristic: bool },
    /// Plain deterministic policy gradient on a single compound action
    /// value with a scalar reward.
    Ddpg,
}

impl Algorithm {
    pub fn is_ddpg(self) -> bool {
        matches!(self, Algorithm::Ddpg)
    }

    fn name(self) -> &'static str {
        match self {
            Algorithm::DiGrad { .. } => "digrad",
            Algorithm::Ddpg => "ddpg",
        }
    }
}

/// How the bootstrap term of a target is read off the target critic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BootstrapMode {
    /// `y_i` bootstraps from head `i` of the target critic.
    #[default]
    PerTaskHead,
    /// `y_i` bootstraps from the sum of all target heads (escape hatch for
    /// the reading where all tasks share one bootstrap value).
    SummedHeads,
}

#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub state_dim: usize,
    pub partition: ActionPartition,
    pub algorithm: Algorithm,
    pub hidden: (usize, usize),
    /// Actor outputs are squashed into `[-action_bound, action_bound]`.
    pub action_bound: f64,
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub rmsprop_rho: f64,
    pub rmsprop_eps: f64,
    pub bootstrap: BootstrapMode,
}

impl AgentConfig {
    pub fn new(state_dim: usize, partition: ActionPartition, algorithm: Algorithm) -> Self {
        Self {
            state_dim,
            partition,
            algorithm,
            hidden: (400, 300),
            action_bound: 0.1,
            gamma: 0.99,
            tau: 0.001,
            actor_lr: 0.001,
            critic_lr: 0.0001,
            rmsprop_rho: 0.9,
            rmsprop_eps: 1e-8,
            bootstrap: BootstrapMode::PerTaskHead,
        }
    }
}

/// Diagnostics from one minibatch update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// True when the buffer was still warming up and nothing ran.
    pub skipped: bool,
    /// Per-head critic loss, measured before the descent step.
    pub critic_losses: Vec<f64>,
    pub actor_grad_norm: f64,
}

impl StepReport {
    fn warming_up() -> Self {
        Self {
            skipped: true,
            critic_losses: Vec::new(),
            actor_grad_norm: 0.0,
        }
    }
}

#[derive(Debug)]
pub struct Agent {
    algorithm: Algorithm,
    /// Environment-level task structure (drives rewards and done flags).
    env_partition: ActionPartition,
    /// Partition the critic bundle is built over. Equal to `env_partition`
    /// for DiGrad; a single task over all coordinates for the baseline.
    critic_partition: ActionPartition,
    state_dim: usize,
    action_bound: f64,
    gamma: f64,
    tau: f64,
    bootstrap: BootstrapMode,
    actor: DenseNetwork,
    actor_target: DenseNetwork,
    actor_opt: RmsPropState,
    critics: CriticBundle,
}

impl Agent {
    pub fn new<R: Rng>(cfg: AgentConfig, rng: &mut R) -> Result<Self, AgentError> {
        assert!((0.0..=1.0).contains(&cfg.gamma), "gamma must be in [0,1]");
        let compound = cfg.partition.compound_dim();
        let actor_specs = [
            LayerSpec::new(cfg.hidden.0, Activation::CRelu),
            LayerSpec::new(cfg.hidden.1, Activation::CRelu),
            LayerSpec::new(compound, Activation::Bounded { scale: cfg.action_bound }),
        ];
        let actor = DenseNetwork::new(cfg.state_dim, &actor_specs, rng)?;
        let actor_target = actor.clone();
        let actor_opt = RmsPropState::new(&actor, cfg.actor_lr, cfg.rmsprop_rho, cfg.rmsprop_eps);

        let (critic_partition, critic_mode) = match cfg.algorithm {
            Algorithm::DiGrad { critic, .. } => (cfg.partition.clone(), critic),
            Algorithm::Ddpg => (ActionPartition::single_task(compound), CriticMode::Single),
        };
        let critics = CriticBundle::new(
            critic_mode,
            cfg.state_dim,
            &critic_partition,
            cfg.hidden,
            cfg.critic_lr,
            cfg.rmsprop_rho,
            cfg.rmsprop_eps,
            rng,
        )?;

        Ok(Self {
            algorithm: cfg.algorithm,
            env_partition: cfg.partition,
            critic_partition,
            state_dim: cfg.state_dim,
            action_bound: cfg.action_bound,
            gamma: cfg.gamma,
            tau: cfg.tau,
            bootstrap: cfg.bootstrap,
            actor,
            actor_target,
            actor_opt,
            critics,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn partition(&self) -> &ActionPartition {
        &self.env_partition
    }

    pub fn actor(&self) -> &DenseNetwork {
        &self.actor
    }

    pub fn actor_target(&self) -> &DenseNetwork {
        &self.actor_target
    }

    pub fn critics(&self) -> &CriticBundle {
        &self.critics
    }

    pub fn action_dim(&self) -> usize {
        self.env_partition.compound_dim()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_bound(&self) -> f64 {
        self.action_bound
    }

    /// Number of value heads (= reward entries the agent consumes).
    pub fn n_heads(&self) -> usize {
        self.critics.n_heads()
    }

    pub fn params_finite(&self) -> bool {
        self.actor.params_finite()
            && self.actor_target.params_finite()
            && self.critics.params_finite()
    }

    /// Deterministic policy output plus optional exploration noise, clamped
    /// to the action bound.
    pub fn act(&self, state: &[f64], noise: Option<&mut NoiseProcess>) -> Vec<f64> {
        let mut action = self.actor.output(state).unwrap();
        if let Some(noise) = noise {
            assert_eq!(noise.dim(), action.len(), "noise dim mismatch");
            for (a, n) in action.iter_mut().zip(noise.sample()) {
                *a = (*a + n).clamp(-self.action_bound, self.action_bound);
            }
        }
        action
    }

    fn head_done(&self, t: &Transition, head: usize) -> bool {
        match self.algorithm {
            Algorithm::DiGrad { .. } => t.task_done[head],
            Algorithm::Ddpg => t.task_done.iter().all(|&d| d),
        }
    }

    /// Targets `y[batch][head]`, computed entirely from target networks.
    /// A set done flag drops the bootstrap term.
    pub fn critic_targets(&self, batch: &[Transition]) -> Vec<Vec<f64>> {
        assert!(!batch.is_empty(), "batch must be nonempty");
        let n = self.critics.n_heads();
        batch
            .iter()
            .map(|t| {
                let next_action = self.actor_target.output(&t.next_state).unwrap();
                let q_next = self.critics.q_values_target(
                    &self.critic_partition,
                    &t.next_state,
                    &next_action,
                );
                let summed: f64 = q_next.iter().sum();
                (0..n)
                    .map(|h| {
                        let boot = match self.bootstrap {
                            BootstrapMode::PerTaskHead => q_next[h],
                            BootstrapMode::SummedHeads => summed,
                        };
                        if self.head_done(t, h) {
                            t.rewards[h]
                        } else {
                            t.rewards[h] + self.gamma * boot
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// One critic descent step on the squared-error loss against `y`.
    /// Returns the per-head losses measured before the step.
    pub fn critic_update(
        &mut self,
        batch: &[Transition],
        y: &[Vec<f64>],
    ) -> Result<Vec<f64>, AgentError> {
        let rows: Vec<(&[f64], &[f64])> = batch
            .iter()
            .map(|t| (t.state.as_slice(), t.action.as_slice()))
            .collect();
        let (losses, grads) =
            self.critics
                .loss_and_gradients(&self.critic_partition, &rows, y);
        if let Some(&bad) = losses.iter().find(|l| !l.is_finite()) {
            return Err(AgentError::NonFiniteLoss(bad));
        }
        self.critics.apply_descent(&grads)?;
        Ok(losses)
    }

    /// Per-task action-value gradients in compound coordinates, masked to
    /// each task's own coordinates, at an explicit `(state, action)` point.
    pub fn task_action_gradients_at(&self, state: &[f64], action: &[f64]) -> Vec<Vec<f64>> {
        self.critics
            .task_action_gradients(&self.critic_partition, state, action)
    }

    /// Assemble per-task gradients into one compound action-gradient.
    ///
    /// Shared coordinates take the sum over sharing tasks (ascending); with
    /// the heuristic on, that summed shared vector is scaled by `1/k`.
    pub fn assemble_compound_gradient(
        partition: &ActionPartition,
        per_task: &[Vec<f64>],
        heuristic: bool,
    ) -> Vec<f64> {
        let mut g = vec![0.0; partition.compound_dim()];
        for c in 0..partition.compound_dim() {
            match partition.owner(c) {
                CoordOwner::Task(t) => g[c] = per_task[t][c],
                CoordOwner::Shared => {
                    let mut sum = 0.0;
                    for &t in partition.shared_tasks() {
                        sum += per_task[t][c];
                    }
                    g[c] = sum;
                }
            }
        }
        if heuristic && partition.shared_task_count() > 0 {
            let inv_k = 1.0 / partition.shared_task_count() as f64;
            for &c in partition.shared_indices() {
                g[c] *= inv_k;
            }
        }
        g
    }

    /// Compound action-gradient at `(state, action)` under the given
    /// heuristic flag.
    pub fn compound_action_gradient_at(
        &self,
        state: &[f64],
        action: &[f64],
        heuristic: bool,
    ) -> Vec<f64> {
        let per_task = self.task_action_gradients_at(state, action);
        Self::assemble_compound_gradient(&self.critic_partition, &per_task, heuristic)
    }

    /// Compound action-gradient at `a = mu(s)` under the agent's own
    /// heuristic flag.
    pub fn compound_action_gradient(&self, state: &[f64]) -> Vec<f64> {
        let heuristic = match self.algorithm {
            Algorithm::DiGrad { heuristic, .. } => heuristic,
            Algorithm::Ddpg => false,
        };
        let action = self.actor.output(state).unwrap();
        self.compound_action_gradient_at(state, &action, heuristic)
    }

    /// Differential policy gradient of the summed per-task objective,
    /// averaged over the batch. Ascend on this to improve the actor.
    pub fn differential_policy_gradient(
        &self,
        batch: &[Transition],
    ) -> Result<GradientSet, AgentError> {
        let heuristic = match self.algorithm {
            Algorithm::DiGrad { heuristic, .. } => heuristic,
            Algorithm::Ddpg => {
                return Err(AgentError::WrongMode {
                    expected: "digrad",
                    found: "ddpg",
                })
            }
        };
        assert!(!batch.is_empty(), "batch must be nonempty");
        let mut total = GradientSet::zeros_like(&self.actor);
        for t in batch {
            let (action, tape) = self.actor.forward(&t.state)?;
            let per_task = self.task_action_gradients_at(&t.state, &action);
            let g = Self::assemble_compound_gradient(&self.critic_partition, &per_task, heuristic);
            let (grads, _) = self.actor.backward(&tape, &g)?;
            total.add_assign(&grads);
        }
        total.scale(1.0 / batch.len() as f64);
        Ok(total)
    }

    /// Standard DPG actor gradient on the single compound action value.
    pub fn ddpg_actor_gradient(&self, batch: &[Transition]) -> Result<GradientSet, AgentError> {
        if !self.algorithm.is_ddpg() {
            return Err(AgentError::WrongMode {
                expected: "ddpg",
                found: self.algorithm.name(),
            });
        }
        assert!(!batch.is_empty(), "batch must be nonempty");
        let mut total = GradientSet::zeros_like(&self.actor);
        for t in batch {
            let (action, tape) = self.actor.forward(&t.state)?;
            let per_task = self.task_action_gradients_at(&t.state, &action);
            let g = Self::assemble_compound_gradient(&self.critic_partition, &per_task, false);
            let (grads, _) = self.actor.backward(&tape, &g)?;
            total.add_assign(&grads);
        }
        total.scale(1.0 / batch.len() as f64);
        Ok(total)
    }

    /// One full minibatch update: sample, targets, critic descent, actor
    /// ascent, soft-update all targets. No-op while the buffer holds fewer
    /// than `batch_size` transitions.
    pub fn train_step(
        &mut self,
        buffer: &mut ReplayBuffer,
        batch_size: usize,
    ) -> Result<StepReport, AgentError> {
        if buffer.len() < batch_size {
            return Ok(StepReport::warming_up());
        }
        let batch = buffer.sample(batch_size);
        let y = self.critic_targets(&batch);
        let critic_losses = self.critic_update(&batch, &y)?;
        let actor_grads = match self.algorithm {
            Algorithm::DiGrad { .. } => self.differential_policy_gradient(&batch)?,
            Algorithm::Ddpg => self.ddpg_actor_gradient(&batch)?,
        };
        let actor_grad_norm = actor_grads.l2_norm();
        self.actor_opt
            .step(&mut self.actor, &actor_grads, Direction::Ascend)?;
        soft_update(&mut self.actor_target, &self.actor, self.tau)?;
        self.critics.soft_update_targets(self.tau)?;
        Ok(StepReport {
            skipped: false,
            critic_losses,
            actor_grad_norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::BufferSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn two_task_partition() -> ActionPartition {
        // Shared {0,1}; task 0 also owns {2,3}, task 1 owns {4,5,6}.
        ActionPartition::new(7, &[vec![0, 1, 2, 3], vec![0, 1, 4, 5, 6]]).unwrap()
    }

    fn small_agent(algorithm: Algorithm, seed: u64) -> Agent {
        let mut cfg = AgentConfig::new(4, two_task_partition(), algorithm);
        cfg.hidden = (6, 5);
        Agent::new(cfg, &mut rng(seed)).unwrap()
    }

    fn random_transition(r: &mut ChaCha8Rng, state_dim: usize, action_dim: usize, n_rewards: usize, n_tasks: usize) -> Transition {
        Transition {
            state: (0..state_dim).map(|_| r.gen_range(-1.0..1.0)).collect(),
            action: (0..action_dim).map(|_| r.gen_range(-0.1..0.1)).collect(),
            rewards: (0..n_rewards).map(|_| r.gen_range(-1.0..0.5)).collect(),
            next_state: (0..state_dim).map(|_| r.gen_range(-1.0..1.0)).collect(),
            task_done: (0..n_tasks).map(|_| r.gen_bool(0.2)).collect(),
            episode_done: false,
        }
    }

    #[test]
    fn act_zero_final_layer_outputs_zero() {
        let partition = two_task_partition();
        let actor = DenseNetwork::zeros(
            4,
            &[
                LayerSpec::new(6, Activation::CRelu),
                LayerSpec::new(5, Activation::CRelu),
                LayerSpec::new(7, Activation::Bounded { scale: 0.1 }),
            ],
        )
        .unwrap();
        let mut agent = small_agent(
            Algorithm::DiGrad { critic: CriticMode::Single, heuristic: true },
            1,
        );
        agent.actor = actor;
        let a = agent.act(&[0.3, -0.2, 0.5, 0.9], None);
        assert_eq!(a, vec![0.0; 7]);
        let _ = partition;
    }

    #[test]
    fn act_with_degenerate_noise_matches_noiseless() {
        let agent = small_agent(
            Algorithm::DiGrad { critic: CriticMode::Single, heuristic: true },
            2,
        );
        let s = [0.1, 0.2, -0.3, 0.4];
        let mut noise = NoiseProcess::uniform(7, 0.0, 0.99, rng(3));
        let noiseless = agent.act(&s, None);
        let noisy = agent.act(&s, Some(&mut noise));
        assert_eq!(noiseless, noisy);
    }

    #[test]
    fn act_noise_monte_carlo_mean() {
        let agent = small_agent(
            Algorithm::DiGrad { critic: CriticMode::Single, heuristic: false },
            4,
        );
        let s = [0.05, -0.1, 0.2, 0.0];
        let base = agent.act(&s, None);
        let sigma = 0.01;
        let mut noise = NoiseProcess::uniform(7, sigma, 1.0, rng(5));
        let n = 100_000;
        let mut mean = vec![0.0; 7];
        for _ in 0..n {
            for (m, v) in mean.iter_mut().zip(agent.act(&s, Some(&mut noise))) {
                *m += v / n as f64;
            }
        }
        // Base actions come from a +-3e-3 final layer, so clamping at
        // +-0.1 is effectively never hit and the noisy mean must sit within
        // 3 sigma / sqrt(n) of the noiseless action.
        let tol = 3.0 * sigma / (n as f64).sqrt();
        for (m, b) in mean.iter().zip(&base) {
            assert!((m - b).abs() < tol * 1.5, "mean {m} vs base {b}");
        }
    }

    #[test]
    fn critic_targets_gamma_zero_is_reward() {
        let mut agent = small_agent(
            Algorithm::DiGrad { critic: CriticMode::Single, heuristic: true },
            6,
        );
        agent.gamma = 0.0;
        let mut r = rng(7);
        let batch: Vec<Transition> = (0..4).map(|_| random_transition(&mut r, 4, 7, 2, 2)).collect();
        let y = agent.critic_targets(&batch);
        for (t, row) in batch.iter().zip(&y) {
            assert_eq!(row, &t.rewards);
        }
    }

    #[test]
    fn critic_targets_done_drops_bootstrap() {
        let agent = small_agent(
            Algorithm::DiGrad { critic: CriticMode::Multi, heuristic: true },
            8,
        );
        let mut r = rng(9);
        let mut t = random_transition(&mut r, 4, 7, 2, 2);
        t.task_done = vec![true, false];
        let y = agent.critic_targets(&[t.clone()]);
        assert_eq!(y[0][0], t.rewards[0]);
        assert_ne!(y[0][1], t.rewards[1]);
    }

    #[test]
    fn critic_targets_match_naive_per_sample_recomputation() {
        let agent = small_agent(
            Algorithm::DiGrad { critic: CriticMode::Single, heuristic: false },
            10,
        );
        let mut r = rng(11);
        let batch: Vec<Transition> = (0..8).map(|_| random_transition(&mut r, 4, 7, 2, 2)).collect();
        let y = agent.critic_targets(&batch);
        for (t, row) in batch.iter().zip(&y) {
            // Naive route: separate forward calls per quantity.
            let mu_next = agent.actor_target().output(&t.next_state).unwrap();
            let mut x = t.next_state.clone();
            x.extend_from_slice(&mu_next);
            let q_next = agent.critics().targets()[0].output(&x).unwrap();
            for h in 0..2 {
                let expect = if t.task_done[h] {
                    t.rewards[h]
                } else {
                    t.rewards[h] + 0.99 * q_next[h]
                };
                assert!((row[h] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn summed_bootstrap_escape_hatch() {
        let mut agent = small_agent(
            Algorithm::DiGrad { critic: CriticMode::Single, heuristic: false },
            12,
        );
        agent.bootstrap = BootstrapMode::SummedHeads;
        let mut r = rng(13);
        let mut t = random_transition(&mut r, 4, 7, 2, 2);
        t.task_done = vec![false, false];
        let y = agent.critic_targets(&[t.clone()]);
        let mu_next = agent.actor_target().output(&t.next_state).unwrap();
        let mut x = t.next_state.clone();
        x.extend_from_slice(&mu_next);
        let q_next = agent.critics().targets()[0].output(&x).unwrap();
        let total: f64 = q_next.iter().sum();
        for h in 0..2 {
            assert!((y[0][h] - (t.rewards[h] + 0.99 * total)).abs() < 1e-14);
        }
    }

    #[test]
    fn critic_update_perfect_fit_is_a_noop() {
        let mut agent = small_agent(
            Algorithm::DiGrad { critic: CriticMode::Single, heuristic: true },
            14,
        );
        let mut r = rng(15);
        let batch: Vec<Transition> = (0..4).map(|_| random_transition(&mut r, 4, 7, 2, 2)).collect();
        // Build targets equal to the critic's current predictions.
        let y: Vec<Vec<f64>> = batch
            .iter()
            .map(|t| {
                agent
                    .critics()
                    .q_values(agent.partition(), &t.state, &t.action)
            })
            .collect();
        let before = agent.critics().nets()[0].flat_params();
        let losses = agent.critic_update(&batch, &y).unwrap();
        assert!(losses.iter().all(|&l| l == 0.0));
        assert_eq!(agent.critics().nets()[0].flat_params(), before);
    }

    #[test]
    fn single_critic_loss_is_sum_of_per_head_errors() {
        let mut agent = small_agent(
            Algorithm::DiGrad { critic: CriticMode::Single, heuristic: true },
            16,
        );
        let mut r = rng(17);
        let batch: Vec<Transition> = (0..3).map(|_| random_transition(&mut r, 4, 7, 2, 2)).collect();
        let y = agent.critic_targets(&batch);
        // Recompute per-head mean squared errors by hand before updating.
        let mut expect = vec![0.0; 2];
        for (t, row) in batch.iter().zip(&y) {
            let q = agent
                .critics()
                .q_values(agent.partition(), &t.state, &t.action);
            for h in 0..2 {
                expect[h] += (q[h] - row[h]).powi(2) / batch.len() as f64;
            }
        }
        let losses = agent.critic_update(&batch, &y).unwrap();
        let total: f64 = losses.iter().sum();
        let expect_total: f64 = expect.iter().sum();
        for h in 0..2 {
            assert!((losses[h] - expect[h]).abs() < 1e-12);
        }
        assert!((total - expect_total).abs() < 1e-12);
    }

    #[test]
    fn ddpg_gradient_requires_ddpg_mode() {
        let agent = small_agent(
            Algorithm::DiGrad { critic: CriticMode::Single, heuristic: true },
            18,
        );
        let mut r = rng(19);
        let batch = vec![random_transition(&mut r, 4, 7, 2, 2)];
        assert!(matches!(
            agent.ddpg_actor_gradient(&batch),
            Err(AgentError::WrongMode { .. })
        ));
    }

    #[test]
    fn differential_gradient_requires_digrad_mode() {
        let agent = small_agent(Algorithm::Ddpg, 20);
        let mut r = rng(21);
        let batch = vec![random_transition(&mut r, 4, 7, 1, 2)];
        assert!(matches!(
            agent.differential_policy_gradient(&batch),
            Err(AgentError::WrongMode { .. })
        ));
    }

    #[test]
    fn ddpg_zero_critic_gives_zero_actor_gradient() {
        let mut agent = small_agent(Algorithm::Ddpg, 22);
        // Zero out the critic: every action-gradient vanishes.
        let zero = DenseNetwork::zeros(
            4 + 7,
            &[
                LayerSpec::new(6, Activation::CRelu),
                LayerSpec::new(5, Activation::CRelu),
                LayerSpec::new(1, Activation::Linear),
            ],
        )
        .unwrap();
        agent.critics.replace_net(0, zero);
        let mut r = rng(23);
        let batch = vec![random_transition(&mut r, 4, 7, 1, 2)];
        let g = agent.ddpg_actor_gradient(&batch).unwrap();
        assert!(g.flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cloned_critics_make_shared_gradient_k_times_single_head() {
        // Two tasks of equal dimension sharing {0,1}; clone critic 0 into
        // critic 1 so both heads compute identical values.
        let partition = ActionPartition::new(6, &[vec![0, 1, 2, 3], vec![0, 1, 4, 5]]).unwrap();
        let mut cfg = AgentConfig::new(
            3,
            partition.clone(),
            Algorithm::DiGrad { critic: CriticMode::Multi, heuristic: false },
        );
        cfg.hidden = (5, 4);
        let mut agent = Agent::new(cfg, &mut rng(40)).unwrap();
        let clone = agent.critics.nets()[0].clone();
        agent.critics.replace_net(1, clone);

        let s = [0.2, -0.4, 0.6];
        let a = [0.01, -0.02, 0.03, -0.04, 0.05, -0.06];
        let per_task = agent.task_action_gradients_at(&s, &a);
        // Identical nets and identical [a_i^d, a_s] inputs? The disjoint
        // parts differ, so only verify through a symmetric action where
        // both tasks present the same input to their (identical) critics.
        let sym = [0.01, -0.02, 0.03, -0.04, 0.03, -0.04];
        let per_task_sym = agent.task_action_gradients_at(&s, &sym);
        let single_head_shared: Vec<f64> = partition
            .shared_indices()
            .iter()
            .map(|&c| per_task_sym[0][c])
            .collect();
        let off = Agent::assemble_compound_gradient(&partition, &per_task_sym, false);
        let on = Agent::assemble_compound_gradient(&partition, &per_task_sym, true);
        for (i, &c) in partition.shared_indices().iter().enumerate() {
            // k = 2: the sum of two identical halves is exactly twice one,
            // and halving it back is exact.
            assert_eq!(off[c], 2.0 * single_head_shared[i]);
            assert_eq!(on[c], single_head_shared[i]);
        }
        let _ = per_task;
    }

    #[test]
    fn train_step_warms_up_below_batch_size() {
        let mut agent = small_agent(
            Algorithm::DiGrad { critic: CriticMode::Single, heuristic: true },
            24,
        );
        let spec = BufferSpec {
            state_dim: 4,
            action_dim: 7,
            n_rewards: 2,
            n_tasks: 2,
        };
        let mut buffer = ReplayBuffer::new(100, spec, rng(25));
        let mut r = rng(26);
        buffer.push(random_transition(&mut r, 4, 7, 2, 2));
        let before = agent.actor.flat_params();
        let report = agent.train_step(&mut buffer, 8).unwrap();
        assert!(report.skipped);
        assert_eq!(agent.actor.flat_params(), before);
    }

    #[test]
    fn train_step_tau_zero_leaves_targets() {
        let mut agent = small_agent(
            Algorithm::DiGrad { critic: CriticMode::Multi, heuristic: false },
            27,
        );
        agent.tau = 0.0;
        let spec = BufferSpec {
            state_dim: 4,
            action_dim: 7,
            n_rewards: 2,
            n_tasks: 2,
        };
        let mut buffer = ReplayBuffer::new(100, spec, rng(28));
        let mut r = rng(29);
        for _ in 0..16 {
            buffer.push(random_transition(&mut r, 4, 7, 2, 2));
        }
        let actor_target_before = agent.actor_target.flat_params();
        let critic_targets_before: Vec<Vec<f64>> = agent
            .critics()
            .targets()
            .iter()
            .map(|n| n.flat_params())
            .collect();
        let report = agent.train_step(&mut buffer, 8).unwrap();
        assert!(!report.skipped);
        assert_eq!(agent.actor_target.flat_params(), actor_target_before);
        for (t, before) in agent.critics().targets().iter().zip(&critic_targets_before) {
            assert_eq!(&t.flat_params(), before);
        }
        // Live networks did move.
        assert_ne!(agent.actor.flat_params(), actor_target_before);
    }

    #[test]
    fn train_step_target_lag_bounded_by_tau() {
        let mut agent = small_agent(
            Algorithm::DiGrad { critic: CriticMode::Single, heuristic: true },
            30,
        );
        agent.tau = 0.01;
        let spec = BufferSpec {
            state_dim: 4,
            action_dim: 7,
            n_rewards: 2,
            n_tasks: 2,
        };
        let mut buffer = ReplayBuffer::new(100, spec, rng(31));
        let mut r = rng(32);
        for _ in 0..16 {
            buffer.push(random_transition(&mut r, 4, 7, 2, 2));
        }
        for _ in 0..5 {
            let target_old = agent.actor_target.flat_params();
            agent.train_step(&mut buffer, 8).unwrap();
            let target_new = agent.actor_target.flat_params();
            let actor_now = agent.actor.flat_params();
            let moved: f64 = target_new
                .iter()
                .zip(&target_old)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let gap: f64 = actor_now
                .iter()
                .zip(&target_old)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(moved <= agent.tau * gap + 1e-12, "{moved} vs {}", agent.tau * gap);
        }
    }

    #[test]
    fn train_step_is_deterministic_bitwise() {
        let build = || {
            let mut agent = small_agent(
                Algorithm::DiGrad { critic: CriticMode::Single, heuristic: true },
                33,
            );
            agent.tau = 0.005;
            let spec = BufferSpec {
                state_dim: 4,
                action_dim: 7,
                n_rewards: 2,
                n_tasks: 2,
            };
            let mut buffer = ReplayBuffer::new(100, spec, rng(34));
            let mut r = rng(35);
            for _ in 0..32 {
                buffer.push(random_transition(&mut r, 4, 7, 2, 2));
            }
            (agent, buffer)
        };
        let (mut a1, mut b1) = build();
        let (mut a2, mut b2) = build();
        for _ in 0..3 {
            a1.train_step(&mut b1, 8).unwrap();
            a2.train_step(&mut b2, 8).unwrap();
        }
        let p1 = a1.actor.flat_params();
        let p2 = a2.actor.flat_params();
        assert_eq!(p1.len(), p2.len());
        for (x, y) in p1.iter().zip(&p2) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
