//! Multi-goal reachability environments over kinematic trees.
//!
//! The control signal is a joint-velocity vector; one step clamps it to the
//! tree's velocity limit, integrates the joint angles (unit timestep,
//! clamped to the joint limits), and recomputes end-effector positions. Per
//! task `i`, `error_i` is the Euclidean distance between effector and goal,
//! `score_i = -log10(max(error_i, 1e-6))`, and a task counts as done when
//! its error drops below its reach tolerance.

pub mod geom;
mod tree;

pub use tree::{FkPose, Joint, KinematicTree, TreeError, TreeKind};

use geom::distance;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Errors below this floor score as if they were exactly at the floor.
pub const SCORE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("control vector: expected length {expected}, got {found}")]
    ControlDim { expected: usize, found: usize },
    #[error("control vector contains non-finite entries")]
    NonFiniteControl,
    #[error("goal {0} has wrong dimension")]
    GoalDim(usize),
}

/// Reward-shaping constants. The reach tolerance is per task, defaulting to
/// 2% of that task's maximum reach.
#[derive(Debug, Clone)]
pub struct RewardSpec {
    pub reach_tol: Vec<f64>,
    pub success_bonus: f64,
    pub all_tasks_bonus: f64,
    pub penalty_coef: f64,
}

impl RewardSpec {
    pub fn for_tree(tree: &KinematicTree) -> Self {
        Self::for_tree_with(tree, 0.02, 0.5, 1.0, 1.0)
    }

    pub fn for_tree_with(
        tree: &KinematicTree,
        reach_frac: f64,
        success_bonus: f64,
        all_tasks_bonus: f64,
        penalty_coef: f64,
    ) -> Self {
        assert!(reach_frac > 0.0, "reach fraction must be > 0");
        assert!(penalty_coef > 0.0, "penalty coefficient must be > 0");
        assert!(success_bonus >= 0.0 && all_tasks_bonus >= 0.0, "bonuses must be >= 0");
        Self {
            reach_tol: (0..tree.n_tasks())
                .map(|t| reach_frac * tree.max_reach(t))
                .collect(),
            success_bonus,
            all_tasks_bonus,
            penalty_coef,
        }
    }
}

/// Snapshot of the environment: joint angles, goals, and the cached forward
/// kinematics consistent with them.
#[derive(Debug, Clone)]
pub struct EnvState {
    pub q: Vec<f64>,
    pub goals: Vec<Vec<f64>>,
    /// Configuration whose effectors generated the goals (diagnostics: it
    /// witnesses that all goals are simultaneously reachable).
    pub goal_q: Vec<f64>,
    pub effector_positions: Vec<Vec<f64>>,
    pub joint_tips: Vec<[f64; 3]>,
    pub step_count: usize,
}

/// Result of one environment step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// Per-task reward vector (the differential-reward shaping).
    pub rewards: Vec<f64>,
    /// Scalar reward under the single-reward baseline shaping.
    pub ddpg_reward: f64,
    pub errors: Vec<f64>,
    pub task_done: Vec<bool>,
    pub episode_done: bool,
}

#[derive(Debug, Clone)]
pub struct Env {
    tree: KinematicTree,
    reward: RewardSpec,
    step_budget: usize,
    state: EnvState,
}

impl Env {
    pub fn new(tree: KinematicTree, reward: RewardSpec, step_budget: usize) -> Self {
        assert_eq!(reward.reach_tol.len(), tree.n_tasks(), "one tolerance per task");
        assert!(step_budget > 0, "step budget must be > 0");
        let q = vec![0.0; tree.n_joints()];
        let pose = tree.forward_kinematics(&q);
        let state = EnvState {
            q: q.clone(),
            goals: pose.effectors.clone(),
            goal_q: q,
            effector_positions: pose.effectors,
            joint_tips: pose.joint_tips,
            step_count: 0,
        };
        Self {
            tree,
            reward,
            step_budget,
            state,
        }
    }

    /// Environment with default reward shaping and a 200-step budget.
    pub fn with_defaults(tree: KinematicTree) -> Self {
        let reward = RewardSpec::for_tree(&tree);
        Self::new(tree, reward, 200)
    }

    pub fn tree(&self) -> &KinematicTree {
        &self.tree
    }

    pub fn reward_spec(&self) -> &RewardSpec {
        &self.reward
    }

    pub fn step_budget(&self) -> usize {
        self.step_budget
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn n_tasks(&self) -> usize {
        self.tree.n_tasks()
    }

    pub fn action_dim(&self) -> usize {
        self.tree.n_joints()
    }

    /// Observation length: `n_joints + dim*n_joints + dim*n_tasks`.
    pub fn obs_dim(&self) -> usize {
        let d = self.tree.dim();
        self.tree.n_joints() * (1 + d) + self.tree.n_tasks() * d
    }

    /// Sample a fresh episode: joint angles uniform within limits, and one
    /// jointly reachable goal set placed at the effectors of a second
    /// uniformly sampled configuration.
    pub fn reset(&mut self, rng: &mut ChaCha8Rng) -> &EnvState {
        let sample_q = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            self.tree
                .joints()
                .iter()
                .map(|j| rng.gen_range(j.limits.0..j.limits.1))
                .collect()
        };
        let q = sample_q(rng);
        let goal_q = sample_q(rng);
        let goal_pose = self.tree.forward_kinematics(&goal_q);
        let pose = self.tree.forward_kinematics(&q);
        self.state = EnvState {
            q,
            goals: goal_pose.effectors,
            goal_q,
            effector_positions: pose.effectors,
            joint_tips: pose.joint_tips,
            step_count: 0,
        };
        &self.state
    }

    /// Replace the goals (evaluation and tests). Dimensions must match.
    pub fn set_goals(&mut self, goals: Vec<Vec<f64>>) -> Result<(), EnvError> {
        assert_eq!(goals.len(), self.tree.n_tasks(), "one goal per task");
        for (i, g) in goals.iter().enumerate() {
            if g.len() != self.tree.dim() {
                return Err(EnvError::GoalDim(i));
            }
        }
        self.state.goals = goals;
        Ok(())
    }

    /// Integrate one velocity command.
    pub fn step(&mut self, qdot: &[f64]) -> Result<StepOutcome, EnvError> {
        if qdot.len() != self.tree.n_joints() {
            return Err(EnvError::ControlDim {
                expected: self.tree.n_joints(),
                found: qdot.len(),
            });
        }
        if qdot.iter().any(|v| !v.is_finite()) {
            return Err(EnvError::NonFiniteControl);
        }
        let vmax = self.tree.velocity_limit();
        for (j, (&dq, joint)) in qdot.iter().zip(self.tree.joints()).enumerate() {
            let dq = dq.clamp(-vmax, vmax);
            self.state.q[j] = (self.state.q[j] + dq).clamp(joint.limits.0, joint.limits.1);
        }
        let pose = self.tree.forward_kinematics(&self.state.q);
        self.state.effector_positions = pose.effectors;
        self.state.joint_tips = pose.joint_tips;
        self.state.step_count += 1;

        let errors = self.errors();
        let task_done: Vec<bool> = errors
            .iter()
            .zip(&self.reward.reach_tol)
            .map(|(e, tol)| e < tol)
            .collect();
        let episode_done =
            task_done.iter().all(|&d| d) || self.state.step_count >= self.step_budget;
        Ok(StepOutcome {
            rewards: self.reward_digrad(),
            ddpg_reward: self.reward_ddpg(),
            errors,
            task_done,
            episode_done,
        })
    }

    /// Per-task Euclidean goal distance.
    pub fn errors(&self) -> Vec<f64> {
        self.state
            .effector_positions
            .iter()
            .zip(&self.state.goals)
            .map(|(e, g)| distance(e, g))
            .collect()
    }

    /// `(error_i, score_i)` per task with the floored log score.
    pub fn error_and_score(&self) -> Vec<(f64, f64)> {
        self.errors()
            .into_iter()
            .map(|e| (e, score_of(e)))
            .collect()
    }

    fn task_done_flags(&self, errors: &[f64]) -> Vec<bool> {
        errors
            .iter()
            .zip(&self.reward.reach_tol)
            .map(|(e, tol)| e < tol)
            .collect()
    }

    /// Per-task reward: a success bonus once a task is inside tolerance, an
    /// extra bonus to every task when all of them are, and otherwise a
    /// penalty proportional to the task's error.
    pub fn reward_digrad(&self) -> Vec<f64> {
        let errors = self.errors();
        let done = self.task_done_flags(&errors);
        let all = done.iter().all(|&d| d);
        errors
            .iter()
            .zip(&done)
            .map(|(e, &d)| {
                if d {
                    self.reward.success_bonus + if all { self.reward.all_tasks_bonus } else { 0.0 }
                } else {
                    -self.reward.penalty_coef * e
                }
            })
            .collect()
    }

    /// Scalar reward: the all-tasks bonus when every effector is at its
    /// goal, otherwise a penalty proportional to the summed errors.
    pub fn reward_ddpg(&self) -> f64 {
        let errors = self.errors();
        let done = self.task_done_flags(&errors);
        if done.iter().all(|&d| d) {
            self.reward.all_tasks_bonus
        } else {
            -self.reward.penalty_coef * errors.iter().sum::<f64>()
        }
    }

    /// `[q, all joint tip positions, all goals]` in fixed canonical order.
    pub fn observe(&self) -> Vec<f64> {
        let d = self.tree.dim();
        let mut out = Vec::with_capacity(self.obs_dim());
        out.extend_from_slice(&self.state.q);
        for tip in &self.state.joint_tips {
            out.extend_from_slice(&tip[..d]);
        }
        for goal in &self.state.goals {
            out.extend_from_slice(goal);
        }
        out
    }
}

/// `-log10(error)` with the error floored at [`SCORE_ERROR_FLOOR`].
pub fn score_of(error: f64) -> f64 {
    -error.max(SCORE_ERROR_FLOOR).log10()
}
