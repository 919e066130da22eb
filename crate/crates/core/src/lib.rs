//! Differential policy gradients for multi-task continuous control.
//!
//! The crate has three layers:
//!
//! - [`nn`]: a small dense-network engine (CReLU activations, exact
//!   analytic gradients, RMSProp, Polyak target updates, checkpoints).
//! - [`agent`] with [`partition`], [`replay`], [`noise`], and [`critic`]:
//!   the differential policy gradient update over a shared action space,
//!   single- and multi-critic variants with an optional direction
//!   heuristic, and a plain single-reward DPG baseline.
//! - [`env`]: branched revolute-joint reachability environments whose task
//!   chains induce the shared action partition.

pub mod agent;
pub mod critic;
pub mod env;
pub mod nn;
pub mod noise;
pub mod partition;
pub mod replay;

pub use agent::{Agent, AgentConfig, AgentError, Algorithm, BootstrapMode, StepReport};
pub use critic::{CriticBundle, CriticMode};
pub use env::{Env, EnvError, EnvState, KinematicTree, RewardSpec, StepOutcome, TreeKind};
pub use nn::{Activation, DenseNetwork, GradientSet, LayerSpec};
pub use noise::NoiseProcess;
pub use partition::{ActionPartition, PartitionError};
pub use replay::{BufferSpec, ReplayBuffer, Transition};
