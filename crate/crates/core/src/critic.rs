//! Single- and multi-network action-value critics.
//!
//! In single mode one network takes the full `[state, compound action]`
//! input and emits one value head per task; cross-task structure lives in
//! the shared body and per-task heads. In multi mode each task gets its own
//! network over `[state, a_i]` with a scalar head. Either way the bundle
//! carries matching target networks and one optimizer state per network.

use crate::nn::{
    soft_update, Activation, DenseNetwork, Direction, GradientSet, LayerSpec, NnError,
    RmsPropState,
};
use crate::partition::ActionPartition;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticMode {
    Single,
    Multi,
}

#[derive(Debug)]
pub struct CriticBundle {
    mode: CriticMode,
    n_heads: usize,
    state_dim: usize,
    nets: Vec<DenseNetwork>,
    targets: Vec<DenseNetwork>,
    opts: Vec<RmsPropState>,
}

impl CriticBundle {
    pub fn new<R: Rng>(
        mode: CriticMode,
        state_dim: usize,
        partition: &ActionPartition,
        hidden: (usize, usize),
        lr: f64,
        rho: f64,
        eps: f64,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let n_heads = partition.n_tasks();
        let nets = match mode {
            CriticMode::Single => {
                let specs = [
                    LayerSpec::new(hidden.0, Activation::CRelu),
                    LayerSpec::new(hidden.1, Activation::CRelu),
                    LayerSpec::new(n_heads, Activation::Linear),
                ];
                vec![DenseNetwork::new(
                    state_dim + partition.compound_dim(),
                    &specs,
                    rng,
                )?]
            }
            CriticMode::Multi => {
                let mut nets = Vec::with_capacity(n_heads);
                for task in 0..n_heads {
                    let specs = [
                        LayerSpec::new(hidden.0, Activation::CRelu),
                        LayerSpec::new(hidden.1, Activation::CRelu),
                        LayerSpec::new(1, Activation::Linear),
                    ];
                    nets.push(DenseNetwork::new(
                        state_dim + partition.task_dim(task),
                        &specs,
                        rng,
                    )?);
                }
                nets
            }
        };
        let targets = nets.clone();
        let opts = nets.iter().map(|n| RmsPropState::new(n, lr, rho, eps)).collect();
        Ok(Self {
            mode,
            n_heads,
            state_dim,
            nets,
            targets,
            opts,
        })
    }

    pub fn mode(&self) -> CriticMode {
        self.mode
    }

    pub fn n_heads(&self) -> usize {
        self.n_heads
    }

    pub fn nets(&self) -> &[DenseNetwork] {
        &self.nets
    }

    pub fn targets(&self) -> &[DenseNetwork] {
        &self.targets
    }

    fn single_input(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(state.len() + action.len());
        x.extend_from_slice(state);
        x.extend_from_slice(action);
        x
    }

    fn task_input(
        &self,
        partition: &ActionPartition,
        task: usize,
        state: &[f64],
        action: &[f64],
    ) -> Vec<f64> {
        let mut x = Vec::with_capacity(state.len() + partition.task_dim(task));
        x.extend_from_slice(state);
        x.extend(partition.gather_task(task, action));
        x
    }

    /// `Q_i(s, a_i)` for every task, from the live networks.
    pub fn q_values(
        &self,
        partition: &ActionPartition,
        state: &[f64],
        action: &[f64],
    ) -> Vec<f64> {
        self.q_values_from(&self.nets, partition, state, action)
    }

    /// `Q'_i(s, a_i)` for every task, from the target networks.
    pub fn q_values_target(
        &self,
        partition: &ActionPartition,
        state: &[f64],
        action: &[f64],
    ) -> Vec<f64> {
        self.q_values_from(&self.targets, partition, state, action)
    }

    fn q_values_from(
        &self,
        nets: &[DenseNetwork],
        partition: &ActionPartition,
        state: &[f64],
        action: &[f64],
    ) -> Vec<f64> {
        match self.mode {
            CriticMode::Single => nets[0].output(&self.single_input(state, action)).unwrap(),
            CriticMode::Multi => (0..self.n_heads)
                .map(|t| {
                    nets[t]
                        .output(&self.task_input(partition, t, state, action))
                        .unwrap()[0]
                })
                .collect(),
        }
    }

    /// Per-task gradient of `Q_i` with respect to the compound action,
    /// mapped into compound coordinates.
    ///
    /// In single mode the gradient of head `i` is taken against the full
    /// compound input and then masked to task `i`'s coordinates — reward
    /// `r_i` depends only on `a_i`, so cross-task entries are dropped rather
    /// than trusted to be numerically zero. In multi mode the network never
    /// sees other tasks' coordinates, so scattering its input gradient is
    /// already exact.
    pub fn task_action_gradients(
        &self,
        partition: &ActionPartition,
        state: &[f64],
        action: &[f64],
    ) -> Vec<Vec<f64>> {
        let compound = partition.compound_dim();
        match self.mode {
            CriticMode::Single => {
                let x = self.single_input(state, action);
                let (_, tape) = self.nets[0].forward(&x).unwrap();
                (0..self.n_heads)
                    .map(|task| {
                        let mut one_hot = vec![0.0; self.n_heads];
                        one_hot[task] = 1.0;
                        let (_, input_grad) = self.nets[0].backward(&tape, &one_hot).unwrap();
                        let action_grad = &input_grad[self.state_dim..];
                        let mut masked = vec![0.0; compound];
                        for &c in partition.task_indices(task) {
                            masked[c] = action_grad[c];
                        }
                        masked
                    })
                    .collect()
            }
            CriticMode::Multi => (0..self.n_heads)
                .map(|task| {
                    let x = self.task_input(partition, task, state, action);
                    let (_, tape) = self.nets[task].forward(&x).unwrap();
                    let (_, input_grad) = self.nets[task].backward(&tape, &[1.0]).unwrap();
                    let task_grad = &input_grad[self.state_dim..];
                    let mut masked = vec![0.0; compound];
                    for (j, &c) in partition.task_indices(task).iter().enumerate() {
                        masked[c] = task_grad[j];
                    }
                    masked
                })
                .collect(),
        }
    }

    /// Mean-over-batch squared-error losses per head and the matching
    /// descent gradients, one [`GradientSet`] per network.
    ///
    /// Batch entries are `(state, action)` rows; `y` is `[batch][head]`.
    pub fn loss_and_gradients(
        &self,
        partition: &ActionPartition,
        batch: &[(&[f64], &[f64])],
        y: &[Vec<f64>],
    ) -> (Vec<f64>, Vec<GradientSet>) {
        assert_eq!(batch.len(), y.len(), "batch/target length mismatch");
        let b = batch.len() as f64;
        match self.mode {
            CriticMode::Single => {
                let net = &self.nets[0];
                let mut acc = GradientSet::zeros_like(net);
                let mut losses = vec![0.0; self.n_heads];
                for (row, targets) in batch.iter().zip(y) {
                    let x = self.single_input(row.0, row.1);
                    let (q, tape) = net.forward(&x).unwrap();
                    let mut out_grad = vec![0.0; self.n_heads];
                    for h in 0..self.n_heads {
                        let diff = q[h] - targets[h];
                        losses[h] += diff * diff / b;
                        out_grad[h] = 2.0 * diff / b;
                    }
                    let (g, _) = net.backward(&tape, &out_grad).unwrap();
                    acc.add_assign(&g);
                }
                (losses, vec![acc])
            }
            CriticMode::Multi => {
                let mut losses = vec![0.0; self.n_heads];
                let mut grads = Vec::with_capacity(self.n_heads);
                for task in 0..self.n_heads {
                    let net = &self.nets[task];
                    let mut acc = GradientSet::zeros_like(net);
                    for (row, targets) in batch.iter().zip(y) {
                        let x = self.task_input(partition, task, row.0, row.1);
                        let (q, tape) = net.forward(&x).unwrap();
                        let diff = q[0] - targets[task];
                        losses[task] += diff * diff / b;
                        let (g, _) = net.backward(&tape, &[2.0 * diff / b]).unwrap();
                        acc.add_assign(&g);
                    }
                    grads.push(acc);
                }
                (losses, grads)
            }
        }
    }

    /// One RMSProp descent step per network.
    pub fn apply_descent(&mut self, grads: &[GradientSet]) -> Result<(), NnError> {
        assert_eq!(grads.len(), self.nets.len(), "one gradient set per network");
        for ((net, opt), g) in self.nets.iter_mut().zip(&mut self.opts).zip(grads) {
            opt.step(net, g, Direction::Descend)?;
        }
        Ok(())
    }

    pub fn soft_update_targets(&mut self, tau: f64) -> Result<(), NnError> {
        for (target, net) in self.targets.iter_mut().zip(&self.nets) {
            soft_update(target, net, tau)?;
        }
        Ok(())
    }

    pub fn params_finite(&self) -> bool {
        self.nets.iter().chain(&self.targets).all(|n| n.params_finite())
    }

    /// Swap in a live network with identical shape (test scaffolding).
    #[cfg(test)]
    pub(crate) fn replace_net(&mut self, idx: usize, net: DenseNetwork) {
        assert_eq!(net.input_dim(), self.nets[idx].input_dim());
        assert_eq!(net.output_dim(), self.nets[idx].output_dim());
        self.nets[idx] = net;
    }
}
