//! RMSProp steps and Polyak (soft) target updates.

use super::{DenseNetwork, GradientSet, NnError};

/// Whether a step moves against the gradient (loss) or along it (objective).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `theta -= lr * g / (sqrt(cache) + eps)` — critics descend their loss.
    Descend,
    /// `theta += lr * g / (sqrt(cache) + eps)` — the actor ascends J.
    Ascend,
}

/// RMSProp optimizer state for one network: a running average of squared
/// gradients per parameter, plus the step hyperparameters.
#[derive(Debug, Clone)]
pub struct RmsPropState {
    lr: f64,
    rho: f64,
    eps: f64,
    cache: Vec<Vec<f64>>,
}

impl RmsPropState {
    pub fn new(net: &DenseNetwork, lr: f64, rho: f64, eps: f64) -> Self {
        assert!(lr > 0.0, "learning rate must be > 0");
        assert!(rho > 0.0 && rho < 1.0, "rho must be in (0,1)");
        assert!(eps > 0.0, "eps must be > 0");
        Self {
            lr,
            rho,
            eps,
            cache: net
                .layers()
                .iter()
                .map(|l| vec![0.0; l.weights().len() + l.bias().len()])
                .collect(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// Cache values for one layer (weights then bias), for tests.
    pub fn cache(&self, layer: usize) -> &[f64] {
        &self.cache[layer]
    }

    /// One RMSProp update. Rejects non-finite gradients without touching
    /// either the parameters or the cache.
    pub fn step(
        &mut self,
        net: &mut DenseNetwork,
        grads: &GradientSet,
        direction: Direction,
    ) -> Result<(), NnError> {
        if grads.layers.len() != net.layers.len()
            || grads
                .layers
                .iter()
                .zip(&net.layers)
                .any(|(g, l)| g.d_weights.len() != l.weights.len() || g.d_bias.len() != l.bias.len())
        {
            return Err(NnError::ShapeMismatch);
        }
        if !grads.is_finite() {
            return Err(NnError::NonFiniteGradient);
        }
        let sign = match direction {
            Direction::Descend => -1.0,
            Direction::Ascend => 1.0,
        };
        for (li, layer) in net.layers.iter_mut().enumerate() {
            let cache = &mut self.cache[li];
            let grad = &grads.layers[li];
            for (i, (param, g)) in layer
                .weights
                .iter_mut()
                .chain(layer.bias.iter_mut())
                .zip(grad.d_weights.iter().chain(grad.d_bias.iter()))
                .enumerate()
            {
                let c = &mut cache[i];
                *c = self.rho * *c + (1.0 - self.rho) * g * g;
                *param += sign * self.lr * g / (c.sqrt() + self.eps);
            }
        }
        net.restamp();
        Ok(())
    }
}

/// Polyak averaging: `target = tau * source + (1 - tau) * target`.
pub fn soft_update(target: &mut DenseNetwork, source: &DenseNetwork, tau: f64) -> Result<(), NnError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(NnError::TauOutOfRange(tau));
    }
    if target.layers.len() != source.layers.len()
        || target
            .layers
            .iter()
            .zip(&source.layers)
            .any(|(t, s)| {
                t.weights.len() != s.weights.len()
                    || t.bias.len() != s.bias.len()
                    || t.activation != s.activation
            })
    {
        return Err(NnError::ShapeMismatch);
    }
    for (t, s) in target.layers.iter_mut().zip(&source.layers) {
        for (tp, sp) in t
            .weights
            .iter_mut()
            .chain(t.bias.iter_mut())
            .zip(s.weights.iter().chain(s.bias.iter()))
        {
            *tp = tau * sp + (1.0 - tau) * *tp;
        }
    }
    target.restamp();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_net(value: f64) -> DenseNetwork {
        let mut net = DenseNetwork::zeros(1, &[LayerSpec::new(1, Activation::Linear)]).unwrap();
        net.set_flat_param(0, value);
        net
    }

    fn random_net(seed: u64) -> DenseNetwork {
        DenseNetwork::new(
            3,
            &[
                LayerSpec::new(4, Activation::CRelu),
                LayerSpec::new(2, Activation::Linear),
            ],
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_cache() {
        let mut net = scalar_net(0.7);
        let mut opt = RmsPropState::new(&net, 0.1, 0.9, 1e-8);
        // Seed the cache with one real step first.
        let mut g = GradientSet::zeros_like(&net);
        g.layers[0].d_weights[0] = 1.0;
        opt.step(&mut net, &g, Direction::Descend).unwrap();
        let cache_before = opt.cache(0)[0];
        let param_before = net.get_flat_param(0);

        let zero = GradientSet::zeros_like(&net);
        opt.step(&mut net, &zero, Direction::Descend).unwrap();
        assert_eq!(net.get_flat_param(0), param_before);
        assert_eq!(opt.cache(0)[0], 0.9 * cache_before);
    }

    #[test]
    fn scalar_descend_matches_hand_evaluated_formula() {
        let mut net = scalar_net(0.0);
        let mut opt = RmsPropState::new(&net, 0.1, 0.9, 1e-8);
        let mut g = GradientSet::zeros_like(&net);
        g.layers[0].d_weights[0] = 1.0;
        opt.step(&mut net, &g, Direction::Descend).unwrap();

        let cache = 0.9 * 0.0 + (1.0 - 0.9) * 1.0;
        assert_eq!(opt.cache(0)[0], cache);
        let expected = -0.1 * 1.0 / (cache.sqrt() + 1e-8);
        assert_eq!(net.get_flat_param(0), expected);
        assert!((net.get_flat_param(0) - (-0.31623)).abs() < 1e-5);
    }

    #[test]
    fn ascend_flips_the_sign() {
        let mut net = scalar_net(0.0);
        let mut opt = RmsPropState::new(&net, 0.1, 0.9, 1e-8);
        let mut g = GradientSet::zeros_like(&net);
        g.layers[0].d_weights[0] = 1.0;
        opt.step(&mut net, &g, Direction::Ascend).unwrap();
        assert!(net.get_flat_param(0) > 0.0);
    }

    #[test]
    fn repeated_identical_steps_shrink() {
        let mut net = scalar_net(0.0);
        let mut opt = RmsPropState::new(&net, 0.1, 0.9, 1e-8);
        let mut g = GradientSet::zeros_like(&net);
        g.layers[0].d_weights[0] = 0.5;
        opt.step(&mut net, &g, Direction::Descend).unwrap();
        let first = net.get_flat_param(0).abs();
        let before = net.get_flat_param(0);
        opt.step(&mut net, &g, Direction::Descend).unwrap();
        let second = (net.get_flat_param(0) - before).abs();
        assert!(second < first, "cache growth should damp the step: {second} vs {first}");
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_side_effects() {
        let mut net = scalar_net(0.25);
        let mut opt = RmsPropState::new(&net, 0.1, 0.9, 1e-8);
        let mut g = GradientSet::zeros_like(&net);
        g.layers[0].d_weights[0] = f64::NAN;
        let err = opt.step(&mut net, &g, Direction::Descend);
        assert!(matches!(err, Err(NnError::NonFiniteGradient)));
        assert_eq!(net.get_flat_param(0), 0.25);
        assert_eq!(opt.cache(0)[0], 0.0);
    }

    #[test]
    fn params_stay_finite_under_many_steps() {
        let mut net = random_net(5);
        let mut opt = RmsPropState::new(&net, 0.01, 0.9, 1e-8);
        let mut r = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let (_, tape) = net.forward(&[0.1, -0.4, 0.9]).unwrap();
            let g: Vec<f64> = (0..2).map(|_| rand::Rng::gen_range(&mut r, -1.0..1.0)).collect();
            let (grads, _) = net.backward(&tape, &g).unwrap();
            opt.step(&mut net, &grads, Direction::Descend).unwrap();
            assert!(net.params_finite());
        }
    }

    #[test]
    fn soft_update_tau_one_copies_source() {
        let mut target = random_net(1);
        let source = random_net(2);
        soft_update(&mut target, &source, 1.0).unwrap();
        assert_eq!(target.flat_params(), source.flat_params());
    }

    #[test]
    fn soft_update_tau_zero_is_noop() {
        let mut target = random_net(3);
        let before = target.flat_params();
        let source = random_net(4);
        soft_update(&mut target, &source, 0.0).unwrap();
        assert_eq!(target.flat_params(), before);
    }

    #[test]
    fn soft_update_scalar_arithmetic() {
        let mut target = scalar_net(1.0);
        let source = scalar_net(2.0);
        soft_update(&mut target, &source, 0.001).unwrap();
        assert!((target.get_flat_param(0) - 1.001).abs() < 1e-15);
    }

    #[test]
    fn soft_update_converges_geometrically() {
        let mut target = scalar_net(0.0);
        let source = scalar_net(1.0);
        let tau = 0.05;
        for n in 1..=100 {
            soft_update(&mut target, &source, tau).unwrap();
            let err = (1.0 - target.get_flat_param(0)).abs();
            let expect = (1.0 - tau_pow(tau, n)).abs();
            assert!((err - expect).abs() < 1e-12, "step {n}: {err} vs {expect}");
        }
    }

    fn tau_pow(tau: f64, n: usize) -> f64 {
        // target after n steps from 0 toward 1: 1 - (1 - tau)^n
        1.0 - (1.0 - tau).powi(n as i32)
    }

    #[test]
    fn soft_update_rejects_shape_mismatch() {
        let mut target = random_net(1);
        let source = scalar_net(1.0);
        assert!(matches!(
            soft_update(&mut target, &source, 0.5),
            Err(NnError::ShapeMismatch)
        ));
    }

    #[test]
    fn soft_update_rejects_bad_tau() {
        let mut target = scalar_net(0.0);
        let source = scalar_net(1.0);
        assert!(matches!(
            soft_update(&mut target, &source, 1.5),
            Err(NnError::TauOutOfRange(_))
        ));
    }
}
