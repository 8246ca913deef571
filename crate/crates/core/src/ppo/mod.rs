//! Proximal policy optimisation of the action network: rewards, generalised
//! advantage estimates, the clipped surrogate loss and the training loop.

mod train;

pub use train::{initial_policy, train, IterationMetrics, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};
use crate::policy::PolicyNet;
use crate::risk::RiskVector;
use crate::scalar::Scalar;

/// `min(1 / MTTC_min, cap)`, zero when no vehicle is on a closing course.
pub fn reward(risk: &RiskVector, cap: f64) -> f64 {
    match risk.min_mttc() {
        Some(t) if t <= 0.0 => cap,
        Some(t) => (1.0 / t).min(cap),
        None => 0.0,
    }
}

/// Advantages `A_t = sum_{l>=0} (gamma lambda)^l delta_{t+l}` truncated at episode
/// ends, with `delta_t = r_t + gamma V(s_{t+1}) - V(s_t)` and a zero value after a
/// terminal step. Returns `(advantages, returns = A + V)`.
pub fn gae<T: Scalar>(
    rewards: &[T],
    values: &[T],
    dones: &[bool],
    gamma: T,
    lambda: T,
) -> (Vec<T>, Vec<T>) {
    let n = rewards.len();
    let mut adv = vec![T::zero(); n];
    let mut acc = T::zero();
    for t in (0..n).rev() {
        let terminal = dones[t] || t + 1 == n;
        let next_value = if terminal { T::zero() } else { values[t + 1] };
        if terminal {
            acc = T::zero();
        }
        let delta = rewards[t] + gamma * next_value - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
    }
    let ret = adv.iter().zip(values).map(|(&a, &v)| a + v).collect();
    (adv, ret)
}

/// Shifts and scales to zero mean and unit (population) standard deviation.
pub fn normalise<T: Scalar>(xs: &mut [T]) {
    if xs.len() < 2 {
        return;
    }
    let n = T::lit(xs.len() as f64);
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    let std = var.sqrt();
    for x in xs.iter_mut() {
        *x = if std > T::lit(1e-12) { (*x - mean) / std } else { *x - mean };
    }
}

/// Decisions gathered under a fixed behaviour policy, one contiguous run per agent.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer<T> {
    pub features: Vec<Vec<T>>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<T>,
    pub rewards: Vec<T>,
    pub values: Vec<T>,
    /// Marks the last step of each agent's run.
    pub dones: Vec<bool>,
    /// Normalised advantages.
    pub advantages: Vec<T>,
    /// Advantages before normalisation.
    pub raw_advantages: Vec<T>,
    pub returns: Vec<T>,
}

impl<T: Scalar> RolloutBuffer<T> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn push(&mut self, features: Vec<T>, action: usize, log_prob: T, reward: T, value: T, done: bool) {
        self.features.push(features);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }

    pub fn compute_advantages(&mut self, gamma: T, lambda: T) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Invalid("empty rollout buffer".into()));
        }
        let (adv, ret) = gae(&self.rewards, &self.values, &self.dones, gamma, lambda);
        self.raw_advantages = adv.clone();
        self.advantages = adv;
        normalise(&mut self.advantages);
        self.returns = ret;
        Ok(())
    }

    pub fn sample(&self, i: usize) -> LossSample<'_, T> {
        LossSample {
            x: &self.features[i],
            action: self.actions[i],
            old_log_prob: self.log_probs[i],
            advantage: self.advantages[i],
            ret: self.returns[i],
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LossSample<'a, T> {
    pub x: &'a [T],
    pub action: usize,
    pub old_log_prob: T,
    pub advantage: T,
    pub ret: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LossOutput<T> {
    /// `-L_clip + c_v * value_mse - c_e * entropy`, to be minimised.
    pub total: T,
    /// Mean clipped surrogate objective (not negated).
    pub surrogate: T,
    pub value_loss: T,
    pub entropy: T,
    pub mean_ratio: T,
    pub clip_fraction: T,
    /// Gradient of `total`: actor parameters then critic parameters.
    pub grad: Vec<T>,
}

/// Clipped surrogate loss over a batch with its exact gradient.
pub fn clipped_loss<T: Scalar>(
    net: &PolicyNet<T>,
    batch: &[LossSample<'_, T>],
    config: &LossConfig,
) -> LossOutput<T> {
    let na = net.actor.params.len();
    let mut grad = vec![T::zero(); na + net.critic.params.len()];
    let b = T::lit(batch.len().max(1) as f64);
    let eps = T::lit(config.clip);
    let (lo, hi) = (T::one() - eps, T::one() + eps);
    let cv = T::lit(config.value_coef);
    let ce = T::lit(config.entropy_coef);
    let two = T::lit(2.0);
    let (mut surrogate, mut value_loss, mut entropy, mut ratio_sum, mut clipped) =
        (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for s in batch {
        let eval = net.eval_actor(s.x);
        let ratio = (eval.log_probs[s.action] - s.old_log_prob).exp();
        let unclipped = ratio * s.advantage;
        let clipped_obj = ratio.max(lo).min(hi) * s.advantage;
        let use_unclipped = unclipped <= clipped_obj;
        surrogate += unclipped.min(clipped_obj);
        ratio_sum += ratio;
        if (ratio - T::one()).abs() > eps {
            clipped += T::one();
        }
        let h = -eval
            .probs
            .iter()
            .zip(&eval.log_probs)
            .map(|(&p, &lp)| p * lp)
            .sum::<T>();
        entropy += h;

        // d(total)/d(logit_j) for this sample, before averaging
        let g_pol = if use_unclipped { unclipped } else { T::zero() };
        let d_out: Vec<T> = eval
            .probs
            .iter()
            .zip(&eval.log_probs)
            .enumerate()
            .map(|(j, (&p, &lp))| {
                let onehot = if j == s.action { T::one() } else { T::zero() };
                (-g_pol * (onehot - p) + ce * p * (lp + h)) / b
            })
            .collect();
        net.actor.backward(s.x, &eval.pass, &d_out, &mut grad[..na]);

        let cpass = net.critic.forward(s.x);
        let err = cpass.out[0] - s.ret;
        value_loss += err * err;
        net.critic
            .backward(s.x, &cpass, &[two * cv * err / b], &mut grad[na..]);
    }
    let surrogate = surrogate / b;
    let value_loss = value_loss / b;
    let entropy = entropy / b;
    LossOutput {
        total: -surrogate + cv * value_loss - ce * entropy,
        surrogate,
        value_loss,
        entropy,
        mean_ratio: ratio_sum / b,
        clip_fraction: clipped / b,
        grad,
    }
}
