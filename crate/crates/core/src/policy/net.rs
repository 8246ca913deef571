use rand::Rng;
use serde::{Deserialize, Serialize};

use super::action::{ActionGrid, ActionSample, Featurizer};
use crate::error::{Error, Result};
use crate::risk::RiskVector;
use crate::scalar::Scalar;

/// `y = W2 tanh(W1 x + b1) + S x + b2`: one tanh hidden layer plus a linear skip path.
///
/// Parameters live in one flat vector laid out as `W1 | b1 | W2 | S | b2`
/// (row-major weights), which is what the optimiser and the checkpoints see.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub params: Vec<T>,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpPass<T> {
    pub hidden: Vec<T>,
    pub out: Vec<T>,
}

impl<T: Scalar> Mlp<T> {
    pub fn param_count(input: usize, hidden: usize, output: usize) -> usize {
        hidden * input + hidden + output * hidden + output * input + output
    }

    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            input,
            hidden,
            output,
            params: vec![T::zero(); Self::param_count(input, hidden, output)],
        }
    }

    fn offsets(&self) -> [usize; 5] {
        let w1 = 0;
        let b1 = w1 + self.hidden * self.input;
        let w2 = b1 + self.hidden;
        let skip = w2 + self.output * self.hidden;
        let b2 = skip + self.output * self.input;
        [w1, b1, w2, skip, b2]
    }

    /// Uniform `±scale / sqrt(input)` on the input-to-hidden weights; everything else
    /// zero, so the initial output is identically zero.
    pub fn randomise_hidden<R: Rng + ?Sized>(&mut self, rng: &mut R, scale: f64) {
        let bound = scale / (self.input.max(1) as f64).sqrt();
        for w in &mut self.params[..self.hidden * self.input] {
            *w = T::lit(rng.gen_range(-bound..=bound));
        }
    }

    pub fn forward(&self, x: &[T]) -> MlpPass<T> {
        debug_assert_eq!(x.len(), self.input);
        let [w1, b1, w2, skip, b2] = self.offsets();
        let p = &self.params;
        let hidden: Vec<T> = (0..self.hidden)
            .map(|h| {
                let row = &p[w1 + h * self.input..w1 + (h + 1) * self.input];
                let z = row.iter().zip(x).fold(p[b1 + h], |acc, (&w, &xi)| acc + w * xi);
                z.tanh()
            })
            .collect();
        let out = (0..self.output)
            .map(|o| {
                let row2 = &p[w2 + o * self.hidden..w2 + (o + 1) * self.hidden];
                let rows = &p[skip + o * self.input..skip + (o + 1) * self.input];
                let mut acc = p[b2 + o];
                for (&w, &h) in row2.iter().zip(&hidden) {
                    acc += w * h;
                }
                for (&w, &xi) in rows.iter().zip(x) {
                    acc += w * xi;
                }
                acc
            })
            .collect();
        MlpPass { hidden, out }
    }

    /// Accumulates `d(loss)/d(params)` into `grad` given `d(loss)/d(out)`.
    pub fn backward(&self, x: &[T], pass: &MlpPass<T>, d_out: &[T], grad: &mut [T]) {
        let [w1, b1, w2, skip, b2] = self.offsets();
        let p = &self.params;
        let mut d_hidden = vec![T::zero(); self.hidden];
        for o in 0..self.output {
            let g = d_out[o];
            if g == T::zero() {
                continue;
            }
            grad[b2 + o] += g;
            for i in 0..self.input {
                grad[skip + o * self.input + i] += g * x[i];
            }
            for h in 0..self.hidden {
                grad[w2 + o * self.hidden + h] += g * pass.hidden[h];
                d_hidden[h] += g * p[w2 + o * self.hidden + h];
            }
        }
        for h in 0..self.hidden {
            let a = pass.hidden[h];
            let dz = d_hidden[h] * (T::one() - a * a);
            if dz == T::zero() {
                continue;
            }
            grad[b1 + h] += dz;
            for i in 0..self.input {
                grad[w1 + h * self.input + i] += dz * x[i];
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp {
            input: self.input,
            hidden: self.hidden,
            output: self.output,
            params: self.params.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

/// Shapes and constants shared by a policy and everything that reads its checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMeta {
    pub grid: ActionGrid,
    pub featurizer: Featurizer,
    pub hidden: usize,
}

impl Default for PolicyMeta {
    fn default() -> Self {
        Self {
            grid: ActionGrid::default(),
            featurizer: Featurizer::default(),
            hidden: 16,
        }
    }
}

/// Actor (categorical over the joint action grid) and critic (state value), each a
/// two-layer network over the same risk features with independent parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet<T> {
    pub meta: PolicyMeta,
    pub actor: Mlp<T>,
    pub critic: Mlp<T>,
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - m).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&z| (z - m).exp()).sum::<T>().ln() + m;
    logits.iter().map(|&z| z - lse).collect()
}

/// Per-sample actor outputs needed by the losses.
#[derive(Debug, Clone)]
pub struct ActorEval<T> {
    pub pass: MlpPass<T>,
    pub probs: Vec<T>,
    pub log_probs: Vec<T>,
}

impl<T: Scalar> PolicyNet<T> {
    /// All parameters zero: uniform actor, zero critic.
    pub fn zeros(meta: PolicyMeta) -> Self {
        let f = meta.featurizer.dim();
        let a = meta.grid.len();
        Self {
            actor: Mlp::zeros(f, meta.hidden, a),
            critic: Mlp::zeros(f, meta.hidden, 1),
            meta,
        }
    }

    /// Random hidden-layer weights, zero output layers.
    pub fn init<R: Rng + ?Sized>(meta: PolicyMeta, rng: &mut R) -> Self {
        let mut net = Self::zeros(meta);
        net.actor.randomise_hidden(rng, 1.0);
        net.critic.randomise_hidden(rng, 1.0);
        net
    }

    pub fn features(&self, r: &RiskVector) -> Vec<T> {
        self.meta.featurizer.features(r)
    }

    pub fn is_finite(&self) -> bool {
        self.actor.params.iter().chain(&self.critic.params).all(|v| v.is_finite())
    }

    fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("policy parameters".into()))
        }
    }

    pub fn eval_actor(&self, x: &[T]) -> ActorEval<T> {
        let pass = self.actor.forward(x);
        let probs = softmax(&pass.out);
        let log_probs = log_softmax(&pass.out);
        ActorEval {
            pass,
            probs,
            log_probs,
        }
    }

    /// Categorical distribution over the joint action grid.
    pub fn distribution(&self, r: &RiskVector) -> Result<Vec<T>> {
        self.check_finite()?;
        Ok(self.eval_actor(&self.features(r)).probs)
    }

    pub fn value(&self, r: &RiskVector) -> Result<T> {
        self.check_finite()?;
        Ok(self.value_of(&self.features(r)))
    }

    pub fn value_of(&self, x: &[T]) -> T {
        self.critic.forward(x).out[0]
    }

    /// Draws a joint action; returns it with its index and log-probability.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        r: &RiskVector,
        rng: &mut R,
    ) -> Result<(ActionSample, usize, T)> {
        self.check_finite()?;
        let eval = self.eval_actor(&self.features(r));
        let joint = sample_categorical(&eval.probs, rng);
        Ok((self.meta.grid.action(joint), joint, eval.log_probs[joint]))
    }

    /// `log pi(action | x)` and its gradient with respect to the actor parameters.
    pub fn log_prob_grad(&self, x: &[T], action: usize) -> (T, Vec<T>) {
        let eval = self.eval_actor(x);
        let d_out: Vec<T> = eval
            .probs
            .iter()
            .enumerate()
            .map(|(j, &p)| if j == action { T::one() - p } else { -p })
            .collect();
        let mut grad = vec![T::zero(); self.actor.params.len()];
        self.actor.backward(x, &eval.pass, &d_out, &mut grad);
        (eval.log_probs[action], grad)
    }

    pub fn param_count(&self) -> usize {
        self.actor.params.len() + self.critic.params.len()
    }

    /// Actor parameters followed by critic parameters.
    pub fn flat(&self) -> Vec<T> {
        self.actor.params.iter().chain(&self.critic.params).copied().collect()
    }

    pub fn set_flat(&mut self, flat: &[T]) {
        let n = self.actor.params.len();
        self.actor.params.copy_from_slice(&flat[..n]);
        self.critic.params.copy_from_slice(&flat[n..]);
    }

    pub fn cast<U: Scalar>(&self) -> PolicyNet<U> {
        PolicyNet {
            meta: self.meta.clone(),
            actor: self.actor.cast(),
            critic: self.critic.cast(),
        }
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_categorical<T: Scalar, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> usize {
    let u = T::lit(rng.gen::<f64>());
    let mut acc = T::zero();
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs
        .iter()
        .rposition(|&p| p > T::zero())
        .unwrap_or(probs.len() - 1)
}
