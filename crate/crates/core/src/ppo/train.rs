use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{clipped_loss, LossConfig, LossSample, RolloutBuffer};
use crate::error::{Error, Result};
use crate::optim::{clip_grad_norm, Adam, AdamConfig};
use crate::planner::ConditionalTable;
use crate::plg::Plg;
use crate::policy::{behaviour_clone, CloneConfig, EmpiricalPolicy, PolicyMeta, PolicyParams};
use crate::sim::{run_episode, Episode, Policies, PolicyAssignment, SeedState, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub lr: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub iterations: usize,
    pub rollout_steps: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub reward_cap: f64,
    pub max_grad_norm: f64,
    /// Episodes simulated per parallel batch while collecting rollouts.
    pub episode_chunk: usize,
    pub hidden: usize,
    pub clone: CloneConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            lr: 3e-4,
            epochs: 4,
            minibatch: 64,
            iterations: 40,
            rollout_steps: 2048,
            value_coef: 0.5,
            entropy_coef: 0.01,
            reward_cap: 20.0,
            max_grad_norm: 0.5,
            episode_chunk: 16,
            hidden: 16,
            clone: CloneConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !(self.clip > 0.0 && self.clip < 1.0) || !unit(self.gamma) || !unit(self.lambda) {
            return Err(Error::InvalidConfig(
                "need clip in (0,1) and gamma, lambda in (0,1]".into(),
            ));
        }
        if !(self.lr > 0.0) || self.epochs == 0 || self.minibatch == 0 || self.rollout_steps == 0 {
            return Err(Error::InvalidConfig(
                "lr, epochs, minibatch and rollout_steps must be positive".into(),
            ));
        }
        if !(self.reward_cap > 0.0) || self.episode_chunk == 0 || self.hidden == 0 {
            return Err(Error::InvalidConfig(
                "reward_cap, episode_chunk and hidden must be positive".into(),
            ));
        }
        Ok(())
    }

    fn loss(&self) -> LossConfig {
        LossConfig {
            clip: self.clip,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub episodes: usize,
    pub steps: usize,
    pub mean_reward: f64,
    pub collision_rate: f64,
    /// Mean probability ratio over every minibatch evaluated this iteration.
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    /// Mean ratio over the whole batch before the first update.
    pub initial_ratio: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    /// The behaviour-cloned starting point.
    pub initial: PolicyParams,
    pub clone_discrepancy: f64,
    pub metrics: Vec<IterationMetrics>,
}

fn iteration_seed(seed: u64, iteration: usize) -> u64 {
    seed ^ (iteration as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct Rollout {
    buffer: RolloutBuffer<f64>,
    episodes: usize,
    collisions: usize,
}

#[allow(clippy::too_many_arguments)]
fn collect(
    net: &PolicyParams,
    background: &PolicyParams,
    seeds: &[SeedState],
    first_episode: usize,
    iteration: usize,
    sim: &SimConfig,
    table: &ConditionalTable,
    plg: &Plg,
    config: &TrainConfig,
) -> Result<Rollout> {
    let sim = SimConfig {
        seed: iteration_seed(sim.seed ^ config.seed, iteration),
        ..*sim
    };
    let policies = Policies {
        primary: net,
        background,
    };
    let mut out = Rollout {
        buffer: RolloutBuffer::default(),
        episodes: 0,
        collisions: 0,
    };
    while out.buffer.len() < config.rollout_steps {
        let base = out.episodes;
        let chunk: Vec<Episode> = (base..base + config.episode_chunk)
            .into_par_iter()
            .map(|k| {
                let seed = &seeds[(first_episode + k) % seeds.len()];
                run_episode(seed, k, k as u64, &sim, policies, table, plg, Some(config.reward_cap))
            })
            .collect::<Result<_>>()?;
        for e in &chunk {
            out.episodes += 1;
            out.collisions += usize::from(e.termination.is_collision());
            for trace in &e.traces {
                let last = trace.steps.len() - 1;
                for (t, step) in trace.steps.iter().enumerate() {
                    let x = net.features(&step.risk);
                    let v = net.value_of(&x);
                    out.buffer.push(x, step.action, step.log_prob, step.reward, v, t == last);
                }
            }
        }
        if chunk.iter().all(|e| e.traces.is_empty()) && out.buffer.is_empty() {
            return Err(Error::Invalid(
                "rollouts produced no decisions; seeds may start at their exits".into(),
            ));
        }
    }
    Ok(out)
}

/// The behaviour-cloned policy training starts from, and its worst-bin discrepancy.
pub fn initial_policy(
    empirical: &EmpiricalPolicy,
    sim: &SimConfig,
    config: &TrainConfig,
) -> Result<(PolicyParams, f64)> {
    let meta = PolicyMeta {
        grid: empirical.grid.clone(),
        featurizer: crate::policy::Featurizer {
            bins: empirical.bins.clone(),
            k_bv: sim.risk.k_bv,
        },
        hidden: config.hidden,
    };
    behaviour_clone(empirical, meta, config.seed, &config.clone)
}

/// Behaviour-clones the actor onto the empirical policy, then runs PPO iterations of
/// rollout collection and clipped-surrogate updates. `on_iteration` sees each
/// iteration's metrics as soon as they are available.
#[allow(clippy::too_many_arguments)]
pub fn train(
    plg: &Plg,
    table: &ConditionalTable,
    empirical: &EmpiricalPolicy,
    seeds: &[SeedState],
    sim: &SimConfig,
    config: &TrainConfig,
    mut on_iteration: impl FnMut(&IterationMetrics),
) -> Result<TrainOutcome> {
    config.validate()?;
    sim.validate()?;
    if seeds.is_empty() {
        return Err(Error::Invalid("no seed states to train from".into()));
    }
    let (initial, discrepancy) = initial_policy(empirical, sim, config)?;
    let mut net = initial.clone();
    let mut flat = net.flat();
    let mut opt = Adam::new(
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
        flat.len(),
    );
    let background = initial.clone();
    let loss_cfg = config.loss();
    let mut metrics = Vec::with_capacity(config.iterations);
    let mut episodes_so_far = 0;
    for iteration in 0..config.iterations {
        let snapshot = net.clone();
        let bg = match sim.assignment {
            PolicyAssignment::All => &snapshot,
            PolicyAssignment::EgoOnly => &background,
        };
        let mut roll = collect(
            &snapshot,
            bg,
            seeds,
            episodes_so_far,
            iteration,
            sim,
            table,
            plg,
            config,
        )?;
        episodes_so_far += roll.episodes;
        let buf = &mut roll.buffer;
        buf.compute_advantages(config.gamma, config.lambda)?;

        let all: Vec<LossSample<'_, f64>> = (0..buf.len()).map(|i| buf.sample(i)).collect();
        let initial_ratio = clipped_loss(&net, &all, &loss_cfg).mean_ratio;

        let mut rng = ChaCha8Rng::seed_from_u64(iteration_seed(config.seed, iteration));
        let mut order: Vec<usize> = (0..buf.len()).collect();
        let (mut ratio_sum, mut clip_sum, mut vloss, mut ent, mut batches) = (0.0, 0.0, 0.0, 0.0, 0usize);
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for mb in order.chunks(config.minibatch) {
                let batch: Vec<_> = mb.iter().map(|&i| buf.sample(i)).collect();
                let mut out = clipped_loss(&net, &batch, &loss_cfg);
                if !out.total.is_finite() || out.grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::Diverged {
                        iteration,
                        last_good: Box::new(snapshot),
                    });
                }
                ratio_sum += out.mean_ratio;
                clip_sum += out.clip_fraction;
                vloss += out.value_loss;
                ent += out.entropy;
                batches += 1;
                clip_grad_norm(&mut out.grad, config.max_grad_norm);
                opt.step(&mut flat, &out.grad);
                net.set_flat(&flat);
            }
        }
        if !net.is_finite() {
            return Err(Error::Diverged {
                iteration,
                last_good: Box::new(snapshot),
            });
        }
        let nb = batches.max(1) as f64;
        let m = IterationMetrics {
            iteration,
            episodes: roll.episodes,
            steps: buf.len(),
            mean_reward: buf.rewards.iter().sum::<f64>() / buf.len() as f64,
            collision_rate: roll.collisions as f64 / roll.episodes.max(1) as f64,
            mean_ratio: ratio_sum / nb,
            clip_fraction: clip_sum / nb,
            initial_ratio,
            value_loss: vloss / nb,
            entropy: ent / nb,
        };
        log::debug!(
            "iteration {}: reward {:.4} collisions {:.3} ratio {:.4} clip {:.3}",
            m.iteration,
            m.mean_reward,
            m.collision_rate,
            m.mean_ratio,
            m.clip_fraction
        );
        on_iteration(&m);
        metrics.push(m);
    }
    Ok(TrainOutcome {
        params: net,
        initial,
        clone_discrepancy: discrepancy,
        metrics,
    })
}
