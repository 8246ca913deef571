//! Frequency-table baseline policy and its transfer onto the parametric network.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::action::{ActionGrid, ActionSample, Featurizer, RiskBins};
use super::net::{softmax, PolicyMeta, PolicyNet};
use crate::error::{Error, Result};
use crate::optim::{Adam, AdamConfig};
use crate::risk::RiskVector;

/// One observed decision: the risk the driver faced and what they did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyObservation {
    pub risk: RiskVector,
    pub action: ActionSample,
}

/// `p(a, L | r)` as a Laplace-smoothed joint-action histogram per leading-risk bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPolicy {
    pub grid: ActionGrid,
    pub bins: RiskBins,
    pub alpha: f64,
    /// Raw counts, `counts[bin][joint]`.
    pub counts: Vec<Vec<u64>>,
    /// Smoothed probabilities with the same layout.
    pub probs: Vec<Vec<f64>>,
}

impl EmpiricalPolicy {
    pub fn bin_of(&self, r: &RiskVector) -> usize {
        self.bins.bin(r.max())
    }

    pub fn distribution(&self, r: &RiskVector) -> &[f64] {
        &self.probs[self.bin_of(r)]
    }

    pub fn observations_in(&self, bin: usize) -> u64 {
        self.counts[bin].iter().sum()
    }
}

pub fn fit_empirical_policy(
    observations: &[PolicyObservation],
    grid: &ActionGrid,
    bins: &RiskBins,
    alpha: f64,
) -> Result<EmpiricalPolicy> {
    if observations.is_empty() {
        return Err(Error::EmptyDataset { rejected: 0 });
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("smoothing alpha must be > 0, got {alpha}")));
    }
    let mut counts = vec![vec![0u64; grid.len()]; bins.len()];
    for obs in observations {
        if obs.action.accel_bin >= grid.accels.len() {
            return Err(Error::Invalid(format!("accel bin {} outside grid", obs.action.accel_bin)));
        }
        counts[bins.bin(obs.risk.max())][grid.joint(obs.action)] += 1;
    }
    let probs = counts
        .iter()
        .map(|row| {
            let total = row.iter().sum::<u64>() as f64 + alpha * row.len() as f64;
            row.iter().map(|&c| (c as f64 + alpha) / total).collect()
        })
        .collect();
    Ok(EmpiricalPolicy {
        grid: grid.clone(),
        bins: bins.clone(),
        alpha,
        counts,
        probs,
    })
}

/// Risk vectors spread over each bucket: several leading values inside the bucket,
/// vehicle ahead or behind, with and without a weaker second vehicle.
pub fn representative_risks(featurizer: &Featurizer) -> Vec<(usize, RiskVector)> {
    let bins = &featurizer.bins;
    let k = featurizer.k_bv;
    let mut out = Vec::new();
    for bin in 0..bins.len() {
        let (lo, hi) = bins.range(bin);
        let hi = if hi.is_finite() { hi } else { lo + 20.0 };
        let leads: Vec<f64> = if lo == 0.0 {
            let mut v = vec![0.0];
            v.extend([0.25, 0.5, 0.75].iter().map(|f| lo + f * (hi - lo)));
            v
        } else {
            [0.0, 0.25, 0.5, 0.75].iter().map(|f| lo + f * (hi - lo)).collect()
        };
        for &lead in &leads {
            for ahead in [true, false] {
                for second in [false, true] {
                    let mut r = RiskVector::zeros(k);
                    if lead > 0.0 {
                        r.inverse[0] = lead;
                        r.bv_ahead[0] = ahead;
                        r.mttc.push(1.0 / lead);
                        if second && k > 1 {
                            r.inverse[1] = lead * 0.5;
                            r.bv_ahead[1] = !ahead;
                            r.mttc.push(2.0 / lead);
                        }
                    } else if ahead || second {
                        continue;
                    }
                    out.push((bin, r));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CloneConfig {
    pub lr: f64,
    pub max_steps: usize,
    /// Stop once the largest probability discrepancy falls below this.
    pub tolerance: f64,
}

impl Default for CloneConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            max_steps: 20_000,
            tolerance: 1e-3,
        }
    }
}

/// Largest `|pi(a|r) - p_emp(a|r)|` over the representative risks.
pub fn clone_discrepancy(net: &PolicyNet<f64>, empirical: &EmpiricalPolicy) -> f64 {
    representative_risks(&net.meta.featurizer)
        .iter()
        .map(|(bin, r)| {
            let p = net.eval_actor(&net.features(r)).probs;
            p.iter()
                .zip(&empirical.probs[*bin])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Fits the actor to the empirical policy by full-batch cross-entropy on the
/// representative risks. The critic keeps its random hidden layer and zero output.
pub fn behaviour_clone(
    empirical: &EmpiricalPolicy,
    meta: PolicyMeta,
    seed: u64,
    config: &CloneConfig,
) -> Result<(PolicyNet<f64>, f64)> {
    if meta.grid != empirical.grid || meta.featurizer.bins != empirical.bins {
        return Err(Error::InvalidConfig(
            "policy and empirical policy disagree on the action grid or risk bins".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = PolicyNet::init(meta, &mut rng);
    let samples: Vec<(Vec<f64>, &[f64])> = representative_risks(&net.meta.featurizer)
        .into_iter()
        .map(|(bin, r)| (net.features(&r), empirical.probs[bin].as_slice()))
        .collect();
    let mut opt = Adam::new(AdamConfig { lr: config.lr, ..AdamConfig::default() }, net.actor.params.len());
    let scale = 1.0 / samples.len() as f64;
    let mut worst = f64::INFINITY;
    for _ in 0..config.max_steps {
        let mut grad = vec![0.0; net.actor.params.len()];
        worst = 0.0;
        for (x, target) in &samples {
            let pass = net.actor.forward(x);
            let p = softmax(&pass.out);
            let d: Vec<f64> = p.iter().zip(target.iter()).map(|(a, b)| (a - b) * scale).collect();
            worst = p
                .iter()
                .zip(target.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(worst, f64::max);
            net.actor.backward(x, &pass, &d, &mut grad);
        }
        if worst < config.tolerance {
            break;
        }
        opt.step(&mut net.actor.params, &grad);
    }
    if !net.is_finite() {
        return Err(Error::NonFinite("behaviour cloning".into()));
    }
    Ok((net, worst))
}
