//! Action models: the action grid and featurisation, the empirical baseline and the
//! parametric actor-critic network, plus their checkpoint files.

mod action;
mod empirical;
mod net;

pub use action::{ActionGrid, ActionSample, Featurizer, LaneChange, RiskBins};
pub use empirical::{
    behaviour_clone, clone_discrepancy, fit_empirical_policy, representative_risks, CloneConfig,
    EmpiricalPolicy, PolicyObservation,
};
pub use net::{sample_categorical, softmax, ActorEval, Mlp, MlpPass, PolicyMeta, PolicyNet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{Error, Result};
use crate::risk::RiskVector;

/// The double-precision network used everywhere outside the generic kernels.
pub type PolicyParams = PolicyNet<f64>;

pub const POLICY_FORMAT_VERSION: u32 = 1;
pub const EMPIRICAL_FORMAT_VERSION: u32 = 1;
const POLICY_KIND: &[u8; 4] = b"POLI";
const EMPIRICAL_KIND: &[u8; 4] = b"EMPI";

/// Anything that maps a risk vector to a distribution over the joint action grid.
pub trait ActionPolicy: Sync {
    fn grid(&self) -> &ActionGrid;

    fn action_distribution(&self, r: &RiskVector) -> Result<Vec<f64>>;

    /// Draws a joint action index and returns it with its log-probability.
    fn sample_joint(&self, r: &RiskVector, rng: &mut dyn rand::RngCore) -> Result<(usize, f64)> {
        let p = self.action_distribution(r)?;
        let j = sample_categorical(&p, rng);
        Ok((j, p[j].ln()))
    }
}

impl ActionPolicy for PolicyParams {
    fn grid(&self) -> &ActionGrid {
        &self.meta.grid
    }

    fn action_distribution(&self, r: &RiskVector) -> Result<Vec<f64>> {
        self.distribution(r)
    }

    fn sample_joint(&self, r: &RiskVector, rng: &mut dyn rand::RngCore) -> Result<(usize, f64)> {
        let eval = self.eval_actor(&self.features(r));
        let j = sample_categorical(&eval.probs, rng);
        Ok((j, eval.log_probs[j]))
    }
}

impl ActionPolicy for EmpiricalPolicy {
    fn grid(&self) -> &ActionGrid {
        &self.grid
    }

    fn action_distribution(&self, r: &RiskVector) -> Result<Vec<f64>> {
        Ok(self.distribution(r).to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tensor {
    shape: [usize; 3],
    params: Vec<f64>,
}

impl Tensor {
    fn of(m: &Mlp<f64>) -> Self {
        Self {
            shape: [m.input, m.hidden, m.output],
            params: m.params.clone(),
        }
    }

    fn into_mlp(self) -> Result<Mlp<f64>> {
        let [input, hidden, output] = self.shape;
        if self.params.len() != Mlp::<f64>::param_count(input, hidden, output) {
            return Err(Error::Invalid(format!(
                "parameter array of length {} does not match shape {:?}",
                self.params.len(),
                self.shape
            )));
        }
        Ok(Mlp {
            input,
            hidden,
            output,
            params: self.params,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PolicyRecord {
    meta: PolicyMeta,
    actor: Tensor,
    critic: Tensor,
    config: serde_json::Value,
}

/// A trained or cloned network together with the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCheckpoint {
    pub params: PolicyParams,
    pub config: serde_json::Value,
}

pub fn serialise_policy(checkpoint: &PolicyCheckpoint) -> Result<Vec<u8>> {
    let p = &checkpoint.params;
    container::encode(
        POLICY_KIND,
        POLICY_FORMAT_VERSION,
        &PolicyRecord {
            meta: p.meta.clone(),
            actor: Tensor::of(&p.actor),
            critic: Tensor::of(&p.critic),
            config: checkpoint.config.clone(),
        },
    )
}

pub fn deserialise_policy(bytes: &[u8]) -> Result<PolicyCheckpoint> {
    let rec: PolicyRecord = container::decode(POLICY_KIND, POLICY_FORMAT_VERSION, bytes)?;
    let params = PolicyNet {
        actor: rec.actor.into_mlp()?,
        critic: rec.critic.into_mlp()?,
        meta: rec.meta,
    };
    let f = params.meta.featurizer.dim();
    if params.actor.input != f
        || params.critic.input != f
        || params.actor.output != params.meta.grid.len()
        || params.critic.output != 1
    {
        return Err(Error::Invalid("policy tensor shapes disagree with its metadata".into()));
    }
    if !params.is_finite() {
        return Err(Error::NonFinite("policy checkpoint".into()));
    }
    Ok(PolicyCheckpoint {
        params,
        config: rec.config,
    })
}

pub fn serialise_empirical(policy: &EmpiricalPolicy) -> Result<Vec<u8>> {
    container::encode(EMPIRICAL_KIND, EMPIRICAL_FORMAT_VERSION, policy)
}

pub fn deserialise_empirical(bytes: &[u8]) -> Result<EmpiricalPolicy> {
    container::decode(EMPIRICAL_KIND, EMPIRICAL_FORMAT_VERSION, bytes)
}

/// Either policy file, told apart by its kind tag.
#[derive(Debug, Clone)]
pub enum AnyPolicy {
    Trained(PolicyCheckpoint),
    Empirical(EmpiricalPolicy),
}

impl AnyPolicy {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        match &container::peek_kind(bytes)? {
            k if k == POLICY_KIND => Ok(AnyPolicy::Trained(deserialise_policy(bytes)?)),
            k if k == EMPIRICAL_KIND => Ok(AnyPolicy::Empirical(deserialise_empirical(bytes)?)),
            _ => Err(Error::BadMagic {
                expected: "POLI or EMPI".into(),
            }),
        }
    }

    pub fn as_policy(&self) -> &dyn ActionPolicy {
        match self {
            AnyPolicy::Trained(c) => &c.params,
            AnyPolicy::Empirical(e) => e,
        }
    }
}

/// Convenience for callers holding a concrete `Rng`.
pub fn sample_action<P: ActionPolicy + ?Sized, R: Rng>(
    policy: &P,
    r: &RiskVector,
    rng: &mut R,
) -> Result<(ActionSample, usize, f64)> {
    let (j, lp) = policy.sample_joint(r, rng)?;
    Ok((policy.grid().action(j), j, lp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ck = PolicyCheckpoint {
            params: PolicyNet::init(PolicyMeta::default(), &mut rng),
            config: serde_json::json!({"seed": 2}),
        };
        let bytes = serialise_policy(&ck).unwrap();
        assert_eq!(deserialise_policy(&bytes).unwrap(), ck);
        assert!(matches!(AnyPolicy::from_bytes(&bytes).unwrap(), AnyPolicy::Trained(_)));
        assert!(matches!(
            deserialise_policy(&bytes[..bytes.len() - 3]),
            Err(Error::ChecksumMismatch)
        ));
    }

    #[test]
    fn dyn_and_direct_sampling_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = PolicyNet::init(PolicyMeta::default(), &mut rng);
        let r = RiskVector::zeros(4);
        let mut a = ChaCha8Rng::seed_from_u64(8);
        let mut b = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let (_, j1, _) = net.sample(&r, &mut a).unwrap();
            let (_, j2, _) = sample_action(&net, &r, &mut b).unwrap();
            assert_eq!(j1, j2);
        }
    }
}
