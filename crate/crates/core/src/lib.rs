//! Probabilistic lane graphs learnt from trajectories, path planning over them,
//! risk-reactive multi-agent simulation and PPO search for collision scenarios.
//!
//! Numeric kernels (geometry, k-means, MTTC, the policy network, the optimiser and
//! PPO losses) are generic over [`Scalar`]; graph, simulation and I/O code is `f64`.

pub mod analysis;
pub mod config;
pub mod container;
pub mod corpus;
pub mod error;
pub mod geom;
pub mod ingest;
pub mod kmeans;
pub mod optim;
pub mod planner;
pub mod plg;
pub mod policy;
pub mod ppo;
pub mod risk;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point = geom::Point2<f64>;
pub type Point32 = geom::Point2<f32>;
pub type Polyline = geom::Polyline<f64>;
pub type PolicyParams = policy::PolicyNet<f64>;
pub type PolicyParams32 = policy::PolicyNet<f32>;
