//! Soft actor-critic backbone and the simulator/offline hybrid variants built on it.

mod actor;
mod agent;
pub mod checkpoint;
mod config;
pub mod critic;
mod policy;
mod train;

pub use actor::{actor_loss, actor_loss_and_grad, log_probs, temperature_gradient, temperature_update, ActorLoss};
pub use agent::AgentState;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Manifest};
pub use config::{AgentConfig, Algorithm, VariantConfig};
pub use critic::{
    cql_objective, cql_proposals, h2o_objective, mixed_sac_objective, sac_objective, sac_target, sac_target_with_noise,
    standard_noise, twin_loss_and_grad, CqlProposals, CriticLossTerms, CriticObjective, GapWeights, RegularizerForm,
};
pub use policy::{
    deterministic_action, log_one_minus_tanh_sq, log_prob_of, policy_sample, sample_with_noise, PolicySample, LOG_STD_MAX,
    LOG_STD_MIN,
};
pub use train::{stream_rng, EnvSpec, RngStreams, StepMetrics, Trainer, EVAL_STREAM};
