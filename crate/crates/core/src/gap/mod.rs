//! Dynamics-gap estimation: coupled discriminators, Bayes-rule ratios, the KL gap
//! measure `u(s, a)` and its minibatch normalization `omega`.

mod discriminator;
mod measure;

pub use discriminator::{
    discriminator_probs, train_discriminators, DiscriminatorLogits, DiscriminatorPair, DiscriminatorProbs, Standardizer, REAL,
    SIM,
};
pub use measure::{
    batch_omega, clip_u, darc_reward_correction, dynamics_ratio, entropy, gap_measure_u, gap_measure_u_reverse,
    importance_weight, importance_weight_from_log_ratio, ratio_from_probs, DynamicsRatio, GapEstimate,
    GaussianDynamicsModel, DEFAULT_KL_SAMPLES, DELTA_R_CLIP, U_MAX, U_MIN, WEIGHT_MAX, WEIGHT_MIN,
};
