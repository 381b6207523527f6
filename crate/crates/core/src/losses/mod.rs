//! Preference and policy-gradient objectives for post-training.
//!
//! [`group`] turns per-sample rewards into centered advantages and a
//! positive/negative partition. [`dgpo`] scores a whole group in one
//! logistic contrast; [`dpo`] is the best-vs-worst pairwise special case
//! built from the same nodes; [`grpo`] is the clipped importance-ratio
//! policy gradient over recorded stochastic rollouts.

pub mod dgpo;
pub mod dpo;
pub mod group;
pub mod grpo;

pub use dgpo::{
    dgpo_loss, dgpo_loss_node, dgpo_z_node, dsm_diff_node, dsm_diff_values,
    z_compact_from_diffs, z_grouped_from_diffs,
};
pub use dpo::{dpo_loss, dpo_loss_node, dpo_z_node, pair_loss_from_diffs};
pub use group::{advantages, Group, GroupMember};
pub use grpo::{gaussian_logprob, grpo_loss, grpo_loss_node};
