//! Stable-GRPO objective and a desk-scale training testbed.
//!
//! The objective for a batch of rollout groups is
//!
//! ```text
//! J = mean_groups (1/G) sum_i (1/|y_i|) sum_t [ L_clip(i,t) + gamma * L_sft(i,t) ]
//! L_clip = min(w A_i, clip(w, 1-eps, 1+eps) A_i)
//! L_sft  = max(0, A_i) * ln pi(y_it)
//! ```
//!
//! where `w` is the per-token importance ratio, or the length-normalized
//! sequence ratio held constant across tokens. Gradients are analytic with
//! respect to the logits of a [`ToyPolicy`].

mod config;
mod objective;
mod policy;
mod simulate;
mod task;

pub use config::{AdvantageMode, RatioMode, TrainConfig, FULL_SCALE_OVERLONG_BUFFER};
pub use objective::{
    clip_objective, importance_ratio_sequence, importance_ratio_token, sft_term, stable_grpo_objective,
    stable_grpo_objective_with_reference, Objective, Trajectory,
};
pub use policy::{Logits, ToyPolicy};
pub use simulate::{run_simulation, CurvePoint, TrainCurve};
pub use task::{
    length_penalty, oracle_quality, reward_provider_gqm, reward_provider_saturating_sqm, Provider, ToyTask,
    SQM_BIAS,
};
