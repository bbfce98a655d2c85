//! Desk-scale computer-use agent training.
//!
//! The crate covers the whole loop: a deterministic simulated desktop
//! ([`env`]), closed-loop verifiable task synthesis ([`taskgen`]), trajectory
//! extraction and filtering ([`gate`]), a linear-softmax agent with history
//! compression ([`policy`]), step-wise GRPO ([`rl`]), IoU-rewarded grounding
//! ([`grounding`]), drop-and-rescale merging ([`merge`]) and best-of-N
//! inference ([`infer`]).

pub mod env;
pub mod gate;
pub mod grounding;
pub mod infer;
pub mod merge;
pub mod policy;
pub mod rl;
pub mod seed;
pub mod taskgen;
