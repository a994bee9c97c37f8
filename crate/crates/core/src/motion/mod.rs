//! Reference motion: clip files, retargeting, synthetic references,
//! discriminator features and transition sampling.

pub mod buffer;
pub mod clip;
pub mod features;
pub mod reference;
pub mod retarget;

pub use buffer::{sample_transitions, ReferenceTransitions, ReplayBuffer, TransitionSource};
pub use clip::{dataset_files, load_clip, load_dataset, write_clip, ClipFrame, MotionClip, CLIP_HEADER};
pub use features::{
    disc_features, state_features, RunningNormalizer, Transition, STATE_FEATURE_DIM, TRANSITION_DIM,
};
pub use reference::{
    default_reference_specs, generate_reference, generate_reference_with, has_backswing,
    interior_maxima_above_start, strike_head_position, ReferenceSpec, BACKSWING_MIN_RISE,
};
pub use retarget::{
    resample_uniform, retarget, retarget_frames, HumanKeypoint, JointTrajectory, KeypointLink,
    RetargetMap,
};
