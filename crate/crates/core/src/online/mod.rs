//! Sampled trajectories and the online every-visit learner.

mod control;
mod policies;
mod schedule;
mod trajectory;
mod update;

pub use control::{run_control, ControlConfig, LearningRecord, LogEntry, DIVERGENCE_CUTOFF};
pub use policies::{epsilon_greedy, mixture_behavior, softmax_policy};
pub use schedule::{PolicySchedule, Sequence, StepSizeSchedule};
pub use trajectory::{
    sample_trajectory, sample_trajectory_seeded, trajectory_distribution, StartState, Step, Trajectory, DEFAULT_MAX_LEN,
};
pub use update::{every_visit_update, EligibilityTable};
