//! Desk-scale laboratory for hierarchical spatial attention: the tabular
//! pegs-on-disks world with octant-summary sensing, tabular learners for the
//! standard / lookahead / deictic encodings, an exact finite-horizon value
//! oracle, the continuous virtual-sensor geometry, and the attention-schedule
//! calculators.

pub mod attention;
pub mod experiment;
pub mod grid;
pub mod learning;
pub mod oracle;
pub mod schedule;
pub mod sensor;

pub use attention::{
    AbstractObs, ActionDescriptor, ActionKey, GridMask, ObsKey, Octant, SensorMode,
};
pub use grid::{ExtendedGroundState, GridConfig, GroundState, Loc, PegPos};
pub use learning::{AgentConfig, EpisodeLog, Learner, LearnerConfig, ValueTable, Variant};
pub use experiment::{ExperimentConfig, ExperimentResult};
