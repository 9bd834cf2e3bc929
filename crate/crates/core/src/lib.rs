//! Simulation-based risk assessment for stochastic discrete-event models.
//!
//! A model (tabular, or programmatic such as the power-grid compiler) is
//! unfolded into the tree of all its evolutions up to a horizon; risk is
//! the probability-weighted criticality summed over the tree's paths, or
//! its expectiminimax value when attacker/defender decision states are
//! present, or a Monte Carlo estimate when the tree is too large.

pub mod adversarial;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod num;
pub mod par;
pub mod path;
pub mod powergrid;
pub mod report;
pub mod risk;
pub mod scenario;
pub mod tabular;
pub mod tree;

pub use error::{Diagnostic, Error, Result};
pub use model::{step_internal, EventId, EventSet, ModelBehavior, NodeRole, TransitionDistribution};
pub use num::{Duration, Rational};
pub use par::Execution;
pub use path::{Cause, PathElement, SimulationPath};
pub use report::{Mode, RiskReport};
pub use scenario::{Scenario, ScheduledOccasion};
pub use tabular::{behavior_of, load_model, StateId, TabularModel};
pub use tree::{build_tree, build_tree_with, Language, NodeId, TreeConfig};
