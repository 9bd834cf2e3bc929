//! Power grids with load-dependent, cascading failures and an attackable
//! information network.

mod cascade;
mod compile;
mod flow;
mod spec;

pub use cascade::cascade_depth;
pub use compile::{
    compile_grid, pruned_mass, AttackMode, FailureOutcome, GridBehavior, GridState, Phase, ATTACK_WINDOW, FAILURE_MODEL_DESCRIPTION,
    FLOW_SOLVER_DESCRIPTION, MAX_ROUTING_PLANS,
};
pub use flow::{conservation_holds, failure_probability, routing_plans, solve_flow, FlowSolution, MAX_CANDIDATES};
pub use spec::{load_grid, GridNode, GridSpec, InfoEdge, PowerEdge, DEFAULT_PRUNE_FLOOR};
