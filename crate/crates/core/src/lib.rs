//! Execution of partial component models with hierarchical state machines.
//!
//! A model whose components are complete, partially specified or absent is
//! analysed for execution blockers, refined so that every blocker becomes a
//! decision point, and executed with decisions supplied interactively or by
//! rules. Bounded checkers cross-validate the refinement.

pub mod analysis;
pub mod experiment;
pub mod model;
pub mod oracle;
pub mod par;
pub mod refine;
pub mod rules;
pub mod runtime;
pub mod session;
pub mod text;

/// The traffic-light example model in `.pmx` syntax.
pub const TRAFFIC_LIGHT: &str = include_str!("../fixtures/traffic_light.pmx");
/// A vending machine with a non-exhaustive choice-point.
pub const VENDING: &str = include_str!("../fixtures/vending.pmx");
/// A primary/backup service with a composite lacking an initial state.
pub const FAILOVER: &str = include_str!("../fixtures/failover.pmx");

/// The shipped example models, by name.
pub const EXAMPLES: [(&str, &str); 3] = [
    ("traffic_light", TRAFFIC_LIGHT),
    ("vending", VENDING),
    ("failover", FAILOVER),
];
