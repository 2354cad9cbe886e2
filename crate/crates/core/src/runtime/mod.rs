//! Execution of (refined) system models: per-instance stepping under the
//! execution rules, a run-to-completion controller with FIFO delivery and a
//! virtual clock, and decision points that pause for an input provider.

mod instance;
mod system;

pub use instance::{
    init_configuration, initial_env, ActionError, Configuration, Emission, Instance, Message, Rng,
    Status, Step, StepOutcome, Stepper, StuckReason, UnexpectedPolicy,
};
pub use system::{
    run_with, trace_jsonl, Advance, Decision, DecisionContext, DecisionOption, FirstOption,
    HaltReason, InputProvider, RandomOption, RunError, RunOptions, SystemRun, TraceRecord,
};
