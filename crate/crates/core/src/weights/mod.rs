//! Weight functions and the integral conditions that make the operators bounded.

pub mod conditions;
pub mod function;
pub mod hardy;

pub use conditions::{check_condition_a, check_condition_b, CheckSettings, Condition, ConditionReport, Witnessed};
pub use function::{WeightFamily, WeightFunction};
pub use hardy::{hardy_constant, hardy_transform, hardy_trial, HardyConstant, HardyPair, HardyTrial, StepFunction};
