//! Experiment configs, orchestration and versioned JSON/CSV reports.

pub mod catalog;
pub mod config;
pub mod report;
pub mod run;

pub use catalog::list_catalog;
pub use config::{
    AprioriParams, BatterySpec, BoxSpec, CoefficientSpec, CommutatorVmoParams, ExperimentConfig, ExperimentKind,
    KernelAuditParams, KernelFamily, KernelSpec, NormMeasure, NormParams, OperatorBoundParams, OperatorKind,
    PdeVerifyParams, RepresentationParams, SamplerSpec, SymbolCase, SymbolSpec, VmoExpectation, WeightCheckParams,
    WeightExpectation,
};
pub use report::{Check, RunReport, Table, SCHEMA_VERSION, TOOL};
pub use run::run;
