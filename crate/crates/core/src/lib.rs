//! Index tuning toolkit.
//!
//! Recommends covering indexes straight from a query plan, selects workload
//! configurations by greedy search over a what-if cost oracle, builds advisor
//! prompts and checks their answers, and validates competing configurations
//! under a measured time budget.

pub mod advisor;
pub mod catalog;
pub mod cost_oracle;
pub mod enumerator;
pub mod error;
pub mod plan;
pub mod prompt;
pub mod rule_tuner;
pub mod serde_duration;
pub mod synth;
pub mod validator;

pub use catalog::{load_catalog, Catalog, ColumnRef, Ident, IndexDefinition, IndexViolation};
pub use cost_oracle::{estimate_workload, SyntheticWorkloadSpec, WhatIfOracle};
pub use enumerator::{greedy_select, merge_pools, CandidatePool, Configuration, GreedyOptions};
pub use error::{Error, Result};
pub use plan::{parse_plan, render_plan_table, OpKind, PlanNode, PlanTree};
pub use prompt::{build_multi_query_prompt, build_single_query_prompt, PromptBundle, PromptTemplates};
pub use rule_tuner::{simple_index_recommendation, TunerParams};
pub use validator::{validate_configurations, EventLog, Executor, SimulatedExecutor, ValidationReport};
