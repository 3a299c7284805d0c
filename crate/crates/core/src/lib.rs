//! Fault diagnosis for cellular radio networks.
//!
//! Derives KPIs from per-cell counters, classifies each cell's malfunction
//! cause with a first-match rule set or a learned C4.5 tree, and profiles
//! technical areas with k-means clustering.
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`, default
//! `f64`). The aliases at the crate root pin the precision for callers that
//! want a concrete type.

pub mod cluster;
pub mod dataset;
pub mod error;
pub mod kpi;
pub mod pipeline;
pub mod rules;
pub mod scalar;
pub mod synth;
pub mod tree;

pub use cluster::{assign, fit, profile_report, ClusterModel, ClusterParams, ProfileTable};
pub use dataset::{read_arff, read_csv, split, write_arff, write_csv, Dataset, SplitSpec};
pub use error::{Error, Result};
pub use kpi::{class_to_group, derive_kpis, Attribute, CauseGroup, CounterRecord, DerivedKpis, DiagnosisClass, KpiRecord};
pub use pipeline::{kpi_group_summary, run_pipeline, ClusterDiagnosisReport, Labeling, PipelineConfig};
pub use rules::{analyze_reachability, classify, default_ruleset, load_ruleset, save_ruleset, Bounds, RuleSet};
pub use scalar::Scalar;
pub use synth::{generate, GenMode, GenSpec};
pub use tree::{evaluate, predict, predict_distribution, train, EvaluationReport, LearnParams, Pruning, TreeModel};

pub type CounterRecordF32 = CounterRecord<f32>;
pub type CounterRecordF64 = CounterRecord<f64>;
pub type KpiRecordF32 = KpiRecord<f32>;
pub type KpiRecordF64 = KpiRecord<f64>;
pub type DatasetF32 = Dataset<f32>;
pub type DatasetF64 = Dataset<f64>;
pub type RuleSetF32 = RuleSet<f32>;
pub type RuleSetF64 = RuleSet<f64>;
pub type TreeModelF32 = TreeModel<f32>;
pub type TreeModelF64 = TreeModel<f64>;
pub type ClusterModelF32 = ClusterModel<f32>;
pub type ClusterModelF64 = ClusterModel<f64>;
pub type GenSpecF32 = GenSpec<f32>;
pub type GenSpecF64 = GenSpec<f64>;
