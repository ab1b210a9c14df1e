//! Local distribution-based adaptive oversampling (LDAO) for imbalanced
//! regression.
//!
//! The pipeline works in the joint feature-target space: rows are
//! standardized, clustered with k-means (the cluster count picked by an
//! elbow rule on the SSE curve), each cluster gets its own Gaussian kernel
//! density estimate, and every cluster is grown to `ceil(alpha_k * n_k)`
//! points by sampling from its estimate. Original rows are kept untouched.
//!
//! ```no_run
//! use ldao_core::{ingest, run_ldao, CsvSchema, RunConfig};
//!
//! let data = ingest::read_csv("housing.csv", &CsvSchema::target_name("price"))?;
//! let out = run_ldao(&data, &RunConfig::default())?;
//! ingest::write_csv(&out.dataset, "housing.ldao.csv", true)?;
//! print!("{}", out.report.to_kv());
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! The [`metrics`] and [`harness`] modules provide RMSE, MAE, SERA, the
//! Wilcoxon signed-rank test and a cross-validation runner that compares a
//! k-NN learner trained with and without augmentation.

pub mod augment;
pub mod cluster;
pub mod config;
pub mod data;
pub mod density;
pub mod harness;
pub mod ingest;
pub mod metrics;
pub mod rng;

pub use augment::{
    elbow_trace, make_plan, run_ldao, AugmentationPlan, AugmentedDataset, LdaoError, RunReport,
};
pub use cluster::{kmeans_fit, select_k, sse_curve, ClusterModel, ElbowTrace, FitParams};
pub use config::{AlphaMode, RunConfig};
pub use data::{standardize, to_joint, Dataset, JointPoint, StandardizationParams};
pub use density::{select_bandwidth, ClusterKde};
pub use harness::{knn_regress, run_experiment, CvPlan, EvaluationReport};
pub use ingest::{read_csv, write_csv, CsvSchema, TargetSelector};
pub use metrics::{build_relevance, mae, rmse, sera, RelevanceFunction};
