//! End-to-end oversampling: cluster the joint space, fit a KDE per cluster,
//! grow each cluster to `ceil(alpha_k * n_k)` points and merge.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::cluster::{self, ClusterError, ClusterModel, ElbowTrace, FitParams};
use crate::config::{AlphaMode, ConfigError, RunConfig};
use crate::data::{self, Dataset, DatasetError, JointPoint, StandardizationParams};
use crate::density::{self, ClusterKde, DensityError};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LdaoError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("{points} rows cannot form {k} clusters")]
    TooFewPoints { points: usize, k: usize },
    #[error("cluster {cluster}: {source}")]
    Density {
        cluster: usize,
        #[source]
        source: DensityError,
    },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Per-cluster growth multipliers and resulting sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPlan {
    pub alphas: Vec<f64>,
    pub original_sizes: Vec<usize>,
    pub target_sizes: Vec<usize>,
    pub synthetic_counts: Vec<usize>,
}

impl AugmentationPlan {
    pub fn total_size(&self) -> usize {
        self.target_sizes.iter().sum()
    }

    pub fn total_synthetic(&self) -> usize {
        self.synthetic_counts.iter().sum()
    }
}

/// `ceil(alpha * n)`, treating products within a few ulps of an integer as
/// that integer so `1.1 * 10` stays 11.
pub fn grown_size(alpha: f64, n: usize) -> usize {
    let p = alpha * n as f64;
    let r = p.round();
    if (p - r).abs() <= 4.0 * f64::EPSILON * r.abs().max(1.0) {
        r as usize
    } else {
        p.ceil() as usize
    }
}

pub fn make_plan(cluster_sizes: &[usize], config: &RunConfig) -> AugmentationPlan {
    assert!(
        cluster_sizes.iter().all(|&n| n >= 1),
        "clusters must be non-empty"
    );
    let largest = cluster_sizes.iter().copied().max().unwrap_or(1) as f64;
    let alphas: Vec<f64> = cluster_sizes
        .iter()
        .map(|&n| match config.alpha_mode {
            AlphaMode::Uniform => config.alpha,
            AlphaMode::Adaptive => (largest / n as f64)
                .powf(config.gamma)
                .min(config.alpha_max)
                .max(1.0),
        })
        .collect();
    let target_sizes: Vec<usize> = alphas
        .iter()
        .zip(cluster_sizes)
        .map(|(&a, &n)| grown_size(a, n).max(n))
        .collect();
    let synthetic_counts = target_sizes
        .iter()
        .zip(cluster_sizes)
        .map(|(t, n)| t - n)
        .collect();
    AugmentationPlan {
        alphas,
        original_sizes: cluster_sizes.to_vec(),
        target_sizes,
        synthetic_counts,
    }
}

/// Everything worth reporting about one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub n_original: usize,
    pub alpha_mode: AlphaMode,
    pub bandwidth_scale: f64,
    pub elbow_threshold: f64,
    pub trace: ElbowTrace,
    pub k_star: usize,
    pub plan: AugmentationPlan,
    pub weights: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub degenerate_columns: Vec<String>,
    pub warnings: Vec<String>,
}

impl RunReport {
    /// Renders the report as `key = value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("seed", &self.seed);
        kv("n_original", &self.n_original);
        kv("n_synthetic", &self.plan.total_synthetic());
        kv("n_total", &self.plan.total_size());
        kv("alpha_mode", &self.alpha_mode);
        kv("bandwidth_scale", &self.bandwidth_scale);
        kv("elbow_threshold", &self.elbow_threshold);
        kv("k_min", &self.trace.k_min);
        kv("k_max", &self.trace.k_max);
        kv("k_star", &self.k_star);
        for (i, v) in self.trace.sse.iter().enumerate() {
            kv(&format!("sse.{}", self.trace.k_min + i), v);
        }
        for (i, v) in self.trace.deltas.iter().enumerate() {
            kv(&format!("delta.{}", self.trace.k_min + 1 + i), v);
        }
        for k in 0..self.k_star {
            kv(&format!("cluster.{k}.n"), &self.plan.original_sizes[k]);
            kv(&format!("cluster.{k}.weight"), &self.weights[k]);
            kv(&format!("cluster.{k}.alpha"), &self.plan.alphas[k]);
            kv(
                &format!("cluster.{k}.target_size"),
                &self.plan.target_sizes[k],
            );
            kv(
                &format!("cluster.{k}.synthetic"),
                &self.plan.synthetic_counts[k],
            );
            kv(&format!("cluster.{k}.lambda"), &self.lambdas[k]);
        }
        if !self.degenerate_columns.is_empty() {
            kv("degenerate_columns", &self.degenerate_columns.join(","));
        }
        for w in &self.warnings {
            kv("warning", w);
        }
        s
    }
}

/// Output of [`run_ldao`]: originals first in input order, then synthetic
/// rows grouped by cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    pub dataset: Dataset,
    pub plan: AugmentationPlan,
    /// Cluster index of every original row.
    pub assignments: Vec<usize>,
    /// Source cluster of each synthetic row, in output order.
    pub provenance: Vec<usize>,
    pub standardization: StandardizationParams,
    pub report: RunReport,
}

struct Clustering {
    params: StandardizationParams,
    points: Vec<JointPoint>,
    trace: ElbowTrace,
    models: Vec<ClusterModel>,
    warnings: Vec<String>,
}

/// Standardizes, embeds and clusters `dataset` over the configured K range.
fn cluster_joint(dataset: &Dataset, config: &RunConfig) -> Result<Clustering, LdaoError> {
    config.validate()?;
    let n = dataset.n_rows();
    if n < config.k_min {
        return Err(LdaoError::TooFewPoints {
            points: n,
            k: config.k_min,
        });
    }
    let mut warnings = config.range_warnings();
    let k_max = config.k_max.min(n);
    if k_max < config.k_max {
        warnings.push(format!(
            "k_max lowered from {} to {n} (row count)",
            config.k_max
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let (scaled, params) = data::standardize(dataset);
    let points = data::to_joint(&scaled);
    let fit = FitParams {
        restarts: config.restarts,
        max_iterations: config.max_iterations,
        tolerance: config.tolerance,
    };
    let (mut trace, models) = cluster::sse_curve(
        &points,
        config.k_min,
        k_max,
        rng::derive(config.seed, &[rng::TAG_KMEANS]),
        &fit,
    )?;
    trace.k_star = Some(cluster::select_k(&trace, config.elbow_threshold));
    Ok(Clustering {
        params,
        points,
        trace,
        models,
        warnings,
    })
}

/// The SSE curve and chosen K that [`run_ldao`] would use, without sampling.
pub fn elbow_trace(dataset: &Dataset, config: &RunConfig) -> Result<ElbowTrace, LdaoError> {
    Ok(cluster_joint(dataset, config)?.trace)
}

/// Runs the whole oversampling pipeline on `dataset`.
pub fn run_ldao(dataset: &Dataset, config: &RunConfig) -> Result<AugmentedDataset, LdaoError> {
    let Clustering {
        params,
        points,
        trace,
        mut models,
        warnings,
    } = cluster_joint(dataset, config)?;
    let k_star = trace.k_star.expect("set by cluster_joint");
    let model = models.swap_remove(k_star - config.k_min);

    let members = model.members();
    let kdes: Vec<ClusterKde> = members
        .par_iter()
        .enumerate()
        .map(|(k, idx)| {
            let pts = idx.iter().map(|&i| points[i].clone()).collect();
            density::select_bandwidth(pts, config.bandwidth_scale, config.lambda_floor)
                .map_err(|source| LdaoError::Density { cluster: k, source })
        })
        .collect::<Result<_, _>>()?;

    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let plan = make_plan(&sizes, config);

    let synthetic: Vec<Vec<JointPoint>> = kdes
        .par_iter()
        .zip(plan.synthetic_counts.par_iter())
        .enumerate()
        .map(|(k, (kde, &count))| {
            let mut stream = rng::stream(config.seed, &[rng::TAG_SAMPLE, k as u64]);
            kde.sample(count, &mut stream)
        })
        .collect();

    let ranges = config.clip_to_range.then(|| column_ranges(dataset));
    let d = dataset.n_features();
    let total = plan.total_size();
    let mut features = Vec::with_capacity(total * d);
    let mut target = Vec::with_capacity(total);
    features.extend_from_slice(dataset.features());
    target.extend_from_slice(dataset.target());
    let mut provenance = Vec::with_capacity(plan.total_synthetic());
    for (k, batch) in synthetic.iter().enumerate() {
        for z in batch {
            let mut raw = params.inverse(z.as_slice());
            if let Some(r) = &ranges {
                for (v, (lo, hi)) in raw.iter_mut().zip(r) {
                    *v = v.clamp(*lo, *hi);
                }
            }
            features.extend_from_slice(&raw[..d]);
            target.push(raw[d]);
            provenance.push(k);
        }
    }
    let mut mask = dataset.synthetic_mask().to_vec();
    mask.resize(total, true);
    let merged = Dataset::with_mask(
        features,
        d,
        target,
        dataset.feature_names().to_vec(),
        dataset.target_name(),
        mask,
    )?;

    let mut degenerate_columns = Vec::new();
    for (j, &flag) in params.degenerate().iter().enumerate() {
        if flag {
            degenerate_columns.push(if j < d {
                dataset.feature_names()[j].clone()
            } else {
                dataset.target_name().to_string()
            });
        }
    }
    let report = RunReport {
        seed: config.seed,
        n_original: dataset.n_rows(),
        alpha_mode: config.alpha_mode,
        bandwidth_scale: config.bandwidth_scale,
        elbow_threshold: config.elbow_threshold,
        trace,
        k_star,
        plan: plan.clone(),
        weights: model.weights.clone(),
        lambdas: kdes.iter().map(ClusterKde::lambda).collect(),
        degenerate_columns,
        warnings,
    };
    Ok(AugmentedDataset {
        dataset: merged,
        plan,
        assignments: model.assignments,
        provenance,
        standardization: params,
        report,
    })
}

/// Observed `[min, max]` of every joint column.
fn column_ranges(dataset: &Dataset) -> Vec<(f64, f64)> {
    let mut r = vec![(f64::INFINITY, f64::NEG_INFINITY); dataset.joint_dim()];
    for (x, &y) in dataset.rows().zip(dataset.target()) {
        for (b, &v) in r.iter_mut().zip(x.iter().chain(std::iter::once(&y))) {
            b.0 = b.0.min(v);
            b.1 = b.1.max(v);
        }
    }
    r
}
