//! Repeated k-fold comparison of a plain learner against the same learner
//! trained on LDAO-augmented data.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

use crate::augment::{run_ldao, LdaoError};
use crate::config::RunConfig;
use crate::data::Dataset;
use crate::metrics::{
    self, build_relevance, wilcoxon_signed_rank, MetricError, PairedResults, RelevanceError,
    WilcoxonError, WilcoxonResult, Winner,
};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("k = {k} exceeds the {n} training rows")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("query has {got} features, training data has {expected}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("need at least {needed} rows for {folds} folds, got {n}")]
    TooFewRows {
        n: usize,
        folds: usize,
        needed: usize,
    },
    #[error("invalid plan: {0}")]
    BadPlan(&'static str),
    #[error("run {run}, fold {fold}: {source}")]
    Ldao {
        run: usize,
        fold: usize,
        #[source]
        source: LdaoError,
    },
    #[error("run {run}, fold {fold}: {source}")]
    Relevance {
        run: usize,
        fold: usize,
        #[source]
        source: RelevanceError,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Mean target of the `k` nearest training rows for each query row.
///
/// Distances are Euclidean on features z-scored with the training
/// statistics; equal distances are broken by training row index.
/// `queries` is row-major with `train.n_features()` columns.
pub fn knn_regress(train: &Dataset, queries: &[f64], k: usize) -> Result<Vec<f64>, HarnessError> {
    let n = train.n_rows();
    let d = train.n_features();
    if k == 0 {
        return Err(HarnessError::ZeroK);
    }
    if k > n {
        return Err(HarnessError::KTooLarge { k, n });
    }
    if queries.len() % d != 0 {
        return Err(HarnessError::FeatureMismatch {
            expected: d,
            got: queries.len() % d,
        });
    }
    let (means, stds) = feature_scaling(train);
    let scale = |row: &[f64]| -> Vec<f64> {
        row.iter()
            .zip(&means)
            .zip(&stds)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    };
    let scaled_train: Vec<Vec<f64>> = train.rows().map(scale).collect();
    let y = train.target();
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(queries.len() / d);
    for q in queries.chunks_exact(d) {
        let q = scale(q);
        dist.clear();
        dist.extend(scaled_train.iter().enumerate().map(|(i, r)| {
            let s: f64 = r.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
            (s, i)
        }));
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        let sum: f64 = dist[..k].iter().map(|&(_, i)| y[i]).sum();
        out.push(sum / k as f64);
    }
    Ok(out)
}

fn feature_scaling(train: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let d = train.n_features();
    let n = train.n_rows() as f64;
    let mut means = vec![0.0; d];
    for r in train.rows() {
        for (m, v) in means.iter_mut().zip(r) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut vars = vec![0.0; d];
    for r in train.rows() {
        for ((s, v), m) in vars.iter_mut().zip(r).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let stds = vars
        .iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (means, stds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvPlan {
    pub runs: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self {
            runs: 5,
            folds: 5,
            seed: crate::config::DEFAULT_SEED,
        }
    }
}

/// Test-row indices per fold for one run: a seeded shuffle cut into
/// `folds` nearly equal contiguous chunks.
pub fn fold_partitions(n: usize, folds: usize, seed: u64, run: usize) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, &[rng::TAG_FOLDS, run as u64]));
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = n / folds + usize::from(f < n % folds);
        let mut part = idx[start..start + len].to_vec();
        part.sort_unstable();
        out.push(part);
        start += len;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Baseline,
    Ldao,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Ldao => "ldao",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldRecord {
    pub run: usize,
    pub fold: usize,
    pub method: Method,
    pub rmse: f64,
    pub mae: f64,
    pub sera: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Rmse,
    Mae,
    Sera,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [Self::Rmse, Self::Mae, Self::Sera];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rmse => "rmse",
            Self::Mae => "mae",
            Self::Sera => "sera",
        }
    }

    pub fn of(self, r: &FoldRecord) -> f64 {
        match self {
            Self::Rmse => r.rmse,
            Self::Mae => r.mae,
            Self::Sera => r.sera,
        }
    }
}

/// Summary of one metric across all folds.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub metric: MetricKind,
    pub baseline_mean: f64,
    pub baseline_median: f64,
    pub ldao_mean: f64,
    pub ldao_median: f64,
    /// Folds where LDAO's loss is strictly lower.
    pub ldao_fold_wins: usize,
    pub baseline_fold_wins: usize,
    /// Wilcoxon result with `a` = LDAO, `b` = baseline; `None` when fewer
    /// than the minimum number of non-zero differences remain.
    pub wilcoxon: Option<WilcoxonResult>,
}

impl MetricSummary {
    /// Method winning the majority of folds.
    pub fn fold_winner(&self) -> &'static str {
        use std::cmp::Ordering::*;
        match self.ldao_fold_wins.cmp(&self.baseline_fold_wins) {
            Greater => "ldao",
            Less => "baseline",
            Equal => "tie",
        }
    }

    pub fn verdict(&self) -> &'static str {
        match &self.wilcoxon {
            Some(w) if w.significant => match w.winner {
                Winner::A => "ldao significantly better",
                Winner::B => "baseline significantly better",
                Winner::Tie => "no significant difference",
            },
            _ => "no significant difference",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub plan: CvPlan,
    pub learner_k: usize,
    pub alpha_level: f64,
    /// Ordered by run, fold, then baseline before LDAO.
    pub records: Vec<FoldRecord>,
    pub summaries: Vec<MetricSummary>,
}

impl EvaluationReport {
    pub fn records_csv(&self) -> String {
        let mut s = String::from("run,fold,method,rmse,mae,sera\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.run,
                r.fold,
                r.method.name(),
                r.rmse,
                r.mae,
                r.sera
            );
        }
        s
    }

    pub fn summary_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "runs = {}", self.plan.runs);
        let _ = writeln!(s, "folds = {}", self.plan.folds);
        let _ = writeln!(s, "seed = {}", self.plan.seed);
        let _ = writeln!(s, "learner_k = {}", self.learner_k);
        let _ = writeln!(s, "alpha_level = {}", self.alpha_level);
        for m in &self.summaries {
            let n = m.metric.name();
            let _ = writeln!(s, "{n}.baseline.mean = {}", m.baseline_mean);
            let _ = writeln!(s, "{n}.baseline.median = {}", m.baseline_median);
            let _ = writeln!(s, "{n}.ldao.mean = {}", m.ldao_mean);
            let _ = writeln!(s, "{n}.ldao.median = {}", m.ldao_median);
            let _ = writeln!(s, "{n}.ldao.fold_wins = {}", m.ldao_fold_wins);
            let _ = writeln!(s, "{n}.baseline.fold_wins = {}", m.baseline_fold_wins);
            let _ = writeln!(s, "{n}.fold_winner = {}", m.fold_winner());
            match &m.wilcoxon {
                Some(w) => {
                    let _ = writeln!(s, "{n}.wilcoxon.n = {}", w.n);
                    let _ = writeln!(s, "{n}.wilcoxon.statistic = {}", w.statistic);
                    let _ = writeln!(s, "{n}.wilcoxon.p = {}", w.p_value);
                }
                None => {
                    let _ = writeln!(s, "{n}.wilcoxon.p = na");
                }
            }
            let _ = writeln!(s, "{n}.verdict = {}", m.verdict());
        }
        s
    }

    pub fn values(&self, method: Method, metric: MetricKind) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.method == method)
            .map(|r| metric.of(r))
            .collect()
    }

    pub fn summary(&self, metric: MetricKind) -> &MetricSummary {
        self.summaries
            .iter()
            .find(|s| s.metric == metric)
            .expect("every metric is summarised")
    }
}

/// Everything one fold needs, cut from the full dataset.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub train: Dataset,
    pub test: Dataset,
}

impl FoldData {
    pub fn split(dataset: &Dataset, test_idx: &[usize]) -> Self {
        let mut in_test = vec![false; dataset.n_rows()];
        for &i in test_idx {
            in_test[i] = true;
        }
        let train_idx: Vec<usize> = (0..dataset.n_rows()).filter(|&i| !in_test[i]).collect();
        Self {
            train: dataset.select_rows(&train_idx),
            test: dataset.select_rows(test_idx),
        }
    }
}

/// Losses of both methods on one fold: `[baseline, ldao]`.
///
/// Standardization, relevance and all LDAO state come from `fold.train`
/// only; `fold.test` is read solely for prediction and scoring.
pub fn evaluate_fold(
    fold: &FoldData,
    config: &RunConfig,
    learner_k: usize,
    run: usize,
    fold_no: usize,
) -> Result<[FoldRecord; 2], HarnessError> {
    let phi = build_relevance(fold.train.target()).map_err(|source| HarnessError::Relevance {
        run,
        fold: fold_no,
        source,
    })?;
    let fold_config = RunConfig {
        seed: rng::derive(
            config.seed,
            &[rng::TAG_FOLD_FIT, run as u64, fold_no as u64],
        ),
        ..config.clone()
    };
    let augmented = run_ldao(&fold.train, &fold_config).map_err(|source| HarnessError::Ldao {
        run,
        fold: fold_no,
        source,
    })?;
    let y = fold.test.target();
    let score = |method, train: &Dataset| -> Result<FoldRecord, HarnessError> {
        let pred = knn_regress(train, fold.test.features(), learner_k)?;
        Ok(FoldRecord {
            run,
            fold: fold_no,
            method,
            rmse: metrics::rmse(y, &pred)?,
            mae: metrics::mae(y, &pred)?,
            sera: metrics::sera(y, &pred, &phi, metrics::DEFAULT_SERA_STEP)?,
        })
    };
    Ok([
        score(Method::Baseline, &fold.train)?,
        score(Method::Ldao, &augmented.dataset)?,
    ])
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Runs `plan.runs` repetitions of `plan.folds`-fold cross-validation.
pub fn run_experiment(
    dataset: &Dataset,
    plan: &CvPlan,
    config: &RunConfig,
    learner_k: usize,
    alpha_level: f64,
) -> Result<EvaluationReport, HarnessError> {
    if plan.runs < 1 {
        return Err(HarnessError::BadPlan("runs must be at least 1"));
    }
    if plan.folds < 2 {
        return Err(HarnessError::BadPlan("folds must be at least 2"));
    }
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(HarnessError::BadPlan("alpha level must lie in (0, 1)"));
    }
    let needed = plan.folds * 2;
    if dataset.n_rows() < needed {
        return Err(HarnessError::TooFewRows {
            n: dataset.n_rows(),
            folds: plan.folds,
            needed,
        });
    }
    let jobs: Vec<(usize, usize, Vec<usize>)> = (0..plan.runs)
        .flat_map(|run| {
            fold_partitions(dataset.n_rows(), plan.folds, plan.seed, run)
                .into_iter()
                .enumerate()
                .map(move |(f, idx)| (run, f, idx))
        })
        .collect();
    let per_fold = jobs
        .par_iter()
        .map(|(run, f, idx)| {
            let fold = FoldData::split(dataset, idx);
            evaluate_fold(&fold, config, learner_k, *run, *f)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let records: Vec<FoldRecord> = per_fold.into_iter().flatten().collect();

    let mut report = EvaluationReport {
        plan: *plan,
        learner_k,
        alpha_level,
        records,
        summaries: Vec::new(),
    };
    for metric in MetricKind::ALL {
        let base = report.values(Method::Baseline, metric);
        let ldao = report.values(Method::Ldao, metric);
        let ldao_fold_wins = ldao.iter().zip(&base).filter(|(l, b)| l < b).count();
        let baseline_fold_wins = ldao.iter().zip(&base).filter(|(l, b)| b < l).count();
        let pairs = PairedResults::new(ldao.clone(), base.clone()).ok();
        let wilcoxon = match pairs.map(|p| wilcoxon_signed_rank(&p, alpha_level)) {
            Some(Ok(w)) => Some(w),
            Some(Err(WilcoxonError::TooFewPairs(_))) | None => None,
            Some(Err(e)) => {
                log::warn!("wilcoxon on {}: {e}", metric.name());
                None
            }
        };
        report.summaries.push(MetricSummary {
            metric,
            baseline_mean: mean(&base),
            baseline_median: median(&base),
            ldao_mean: mean(&ldao),
            ldao_median: median(&ldao),
            ldao_fold_wins,
            baseline_fold_wins,
            wilcoxon,
        });
    }
    Ok(report)
}
