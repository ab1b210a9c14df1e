//! k-means in the joint space and elbow selection of the cluster count.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("{points} points cannot form {k} clusters")]
    TooFewPoints { points: usize, k: usize },
    #[error("k must be at least 1")]
    ZeroClusters,
}

/// Lloyd iteration controls shared by every fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Convergence threshold on the largest centroid displacement.
    pub tolerance: f64,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iterations: 300,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub sse: f64,
    /// Mixture weights `n_k / N`.
    pub weights: Vec<f64>,
    pub iterations: usize,
}

impl ClusterModel {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignments {
            sizes[c] += 1;
        }
        sizes
    }

    /// Indices of the points assigned to each cluster, in input order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.assignments.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn nearest(z: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(z, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn compute_sse<P: AsRef<[f64]>>(
    points: &[P],
    centroids: &[Vec<f64>],
    assignments: &[usize],
) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &c)| sq_dist(p.as_ref(), &centroids[c]))
        .sum()
}

fn kmeans_pp_init<P: AsRef<[f64]>>(points: &[P], k: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].as_ref().to_vec());
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p.as_ref(), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if r < *w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            // guard against rounding leaving us on a zero-weight point
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = points[idx].as_ref().to_vec();
        for (p, w) in points.iter().zip(d2.iter_mut()) {
            *w = w.min(sq_dist(p.as_ref(), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign<P: AsRef<[f64]>>(points: &[P], centroids: &[Vec<f64>], out: &mut [usize]) {
    for (p, a) in points.iter().zip(out.iter_mut()) {
        *a = nearest(p.as_ref(), centroids).0;
    }
}

/// Moves the point farthest from its centroid into each empty cluster. Only
/// points whose cluster has at least two members are eligible.
fn repair_empty<P: AsRef<[f64]>>(
    points: &[P],
    centroids: &mut [Vec<f64>],
    assignments: &mut [usize],
) {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &c in assignments.iter() {
        sizes[c] += 1;
    }
    for j in 0..k {
        if sizes[j] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let c = assignments[i];
            if sizes[c] < 2 {
                continue;
            }
            let d = sq_dist(p.as_ref(), &centroids[c]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("n >= k guarantees a donor cluster");
        sizes[assignments[i]] -= 1;
        assignments[i] = j;
        sizes[j] = 1;
        centroids[j] = points[i].as_ref().to_vec();
    }
}

fn means<P: AsRef<[f64]>>(
    points: &[P],
    assignments: &[usize],
    k: usize,
    dim: usize,
) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignments) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(p.as_ref()) {
            *s += v;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        for v in s.iter_mut() {
            *v /= n as f64;
        }
    }
    sums
}

fn lloyd<P: AsRef<[f64]>>(
    points: &[P],
    k: usize,
    params: &FitParams,
    rng: &mut StreamRng,
) -> ClusterModel {
    let n = points.len();
    let dim = points[0].as_ref().len();
    let mut centroids = kmeans_pp_init(points, k, rng);
    let mut assignments = vec![0usize; n];
    assign(points, &centroids, &mut assignments);
    repair_empty(points, &mut centroids, &mut assignments);

    let mut next = vec![0usize; n];
    let mut prev_sse = f64::INFINITY;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        iterations += 1;
        let updated = means(points, &assignments, k, dim);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;

        let sse = compute_sse(points, &centroids, &assignments);
        debug_assert!(
            sse <= prev_sse + 1e-9 * prev_sse.abs().max(1.0),
            "SSE increased within a Lloyd run: {prev_sse} -> {sse}"
        );
        prev_sse = sse;

        assign(points, &centroids, &mut next);
        repair_empty(points, &mut centroids, &mut next);
        let changed = next != assignments;
        std::mem::swap(&mut assignments, &mut next);
        if !changed {
            break;
        }
        if shift < params.tolerance {
            break;
        }
    }
    let centroids = means(points, &assignments, k, dim);
    let sse = compute_sse(points, &centroids, &assignments);
    let weights = {
        let mut w = vec![0.0; k];
        for &c in &assignments {
            w[c] += 1.0;
        }
        w.iter().map(|c| c / n as f64).collect()
    };
    ClusterModel {
        k,
        centroids,
        assignments,
        sse,
        weights,
        iterations,
    }
}

/// k-means++ seeded Lloyd iterations, best of `params.restarts` runs by SSE.
///
/// Each restart draws from its own stream derived from `seed`, and the
/// reduction keeps the lowest restart index among equal SSEs, so the result
/// is identical under any thread count.
pub fn kmeans_fit<P: AsRef<[f64]> + Sync>(
    points: &[P],
    k: usize,
    seed: u64,
    params: &FitParams,
) -> Result<ClusterModel, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if points.len() < k {
        return Err(ClusterError::TooFewPoints {
            points: points.len(),
            k,
        });
    }
    let restarts = params.restarts.max(1);
    let fits: Vec<ClusterModel> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, &[rng::TAG_KMEANS, r as u64]);
            lloyd(points, k, params, &mut rng)
        })
        .collect();
    let mut best = 0;
    for (i, f) in fits.iter().enumerate() {
        if f.sse < fits[best].sse {
            best = i;
        }
    }
    Ok(fits.into_iter().nth(best).unwrap())
}

/// SSE per cluster count plus the relative improvements between them.
#[derive(Debug, Clone, PartialEq)]
pub struct ElbowTrace {
    pub k_min: usize,
    pub k_max: usize,
    /// `sse[i]` is SSE(k_min + i).
    pub sse: Vec<f64>,
    /// `deltas[i]` is Δ(k_min + 1 + i).
    pub deltas: Vec<f64>,
    pub k_star: Option<usize>,
}

impl ElbowTrace {
    /// Builds a trace from SSE values for consecutive K starting at `k_min`.
    pub fn from_sse(k_min: usize, sse: Vec<f64>) -> Self {
        assert!(!sse.is_empty(), "trace needs at least one SSE value");
        let deltas = sse
            .windows(2)
            .map(|w| relative_improvement(w[0], w[1]))
            .collect();
        Self {
            k_min,
            k_max: k_min + sse.len() - 1,
            sse,
            deltas,
            k_star: None,
        }
    }

    pub fn sse_at(&self, k: usize) -> Option<f64> {
        k.checked_sub(self.k_min)
            .and_then(|i| self.sse.get(i).copied())
    }

    /// Δ(K) for `K` in `k_min + 1 ..= k_max`.
    pub fn delta_at(&self, k: usize) -> Option<f64> {
        k.checked_sub(self.k_min + 1)
            .and_then(|i| self.deltas.get(i).copied())
    }
}

/// `(SSE(K-1) - SSE(K)) / SSE(K-1)`, taken as 0 once SSE(K-1) is already 0.
pub fn relative_improvement(prev: f64, cur: f64) -> f64 {
    if prev > 0.0 {
        (prev - cur) / prev
    } else {
        0.0
    }
}

/// Fits one model per K in `k_min..=k_max` and records SSE(K).
pub fn sse_curve<P: AsRef<[f64]> + Sync>(
    points: &[P],
    k_min: usize,
    k_max: usize,
    seed: u64,
    params: &FitParams,
) -> Result<(ElbowTrace, Vec<ClusterModel>), ClusterError> {
    if k_min == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    assert!(k_max >= k_min, "k_max must be at least k_min");
    if points.len() < k_max {
        return Err(ClusterError::TooFewPoints {
            points: points.len(),
            k: k_max,
        });
    }
    let models = (k_min..=k_max)
        .into_par_iter()
        .map(|k| kmeans_fit(points, k, rng::mix(seed, k as u64), params))
        .collect::<Result<Vec<_>, _>>()?;
    let trace = ElbowTrace::from_sse(k_min, models.iter().map(|m| m.sse).collect());
    for (i, w) in trace.sse.windows(2).enumerate() {
        if w[1] > w[0] * (1.0 + 1e-12) {
            log::warn!(
                "SSE rose from K={} to K={} ({} -> {}); local optimum",
                k_min + i,
                k_min + i + 1,
                w[0],
                w[1]
            );
        }
    }
    Ok((trace, models))
}

/// Smallest K in `[k_min, k_max - 1]` whose successor improves SSE by less
/// than `threshold`; `k_max` when every step is still significant.
pub fn select_k(trace: &ElbowTrace, threshold: f64) -> usize {
    for k in trace.k_min..trace.k_max {
        if trace.delta_at(k + 1).is_some_and(|d| d < threshold) {
            return k;
        }
    }
    trace.k_max
}
