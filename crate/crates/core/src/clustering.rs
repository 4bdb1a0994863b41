//! k-means over dense feature matrices.
//!
//! Lloyd iteration with k-means++ seeding and seeded restarts. Everything in
//! here is deterministic for a given `(features, config)`: restarts draw from
//! independent ChaCha streams of the same seed, centroid sums are accumulated
//! in ascending row order and distance ties go to the lowest centroid index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("too few points: n = {n} < k = {k}")]
    TooFewPoints { n: usize, k: usize },
    #[error("features contain NaN or infinite values")]
    NonFiniteInput,
    #[error("invalid k-means configuration: {0}")]
    InvalidConfig(String),
}

/// Row-major `rows x cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ClusterError> {
        if cols == 0 {
            return Err(ClusterError::InvalidConfig("feature dimension must be >= 1".into()));
        }
        if rows * cols != data.len() {
            return Err(ClusterError::DimensionMismatch {
                left: rows * cols,
                right: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, ClusterError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(ClusterError::DimensionMismatch {
                    left: cols,
                    right: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Every element multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> FeatureMatrix {
        FeatureMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Rows reordered so that output row `i` is input row `order[i]`.
    pub fn select_rows(&self, order: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(order.len() * self.cols);
        for &i in order {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: order.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Straight-line distance between two points of equal dimension.
pub fn euclidean_distance(p: &[f64], q: &[f64]) -> Result<f64, ClusterError> {
    if p.len() != q.len() {
        return Err(ClusterError::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    if p.is_empty() {
        return Err(ClusterError::InvalidConfig("points must have dimension >= 1".into()));
    }
    Ok(squared_distance(p, q).sqrt())
}

#[inline]
pub fn squared_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Per-column location and scale used by [`standardize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub mean: f64,
    /// Population standard deviation; 0 for constant columns.
    pub stddev: f64,
}

/// Centers each column and divides by its population standard deviation.
/// Constant columns become all zeros and keep `stddev = 0`.
pub fn standardize(features: &FeatureMatrix) -> (FeatureMatrix, Vec<ColumnScale>) {
    let n = features.rows as f64;
    let mut scales = Vec::with_capacity(features.cols);
    for c in 0..features.cols {
        let mean = features.iter_rows().map(|r| r[c]).sum::<f64>() / n;
        let var = features
            .iter_rows()
            .map(|r| (r[c] - mean) * (r[c] - mean))
            .sum::<f64>()
            / n;
        scales.push(ColumnScale {
            mean,
            stddev: var.sqrt(),
        });
    }
    let mut out = features.clone();
    for i in 0..out.rows {
        for (v, s) in out.row_mut(i).iter_mut().zip(&scales) {
            *v = if s.stddev > 0.0 { (*v - s.mean) / s.stddev } else { 0.0 };
        }
    }
    (out, scales)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Convergence threshold on the largest centroid displacement.
    pub tol: f64,
    pub seed: u64,
    pub restarts: usize,
    pub standardize: bool,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 2,
            max_iters: 100,
            tol: 1e-4,
            seed: 42,
            restarts: 10,
            standardize: false,
        }
    }
}

impl KMeansConfig {
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.k == 0 {
            return Err(ClusterError::InvalidConfig("k must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(ClusterError::InvalidConfig("max_iters must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(ClusterError::InvalidConfig("restarts must be >= 1".into()));
        }
        if !self.tol.is_finite() || self.tol < 0.0 {
            return Err(ClusterError::InvalidConfig("tol must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    /// `k x d` centroids in the space the model was fitted in (standardized
    /// units when `standardization` is present).
    pub centroids: FeatureMatrix,
    pub labels: Vec<usize>,
    /// Sum of squared distances from each point to its assigned centroid.
    pub inertia: f64,
    pub iterations_run: usize,
    pub standardization: Option<Vec<ColumnScale>>,
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.rows
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// State after one Lloyd iteration, reported to trace observers.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub restart: usize,
    pub iteration: usize,
    pub inertia: f64,
    pub max_shift: f64,
}

/// Outcome of a single Lloyd optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub centroids: FeatureMatrix,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

fn check_finite(features: &FeatureMatrix) -> Result<(), ClusterError> {
    if features.data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ClusterError::NonFiniteInput)
    }
}

/// k-means++ seeding: the first center is uniform, each further center is
/// drawn with probability proportional to its squared distance from the
/// nearest chosen center. Falls back to a uniform draw when every point
/// coincides with a chosen center.
pub fn kmeans_plus_plus<R: Rng + ?Sized>(
    features: &FeatureMatrix,
    k: usize,
    rng: &mut R,
) -> FeatureMatrix {
    let n = features.rows;
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut nearest: Vec<f64> = features
        .iter_rows()
        .map(|r| squared_distance(r, features.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in nearest.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the target just past the final sum
            pick.unwrap_or_else(|| nearest.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(squared_distance(features.row(i), features.row(next)));
        }
    }
    features.select_rows(&chosen)
}

fn nearest_centroid(point: &[f64], centroids: &FeatureMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter_rows().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Assigns every point to its nearest centroid, then re-seeds any empty
/// cluster with the point farthest from its current centroid.
fn assign(features: &FeatureMatrix, centroids: &mut FeatureMatrix, labels: &mut [usize]) {
    let k = centroids.rows;
    let mut sizes = vec![0usize; k];
    let mut dist = vec![0.0; features.rows];
    for (i, p) in features.iter_rows().enumerate() {
        let (j, d) = nearest_centroid(p, centroids);
        labels[i] = j;
        dist[i] = d;
        sizes[j] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut donor: Option<usize> = None;
        for i in 0..features.rows {
            if sizes[labels[i]] > 1 && donor.is_none_or(|b| dist[i] > dist[b]) {
                donor = Some(i);
            }
        }
        // n >= k guarantees some cluster still has a spare point
        let i = donor.expect("n >= k");
        sizes[labels[i]] -= 1;
        sizes[empty] = 1;
        labels[i] = empty;
        dist[i] = 0.0;
        centroids.row_mut(empty).copy_from_slice(features.row(i));
    }
}

fn update_centroids(features: &FeatureMatrix, labels: &[usize], k: usize) -> FeatureMatrix {
    let d = features.cols;
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (i, p) in features.iter_rows().enumerate() {
        let l = labels[i];
        counts[l] += 1;
        for (s, v) in sums[l * d..(l + 1) * d].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (j, &c) in counts.iter().enumerate() {
        for s in &mut sums[j * d..(j + 1) * d] {
            *s /= c as f64;
        }
    }
    FeatureMatrix {
        rows: k,
        cols: d,
        data: sums,
    }
}

/// Total squared distance of each point to its labelled centroid.
pub fn inertia(features: &FeatureMatrix, centroids: &FeatureMatrix, labels: &[usize]) -> f64 {
    features
        .iter_rows()
        .zip(labels)
        .map(|(p, &l)| squared_distance(p, centroids.row(l)))
        .sum()
}

fn max_shift(a: &FeatureMatrix, b: &FeatureMatrix) -> f64 {
    a.iter_rows()
        .zip(b.iter_rows())
        .map(|(p, q)| squared_distance(p, q).sqrt())
        .fold(0.0, f64::max)
}

/// Lloyd's algorithm from explicit starting centroids.
///
/// `observer` sees the inertia after each assign + update round, which is
/// non-increasing from one round to the next.
pub fn lloyd(
    features: &FeatureMatrix,
    init: FeatureMatrix,
    max_iters: usize,
    tol: f64,
    mut observer: impl FnMut(usize, f64, f64),
) -> LloydRun {
    let k = init.rows;
    let mut centroids = init;
    let mut labels = vec![0usize; features.rows];
    assign(features, &mut centroids, &mut labels);
    let mut iterations = 0;
    let mut current = inertia(features, &centroids, &labels);
    for it in 1..=max_iters {
        let mut next = update_centroids(features, &labels, k);
        assign(features, &mut next, &mut labels);
        current = inertia(features, &next, &labels);
        let shift = max_shift(&centroids, &next);
        centroids = next;
        iterations = it;
        observer(it, current, shift);
        if shift <= tol {
            break;
        }
    }
    LloydRun {
        centroids,
        labels,
        inertia: current,
        iterations,
    }
}

fn prepare(
    features: &FeatureMatrix,
    config: &KMeansConfig,
) -> Result<(FeatureMatrix, Option<Vec<ColumnScale>>), ClusterError> {
    config.validate()?;
    check_finite(features)?;
    if features.rows < config.k {
        return Err(ClusterError::TooFewPoints {
            n: features.rows,
            k: config.k,
        });
    }
    Ok(if config.standardize {
        let (z, s) = standardize(features);
        (z, Some(s))
    } else {
        (features.clone(), None)
    })
}

/// Generator for restart `restart` of a fit seeded with `seed`.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

pub fn kmeans_fit(features: &FeatureMatrix, config: &KMeansConfig) -> Result<KMeansModel, ClusterError> {
    kmeans_fit_traced(features, config, |_| {})
}

/// [`kmeans_fit`] with a hook that observes every Lloyd iteration of every
/// restart.
pub fn kmeans_fit_traced(
    features: &FeatureMatrix,
    config: &KMeansConfig,
    mut observer: impl FnMut(&IterationTrace),
) -> Result<KMeansModel, ClusterError> {
    let (work, standardization) = prepare(features, config)?;
    let mut best: Option<LloydRun> = None;
    for restart in 0..config.restarts {
        let mut rng = restart_rng(config.seed, restart);
        let init = kmeans_plus_plus(&work, config.k, &mut rng);
        let run = lloyd(&work, init, config.max_iters, config.tol, |iteration, inertia, max_shift| {
            observer(&IterationTrace {
                restart,
                iteration,
                inertia,
                max_shift,
            })
        });
        // strict comparison keeps the earliest restart on ties
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.expect("restarts >= 1");
    Ok(KMeansModel {
        centroids: best.centroids,
        labels: best.labels,
        inertia: best.inertia,
        iterations_run: best.iterations,
        standardization,
    })
}

/// Single Lloyd run from caller-supplied centroids; `config.k`, `seed` and
/// `restarts` are ignored.
pub fn fit_from_centroids(
    features: &FeatureMatrix,
    init: &FeatureMatrix,
    config: &KMeansConfig,
) -> Result<KMeansModel, ClusterError> {
    let config = KMeansConfig {
        k: init.rows,
        restarts: 1,
        ..config.clone()
    };
    let (work, standardization) = prepare(features, &config)?;
    check_finite(init)?;
    if init.cols != work.cols {
        return Err(ClusterError::DimensionMismatch {
            left: init.cols,
            right: work.cols,
        });
    }
    let run = lloyd(&work, init.clone(), config.max_iters, config.tol, |_, _, _| {});
    Ok(KMeansModel {
        centroids: run.centroids,
        labels: run.labels,
        inertia: run.inertia,
        iterations_run: run.iterations,
        standardization,
    })
}
