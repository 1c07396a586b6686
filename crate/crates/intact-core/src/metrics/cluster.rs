//! K-means++ clustering and normalized mutual information, used to
//! compare the cluster structure of a corpus before and after
//! sanitization.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Clustering protocol parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub k: usize,
    /// Independent K-means runs per clustering; the lowest-inertia run
    /// wins.
    pub restarts: usize,
    /// Number of clustering repetitions averaged into the reported NMI.
    pub nmi_runs: usize,
    pub max_iterations: usize,
    pub rng_seed: u64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig { k: 4, restarts: 50, nmi_runs: 5, max_iterations: 300, rng_seed: 42 }
    }
}

/// Best-of-restarts clustering result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansOutcome {
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Final inertia of every restart, for the best-of-restarts check.
    pub restart_inertias: Vec<f64>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Splitmix-style spacing keeps per-restart streams independent of each
/// other while staying reproducible from one seed.
fn derived_seed(seed: u64, stream: u64) -> u64 {
    seed ^ (stream.wrapping_add(1)).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// K-means++ with Lloyd iterations, restarted `restarts` times; the
/// partition with minimal inertia is returned.
pub fn kmeanspp_cluster(
    vectors: &[Vec<f64>],
    k: usize,
    restarts: usize,
    max_iterations: usize,
    seed: u64,
) -> Result<KmeansOutcome, MetricsError> {
    if k == 0 || k > vectors.len() {
        return Err(MetricsError::DegenerateInput {
            detail: alloc::format!("k={k} for {} points", vectors.len()),
        });
    }
    if restarts == 0 {
        return Err(MetricsError::DegenerateInput { detail: String::from("restarts must be > 0") });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut restart_inertias = Vec::with_capacity(restarts);
    for restart in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(seed, restart as u64));
        let (assignments, inertia) = run_once(vectors, k, max_iterations, &mut rng);
        restart_inertias.push(inertia);
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, assignments));
        }
    }
    let (inertia, assignments) = best.expect("at least one restart");
    debug_assert!(restart_inertias.iter().all(|&r| inertia <= r + 1e-12));
    Ok(KmeansOutcome { assignments, inertia, restart_inertias })
}

fn run_once(
    vectors: &[Vec<f64>],
    k: usize,
    max_iterations: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, f64) {
    let mut centroids = seed_centroids(vectors, k, rng);
    let mut assignments = alloc::vec![0usize; vectors.len()];
    for _ in 0..max_iterations {
        let mut changed = false;
        for (i, v) in vectors.iter().enumerate() {
            let nearest = nearest_centroid(v, &centroids);
            if assignments[i] != nearest {
                assignments[i] = nearest;
                changed = true;
            }
        }
        recompute_centroids(vectors, &assignments, &mut centroids);
        if !changed {
            break;
        }
    }
    let inertia =
        vectors.iter().zip(&assignments).map(|(v, &a)| squared_distance(v, &centroids[a])).sum();
    (assignments, inertia)
}

fn nearest_centroid(v: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(v, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// K-means++ seeding: the first centroid is uniform, each further one is
/// drawn with probability proportional to the squared distance from the
/// nearest chosen centroid.
fn seed_centroids(vectors: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.random_range(0..vectors.len());
    centroids.push(vectors[first].clone());
    let mut distances: Vec<f64> =
        vectors.iter().map(|v| squared_distance(v, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = distances.iter().sum();
        let chosen = if total > 0.0 {
            let mut draw = rng.random_range(0.0..total);
            let mut picked = vectors.len() - 1;
            for (i, &d) in distances.iter().enumerate() {
                if draw < d {
                    picked = i;
                    break;
                }
                draw -= d;
            }
            picked
        } else {
            // Every point coincides with a chosen centroid already; any
            // pick yields the same clustering.
            0
        };
        centroids.push(vectors[chosen].clone());
        for (i, v) in vectors.iter().enumerate() {
            let d = squared_distance(v, centroids.last().unwrap());
            if d < distances[i] {
                distances[i] = d;
            }
        }
    }
    centroids
}

fn recompute_centroids(vectors: &[Vec<f64>], assignments: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = vectors[0].len();
    let k = centroids.len();
    let mut sums = alloc::vec![alloc::vec![0.0f64; dim]; k];
    let mut counts = alloc::vec![0usize; k];
    for (v, &a) in vectors.iter().zip(assignments) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(v) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            // Re-seed an empty cluster with the point farthest from its
            // assigned centroid.
            let far = (0..vectors.len())
                .max_by(|&i, &j| {
                    let di = squared_distance(&vectors[i], &centroids[assignments[i]]);
                    let dj = squared_distance(&vectors[j], &centroids[assignments[j]]);
                    di.total_cmp(&dj)
                })
                .expect("nonempty input");
            centroids[c] = vectors[far].clone();
            continue;
        }
        for (dst, s) in centroids[c].iter_mut().zip(&sums[c]) {
            *dst = s / counts[c] as f64;
        }
    }
}

fn entropy(counts: &BTreeMap<usize, usize>, n: f64) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * libm::log(p)
        })
        .sum()
}

/// Normalized mutual information between two partitions of the same
/// elements: `I(A;B) / sqrt(H(A) H(B))`, 1 for identical partitions.
/// When a partition is a single cluster its entropy is zero; both single
/// is defined as 1, one single as 0.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::MismatchedInputs {
            detail: alloc::format!("partitions over {} vs {} elements", a.len(), b.len()),
        });
    }
    if a.is_empty() {
        return Err(MetricsError::DegenerateInput { detail: String::from("empty partitions") });
    }
    let n = a.len() as f64;
    let mut count_a: BTreeMap<usize, usize> = BTreeMap::new();
    let mut count_b: BTreeMap<usize, usize> = BTreeMap::new();
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *count_a.entry(x).or_insert(0) += 1;
        *count_b.entry(y).or_insert(0) += 1;
        *joint.entry((x, y)).or_insert(0) += 1;
    }
    // Identical partitions up to relabeling: every cluster of one side
    // maps onto exactly one cluster of the other. Handling this exactly
    // keeps NMI(identical) = 1 free of rounding.
    if joint.len() == count_a.len() && joint.len() == count_b.len() {
        return Ok(1.0);
    }
    let ha = entropy(&count_a, n);
    let hb = entropy(&count_b, n);
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let mut information = 0.0f64;
    for (&(x, y), &c) in &joint {
        let pxy = c as f64 / n;
        let px = count_a[&x] as f64 / n;
        let py = count_b[&y] as f64 / n;
        information += pxy * libm::log(pxy / (px * py));
    }
    Ok((information / libm::sqrt(ha * hb)).clamp(0.0, 1.0))
}

/// Mean and spread of NMI over the configured number of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterUtilityReport {
    pub mean_nmi: f64,
    pub std_dev: f64,
    pub runs: Vec<f64>,
}

/// Clusters both corpora `nmi_runs` times (each the best of `restarts`)
/// and reports the mean NMI between the original and sanitized
/// partitions. Both corpora share one seed stream per run, so identical
/// inputs produce NMI 1 exactly.
pub fn clustering_utility(
    original: &[Vec<f64>],
    sanitized: &[Vec<f64>],
    cfg: &ClusteringConfig,
) -> Result<ClusterUtilityReport, MetricsError> {
    if original.len() != sanitized.len() {
        return Err(MetricsError::MismatchedInputs {
            detail: alloc::format!("{} original vs {} sanitized", original.len(), sanitized.len()),
        });
    }
    let mut runs = Vec::with_capacity(cfg.nmi_runs);
    for run in 0..cfg.nmi_runs {
        let run_seed = derived_seed(cfg.rng_seed, 0x5eed_0000 ^ run as u64);
        let part_original =
            kmeanspp_cluster(original, cfg.k, cfg.restarts, cfg.max_iterations, run_seed)?;
        let part_sanitized =
            kmeanspp_cluster(sanitized, cfg.k, cfg.restarts, cfg.max_iterations, run_seed)?;
        runs.push(nmi(&part_original.assignments, &part_sanitized.assignments)?);
    }
    let mean = runs.iter().sum::<f64>() / runs.len() as f64;
    let variance = if runs.len() > 1 {
        runs.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (runs.len() - 1) as f64
    } else {
        0.0
    };
    Ok(ClusterUtilityReport { mean_nmi: mean, std_dev: libm::sqrt(variance), runs })
}
