//! Hybrid spatial+topological route clustering.
//!
//! Routes are compared with a weighted Jaccard similarity over their hexagonal
//! cell footprints and their directed stop-pair sets, agglomerated with
//! Ward/complete/average linkage on `1 − similarity`, and rebalanced with the
//! three-stage giant-cluster resolution in [`stages`]. Quality is scored with
//! a composite of balance (CV), silhouette and footprint overlap;
//! [`search_configuration`] runs the grid + seeded random search over it.

mod linkage;
mod louvain;
mod stages;

pub use linkage::{agglomerate, cut_merges, linkage_merges, Merge};
pub use louvain::{modularity, Graph as RouteGraph};
pub use stages::{
    hybrid_cluster, stage1_geographic, stage2_subdivide, stage3_rebalance, three_stage_cluster,
    ClusterObservation, Stage1Result,
};

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::GeoPoint;
use crate::hexgrid::{footprint, HexCell};
use crate::par;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("need at least 2 routes, got {0}")]
    TooFewRoutes(usize),
    #[error("invalid cluster count {k} for {n} routes")]
    InvalidK { k: usize, n: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("metric unavailable: {0}")]
    NullMetric(&'static str),
    #[error("infeasible size bounds: total observations {total} < min_size {min_size}")]
    InfeasibleBounds { total: u64, min_size: u64 },
    #[error("empty candidate grid")]
    EmptyGrid,
    #[error("no observations")]
    NoObservations,
    #[error(transparent)]
    Hex(#[from] crate::hexgrid::HexError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-route sets entering the weighted Jaccard similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSimilarityInput {
    pub route_id: String,
    pub h3_cells: BTreeSet<HexCell>,
    /// Directed (from_stop, to_stop) pairs.
    pub segments: BTreeSet<(String, String)>,
    pub observation_count: u64,
}

impl RouteSimilarityInput {
    /// Stops touched by the route (union of segment endpoints).
    pub fn stops(&self) -> BTreeSet<&str> {
        self.segments
            .iter()
            .flat_map(|(a, b)| [a.as_str(), b.as_str()])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkageKind {
    Ward,
    Complete,
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub h3_resolution: u8,
    pub n_clusters: usize,
    pub w_spatial: f64,
    pub linkage: LinkageKind,
    pub giant_threshold: f64,
    /// Observation-count bounds enforced by stage 3.
    pub min_size: u64,
    pub max_size: u64,
    /// Optional dendrogram cut height overriding `n_clusters`.
    pub distance_threshold: Option<f64>,
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if !(0.0..=1.0).contains(&self.w_spatial) {
            return Err(ClusterError::InvalidConfig(format!("w_spatial {} not in [0,1]", self.w_spatial)));
        }
        if !(self.giant_threshold > 0.0 && self.giant_threshold < 1.0) {
            return Err(ClusterError::InvalidConfig(format!(
                "giant_threshold {} not in (0,1)",
                self.giant_threshold
            )));
        }
        if self.min_size >= self.max_size {
            return Err(ClusterError::InvalidConfig(format!(
                "min_size {} must be < max_size {}",
                self.min_size, self.max_size
            )));
        }
        if self.n_clusters == 0 {
            return Err(ClusterError::InvalidConfig("n_clusters must be positive".into()));
        }
        Ok(())
    }

    /// Default observation-count bounds for a given total:
    /// `min = total/(4k)`, `max = 4·total/k`.
    pub fn default_bounds(total_obs: u64, n_clusters: usize) -> (u64, u64) {
        let k = n_clusters.max(1) as u64;
        ((total_obs / (4 * k)).max(1), (4 * total_obs / k).max(2))
    }
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            h3_resolution: 7,
            n_clusters: 12,
            w_spatial: 0.5,
            linkage: LinkageKind::Ward,
            giant_threshold: 0.4,
            min_size: 1,
            max_size: u64::MAX,
            distance_threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMetrics {
    /// Coefficient of variation of per-cluster observation counts.
    pub cv: f64,
    /// Largest/smallest cluster by observation count.
    pub imbalance_ratio: f64,
    /// Largest/smallest cluster by route count. Distinct quantity from
    /// `imbalance_ratio`; reported separately so the two are never conflated.
    pub route_imbalance_ratio: f64,
    pub silhouette: Option<f64>,
    pub davies_bouldin: Option<f64>,
    pub mean_inter_cluster_jaccard: f64,
    pub composite: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// route_id → cluster id (0-based contiguous).
    pub assignment: BTreeMap<String, usize>,
    pub route_counts: Vec<usize>,
    pub observation_counts: Vec<u64>,
    pub metrics: ClusterMetrics,
    /// Clusters stage 3 could not bring within bounds, and other notes.
    pub flags: Vec<String>,
}

impl ClusterAssignment {
    pub fn n_clusters(&self) -> usize {
        self.route_counts.len()
    }

    /// Members of each cluster, sorted. Cluster ids are contiguous from 0.
    pub fn groups(&self) -> Vec<Vec<String>> {
        let mut groups = vec![Vec::new(); self.n_clusters()];
        for (route, &c) in &self.assignment {
            groups[c].push(route.clone());
        }
        groups
    }
}

/// Jaccard similarity of two sets, 0 when both are empty.
fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Weighted Jaccard similarity of Eq. `w·J_h3 + (1−w)·J_segment`, evaluated as
/// `J_seg + w·(J_h3 − J_seg)` so that identical routes score exactly 1.0 for
/// every w.
pub fn weighted_jaccard(a: &RouteSimilarityInput, b: &RouteSimilarityInput, w_spatial: f64) -> f64 {
    let jh3 = jaccard(&a.h3_cells, &b.h3_cells);
    let jseg = jaccard(&a.segments, &b.segments);
    compose_weighted(jh3, jseg, w_spatial)
}

/// Shared composition for the similarity and its brute-force oracle.
pub fn compose_weighted(j_h3: f64, j_segment: f64, w_spatial: f64) -> f64 {
    j_segment + w_spatial * (j_h3 - j_segment)
}

/// Symmetric route-distance matrix `d = 1 − weighted_jaccard`, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n);
            data.extend(r);
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }
}

pub fn distance_matrix(inputs: &[RouteSimilarityInput], w_spatial: f64) -> Result<DistanceMatrix, ClusterError> {
    if inputs.len() < 2 {
        return Err(ClusterError::TooFewRoutes(inputs.len()));
    }
    let n = inputs.len();
    // Upper triangle in parallel, mirrored afterwards: exact symmetry.
    let rows = par::map_indices(n, |i| {
        let mut row = vec![0.0; n];
        for j in (i + 1)..n {
            row[j] = 1.0 - weighted_jaccard(&inputs[i], &inputs[j], w_spatial);
        }
        row
    });
    let mut m = DistanceMatrix::from_rows(rows);
    for i in 0..n {
        for j in 0..i {
            let v = m.get(j, i);
            m.set(i, j, v);
        }
    }
    Ok(m)
}

/// Sequential twin of [`distance_matrix`], for the bench suite and the
/// worker-count-independence tests.
pub fn distance_matrix_seq(inputs: &[RouteSimilarityInput], w_spatial: f64) -> Result<DistanceMatrix, ClusterError> {
    if inputs.len() < 2 {
        return Err(ClusterError::TooFewRoutes(inputs.len()));
    }
    let n = inputs.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            for j in (i + 1)..n {
                row[j] = 1.0 - weighted_jaccard(&inputs[i], &inputs[j], w_spatial);
            }
            row
        })
        .collect();
    let mut m = DistanceMatrix::from_rows(rows);
    for i in 0..n {
        for j in 0..i {
            let v = m.get(j, i);
            m.set(i, j, v);
        }
    }
    Ok(m)
}

/// Population CV (stdev/mean) of per-cluster observation counts.
pub fn coefficient_of_variation(counts: &[u64]) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

fn imbalance(counts: &[u64]) -> f64 {
    let max = counts.iter().copied().max().unwrap_or(0) as f64;
    let min = counts.iter().copied().min().unwrap_or(0) as f64;
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Quality metrics for a flat clustering. `groups` holds route indices into
/// `inputs`; silhouette and Davies–Bouldin are computed from the precomputed
/// distance matrix and are `None` for single-cluster partitions.
pub fn cluster_metrics(
    groups: &[Vec<usize>],
    dist: &DistanceMatrix,
    inputs: &[RouteSimilarityInput],
) -> ClusterMetrics {
    let obs_counts: Vec<u64> = groups
        .iter()
        .map(|g| g.iter().map(|&r| inputs[r].observation_count).sum())
        .collect();
    let route_counts: Vec<u64> = groups.iter().map(|g| g.len() as u64).collect();

    let (silhouette, davies_bouldin) = if groups.len() >= 2 {
        (Some(silhouette_score(groups, dist)), Some(davies_bouldin_score(groups, dist)))
    } else {
        (None, None)
    };

    // Footprint overlap between clusters: Jaccard of unioned cell sets.
    let footprints: Vec<BTreeSet<HexCell>> = groups
        .iter()
        .map(|g| g.iter().flat_map(|&r| inputs[r].h3_cells.iter().copied()).collect())
        .collect();
    let mut overlap_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..footprints.len() {
        for j in (i + 1)..footprints.len() {
            overlap_sum += jaccard(&footprints[i], &footprints[j]);
            pairs += 1;
        }
    }
    let mean_inter_cluster_jaccard = if pairs == 0 { 0.0 } else { overlap_sum / pairs as f64 };

    let mut metrics = ClusterMetrics {
        cv: coefficient_of_variation(&obs_counts),
        imbalance_ratio: imbalance(&obs_counts),
        route_imbalance_ratio: imbalance(&route_counts),
        silhouette,
        davies_bouldin,
        mean_inter_cluster_jaccard,
        composite: None,
    };
    metrics.composite = composite_cluster_objective(&metrics).ok();
    metrics
}

/// Mean silhouette over routes, from precomputed distances. Singleton-cluster
/// members score 0.
fn silhouette_score(groups: &[Vec<usize>], dist: &DistanceMatrix) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (gi, g) in groups.iter().enumerate() {
        for &i in g {
            count += 1;
            if g.len() < 2 {
                continue; // s = 0
            }
            let a = g.iter().filter(|&&j| j != i).map(|&j| dist.get(i, j)).sum::<f64>() / (g.len() - 1) as f64;
            let mut b = f64::INFINITY;
            for (gj, h) in groups.iter().enumerate() {
                if gj == gi || h.is_empty() {
                    continue;
                }
                let mean = h.iter().map(|&j| dist.get(i, j)).sum::<f64>() / h.len() as f64;
                if mean < b {
                    b = mean;
                }
            }
            let denom = a.max(b);
            if denom > 0.0 {
                total += (b - a) / denom;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Davies–Bouldin with the mean-pairwise-distance proxy for centroid spread
/// (only a distance matrix is available, not coordinates).
fn davies_bouldin_score(groups: &[Vec<usize>], dist: &DistanceMatrix) -> f64 {
    let spread: Vec<f64> = groups
        .iter()
        .map(|g| {
            if g.len() < 2 {
                return 0.0;
            }
            let mut s = 0.0;
            let mut c = 0usize;
            for x in 0..g.len() {
                for y in (x + 1)..g.len() {
                    s += dist.get(g[x], g[y]);
                    c += 1;
                }
            }
            s / c as f64
        })
        .collect();
    let k = groups.len();
    let mut db = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in 0..k {
            if i == j || groups[i].is_empty() || groups[j].is_empty() {
                continue;
            }
            let mut m = 0.0;
            for &a in &groups[i] {
                for &b in &groups[j] {
                    m += dist.get(a, b);
                }
            }
            m /= (groups[i].len() * groups[j].len()) as f64;
            let r = if m > 0.0 { (spread[i] + spread[j]) / m } else { f64::INFINITY };
            if r > worst {
                worst = r;
            }
        }
        db += worst;
    }
    db / k as f64
}

/// Composite clustering objective, lower is better:
/// `0.5·cv + 0.3·(1 − (silhouette+1)/2) + 0.2·mean_inter_cluster_jaccard`.
pub fn composite_cluster_objective(metrics: &ClusterMetrics) -> Result<f64, ClusterError> {
    let sil = metrics.silhouette.ok_or(ClusterError::NullMetric("silhouette"))?;
    let sil_norm = (sil + 1.0) / 2.0;
    Ok(0.5 * metrics.cv + 0.3 * (1.0 - sil_norm) + 0.2 * metrics.mean_inter_cluster_jaccard)
}

/// Route geometry and topology needed to rebuild similarity inputs at any
/// resolution during configuration search.
#[derive(Debug, Clone)]
pub struct RouteData {
    pub route_id: String,
    pub geometry: Vec<Vec<GeoPoint>>,
    pub segments: BTreeSet<(String, String)>,
    pub observation_count: u64,
}

/// Builds similarity inputs at a given cell resolution.
pub fn similarity_inputs(routes: &[RouteData], resolution: u8) -> Result<Vec<RouteSimilarityInput>, ClusterError> {
    routes
        .iter()
        .map(|r| {
            let mut cells = BTreeSet::new();
            for line in &r.geometry {
                if line.len() >= 2 {
                    cells.extend(footprint(line, resolution)?);
                }
            }
            Ok(RouteSimilarityInput {
                route_id: r.route_id.clone(),
                h3_cells: cells,
                segments: r.segments.clone(),
                observation_count: r.observation_count,
            })
        })
        .collect()
}

/// Candidate grid for [`search_configuration`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterGrid {
    pub resolutions: Vec<u8>,
    pub cluster_counts: Vec<usize>,
    pub spatial_weights: Vec<f64>,
    pub linkages: Vec<LinkageKind>,
    pub giant_threshold: f64,
}

impl Default for ClusterGrid {
    fn default() -> Self {
        Self {
            resolutions: vec![6, 7, 8],
            cluster_counts: vec![8, 10, 12, 15, 20],
            spatial_weights: vec![0.3, 0.5, 0.7],
            linkages: vec![LinkageKind::Ward, LinkageKind::Complete, LinkageKind::Average],
            giant_threshold: 0.4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchTrial {
    pub config: ClusterConfig,
    pub composite: f64,
    pub cv: f64,
    pub silhouette: Option<f64>,
    pub source: &'static str,
}

/// Full grid evaluation followed by seeded uniform-random refinement of
/// `w_spatial` and the dendrogram cut height. Returns the argmin of the
/// composite objective with its assignment and the full trial log.
pub fn search_configuration(
    grid: &ClusterGrid,
    routes: &[RouteData],
    observations: &[ClusterObservation],
    trials_random: usize,
    seed: u64,
) -> Result<(ClusterConfig, ClusterAssignment, Vec<SearchTrial>), ClusterError> {
    if grid.resolutions.is_empty() || grid.cluster_counts.is_empty() || grid.spatial_weights.is_empty() || grid.linkages.is_empty()
    {
        return Err(ClusterError::EmptyGrid);
    }
    let total_obs: u64 = routes.iter().map(|r| r.observation_count).sum();
    let mut trials = Vec::new();
    let mut best: Option<(f64, ClusterConfig, ClusterAssignment)> = None;

    let mut consider = |config: ClusterConfig,
                        assignment: ClusterAssignment,
                        source: &'static str,
                        trials: &mut Vec<SearchTrial>,
                        best: &mut Option<(f64, ClusterConfig, ClusterAssignment)>| {
        if let Some(composite) = assignment.metrics.composite {
            trials.push(SearchTrial {
                config: config.clone(),
                composite,
                cv: assignment.metrics.cv,
                silhouette: assignment.metrics.silhouette,
                source,
            });
            let better = match best {
                None => true,
                Some((b, _, _)) => composite < *b,
            };
            if better {
                *best = Some((composite, config, assignment));
            }
        }
    };

    for &res in &grid.resolutions {
        let inputs = similarity_inputs(routes, res)?;
        for &k in &grid.cluster_counts {
            if k > routes.len() {
                continue;
            }
            for &w in &grid.spatial_weights {
                for &linkage in &grid.linkages {
                    let (min_size, max_size) = ClusterConfig::default_bounds(total_obs, k);
                    let config = ClusterConfig {
                        h3_resolution: res,
                        n_clusters: k,
                        w_spatial: w,
                        linkage,
                        giant_threshold: grid.giant_threshold,
                        min_size,
                        max_size,
                        distance_threshold: None,
                    };
                    let assignment = hybrid_cluster(&inputs, observations, &config)?;
                    consider(config, assignment, "grid", &mut trials, &mut best);
                }
            }
        }
    }

    // Random refinement around the grid winner: resample w_spatial and an
    // optional cut height with the winner's resolution/linkage.
    if let Some((_, base, _)) = best.clone() {
        let inputs = similarity_inputs(routes, base.h3_resolution)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials_random {
            let w: f64 = rng.random_range(0.0..=1.0);
            let threshold: f64 = rng.random_range(0.0..=1.0);
            let config = ClusterConfig {
                w_spatial: w,
                distance_threshold: Some(threshold),
                ..base.clone()
            };
            let assignment = hybrid_cluster(&inputs, observations, &config)?;
            consider(config, assignment, "random", &mut trials, &mut best);
        }
    }

    let (_, config, assignment) = best.ok_or(ClusterError::EmptyGrid)?;
    Ok((config, assignment, trials))
}

/// Writes `route_id,cluster_id` CSV plus a JSON metrics sidecar.
pub fn save_assignment(
    assignment: &ClusterAssignment,
    config: &ClusterConfig,
    csv_path: &Path,
    metrics_path: &Path,
) -> Result<(), ClusterError> {
    let mut f = std::fs::File::create(csv_path)?;
    writeln!(f, "route_id,cluster_id")?;
    for (route, cluster) in &assignment.assignment {
        writeln!(f, "{route},{cluster}")?;
    }
    let sidecar = serde_json::json!({
        "cv": assignment.metrics.cv,
        "imbalance_ratio": assignment.metrics.imbalance_ratio,
        "route_imbalance_ratio": assignment.metrics.route_imbalance_ratio,
        "silhouette": assignment.metrics.silhouette,
        "davies_bouldin": assignment.metrics.davies_bouldin,
        "inter_cluster_jaccard": assignment.metrics.mean_inter_cluster_jaccard,
        "composite": assignment.metrics.composite,
        "config": config,
        "flags": assignment.flags,
    });
    std::fs::write(metrics_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

impl From<serde_json::Error> for ClusterError {
    fn from(e: serde_json::Error) -> Self {
        ClusterError::Io(std::io::Error::other(e))
    }
}
