//! Agglomerative clustering via Lance–Williams updates on a precomputed
//! dissimilarity matrix.
//!
//! Each step merges the globally closest active pair; ties break on the
//! lexicographically smallest (label_a, label_b) pair, where merge `t` creates
//! cluster label `n + t`. Ward updates treat the input as Euclidean-style
//! distances (the recurrence runs on squared values and takes a square root),
//! which knowingly relaxes Ward's Euclidean assumption for Jaccard distances —
//! same convention as the usual precomputed-matrix implementations.

use serde::Serialize;

use super::{ClusterError, DistanceMatrix, LinkageKind};

/// One dendrogram step: clusters `a` and `b` (labels, `a < b`) merge at
/// `distance` into a cluster of `size` members labelled `n + step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub size: usize,
}

/// Lance–Williams distance between the merged cluster (a ∪ b) and k.
fn lw_update(linkage: LinkageKind, d_ak: f64, d_bk: f64, d_ab: f64, n_a: f64, n_b: f64, n_k: f64) -> f64 {
    match linkage {
        LinkageKind::Ward => {
            let t = n_a + n_b + n_k;
            (((n_a + n_k) * d_ak * d_ak + (n_b + n_k) * d_bk * d_bk - n_k * d_ab * d_ab) / t).sqrt()
        }
        LinkageKind::Complete => d_ak.max(d_bk),
        LinkageKind::Average => (n_a * d_ak + n_b * d_bk) / (n_a + n_b),
    }
}

/// Full merge sequence (n − 1 steps) for an n×n dissimilarity matrix.
pub fn linkage_merges(dist: &DistanceMatrix, linkage: LinkageKind) -> Vec<Merge> {
    let n = dist.n();
    // Working copy indexed by slots; a merge stores the result in the smaller
    // slot and retires the larger.
    let mut d: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dist.get(i, j)).collect()).collect();
    let mut alive: Vec<bool> = vec![true; n];
    let mut label: Vec<usize> = (0..n).collect();
    let mut size: Vec<usize> = vec![1; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        // Global minimum over alive pairs, tie-broken by the smallest sorted
        // label pair.
        let mut best: Option<(f64, usize, usize, usize, usize)> = None; // (d, la, lb, si, sj)
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !alive[j] {
                    continue;
                }
                let dij = d[i][j];
                let (la, lb) = if label[i] < label[j] { (label[i], label[j]) } else { (label[j], label[i]) };
                let better = match best {
                    None => true,
                    Some((bd, ba, bb, _, _)) => dij < bd || (dij == bd && (la, lb) < (ba, bb)),
                };
                if better {
                    best = Some((dij, la, lb, i, j));
                }
            }
        }
        let (d_ab, la, lb, si, sj) = best.expect("at least one alive pair");
        let (keep, drop) = (si.min(sj), si.max(sj));
        let (n_a, n_b) = (size[si] as f64, size[sj] as f64);
        for k in 0..n {
            if !alive[k] || k == si || k == sj {
                continue;
            }
            let updated = lw_update(linkage, d[si][k], d[sj][k], d_ab, n_a, n_b, size[k] as f64);
            d[keep][k] = updated;
            d[k][keep] = updated;
        }
        alive[drop] = false;
        size[keep] += size[drop];
        label[keep] = n + step;
        merges.push(Merge { a: la, b: lb, distance: d_ab, size: size[keep] });
    }
    merges
}

/// Flat assignment after applying the first `n − k` merges. Cluster ids are
/// contiguous from 0, ordered by each cluster's smallest member index.
pub fn cut_merges(merges: &[Merge], n: usize, n_clusters: usize) -> Result<Vec<usize>, ClusterError> {
    if n_clusters == 0 || n_clusters > n {
        return Err(ClusterError::InvalidK { k: n_clusters, n });
    }
    apply_merges(merges, n, n - n_clusters)
}

/// Flat assignment after applying the merges whose distance is ≤ `height`
/// (prefix of the sequence).
pub fn cut_by_height(merges: &[Merge], n: usize, height: f64) -> Result<Vec<usize>, ClusterError> {
    let steps = merges.iter().take_while(|m| m.distance <= height).count();
    apply_merges(merges, n, steps)
}

fn apply_merges(merges: &[Merge], n: usize, steps: usize) -> Result<Vec<usize>, ClusterError> {
    if steps > merges.len() {
        return Err(ClusterError::InvalidK { k: n.saturating_sub(steps), n });
    }
    // members[label] for labels 0..n+steps.
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    for (t, m) in merges.iter().take(steps).enumerate() {
        let mut merged = members[m.a].take().expect("label a alive");
        merged.extend(members[m.b].take().expect("label b alive"));
        merged.sort_unstable();
        members.push(Some(merged));
        debug_assert_eq!(members.len() - 1, n + t);
    }
    let mut clusters: Vec<Vec<usize>> = members.into_iter().flatten().collect();
    clusters.sort_by_key(|c| c[0]);
    let mut assignment = vec![0usize; n];
    for (cid, cluster) in clusters.iter().enumerate() {
        for &i in cluster {
            assignment[i] = cid;
        }
    }
    Ok(assignment)
}

/// Agglomerative clustering cut at `n_clusters`.
pub fn agglomerate(dist: &DistanceMatrix, n_clusters: usize, linkage: LinkageKind) -> Result<Vec<usize>, ClusterError> {
    let merges = linkage_merges(dist, linkage);
    cut_merges(&merges, dist.n(), n_clusters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit;
    use rand::{Rng, SeedableRng};

    fn random_matrix(n: usize, seed: u64, quantized: bool) -> DistanceMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                // Quantized values force plenty of exact ties.
                let v = if quantized {
                    rng.random_range(1..=4) as f64 / 4.0
                } else {
                    rng.random_range(0.01..1.0)
                };
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        DistanceMatrix::from_rows(rows)
    }

    #[test]
    fn n_clusters_equals_n_is_identity() {
        let m = random_matrix(6, 1, false);
        let a = agglomerate(&m, 6, LinkageKind::Ward).unwrap();
        assert_eq!(a, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn single_cluster() {
        let m = random_matrix(6, 2, false);
        let a = agglomerate(&m, 1, LinkageKind::Average).unwrap();
        assert!(a.iter().all(|&c| c == 0));
    }

    #[test]
    fn invalid_k() {
        let m = random_matrix(4, 3, false);
        assert!(matches!(agglomerate(&m, 5, LinkageKind::Ward), Err(ClusterError::InvalidK { .. })));
        assert!(matches!(agglomerate(&m, 0, LinkageKind::Ward), Err(ClusterError::InvalidK { .. })));
    }

    #[test]
    fn merge_sequence_matches_naive_oracle() {
        // The independent O(n³) oracle re-derives every step from scratch.
        for seed in 0..30u64 {
            let n = 3 + (seed as usize * 7) % 28;
            let quantized = seed % 3 == 0;
            let m = random_matrix(n, seed, quantized);
            for linkage in [LinkageKind::Ward, LinkageKind::Complete, LinkageKind::Average] {
                let got = linkage_merges(&m, linkage);
                let want = testkit::naive_lance_williams(&m, linkage);
                assert_eq!(got.len(), want.len());
                for (g, w) in got.iter().zip(want.iter()) {
                    assert_eq!((g.a, g.b), (w.a, w.b), "seed {seed} n {n} linkage {linkage:?}");
                    assert_eq!(g.distance.to_bits(), w.distance.to_bits(), "distance mismatch seed {seed}");
                    assert_eq!(g.size, w.size);
                }
            }
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let m = random_matrix(25, 9, true);
        let a = agglomerate(&m, 5, LinkageKind::Ward).unwrap();
        let b = agglomerate(&m, 5, LinkageKind::Ward).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_tight_pairs_split_first() {
        // 0-1 and 2-3 are close, everything else far.
        let rows = vec![
            vec![0.0, 0.1, 0.9, 0.9],
            vec![0.1, 0.0, 0.9, 0.9],
            vec![0.9, 0.9, 0.0, 0.1],
            vec![0.9, 0.9, 0.1, 0.0],
        ];
        let m = DistanceMatrix::from_rows(rows);
        let a = agglomerate(&m, 2, LinkageKind::Ward).unwrap();
        assert_eq!(a[0], a[1]);
        assert_eq!(a[2], a[3]);
        assert_ne!(a[0], a[2]);
    }

    #[test]
    fn cut_by_height_prefix_rule() {
        let m = random_matrix(8, 4, false);
        let merges = linkage_merges(&m, LinkageKind::Complete);
        let assignment = cut_by_height(&merges, 8, merges[2].distance).unwrap();
        let k = assignment.iter().copied().max().unwrap() + 1;
        assert!(k <= 8 - 3 + 1, "at least the first 3 merges applied");
    }
}
