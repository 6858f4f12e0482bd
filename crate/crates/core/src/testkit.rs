//! Independent reference implementations ("oracles") used by the test and
//! acceptance suites. Everything here favours obviousness over speed and
//! deliberately avoids the data structures of the modules it checks.
//!
//! Compiled for this crate's own tests and for dependents via the `testkit`
//! feature; not part of the library API proper.

use std::collections::BTreeMap;

use crate::cluster::{DistanceMatrix, LinkageKind, Merge};

/// Naive O(n³) Lance–Williams agglomeration. Clusters live in a BTreeMap
/// keyed by dendrogram label; every step rescans all pairs.
pub fn naive_lance_williams(dist: &DistanceMatrix, linkage: LinkageKind) -> Vec<Merge> {
    let n = dist.n();
    // label → member count
    let mut clusters: BTreeMap<usize, usize> = (0..n).map(|i| (i, 1)).collect();
    // unordered pair (min label, max label) → distance
    let mut d: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            d.insert((i, j), dist.get(i, j));
        }
    }
    let mut merges = Vec::new();
    for step in 0..n.saturating_sub(1) {
        let (&(a, b), &d_ab) = d
            .iter()
            .min_by(|(p1, d1), (p2, d2)| d1.partial_cmp(d2).unwrap().then(p1.cmp(p2)))
            .expect("pairs remain");
        let new_label = n + step;
        let n_a = clusters[&a] as f64;
        let n_b = clusters[&b] as f64;
        let others: Vec<usize> = clusters.keys().copied().filter(|&k| k != a && k != b).collect();
        for k in others {
            let d_ak = d[&key(a, k)];
            let d_bk = d[&key(b, k)];
            let n_k = clusters[&k] as f64;
            let updated = match linkage {
                LinkageKind::Ward => {
                    let t = n_a + n_b + n_k;
                    (((n_a + n_k) * d_ak * d_ak + (n_b + n_k) * d_bk * d_bk - n_k * d_ab * d_ab) / t).sqrt()
                }
                LinkageKind::Complete => d_ak.max(d_bk),
                LinkageKind::Average => (n_a * d_ak + n_b * d_bk) / (n_a + n_b),
            };
            d.insert(key(new_label, k), updated);
        }
        d.retain(|&(x, y), _| x != a && x != b && y != a && y != b);
        clusters.remove(&a);
        clusters.remove(&b);
        clusters.insert(new_label, (n_a + n_b) as usize);
        merges.push(Merge { a, b, distance: d_ab, size: (n_a + n_b) as usize });
    }
    merges
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Modularity computed directly from a dense adjacency matrix.
pub fn dense_modularity(adj: &[Vec<f64>], comm: &[usize]) -> f64 {
    let n = adj.len();
    let two_m: f64 = (0..n).map(|i| (0..n).map(|j| adj[i][j]).sum::<f64>()).sum();
    if two_m == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for i in 0..n {
        let k_i: f64 = (0..n).map(|j| adj[i][j]).sum();
        for j in 0..n {
            if comm[i] == comm[j] {
                let k_j: f64 = (0..n).map(|x| adj[j][x]).sum();
                q += adj[i][j] - k_i * k_j / two_m;
            }
        }
    }
    q / two_m
}

/// Best 2-partition by exhaustive enumeration (node 0 fixed on side 0).
/// Returns (labels, modularity).
pub fn exhaustive_best_two_partition(adj: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = adj.len();
    assert!(n >= 2 && n <= 20, "exhaustive search is for small graphs");
    let mut best = (vec![0; n], f64::NEG_INFINITY);
    for mask in 0..(1u32 << (n - 1)) {
        let labels: Vec<usize> = (0..n)
            .map(|i| if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as usize })
            .collect();
        let q = dense_modularity(adj, &labels);
        if q > best.1 {
            best = (labels, q);
        }
    }
    best
}

/// Brute-force silhouette from a distance matrix (for n ≤ 20 checks).
pub fn brute_silhouette(groups: &[Vec<usize>], dist: &DistanceMatrix) -> f64 {
    let mut scores = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        for &i in g {
            if g.len() < 2 {
                scores.push(0.0);
                continue;
            }
            let a: f64 = g.iter().filter(|&&j| j != i).map(|&j| dist.get(i, j)).sum::<f64>() / (g.len() - 1) as f64;
            let mut b = f64::INFINITY;
            for (gj, h) in groups.iter().enumerate() {
                if gi == gj || h.is_empty() {
                    continue;
                }
                b = b.min(h.iter().map(|&j| dist.get(i, j)).sum::<f64>() / h.len() as f64);
            }
            let m = a.max(b);
            scores.push(if m > 0.0 { (b - a) / m } else { 0.0 });
        }
    }
    scores.iter().sum::<f64>() / scores.len() as f64
}

/// Naive single-pass-free statistics: mean, population stdev, min, max,
/// p25/p50/p75 (type-7), count, sum — recomputed from a fresh sort.
pub fn naive_stats(values: &[f64]) -> [f64; 9] {
    let n = values.len();
    assert!(n > 0);
    let sum: f64 = values.iter().sum();
    let mean = sum / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| -> f64 {
        let h = (n as f64 - 1.0) * p;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    [mean, var.sqrt(), sorted[0], sorted[n - 1], q(0.25), q(0.50), q(0.75), n as f64, sum]
}

/// Naive regression metrics: (rmse, mae, r²).
pub fn naive_metrics(y_true: &[f64], y_pred: &[f64]) -> (f64, f64, Option<f64>) {
    assert_eq!(y_true.len(), y_pred.len());
    let n = y_true.len() as f64;
    let mse: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p) * (t - p)).sum::<f64>() / n;
    let mae: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / n;
    let mean: f64 = y_true.iter().sum::<f64>() / n;
    let sst: f64 = y_true.iter().map(|t| (t - mean) * (t - mean)).sum();
    let sse: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p) * (t - p)).sum();
    let r2 = if sst == 0.0 { None } else { Some(1.0 - sse / sst) };
    (mse.sqrt(), mae, r2)
}

/// Exhaustive regression-stump search: best (feature, threshold) minimizing
/// squared error with leaf means, thresholds at midpoints of consecutive
/// distinct values. Ties break on the smallest (feature, threshold).
/// Returns (feature, threshold, left_mean, right_mean, sse).
pub fn exhaustive_stump(x: &[Vec<f64>], y: &[f64]) -> Option<(usize, f64, f64, f64, f64)> {
    let n = y.len();
    let d = x.first()?.len();
    let mut best: Option<(usize, f64, f64, f64, f64)> = None;
    for f in 0..d {
        let mut vals: Vec<f64> = x.iter().map(|row| row[f]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let (mut sl, mut nl, mut sr, mut nr) = (0.0, 0usize, 0.0, 0usize);
            for i in 0..n {
                if x[i][f] <= thr {
                    sl += y[i];
                    nl += 1;
                } else {
                    sr += y[i];
                    nr += 1;
                }
            }
            if nl == 0 || nr == 0 {
                continue;
            }
            let (ml, mr) = (sl / nl as f64, sr / nr as f64);
            let sse: f64 = (0..n)
                .map(|i| {
                    let m = if x[i][f] <= thr { ml } else { mr };
                    (y[i] - m) * (y[i] - m)
                })
                .sum();
            let better = match best {
                None => true,
                Some((bf, bt, _, _, bsse)) => sse < bsse - 1e-12 || ((sse - bsse).abs() <= 1e-12 && (f, thr) < (bf, bt)),
            };
            if better {
                best = Some((f, thr, ml, mr, sse));
            }
        }
    }
    best
}

/// Full-batch gradient descent on the ridge objective (intercept
/// unpenalized), the independent check for the normal-equation solver.
pub fn ridge_gradient_descent(
    x: &nalgebra::DMatrix<f64>,
    y: &[f64],
    l2: f64,
    iters: usize,
    lr: f64,
) -> (Vec<f64>, f64) {
    let (n, d) = (x.nrows(), x.ncols());
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..iters {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for i in 0..n {
            let mut pred = b;
            for j in 0..d {
                pred += x[(i, j)] * w[j];
            }
            let r = pred - y[i];
            gb += 2.0 * r;
            for j in 0..d {
                gw[j] += 2.0 * r * x[(i, j)];
            }
        }
        for j in 0..d {
            gw[j] += 2.0 * l2 * w[j];
            w[j] -= lr * gw[j] / n as f64;
        }
        b -= lr * gb / n as f64;
    }
    (w, b)
}

/// Exact two-sided Wilcoxon signed-rank p-value by enumerating the
/// distribution of the rank sum over all sign assignments (dynamic program on
/// doubled ranks so midranks stay integral). Zero differences are dropped.
pub fn wilcoxon_exact_two_sided(diffs: &[f64]) -> Option<f64> {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return None;
    }
    // Midranks of |d|, doubled to integers.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| nonzero[a].abs().partial_cmp(&nonzero[b].abs()).unwrap());
    let mut doubled_ranks = vec![0u64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nonzero[idx[j + 1]].abs() == nonzero[idx[i]].abs() {
            j += 1;
        }
        // ranks i+1..=j+1 tie; midrank = (i+j+2)/2, doubled = i+j+2.
        let doubled = (i + j + 2) as u64;
        for &k in &idx[i..=j] {
            doubled_ranks[k] = doubled;
        }
        i = j + 1;
    }
    let total: u64 = doubled_ranks.iter().sum();
    let w_plus_doubled: u64 = (0..n).filter(|&k| nonzero[k] > 0.0).map(|k| doubled_ranks[k]).sum();
    // counts[s] = number of sign assignments with doubled rank sum s.
    let mut counts = vec![0f64; (total + 1) as usize];
    counts[0] = 1.0;
    for &r in &doubled_ranks {
        for s in (r..=total).rev() {
            counts[s as usize] += counts[(s - r) as usize];
        }
    }
    let denom = 2f64.powi(n as i32);
    let w = w_plus_doubled.min(total - w_plus_doubled);
    let tail: f64 = (0..=w).map(|s| counts[s as usize]).sum();
    Some((2.0 * tail / denom).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_stats_textbook_quantiles() {
        let s = naive_stats(&[1.0, 2.0, 3.0, 4.0]);
        assert!((s[4] - 1.75).abs() < 1e-12);
        assert!((s[5] - 2.5).abs() < 1e-12);
        assert!((s[6] - 3.25).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_no_ties_textbook() {
        // Ranks {1..6}, all positive except rank 1 negative: W− = 1.
        // P(W ≤ 1) = 2/64 one-sided → 0.0625 two-sided.
        let p = wilcoxon_exact_two_sided(&[-0.5, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((p - 0.0625).abs() < 1e-12, "p = {p}");
    }

    #[test]
    fn wilcoxon_with_tied_magnitudes() {
        // {+1,+2,+3,−1,+5,+6}: |−1| ties |+1| at midrank 1.5 → W− = 1.5.
        // Exhaustive: subsets with doubled sum ≤ 3 are {}, {3}, {3}' → 3/64,
        // two-sided p = 6/64.
        let p = wilcoxon_exact_two_sided(&[1.0, 2.0, 3.0, -1.0, 5.0, 6.0]).unwrap();
        assert!((p - 6.0 / 64.0).abs() < 1e-12, "p = {p}");
    }

    #[test]
    fn exhaustive_stump_obvious_split() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| if i < 5 { 0.0 } else { 1.0 }).collect();
        let (f, thr, ml, mr, sse) = exhaustive_stump(&x, &y).unwrap();
        assert_eq!(f, 0);
        assert!((thr - 4.5).abs() < 1e-12);
        assert_eq!((ml, mr), (0.0, 1.0));
        assert_eq!(sse, 0.0);
    }
}
