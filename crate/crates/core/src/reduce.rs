//! Feature/target scaling and principal-component reduction with adaptive
//! component selection at a cumulative explained-variance threshold.
//!
//! The eigendecomposition runs on the d×d population covariance when d ≤ n
//! and on a thin SVD of the centered matrix otherwise; both paths produce the
//! same spectrum (covered by the property suite). Component signs follow a
//! deterministic convention: the entry with the largest magnitude is positive.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;

#[derive(Debug, Error, PartialEq)]
pub enum ReduceError {
    #[error("need at least 2 rows to fit, got {0}")]
    DegenerateFit(usize),
    #[error("matrix contains non-finite entries")]
    InvalidMatrix,
    #[error("all-zero spectrum: the scaled matrix has no variance")]
    ZeroVariance,
    #[error("column count mismatch: model has {model}, input has {input}")]
    ShapeError { model: usize, input: usize },
    #[error("invalid variance threshold {0}")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    /// Center = mean, scale = population standard deviation.
    Zscore,
    /// Center = median, scale = interquartile range (p75 − p25).
    Robust,
}

/// Fitted per-column affine scaler. Zero-scale columns are recorded and pass
/// through unscaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerModel {
    pub kind: ScalerKind,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    pub passthrough: Vec<bool>,
    pub n_rows: usize,
}

/// Type-7 (linear interpolation) quantile of pre-sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0);
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn fit_scaler(x: &DMatrix<f64>, kind: ScalerKind) -> Result<ScalerModel, ReduceError> {
    let (n, d) = (x.nrows(), x.ncols());
    if n < 2 {
        return Err(ReduceError::DegenerateFit(n));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ReduceError::InvalidMatrix);
    }
    let mut center = vec![0.0; d];
    let mut scale = vec![1.0; d];
    let mut passthrough = vec![false; d];
    for j in 0..d {
        let col = x.column(j);
        let (c, s) = match kind {
            ScalerKind::Zscore => {
                let mean = col.sum() / n as f64;
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                (mean, var.sqrt())
            }
            ScalerKind::Robust => {
                let mut sorted: Vec<f64> = col.iter().copied().collect();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let median = quantile_sorted(&sorted, 0.5);
                let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
                (median, iqr)
            }
        };
        if s > 0.0 {
            center[j] = c;
            scale[j] = s;
        } else {
            passthrough[j] = true;
        }
    }
    Ok(ScalerModel { kind, center, scale, passthrough, n_rows: n })
}

pub fn apply_scaler(x: &DMatrix<f64>, model: &ScalerModel) -> Result<DMatrix<f64>, ReduceError> {
    check_cols(model.center.len(), x.ncols())?;
    let mut out = x.clone();
    for j in 0..out.ncols() {
        if model.passthrough[j] {
            continue;
        }
        for i in 0..out.nrows() {
            out[(i, j)] = (out[(i, j)] - model.center[j]) / model.scale[j];
        }
    }
    Ok(out)
}

pub fn invert_scaler(x: &DMatrix<f64>, model: &ScalerModel) -> Result<DMatrix<f64>, ReduceError> {
    check_cols(model.center.len(), x.ncols())?;
    let mut out = x.clone();
    for j in 0..out.ncols() {
        if model.passthrough[j] {
            continue;
        }
        for i in 0..out.nrows() {
            out[(i, j)] = out[(i, j)] * model.scale[j] + model.center[j];
        }
    }
    Ok(out)
}

/// Scalar convenience for the target column.
pub fn apply_scaler_vec(y: &[f64], model: &ScalerModel) -> Result<Vec<f64>, ReduceError> {
    check_cols(model.center.len(), 1)?;
    if model.passthrough[0] {
        return Ok(y.to_vec());
    }
    Ok(y.iter().map(|v| (v - model.center[0]) / model.scale[0]).collect())
}

pub fn invert_scaler_vec(y: &[f64], model: &ScalerModel) -> Result<Vec<f64>, ReduceError> {
    check_cols(model.center.len(), 1)?;
    if model.passthrough[0] {
        return Ok(y.to_vec());
    }
    Ok(y.iter().map(|v| v * model.scale[0] + model.center[0]).collect())
}

fn check_cols(model: usize, input: usize) -> Result<(), ReduceError> {
    if model != input {
        Err(ReduceError::ShapeError { model, input })
    } else {
        Ok(())
    }
}

/// Full principal-component decomposition of a (scaled) matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaFull {
    pub mean: Vec<f64>,
    /// One row per component, descending eigenvalue order; rank × d.
    pub components: Vec<Vec<f64>>,
    /// All d eigenvalues, descending; entries beyond the rank are zero.
    pub eigenvalues: Vec<f64>,
}

/// Population column means, accumulated over fixed row chunks.
fn column_means(x: &DMatrix<f64>) -> Vec<f64> {
    let (n, d) = (x.nrows(), x.ncols());
    let rows: Vec<usize> = (0..n).collect();
    let sums = par::chunked_reduce(
        &rows,
        |chunk| {
            let mut s = vec![0.0; d];
            for &i in chunk {
                for j in 0..d {
                    s[j] += x[(i, j)];
                }
            }
            s
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        },
    )
    .unwrap_or_else(|| vec![0.0; d]);
    sums.into_iter().map(|s| s / n as f64).collect()
}

/// Population covariance accumulated over fixed row chunks (deterministic
/// pairwise reduction; result independent of worker count).
fn covariance(x: &DMatrix<f64>, mean: &[f64]) -> DMatrix<f64> {
    let (n, d) = (x.nrows(), x.ncols());
    let rows: Vec<usize> = (0..n).collect();
    let gram = par::chunked_reduce(
        &rows,
        |chunk| {
            let mut g = vec![0.0; d * d];
            for &i in chunk {
                for a in 0..d {
                    let xa = x[(i, a)] - mean[a];
                    if xa == 0.0 {
                        continue;
                    }
                    for b in a..d {
                        g[a * d + b] += xa * (x[(i, b)] - mean[b]);
                    }
                }
            }
            g
        },
        |mut p, q| {
            for (a, b) in p.iter_mut().zip(q) {
                *a += b;
            }
            p
        },
    )
    .unwrap_or_else(|| vec![0.0; d * d]);
    let mut cov = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = gram[a * d + b] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov
}

/// Sequential twin of the covariance accumulation, for the bench suite and
/// the worker-count-independence tests. Chunk partials fold in the same order
/// as the parallel path, so results are bit-identical.
pub fn covariance_seq(x: &DMatrix<f64>, mean: &[f64]) -> DMatrix<f64> {
    let (n, d) = (x.nrows(), x.ncols());
    let rows: Vec<usize> = (0..n).collect();
    let mut acc: Option<Vec<f64>> = None;
    for chunk in rows.chunks(par::ROW_CHUNK) {
        let mut g = vec![0.0; d * d];
        for &i in chunk {
            for a in 0..d {
                let xa = x[(i, a)] - mean[a];
                if xa == 0.0 {
                    continue;
                }
                for b in a..d {
                    g[a * d + b] += xa * (x[(i, b)] - mean[b]);
                }
            }
        }
        acc = Some(match acc {
            None => g,
            Some(mut p) => {
                for (a, b) in p.iter_mut().zip(g) {
                    *a += b;
                }
                p
            }
        });
    }
    let g = acc.unwrap_or_else(|| vec![0.0; d * d]);
    let mut cov = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = g[a * d + b] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov
}

/// Column means of `x`; shared entry point for callers of [`covariance_seq`].
pub fn column_means_of(x: &DMatrix<f64>) -> Vec<f64> {
    column_means(x)
}

/// Full eigendecomposition of the sample covariance of `x`. Eigenvalues come
/// out descending and clamped at zero; each component's largest-magnitude
/// entry is positive.
pub fn fit_pca(x: &DMatrix<f64>) -> Result<PcaFull, ReduceError> {
    let (n, d) = (x.nrows(), x.ncols());
    if n < 2 {
        return Err(ReduceError::DegenerateFit(n));
    }
    if d == 0 {
        return Err(ReduceError::InvalidMatrix);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ReduceError::InvalidMatrix);
    }
    let mean = column_means(x);

    let (mut eigenvalues, mut components): (Vec<f64>, Vec<Vec<f64>>) = if d <= n {
        let cov = covariance(x, &mean);
        let eig = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap().then(a.cmp(&b)));
        let vals = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let comps = order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect();
        (vals, comps)
    } else {
        // d > n: thin SVD of the centered matrix. Rank ≤ n; the remaining
        // eigenvalues are zero and their components are not materialized.
        let mut centered = x.clone();
        for i in 0..n {
            for j in 0..d {
                centered[(i, j)] -= mean[j];
            }
        }
        let svd = centered.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let r = v_t.nrows();
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap().then(a.cmp(&b)));
        let vals: Vec<f64> = order
            .iter()
            .map(|&i| {
                let s = svd.singular_values[i];
                (s * s / n as f64).max(0.0)
            })
            .collect();
        let comps = order.iter().map(|&i| v_t.row(i).iter().copied().collect()).collect();
        (vals, comps)
    };
    eigenvalues.resize(d, 0.0);

    // Deterministic sign convention.
    for comp in components.iter_mut() {
        let mut best = 0usize;
        for (j, v) in comp.iter().enumerate() {
            if v.abs() > comp[best].abs() {
                best = j;
            }
        }
        if comp[best] < 0.0 {
            for v in comp.iter_mut() {
                *v = -*v;
            }
        }
    }
    Ok(PcaFull { mean, components, eigenvalues })
}

/// Smallest k whose cumulative explained-variance ratio reaches `threshold`.
pub fn select_components(eigenvalues: &[f64], threshold: f64) -> Result<usize, ReduceError> {
    if !(0.0 < threshold && threshold <= 1.0) {
        return Err(ReduceError::InvalidThreshold(threshold));
    }
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return Err(ReduceError::ZeroVariance);
    }
    let mut cum = 0.0;
    for (i, &v) in eigenvalues.iter().enumerate() {
        cum += v;
        if cum / total >= threshold {
            return Ok(i + 1);
        }
    }
    Ok(eigenvalues.len())
}

/// Fitted scaler-space PCA truncated at the adaptive component count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionModel {
    pub mean: Vec<f64>,
    /// k × d, rows orthonormal.
    pub components: Vec<Vec<f64>>,
    /// All d eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub k: usize,
    pub variance_threshold: f64,
    pub explained_ratio: f64,
}

impl ReductionModel {
    /// Fits the full decomposition and keeps the smallest component count
    /// reaching `variance_threshold` cumulative explained variance.
    pub fn fit(x: &DMatrix<f64>, variance_threshold: f64) -> Result<Self, ReduceError> {
        let full = fit_pca(x)?;
        let k = select_components(&full.eigenvalues, variance_threshold)?;
        Self::from_full(full, k, variance_threshold)
    }

    pub fn from_full(full: PcaFull, k: usize, variance_threshold: f64) -> Result<Self, ReduceError> {
        let k = k.min(full.components.len());
        if k == 0 {
            return Err(ReduceError::ZeroVariance);
        }
        let total: f64 = full.eigenvalues.iter().sum();
        let explained_ratio = full.eigenvalues.iter().take(k).sum::<f64>() / total;
        Ok(Self {
            mean: full.mean,
            components: full.components.into_iter().take(k).collect(),
            eigenvalues: full.eigenvalues,
            k,
            variance_threshold,
            explained_ratio,
        })
    }

    pub fn d(&self) -> usize {
        self.mean.len()
    }

    /// Projects rows onto the top-k components.
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, ReduceError> {
        check_cols(self.d(), x.ncols())?;
        let (n, d) = (x.nrows(), x.ncols());
        let mut out = DMatrix::zeros(n, self.k);
        for i in 0..n {
            for (c, comp) in self.components.iter().enumerate() {
                let mut dot = 0.0;
                for j in 0..d {
                    dot += (x[(i, j)] - self.mean[j]) * comp[j];
                }
                out[(i, c)] = dot;
            }
        }
        Ok(out)
    }

    /// Maps reduced rows back to the original (scaled) space.
    pub fn inverse_transform(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>, ReduceError> {
        if y.ncols() != self.k {
            return Err(ReduceError::ShapeError { model: self.k, input: y.ncols() });
        }
        let n = y.nrows();
        let d = self.d();
        let mut out = DMatrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                let mut v = self.mean[j];
                for (c, comp) in self.components.iter().enumerate() {
                    v += y[(i, c)] * comp[j];
                }
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

/// Bundled feature scaler + target scaler + PCA: the persisted reduction
/// artifact. JSON round-trips reproduce transforms bit-compatibly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionArtifact {
    pub feature_scaler: ScalerModel,
    pub target_scaler: ScalerModel,
    pub pca: ReductionModel,
    /// Hash of the feature schema this artifact was fitted on.
    pub schema_hash: String,
    pub version: u32,
}

impl ReductionArtifact {
    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string(self).expect("serializable"))
    }

    pub fn load(path: &std::path::Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn vector_norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn zscore_center_scale() {
        let x = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let m = fit_scaler(&x, ScalerKind::Zscore).unwrap();
        assert!((m.center[0] - 2.0).abs() < 1e-12);
        assert!((m.scale[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn robust_center_scale() {
        let x = DMatrix::from_row_slice(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let m = fit_scaler(&x, ScalerKind::Robust).unwrap();
        assert_eq!(m.center[0], 2.0);
        assert_eq!(m.scale[0], 2.0); // p75 − p25 = 3 − 1
    }

    #[test]
    fn constant_column_passthrough() {
        let x = DMatrix::from_row_slice(4, 2, &[5.0, 1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 4.0]);
        let m = fit_scaler(&x, ScalerKind::Zscore).unwrap();
        assert!(m.passthrough[0]);
        assert!(!m.passthrough[1]);
        let scaled = apply_scaler(&x, &m).unwrap();
        assert_eq!(scaled[(0, 0)], 5.0);
    }

    #[test]
    fn scaler_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(40, 6, |_, _| rng.random_range(-10.0..10.0));
        for kind in [ScalerKind::Zscore, ScalerKind::Robust] {
            let m = fit_scaler(&x, kind).unwrap();
            let back = invert_scaler(&apply_scaler(&x, &m).unwrap(), &m).unwrap();
            for (a, b) in x.iter().zip(back.iter()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn single_row_degenerate() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(matches!(fit_scaler(&x, ScalerKind::Zscore), Err(ReduceError::DegenerateFit(1))));
    }

    #[test]
    fn rank_one_line() {
        // Points on y = x: first component ∝ (1,1)/√2 carries all variance.
        let x = DMatrix::from_fn(50, 2, |i, _| i as f64);
        let full = fit_pca(&x).unwrap();
        assert!(full.eigenvalues[0] > 0.0);
        assert!(full.eigenvalues[1].abs() < 1e-9 * full.eigenvalues[0]);
        let c = &full.components[0];
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((c[0] - inv_sqrt2).abs() < 1e-9 && (c[1] - inv_sqrt2).abs() < 1e-9, "{c:?}");
    }

    #[test]
    fn isotropic_gaussian_flat_spectrum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let x = DMatrix::from_fn(100_000, 3, |_, _| normal.sample(&mut rng));
        let full = fit_pca(&x).unwrap();
        let (max, min) = (full.eigenvalues[0], full.eigenvalues[2]);
        assert!((max - min) / min < 0.05, "spectrum spread: {:?}", full.eigenvalues);
    }

    #[test]
    fn orthonormal_components() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let x = DMatrix::from_fn(80, 10, |_, j| rng.random_range(-1.0..1.0) * (j + 1) as f64);
        let full = fit_pca(&x).unwrap();
        for a in 0..full.components.len() {
            assert!((vector_norm(&full.components[a]) - 1.0).abs() < 1e-8);
            for b in (a + 1)..full.components.len() {
                let dot: f64 = full.components[a].iter().zip(&full.components[b]).map(|(x, y)| x * y).sum();
                assert!(dot.abs() < 1e-8, "components {a},{b} dot {dot}");
            }
        }
    }

    #[test]
    fn variance_accounting() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x = DMatrix::from_fn(200, 8, |_, j| rng.random_range(-1.0..1.0) * (j as f64 + 0.5));
        let full = fit_pca(&x).unwrap();
        let mean: Vec<f64> = (0..8).map(|j| x.column(j).sum() / 200.0).collect();
        let total_var: f64 = (0..8)
            .map(|j| x.column(j).iter().map(|v| (v - mean[j]) * (v - mean[j])).sum::<f64>() / 200.0)
            .sum();
        let spectrum_sum: f64 = full.eigenvalues.iter().sum();
        assert!((spectrum_sum - total_var).abs() < 1e-8 * total_var.max(1.0));
    }

    #[test]
    fn select_components_cumulative() {
        assert_eq!(select_components(&[9.0, 1.0], 0.95).unwrap(), 2);
        assert_eq!(select_components(&[0.95, 0.05], 0.95).unwrap(), 1);
        assert!(matches!(select_components(&[0.0, 0.0], 0.95), Err(ReduceError::ZeroVariance)));
    }

    #[test]
    fn threshold_minimality() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let x = DMatrix::from_fn(300, 12, |_, j| rng.random_range(-1.0..1.0) * (1.0 + j as f64));
        let model = ReductionModel::fit(&x, 0.95).unwrap();
        let total: f64 = model.eigenvalues.iter().sum();
        let explained_k: f64 = model.eigenvalues.iter().take(model.k).sum::<f64>() / total;
        assert!(explained_k >= 0.95);
        if model.k > 1 {
            let explained_km1: f64 = model.eigenvalues.iter().take(model.k - 1).sum::<f64>() / total;
            assert!(explained_km1 < 0.95);
        }
        assert!((model.explained_ratio - explained_k).abs() < 1e-12);
    }

    #[test]
    fn full_rank_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let x = DMatrix::from_fn(60, 5, |_, _| rng.random_range(-3.0..3.0));
        let full = fit_pca(&x).unwrap();
        let model = ReductionModel::from_full(full, 5, 1.0).unwrap();
        let back = model.inverse_transform(&model.transform(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn rank_one_exact_with_k1() {
        let x = DMatrix::from_fn(30, 3, |i, j| (i as f64 + 1.0) * (j as f64 + 1.0));
        let model = ReductionModel::fit(&x, 0.95).unwrap();
        assert_eq!(model.k, 1);
        let back = model.inverse_transform(&model.transform(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn reconstruction_error_equals_dropped_eigenvalues() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let n = 400;
        let d = 12;
        let x = DMatrix::from_fn(n, d, |_, j| rng.random_range(-1.0..1.0) * (1.0 + (j % 4) as f64));
        let full = fit_pca(&x).unwrap();
        let k = d / 2;
        let dropped: f64 = full.eigenvalues.iter().skip(k).sum();
        let model = ReductionModel::from_full(full, k, 0.5).unwrap();
        let back = model.inverse_transform(&model.transform(&x).unwrap()).unwrap();
        let err = (0..n)
            .map(|i| (0..d).map(|j| (x[(i, j)] - back[(i, j)]).powi(2)).sum::<f64>())
            .sum::<f64>()
            / n as f64;
        assert!((err - dropped).abs() < 1e-6 * dropped.max(1e-12), "err {err} dropped {dropped}");
    }

    #[test]
    fn svd_path_matches_covariance_path() {
        // d > n forces the SVD path; its spectrum must match the covariance
        // eigendecomposition of the same matrix.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(8, 12, |_, _| rng.random_range(-2.0..2.0));
        let svd_fit = fit_pca(&x).unwrap();
        let cov = covariance_seq(&x, &column_means_of(&x));
        let eig = cov.symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in svd_fit.eigenvalues.iter().zip(vals.iter()) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn covariance_parallel_matches_sequential() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let x = DMatrix::from_fn(3000, 7, |_, _| rng.random_range(-1.0..1.0));
        let mean = column_means(&x);
        let par_cov = covariance(&x, &mean);
        let seq_cov = covariance_seq(&x, &mean);
        for (a, b) in par_cov.iter().zip(seq_cov.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn artifact_json_round_trip_bit_compatible() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let x = DMatrix::from_fn(50, 6, |_, _| rng.random_range(-1.0..1.0));
        let scaler = fit_scaler(&x, ScalerKind::Zscore).unwrap();
        let scaled = apply_scaler(&x, &scaler).unwrap();
        let pca = ReductionModel::fit(&scaled, 0.95).unwrap();
        let y = DMatrix::from_row_slice(2, 1, &[0.1, 0.2]);
        let target_scaler = fit_scaler(&y, ScalerKind::Robust).unwrap();
        let artifact = ReductionArtifact {
            feature_scaler: scaler,
            target_scaler,
            pca,
            schema_hash: "abc".into(),
            version: 1,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reduction.json");
        artifact.save(&path).unwrap();
        let loaded = ReductionArtifact::load(&path).unwrap();
        assert_eq!(artifact, loaded);
        let t1 = artifact.pca.transform(&x).unwrap();
        let t2 = loaded.pca.transform(&x).unwrap();
        for (a, b) in t1.iter().zip(t2.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
