//! Global baseline predictors over the reduced feature space: ridge
//! regression and gradient-boosted trees, the composite
//! accuracy/latency/memory objective, and seeded random hyperparameter
//! search.

mod gbt;

pub use gbt::{fit_gbt, GbtConfig, GbtModel, Tree, TreeNode};

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeError { expected: usize, got: usize },
    #[error("too few rows: {0}")]
    TooFewRows(usize),
    #[error("singular normal-equation system (λ = 0 on rank-deficient data)")]
    SingularSystem,
    #[error("empty search space")]
    EmptySpace,
}

/// Common surface of the fitted predictors.
pub trait Predictor {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64>;
    fn param_count(&self) -> usize;
    fn name(&self) -> &'static str;
}

/// Batch prediction bundled with its measured wall-clock latency.
#[derive(Debug, Clone, Serialize)]
pub struct PredictOutput {
    pub estimates: Vec<f64>,
    pub latency_ms: f64,
    pub rows: usize,
}

pub fn predict_with_latency<P: Predictor + ?Sized>(model: &P, x: &DMatrix<f64>) -> PredictOutput {
    let start = Instant::now();
    let estimates = model.predict(x);
    let latency_ms = start.elapsed().as_secs_f64() * 1e3;
    PredictOutput { rows: estimates.len(), estimates, latency_ms }
}

/// Linear model with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub l2: f64,
}

impl Predictor for RidgeModel {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let mut v = self.intercept;
                for j in 0..x.ncols() {
                    v += x[(i, j)] * self.weights[j];
                }
                v
            })
            .collect()
    }

    fn param_count(&self) -> usize {
        self.weights.len() + 1
    }

    fn name(&self) -> &'static str {
        "ridge"
    }
}

impl Predictor for GbtModel {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        GbtModel::predict(self, x)
    }

    fn param_count(&self) -> usize {
        GbtModel::param_count(self)
    }

    fn name(&self) -> &'static str {
        "gbt"
    }
}

/// Minimizes ‖Xw − y‖² + λ‖w‖² with the intercept left unpenalized, by a
/// Cholesky factorization of the centered normal equations.
pub fn fit_ridge(x: &DMatrix<f64>, y: &[f64], l2: f64) -> Result<RidgeModel, ModelError> {
    let (n, d) = (x.nrows(), x.ncols());
    if n != y.len() {
        return Err(ModelError::ShapeError { expected: n, got: y.len() });
    }
    if n < 2 {
        return Err(ModelError::TooFewRows(n));
    }
    let x_mean: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
    let y_mean: f64 = y.iter().sum::<f64>() / n as f64;
    let mut xc = x.clone();
    for i in 0..n {
        for j in 0..d {
            xc[(i, j)] -= x_mean[j];
        }
    }
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let mut gram = xc.transpose() * &xc;
    for j in 0..d {
        gram[(j, j)] += l2;
    }
    let rhs = xc.transpose() * yc;
    let chol = nalgebra::Cholesky::new(gram).ok_or(ModelError::SingularSystem)?;
    let w = chol.solve(&rhs);
    let intercept = y_mean - x_mean.iter().zip(w.iter()).map(|(m, wi)| m * wi).sum::<f64>();
    Ok(RidgeModel { weights: w.iter().copied().collect(), intercept, l2 })
}

/// Reference scales used to normalize the composite objective's three terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub rmse_ref: f64,
    pub latency_ref: f64,
    pub memory_ref: f64,
}

/// `0.7·(rmse/rmse_ref) + 0.2·(latency/latency_ref) + 0.1·(memory/memory_ref)`;
/// lower is better.
pub fn composite_objective(rmse: f64, latency_ms: f64, memory_mb: f64, norm: &Normalizers) -> f64 {
    0.7 * (rmse / norm.rmse_ref) + 0.2 * (latency_ms / norm.latency_ref) + 0.1 * (memory_mb / norm.memory_ref)
}

/// Search bounds for the boosted-tree configuration. Learning rate and both
/// regularizers sample on a log scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtSearchSpace {
    pub max_depth: (usize, usize),
    pub learning_rate: (f64, f64),
    pub n_estimators: (usize, usize),
    pub subsample: (f64, f64),
    pub colsample_bytree: (f64, f64),
    pub min_child_weight: (f64, f64),
    pub reg_alpha: (f64, f64),
    pub reg_lambda: (f64, f64),
}

impl Default for GbtSearchSpace {
    fn default() -> Self {
        Self {
            max_depth: (3, 10),
            learning_rate: (1e-4, 0.3),
            n_estimators: (50, 500),
            subsample: (0.6, 1.0),
            colsample_bytree: (0.6, 1.0),
            min_child_weight: (1.0, 10.0),
            reg_alpha: (1e-6, 10.0),
            reg_lambda: (1e-6, 10.0),
        }
    }
}

impl GbtSearchSpace {
    fn validate(&self) -> Result<(), ModelError> {
        let ok = self.max_depth.0 <= self.max_depth.1
            && self.learning_rate.0 > 0.0
            && self.learning_rate.0 <= self.learning_rate.1
            && self.n_estimators.0 >= 1
            && self.n_estimators.0 <= self.n_estimators.1
            && self.reg_alpha.0 > 0.0
            && self.reg_lambda.0 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(ModelError::EmptySpace)
        }
    }

    fn sample(&self, rng: &mut impl Rng, seed: u64) -> GbtConfig {
        let log_u = |rng: &mut dyn rand::RngCore, (lo, hi): (f64, f64)| -> f64 {
            if lo == hi {
                return lo;
            }
            (rng.random_range(lo.ln()..=hi.ln())).exp()
        };
        let lin_u = |rng: &mut dyn rand::RngCore, (lo, hi): (f64, f64)| -> f64 {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            }
        };
        let int_u = |rng: &mut dyn rand::RngCore, (lo, hi): (usize, usize)| -> usize {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            }
        };
        GbtConfig {
            max_depth: int_u(rng, self.max_depth),
            n_estimators: int_u(rng, self.n_estimators),
            learning_rate: log_u(rng, self.learning_rate),
            subsample: lin_u(rng, self.subsample),
            colsample_bytree: lin_u(rng, self.colsample_bytree),
            min_child_weight: lin_u(rng, self.min_child_weight),
            reg_alpha: log_u(rng, self.reg_alpha),
            reg_lambda: log_u(rng, self.reg_lambda),
            max_bins: 256,
            early_stopping_rounds: Some(50),
            seed,
        }
    }
}

/// How latency/memory enter the composite objective during search.
/// `Analytic` derives both from the parameter count, keeping trial scores —
/// and therefore the winner — fully deterministic; `Measured` uses wall-clock
/// batch latency. Measured latency is recorded in the trial log either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostMode {
    Analytic,
    Measured,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub config: GbtConfig,
    pub rmse: f64,
    pub latency_ms: f64,
    pub measured_latency_ms: f64,
    pub memory_mb: f64,
    pub composite: f64,
}

/// Seeded uniform random search: each trial trains on the training split and
/// scores the composite objective on the validation split. Normalizers
/// default to the first trial's measurements. Returns the argmin config and
/// the full trial log.
pub fn random_search(
    space: &GbtSearchSpace,
    trials: usize,
    seed: u64,
    cost: CostMode,
    train: (&DMatrix<f64>, &[f64]),
    validation: (&DMatrix<f64>, &[f64]),
) -> Result<(GbtConfig, Vec<TrialRecord>), ModelError> {
    space.validate()?;
    if trials == 0 {
        return Err(ModelError::EmptySpace);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut log: Vec<TrialRecord> = Vec::with_capacity(trials);
    let mut norm: Option<Normalizers> = None;
    let mut best: Option<usize> = None;
    for trial in 0..trials {
        let config = space.sample(&mut rng, seed.wrapping_add(trial as u64));
        let model = fit_gbt(train.0, train.1, &config, Some(validation))?;
        let out = predict_with_latency(&model, validation.0);
        let n = validation.1.len() as f64;
        let rmse = (out
            .estimates
            .iter()
            .zip(validation.1)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n)
            .sqrt();
        let params = model.param_count() as f64;
        let memory_mb = params * 8.0 / 1e6;
        let latency_ms = match cost {
            CostMode::Analytic => params / 1e3,
            CostMode::Measured => out.latency_ms,
        };
        let norm = *norm.get_or_insert_with(|| Normalizers {
            rmse_ref: rmse.max(1e-12),
            latency_ref: latency_ms.max(1e-12),
            memory_ref: memory_mb.max(1e-12),
        });
        let composite = composite_objective(rmse, latency_ms, memory_mb, &norm);
        log.push(TrialRecord {
            trial,
            config,
            rmse,
            latency_ms,
            measured_latency_ms: out.latency_ms,
            memory_mb,
            composite,
        });
        if best.is_none_or(|b| composite < log[b].composite) {
            best = Some(trial);
        }
    }
    let best = best.expect("trials ≥ 1");
    Ok((log[best].config.clone(), log))
}

/// Persisted model artifact: the fitted predictor plus training metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub model: FittedModel,
    pub schema_hash: String,
    pub seed: u64,
    pub trained_rows: usize,
    pub training_wall_s: f64,
    pub param_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedModel {
    Ridge(RidgeModel),
    Gbt(GbtModel),
}

impl FittedModel {
    pub fn as_predictor(&self) -> &dyn Predictor {
        match self {
            FittedModel::Ridge(m) => m,
            FittedModel::Gbt(m) => m,
        }
    }
}

impl ModelArtifact {
    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string(self).expect("serializable"))
    }

    pub fn load(path: &std::path::Path) -> std::io::Result<Self> {
        serde_json::from_str(&std::fs::read_to_string(path)?).map_err(std::io::Error::other)
    }
}

/// Writes one JSON object per line, one line per trial.
pub fn save_trial_log(log: &[TrialRecord], path: &std::path::Path) -> std::io::Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    for t in log {
        writeln!(f, "{}", serde_json::to_string(t).expect("serializable"))?;
    }
    Ok(())
}
