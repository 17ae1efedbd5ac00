//! Context-aware Gaussian-process surrogate.
//!
//! Inputs are the encoded configuration concatenated with the min-max
//! normalized context vector; a single Matérn-5/2 kernel with one lengthscale
//! per input dimension (ARD) covers both. Targets are standardized before
//! fitting and predictions are reported in the original objective units.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concordance::{concordant_pairs, pair_count};
use crate::metrics::RuntimeMetrics;
use crate::space::{Configuration, SearchSpace, SpaceError};

/// Added to the Gram diagonal before factorization.
pub const JITTER: f64 = 1e-8;

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("at least {needed} observations required, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("observation {0} has a non-finite objective")]
    NonFiniteObjective(usize),
    #[error("input dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("context vector has length {actual}, expected {expected}")]
    ContextLength { expected: usize, actual: usize },
    #[error("kernel matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid kernel parameters: {0}")]
    InvalidKernel(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Environment descriptors of one execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextVector {
    /// Input data size in GB.
    pub data_size: f64,
    #[serde(default)]
    pub extra: Vec<f64>,
}

impl ContextVector {
    pub fn new(data_size: f64) -> Self {
        ContextVector { data_size, extra: Vec::new() }
    }

    pub fn len(&self) -> usize {
        1 + self.extra.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn components(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.push(self.data_size);
        v.extend_from_slice(&self.extra);
        v
    }
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub config: Configuration,
    pub objective: f64,
    pub context: ContextVector,
    pub metrics: RuntimeMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn isotropic(dim: usize, signal_variance: f64, lengthscale: f64, noise_variance: f64) -> Self {
        KernelParams {
            signal_variance,
            lengthscales: vec![lengthscale; dim],
            noise_variance,
        }
    }

    fn validate(&self) -> Result<(), GpError> {
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(GpError::InvalidKernel("signal variance must be positive".into()));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(GpError::InvalidKernel("noise variance must be non-negative".into()));
        }
        if self.lengthscales.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(GpError::InvalidKernel("lengthscales must be positive".into()));
        }
        Ok(())
    }
}

/// Matérn-5/2 covariance `σ²(1 + √5 r + 5r²/3) exp(-√5 r)` with `r` the
/// lengthscale-scaled Euclidean distance.
pub fn matern52(a: &[f64], b: &[f64], params: &KernelParams) -> Result<f64, GpError> {
    let d = params.lengthscales.len();
    for v in [a, b] {
        if v.len() != d {
            return Err(GpError::DimensionMismatch { expected: d, actual: v.len() });
        }
    }
    Ok(matern52_unchecked(a, b, params))
}

fn matern52_unchecked(a: &[f64], b: &[f64], params: &KernelParams) -> f64 {
    let mut r2 = 0.0;
    for ((x, y), l) in a.iter().zip(b).zip(&params.lengthscales) {
        let t = (x - y) / l;
        r2 += t * t;
    }
    matern52_from_sq(r2, params.signal_variance)
}

#[inline]
fn matern52_from_sq(r2: f64, signal_variance: f64) -> f64 {
    let r = r2.sqrt();
    signal_variance * (1.0 + SQRT5 * r + 5.0 * r2 / 3.0) * (-SQRT5 * r).exp()
}

/// Gram matrix `K(X, X)` without noise or jitter.
pub fn gram_matrix(inputs: &[Vec<f64>], params: &KernelParams) -> DMatrix<f64> {
    let scaled = scale_inputs(inputs, &params.lengthscales);
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = params.signal_variance;
        for j in 0..i {
            let v = matern52_from_sq(sq_dist(&scaled[i], &scaled[j]), params.signal_variance);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn scale_inputs(inputs: &[Vec<f64>], lengthscales: &[f64]) -> Vec<Vec<f64>> {
    inputs
        .iter()
        .map(|x| x.iter().zip(lengthscales).map(|(v, l)| v / l).collect())
        .collect()
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Hyperparameter search settings: multi-start coordinate-wise golden-section
/// ascent of the log marginal likelihood in log-parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    /// Evaluation cap of each one-dimensional golden-section search.
    pub max_line_evals: usize,
    /// Bracket width (in log space) at which a line search stops early.
    pub line_tolerance: f64,
    pub signal_bounds: (f64, f64),
    pub lengthscale_bounds: (f64, f64),
    pub noise_bounds: (f64, f64),
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 5,
            max_line_evals: 50,
            line_tolerance: 1e-2,
            signal_bounds: (1e-2, 1e2),
            lengthscale_bounds: (1e-2, 1e2),
            noise_bounds: (1e-6, 1.0),
            seed: 0x9e37_79b9,
        }
    }
}

/// Serializable description of a fitted surrogate; the factorization is
/// recomputed when it is turned back into a [`GpSurrogate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateDoc {
    pub space: SearchSpace,
    pub kernel: KernelParams,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
    pub context_lower: Vec<f64>,
    pub context_upper: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SurrogateDoc", into = "SurrogateDoc")]
pub struct GpSurrogate {
    space: SearchSpace,
    kernel: KernelParams,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    target_mean: f64,
    target_std: f64,
    context_lower: Vec<f64>,
    context_upper: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl PartialEq for GpSurrogate {
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space
            && self.kernel == other.kernel
            && self.inputs == other.inputs
            && self.targets == other.targets
            && self.target_mean == other.target_mean
            && self.target_std == other.target_std
            && self.context_lower == other.context_lower
            && self.context_upper == other.context_upper
    }
}

impl TryFrom<SurrogateDoc> for GpSurrogate {
    type Error = GpError;

    fn try_from(doc: SurrogateDoc) -> Result<Self, GpError> {
        GpSurrogate::from_doc(doc)
    }
}

impl From<GpSurrogate> for SurrogateDoc {
    fn from(m: GpSurrogate) -> Self {
        m.to_doc()
    }
}

fn standardize(raw: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    let std = if raw.len() < 2 || !(var.sqrt() > 1e-12 * mean.abs().max(1e-300)) {
        1.0
    } else {
        var.sqrt()
    };
    (raw.iter().map(|y| (y - mean) / std).collect(), mean, std)
}

fn factorize(inputs: &[Vec<f64>], targets: &[f64], kernel: &KernelParams) -> Result<(Cholesky<f64, Dyn>, DVector<f64>), GpError> {
    let mut k = gram_matrix(inputs, kernel);
    for i in 0..inputs.len() {
        k[(i, i)] += kernel.noise_variance + JITTER;
    }
    let chol = Cholesky::new(k).ok_or(GpError::NotPositiveDefinite)?;
    let alpha = chol.solve(&DVector::from_column_slice(targets));
    Ok((chol, alpha))
}

/// Log marginal likelihood of standardized targets under the kernel.
pub fn log_marginal_likelihood(inputs: &[Vec<f64>], targets: &[f64], kernel: &KernelParams) -> f64 {
    match factorize(inputs, targets, kernel) {
        Ok((chol, alpha)) => {
            let y = DVector::from_column_slice(targets);
            let fit = -0.5 * y.dot(&alpha);
            let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
            fit - logdet - 0.5 * targets.len() as f64 * (2.0 * std::f64::consts::PI).ln()
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

struct LogBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn theta_to_kernel(theta: &[f64], dim: usize, active: &[usize]) -> KernelParams {
    let mut lengthscales = vec![1.0; dim];
    for (slot, d) in active.iter().enumerate() {
        lengthscales[*d] = theta[2 + slot].exp();
    }
    KernelParams {
        signal_variance: theta[0].exp(),
        lengthscales,
        noise_variance: theta[1].exp(),
    }
}

/// Maximizes the log marginal likelihood over `(σ², τ², ℓ_d)`. Lengthscales of
/// input dimensions that are constant across the training set do not affect
/// the likelihood and stay at 1.
pub fn optimize_kernel(inputs: &[Vec<f64>], targets: &[f64], opts: &FitOptions) -> KernelParams {
    let dim = inputs.first().map_or(0, Vec::len);
    let active: Vec<usize> = (0..dim)
        .filter(|&d| inputs.iter().any(|x| x[d] != inputs[0][d]))
        .collect();
    let mut bounds = LogBox {
        lo: vec![opts.signal_bounds.0.ln(), opts.noise_bounds.0.ln()],
        hi: vec![opts.signal_bounds.1.ln(), opts.noise_bounds.1.ln()],
    };
    for _ in &active {
        bounds.lo.push(opts.lengthscale_bounds.0.ln());
        bounds.hi.push(opts.lengthscale_bounds.1.ln());
    }
    let objective = |theta: &[f64]| log_marginal_likelihood(inputs, targets, &theta_to_kernel(theta, dim, &active));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best_theta = Vec::new();
    let mut best_value = f64::NEG_INFINITY;
    for restart in 0..opts.restarts.max(1) {
        let mut theta: Vec<f64> = if restart == 0 {
            let mut t = vec![0.0f64, 1e-2f64.ln()];
            t.extend(active.iter().map(|_| 0.0));
            t.iter()
                .zip(bounds.lo.iter().zip(&bounds.hi))
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                .collect()
        } else {
            bounds.lo.iter().zip(&bounds.hi).map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect()
        };
        let mut value = objective(&theta);
        for c in 0..theta.len() {
            let (v, x) = golden_section(|x| {
                let mut t = theta.clone();
                t[c] = x;
                objective(&t)
            }, bounds.lo[c], bounds.hi[c], opts.max_line_evals, opts.line_tolerance);
            if v > value {
                value = v;
                theta[c] = x;
            }
        }
        if value > best_value {
            best_value = value;
            best_theta = theta;
        }
    }
    if best_theta.is_empty() {
        // Every candidate failed to factorize; fall back to a heavily
        // regularized kernel.
        let mut t = vec![0.0, 0.0];
        t.extend(active.iter().map(|_| 0.0));
        best_theta = t;
    }
    theta_to_kernel(&best_theta, dim, &active)
}

/// Golden-section maximization on `[lo, hi]`; returns `(value, argmax)` of the
/// best point evaluated.
fn golden_section(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, max_evals: usize, tol: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fc >= fd { (fc, c) } else { (fd, d) };
    let mut evals = 2;
    while evals < max_evals && (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
            if fc > best.0 {
                best = (fc, c);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
            if fd > best.0 {
                best = (fd, d);
            }
        }
        evals += 1;
    }
    best
}

/// Fold index per observation: leave-one-out up to 10 observations, otherwise
/// 5 folds assigned round-robin in observation order.
pub fn fold_assignment(n: usize) -> Vec<usize> {
    if n <= 10 {
        (0..n).collect()
    } else {
        (0..n).map(|i| i % 5).collect()
    }
}

/// Cross-validated concordance of a surrogate with its own targets.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizationScore {
    /// Held-out predictive means, in objective units, in observation order.
    pub held_out: Vec<f64>,
    /// Concordant pair count `n_s` (ties count one half).
    pub concordant: f64,
    /// `2 n_s / (|D| (|D| - 1))`.
    pub weight: f64,
}

impl GpSurrogate {
    /// Fits targets and kernel hyperparameters to the observations.
    pub fn fit(observations: &[Observation], space: &SearchSpace) -> Result<Self, GpError> {
        Self::fit_with(observations, space, &FitOptions::default())
    }

    pub fn fit_with(observations: &[Observation], space: &SearchSpace, opts: &FitOptions) -> Result<Self, GpError> {
        let (inputs, raw, lower, upper) = Self::training_data(observations, space)?;
        let (targets, mean, std) = standardize(&raw);
        let kernel = optimize_kernel(&inputs, &targets, opts);
        Self::assemble(space.clone(), kernel, inputs, targets, mean, std, lower, upper)
    }

    /// Fits the posterior with fixed kernel hyperparameters.
    pub fn with_kernel(observations: &[Observation], space: &SearchSpace, kernel: KernelParams) -> Result<Self, GpError> {
        let (inputs, raw, lower, upper) = Self::training_data(observations, space)?;
        let (targets, mean, std) = standardize(&raw);
        Self::assemble(space.clone(), kernel, inputs, targets, mean, std, lower, upper)
    }

    #[allow(clippy::type_complexity)]
    fn training_data(
        observations: &[Observation],
        space: &SearchSpace,
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>, Vec<f64>), GpError> {
        if observations.is_empty() {
            return Err(GpError::TooFewObservations { needed: 1, got: 0 });
        }
        let ctx_len = observations[0].context.len();
        let mut lower = vec![f64::INFINITY; ctx_len];
        let mut upper = vec![f64::NEG_INFINITY; ctx_len];
        for (i, o) in observations.iter().enumerate() {
            if !o.objective.is_finite() {
                return Err(GpError::NonFiniteObjective(i));
            }
            if o.context.len() != ctx_len {
                return Err(GpError::ContextLength { expected: ctx_len, actual: o.context.len() });
            }
            for (d, v) in o.context.components().into_iter().enumerate() {
                lower[d] = lower[d].min(v);
                upper[d] = upper[d].max(v);
            }
        }
        let mut inputs = Vec::with_capacity(observations.len());
        for o in observations {
            let mut x = space.encode(&o.config)?.0;
            x.extend(normalize_context(&o.context.components(), &lower, &upper));
            inputs.push(x);
        }
        let raw = observations.iter().map(|o| o.objective).collect();
        Ok((inputs, raw, lower, upper))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        space: SearchSpace,
        kernel: KernelParams,
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
        target_mean: f64,
        target_std: f64,
        context_lower: Vec<f64>,
        context_upper: Vec<f64>,
    ) -> Result<Self, GpError> {
        kernel.validate()?;
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(GpError::TooFewObservations { needed: 1, got: inputs.len().min(targets.len()) });
        }
        let dim = space.feature_len() + context_lower.len();
        if kernel.lengthscales.len() != dim {
            return Err(GpError::DimensionMismatch { expected: dim, actual: kernel.lengthscales.len() });
        }
        if let Some(x) = inputs.iter().find(|x| x.len() != dim) {
            return Err(GpError::DimensionMismatch { expected: dim, actual: x.len() });
        }
        let (chol, alpha) = factorize(&inputs, &targets, &kernel)?;
        Ok(GpSurrogate {
            space,
            kernel,
            inputs,
            targets,
            target_mean,
            target_std,
            context_lower,
            context_upper,
            chol,
            alpha,
        })
    }

    pub fn from_doc(doc: SurrogateDoc) -> Result<Self, GpError> {
        if doc.context_lower.len() != doc.context_upper.len() {
            return Err(GpError::ContextLength { expected: doc.context_lower.len(), actual: doc.context_upper.len() });
        }
        if !(doc.target_std > 0.0) {
            return Err(GpError::InvalidKernel("target std must be positive".into()));
        }
        Self::assemble(
            doc.space,
            doc.kernel,
            doc.inputs,
            doc.targets,
            doc.target_mean,
            doc.target_std,
            doc.context_lower,
            doc.context_upper,
        )
    }

    pub fn to_doc(&self) -> SurrogateDoc {
        SurrogateDoc {
            space: self.space.clone(),
            kernel: self.kernel.clone(),
            inputs: self.inputs.clone(),
            targets: self.targets.clone(),
            target_mean: self.target_mean,
            target_std: self.target_std,
            context_lower: self.context_lower.clone(),
            context_upper: self.context_upper.clone(),
        }
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn train_size(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    /// Standardized training targets.
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    pub fn target_std(&self) -> f64 {
        self.target_std
    }

    pub fn context_len(&self) -> usize {
        self.context_lower.len()
    }

    /// Kernel input for a configuration under a context.
    pub fn features(&self, config: &Configuration, context: &ContextVector) -> Result<Vec<f64>, GpError> {
        let ctx = context.components();
        if ctx.len() != self.context_lower.len() {
            return Err(GpError::ContextLength { expected: self.context_lower.len(), actual: ctx.len() });
        }
        let mut x = self.space.encode(config)?.0;
        x.extend(normalize_context(&ctx, &self.context_lower, &self.context_upper));
        Ok(x)
    }

    /// Posterior mean and variance in standardized units.
    pub fn predict_standardized(&self, x: &[f64]) -> Result<(f64, f64), GpError> {
        let d = self.kernel.lengthscales.len();
        if x.len() != d {
            return Err(GpError::DimensionMismatch { expected: d, actual: x.len() });
        }
        let kstar = DVector::from_iterator(
            self.inputs.len(),
            self.inputs.iter().map(|xi| matern52_unchecked(xi, x, &self.kernel)),
        );
        let mean = kstar.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kstar)
            .expect("cholesky factor has a positive diagonal");
        let var = self.kernel.signal_variance + self.kernel.noise_variance - v.dot(&v);
        Ok((mean, var.max(0.0)))
    }

    pub fn predict_features(&self, x: &[f64]) -> Result<(f64, f64), GpError> {
        let (m, v) = self.predict_standardized(x)?;
        Ok((m * self.target_std + self.target_mean, v * self.target_std * self.target_std))
    }

    /// Posterior `(mean, variance)` in objective units.
    pub fn predict(&self, config: &Configuration, context: &ContextVector) -> Result<(f64, f64), GpError> {
        let x = self.features(config, context)?;
        self.predict_features(&x)
    }

    pub fn predict_mean(&self, config: &Configuration, context: &ContextVector) -> Result<f64, GpError> {
        Ok(self.predict(config, context)?.0)
    }

    /// Held-out predictive means under the given fold map, with this model's
    /// kernel hyperparameters held fixed.
    pub fn cross_validated_means(&self, folds: &[usize]) -> Result<Vec<f64>, GpError> {
        let n = self.inputs.len();
        if folds.len() != n {
            return Err(GpError::DimensionMismatch { expected: n, actual: folds.len() });
        }
        if n < 2 {
            return Err(GpError::TooFewObservations { needed: 2, got: n });
        }
        let raw: Vec<f64> = self.targets.iter().map(|t| t * self.target_std + self.target_mean).collect();
        let mut out = vec![0.0; n];
        let mut fold_ids: Vec<usize> = folds.to_vec();
        fold_ids.sort_unstable();
        fold_ids.dedup();
        for f in fold_ids {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            if train.is_empty() {
                return Err(GpError::TooFewObservations { needed: 2, got: 1 });
            }
            let inputs: Vec<Vec<f64>> = train.iter().map(|&i| self.inputs[i].clone()).collect();
            let (targets, mean, std) = standardize(&train.iter().map(|&i| raw[i]).collect::<Vec<_>>());
            let sub = Self::assemble(
                self.space.clone(),
                self.kernel.clone(),
                inputs,
                targets,
                mean,
                std,
                self.context_lower.clone(),
                self.context_upper.clone(),
            )?;
            for i in (0..n).filter(|&i| folds[i] == f) {
                out[i] = sub.predict_features(&self.inputs[i])?.0;
            }
        }
        Ok(out)
    }

    /// Cross-validated ratio of concordant (prediction, target) pairs.
    pub fn generalization(&self) -> Result<GeneralizationScore, GpError> {
        let folds = fold_assignment(self.inputs.len());
        let held_out = self.cross_validated_means(&folds)?;
        let raw: Vec<f64> = self.targets.iter().map(|t| t * self.target_std + self.target_mean).collect();
        let concordant = concordant_pairs(&held_out, &raw);
        let weight = concordant / pair_count(raw.len());
        Ok(GeneralizationScore { held_out, concordant, weight })
    }
}

/// Min-max normalization against training bounds; a dimension with no spread
/// maps to zero.
pub fn normalize_context(ctx: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    ctx.iter()
        .zip(lower.iter().zip(upper))
        .map(|(v, (lo, hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect()
}

/// Generalization weight of a surrogate fitted to `observations`.
pub fn generalization_weight(observations: &[Observation], space: &SearchSpace) -> Result<f64, GpError> {
    if observations.len() < 2 {
        return Err(GpError::TooFewObservations { needed: 2, got: observations.len() });
    }
    Ok(GpSurrogate::fit(observations, space)?.generalization()?.weight)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::space::{ParameterDef, Scale};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    pub(crate) fn unit_space(d: usize) -> SearchSpace {
        SearchSpace::new(
            (0..d)
                .map(|i| ParameterDef::numerical(&format!("x{i}"), 0.0, 1.0, Scale::Linear).unwrap())
                .collect(),
        )
        .unwrap()
    }

    pub(crate) fn obs(space: &SearchSpace, x: &[f64], y: f64) -> Observation {
        let mut config = Configuration::new();
        for (p, v) in space.params().iter().zip(x) {
            config.set(&p.name, *v);
        }
        Observation {
            config,
            objective: y,
            context: ContextVector::new(1.0),
            metrics: RuntimeMetrics::default(),
        }
    }

    /// Dense Gaussian elimination with partial pivoting; independent of the
    /// Cholesky path used by the surrogate.
    pub(crate) fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }

    fn closed_form(r: f64, s2: f64) -> f64 {
        s2 * (1.0 + 5f64.sqrt() * r + 5.0 * r * r / 3.0) * (-(5f64.sqrt()) * r).exp()
    }

    pub(crate) fn oracle_predict(inputs: &[Vec<f64>], targets: &[f64], k: &KernelParams, x: &[f64]) -> (f64, f64) {
        let n = inputs.len();
        let kern = |a: &[f64], b: &[f64]| {
            let r = a
                .iter()
                .zip(b)
                .zip(&k.lengthscales)
                .map(|((p, q), l)| ((p - q) / l).powi(2))
                .sum::<f64>()
                .sqrt();
            closed_form(r, k.signal_variance)
        };
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = kern(&inputs[i], &inputs[j]);
            }
            a[i][i] += k.noise_variance + JITTER;
        }
        let kx: Vec<f64> = inputs.iter().map(|xi| kern(xi, x)).collect();
        let w = dense_solve(a.clone(), targets.to_vec());
        let mean = kx.iter().zip(&w).map(|(p, q)| p * q).sum();
        let v = dense_solve(a, kx.clone());
        let var = k.signal_variance + k.noise_variance - kx.iter().zip(&v).map(|(p, q)| p * q).sum::<f64>();
        (mean, var.max(0.0))
    }

    #[test]
    fn matern_values() {
        let k = KernelParams::isotropic(1, 1.0, 1.0, 0.0);
        assert_eq!(matern52(&[0.3], &[0.3], &k).unwrap(), 1.0);
        let v = matern52(&[0.0], &[1.0], &k).unwrap();
        let expected = (1.0 + 5f64.sqrt() + 5.0 / 3.0) * (-(5f64.sqrt())).exp();
        assert_relative_eq!(v, expected, epsilon = 1e-15);
        assert!((v - 0.5240).abs() < 5e-5);
        let mut prev = 1.0;
        for i in 1..50 {
            let v = matern52(&[0.0], &[i as f64 * 0.25], &k).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-5);
        assert!(matches!(
            matern52(&[0.0, 1.0], &[0.0], &k),
            Err(GpError::DimensionMismatch { .. })
        ));
        let k2 = KernelParams::isotropic(2, 2.5, 0.7, 0.0);
        assert_eq!(matern52(&[0.1, 0.9], &[0.4, 0.2], &k2).unwrap(), matern52(&[0.4, 0.2], &[0.1, 0.9], &k2).unwrap());
    }

    #[test]
    fn single_observation() {
        let space = unit_space(2);
        let m = GpSurrogate::fit(&[obs(&space, &[0.2, 0.3], 5.0)], &space).unwrap();
        assert_eq!(m.train_size(), 1);
        assert_eq!(m.targets(), &[0.0]);
        assert!(GpSurrogate::fit(&[], &space).is_err());
        assert!(matches!(
            GpSurrogate::fit(&[obs(&space, &[0.2, 0.3], f64::NAN)], &space),
            Err(GpError::NonFiniteObjective(0))
        ));
    }

    #[test]
    fn constant_targets_give_constant_mean() {
        let space = unit_space(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<Observation> = (0..8)
            .map(|_| obs(&space, &[rng.gen(), rng.gen(), rng.gen()], 7.25))
            .collect();
        let m = GpSurrogate::fit(&data, &space).unwrap();
        for _ in 0..20 {
            let q = obs(&space, &[rng.gen(), rng.gen(), rng.gen()], 0.0);
            let (mu, _) = m.predict(&q.config, &q.context).unwrap();
            assert_relative_eq!(mu, 7.25, epsilon = 1e-9);
        }
    }

    #[test]
    fn fitted_posterior_reproduces_training_targets() {
        let space = unit_space(4);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let data: Vec<Observation> = (0..20)
            .map(|_| {
                let x: Vec<f64> = (0..4).map(|_| rng.gen()).collect();
                let y = (3.0 * x[0]).sin() + x[1] * x[1] - 0.5 * x[2];
                obs(&space, &x, y)
            })
            .collect();
        let m = GpSurrogate::fit(&data, &space).unwrap();
        let band = 2.0 * m.kernel().noise_variance.sqrt();
        let inside = data
            .iter()
            .enumerate()
            .filter(|(i, o)| {
                let x = m.features(&o.config, &o.context).unwrap();
                let (mu, _) = m.predict_standardized(&x).unwrap();
                (mu - m.targets()[*i]).abs() <= band
            })
            .count();
        assert!(inside as f64 >= 0.95 * data.len() as f64, "{inside} of 20 within band");
    }

    #[test]
    fn interpolation_and_prior_reversion() {
        let space = unit_space(2);
        let kernel = KernelParams::isotropic(3, 1.3, 0.2, 1e-12);
        let data = [obs(&space, &[0.5, 0.5], 4.0)];
        let m = GpSurrogate::with_kernel(&data, &space, kernel.clone()).unwrap();
        let (mu, var) = m.predict(&data[0].config, &data[0].context).unwrap();
        assert_relative_eq!(mu, 4.0, epsilon = 1e-6);
        assert!(var < 1e-6);

        let two = [obs(&space, &[0.0, 0.0], 1.0), obs(&space, &[0.05, 0.0], 3.0)];
        let m = GpSurrogate::with_kernel(&two, &space, KernelParams::isotropic(3, 1.3, 0.01, 0.01)).unwrap();
        let far = obs(&space, &[1.0, 1.0], 0.0);
        let (mu, var) = m.predict(&far.config, &far.context).unwrap();
        assert_relative_eq!(mu, m.target_mean(), epsilon = 1e-9);
        let std2 = m.target_std() * m.target_std();
        assert_relative_eq!(var, (1.3 + 0.01) * std2, epsilon = 1e-9);
    }

    #[test]
    fn matches_dense_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let space = unit_space(5);
        for _ in 0..20 {
            let data: Vec<Observation> = (0..15)
                .map(|_| {
                    let x: Vec<f64> = (0..5).map(|_| rng.gen()).collect();
                    obs(&space, &x, rng.gen_range(-3.0..3.0))
                })
                .collect();
            let m = GpSurrogate::fit(&data, &space).unwrap();
            for _ in 0..50 {
                let x: Vec<f64> = (0..5).map(|_| rng.gen()).collect();
                let q = obs(&space, &x, 0.0);
                let f = m.features(&q.config, &q.context).unwrap();
                let (mu, var) = m.predict_standardized(&f).unwrap();
                let (omu, ovar) = oracle_predict(m.inputs(), m.targets(), m.kernel(), &f);
                assert!((mu - omu).abs() < 1e-8, "{mu} vs {omu}");
                assert!((var - ovar).abs() < 1e-8, "{var} vs {ovar}");
            }
        }
    }

    #[test]
    fn gram_is_positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let d = rng.gen_range(1..8);
            let inputs: Vec<Vec<f64>> = (0..20).map(|_| (0..d).map(|_| rng.gen()).collect()).collect();
            let k = KernelParams {
                signal_variance: rng.gen_range(0.1..5.0),
                lengthscales: (0..d).map(|_| rng.gen_range(0.05..3.0)).collect(),
                noise_variance: 0.0,
            };
            let g = gram_matrix(&inputs, &k);
            assert_eq!(g.clone(), g.transpose());
            let eig = g.symmetric_eigenvalues();
            assert!(eig.iter().all(|e| *e >= -1e-8), "{eig}");
        }
    }

    #[test]
    fn surrogate_document_round_trip() {
        let space = unit_space(2);
        let data = [obs(&space, &[0.1, 0.2], 1.0), obs(&space, &[0.7, 0.4], 2.0), obs(&space, &[0.3, 0.9], 0.5)];
        let m = GpSurrogate::fit(&data, &space).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: GpSurrogate = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        let q = &data[1];
        assert_eq!(m.predict(&q.config, &q.context).unwrap(), back.predict(&q.config, &q.context).unwrap());
    }

    #[test]
    fn fold_maps() {
        assert_eq!(fold_assignment(4), vec![0, 1, 2, 3]);
        assert_eq!(fold_assignment(12), vec![0, 1, 2, 3, 4, 0, 1, 2, 3, 4, 0, 1]);
    }

    fn brute_concordant(pred: &[f64], y: &[f64]) -> f64 {
        // ordered-pair enumeration, halved
        let mut total = 0.0;
        for j in 0..pred.len() {
            for k in 0..pred.len() {
                if j == k {
                    continue;
                }
                let s = (pred[j] - pred[k]).signum() * (y[j] - y[k]).signum();
                total += if pred[j] == pred[k] || y[j] == y[k] { 0.5 } else if s > 0.0 { 1.0 } else { 0.0 };
            }
        }
        total / 2.0
    }

    #[test]
    fn generalization_weight_counts_held_out_pairs() {
        let space = unit_space(3);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [6usize, 14] {
            let data: Vec<Observation> = (0..n)
                .map(|_| {
                    let x: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
                    let y = x[0] * 2.0 - x[1] + rng.gen_range(-0.1..0.1);
                    obs(&space, &x, y)
                })
                .collect();
            let m = GpSurrogate::fit(&data, &space).unwrap();
            let score = m.generalization().unwrap();
            // independent held-out predictions: dense solve per fold
            let folds = fold_assignment(n);
            let raw: Vec<f64> = data.iter().map(|o| o.objective).collect();
            let mut held = vec![0.0; n];
            for i in 0..n {
                let train: Vec<usize> = (0..n).filter(|&j| folds[j] != folds[i]).collect();
                let ys: Vec<f64> = train.iter().map(|&j| raw[j]).collect();
                let (st, mean, std) = standardize(&ys);
                let xs: Vec<Vec<f64>> = train.iter().map(|&j| m.inputs()[j].clone()).collect();
                held[i] = oracle_predict(&xs, &st, m.kernel(), &m.inputs()[i]).0 * std + mean;
            }
            for (a, b) in held.iter().zip(&score.held_out) {
                assert!((a - b).abs() < 1e-7);
            }
            assert_eq!(score.concordant, brute_concordant(&score.held_out, &raw));
            assert_relative_eq!(score.weight, 2.0 * score.concordant / (n * (n - 1)) as f64);
        }
    }

    #[test]
    fn generalization_extremes_and_errors() {
        let pred = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [10.0, 11.0, 15.0, 16.0, 30.0];
        assert_eq!(crate::concordance::concordance_ratio(&pred, &y), 1.0);
        let rev: Vec<f64> = y.iter().rev().copied().collect();
        assert_eq!(crate::concordance::concordance_ratio(&pred, &rev), 0.0);
        let space = unit_space(1);
        assert!(generalization_weight(&[obs(&space, &[0.5], 1.0)], &space).is_err());
        let w = generalization_weight(&[obs(&space, &[0.1], 1.0), obs(&space, &[0.9], 2.0)], &space).unwrap();
        assert!((0.0..=1.0).contains(&w));
    }

    proptest! {
        #[test]
        fn concordance_depends_only_on_order(
            pred in proptest::collection::vec(-5.0f64..5.0, 6),
            y in proptest::collection::vec(-5.0f64..5.0, 6),
        ) {
            let base = concordant_pairs(&pred, &y);
            let transformed: Vec<f64> = y.iter().map(|v| (v * 0.7).exp() + 3.0).collect();
            prop_assert_eq!(base, concordant_pairs(&pred, &transformed));
            prop_assert_eq!(base, brute_concordant(&pred, &y));
        }

        #[test]
        fn adding_query_point_never_raises_variance(seed in any::<u64>()) {
            let space = unit_space(3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kernel = KernelParams::isotropic(4, 1.0, 0.4, 1e-3);
            let mut data: Vec<Observation> = (0..6)
                .map(|_| obs(&space, &[rng.gen(), rng.gen(), rng.gen()], rng.gen()))
                .collect();
            let q = obs(&space, &[rng.gen(), rng.gen(), rng.gen()], rng.gen());
            let before = GpSurrogate::with_kernel(&data, &space, kernel.clone()).unwrap();
            let vb = before.predict_standardized(&before.features(&q.config, &q.context).unwrap()).unwrap().1;
            data.push(q.clone());
            let after = GpSurrogate::with_kernel(&data, &space, kernel).unwrap();
            let va = after.predict_standardized(&after.features(&q.config, &q.context).unwrap()).unwrap().1;
            prop_assert!(va <= vb + 1e-12);
        }
    }
}
