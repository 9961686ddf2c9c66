//! EM-style co-training of the transform with the HAR predictor: each
//! iteration transforms the training panel, refits HAR by OLS and the
//! residual density by moment matching, then takes an Adam ascent step on
//! the transform parameters through the change-of-variable log-likelihood
//! with the predictor and residual variance held fixed. Snapshots are taken
//! on a fixed cadence and the one with the highest validation
//! log-likelihood wins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::har::{self, HarParams, HAR_LAGS};
use crate::market_data::RvPanel;
use crate::optim::{Adam, AdamConfig};
use crate::residual::{ResidualKind, ResidualModel};
use crate::rng::Rng;
use crate::transforms::Transform;

/// Minimum window able to produce one prediction (22 lags + 1 target).
pub const MIN_WINDOW: usize = HAR_LAGS + 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub stocks_per_batch: usize,
    /// None means the full training window per sampled stock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_length: Option<usize>,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig { stocks_per_batch: 16, window_length: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub eval_every: usize,
    pub adam: AdamConfig,
    pub batch: BatchConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 200,
            eval_every: 5,
            adam: AdamConfig::default(),
            batch: BatchConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, train_len: usize) -> Result<()> {
        if self.eval_every == 0 || self.iterations < self.eval_every {
            return Err(Error::Input(format!(
                "need iterations >= eval_every >= 1, got {} and {}",
                self.iterations, self.eval_every
            )));
        }
        if self.batch.stocks_per_batch == 0 {
            return Err(Error::Input("stocks_per_batch must be positive".into()));
        }
        if let Some(w) = self.batch.window_length {
            if w < MIN_WINDOW || w > train_len {
                return Err(Error::Input(format!(
                    "window_length must lie in [{MIN_WINDOW}, {train_len}], got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// One evaluated parameter state during training.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub transform: Transform,
    pub har: HarParams,
    pub residual: ResidualModel,
    pub validation_loglik: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub iteration: usize,
    pub validation_loglik: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub best: Snapshot,
    pub history: Vec<SnapshotMeta>,
    /// Set when training stopped early; the best snapshot so far is kept.
    pub aborted: Option<String>,
}

/// Change-of-variable log-likelihood of one window: for every predictable
/// timestep, the residual log-density of z_{t} − ẑ_{t} plus log f'(x_{t}).
pub fn window_loglik(
    x_window: &[f64],
    transform: &Transform,
    har: &HarParams,
    res: &ResidualModel,
) -> Result<f64> {
    if x_window.len() < MIN_WINDOW {
        return Err(Error::Degenerate(format!(
            "window of {} cannot host a prediction; need at least {MIN_WINDOW}",
            x_window.len()
        )));
    }
    let z = transform.forward_series(x_window)?;
    let mut ll = 0.0;
    for t in HAR_LAGS..x_window.len() {
        let features = har::har_features(&z[..t])?;
        let eps = z[t] - har.predict_features(&features);
        ll += res.logpdf(eps) + transform.log_abs_deriv(x_window[t])?;
    }
    Ok(ll)
}

/// `window_loglik` plus its gradient in the raw transform parameters,
/// with the predictor and residual model frozen.
pub fn window_loglik_grad(
    x_window: &[f64],
    transform: &Transform,
    har: &HarParams,
    res: &ResidualModel,
) -> Result<(f64, Vec<f64>)> {
    let n = x_window.len();
    if n < MIN_WINDOW {
        return Err(Error::Degenerate(format!(
            "window of {n} cannot host a prediction; need at least {MIN_WINDOW}"
        )));
    }
    let n_params = transform.param_count();
    let points: Vec<crate::transforms::PointGrad> = x_window
        .iter()
        .map(|&x| transform.point_grad(x))
        .collect::<Result<Vec<_>>>()?;

    // scalar sensitivities of the window log-likelihood in each z_t
    let mut ll = 0.0;
    let mut dll_dz = vec![0.0f64; n];
    let z: Vec<f64> = points.iter().map(|p| p.z).collect();
    for t in HAR_LAGS..n {
        let features = har::har_features(&z[..t])?;
        let eps = z[t] - har.predict_features(&features);
        ll += res.logpdf(eps) + points[t].log_deriv;
        let dlp = res.dlogpdf_deps(eps);
        dll_dz[t] += dlp;
        for j in t - HAR_LAGS..t {
            let mut w = har.beta_m;
            if j >= t - 5 {
                w += har.beta_w;
            }
            if j == t - 1 {
                w += har.beta_d;
            }
            dll_dz[j] -= dlp * w;
        }
    }

    // chain through the per-point parameter gradients
    let mut grad = vec![0.0f64; n_params];
    for (t, point) in points.iter().enumerate() {
        let c = dll_dz[t];
        if c != 0.0 {
            for (g, d) in grad.iter_mut().zip(&point.d_z) {
                *g += c * d;
            }
        }
        if t >= HAR_LAGS {
            for (g, d) in grad.iter_mut().zip(&point.d_log_deriv) {
                *g += d;
            }
        }
    }
    Ok((ll, grad))
}

/// Refit HAR and the residual density on the pooled transformed training
/// region under the current transform.
pub fn fit_har_residual(
    panel: &RvPanel,
    transform: &Transform,
    kind: ResidualKind,
) -> Result<(HarParams, ResidualModel)> {
    let train = panel.train_range();
    let latents: Vec<Vec<f64>> = panel
        .series
        .par_iter()
        .map(|s| transform.forward_series(&s.values[train.clone()]))
        .collect::<Result<Vec<_>>>()?;
    let dataset = har::build_har_dataset(&latents, HAR_LAGS..train.end)?;
    let fitted = har::ols_fit(&dataset)?;
    let eps = har::residuals(&dataset, &fitted);
    let res = ResidualModel::fit(kind, &eps)?;
    Ok((fitted, res))
}

/// Sum of per-stock validation-window log-likelihoods; each window borrows
/// the last 22 training points for lag history.
pub fn validation_loglik(
    panel: &RvPanel,
    transform: &Transform,
    har: &HarParams,
    res: &ResidualModel,
) -> Result<f64> {
    let valid = panel.valid_range();
    let start = valid.start - HAR_LAGS;
    let parts: Vec<f64> = panel
        .series
        .par_iter()
        .map(|s| window_loglik(&s.values[start..valid.end], transform, har, res))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.iter().sum())
}

/// Fit (β, v) for a fixed transform and score it on validation; the
/// whole training loop for zero-parameter families.
pub fn fit_and_validate(
    panel: &RvPanel,
    transform: &Transform,
    kind: ResidualKind,
    iteration: usize,
) -> Result<Snapshot> {
    let (har_params, res) = fit_har_residual(panel, transform, kind)?;
    let validation = validation_loglik(panel, transform, &har_params, &res)?;
    Ok(Snapshot {
        transform: transform.clone(),
        har: har_params,
        residual: res,
        validation_loglik: validation,
        iteration,
    })
}

/// The co-training loop. Returns the snapshot with the highest validation
/// log-likelihood among those taken every `eval_every` iterations.
pub fn train(
    panel: &RvPanel,
    initial: &Transform,
    cfg: &TrainConfig,
    kind: ResidualKind,
) -> Result<TrainResult> {
    let train_range = panel.train_range();
    cfg.validate(train_range.len())?;

    if initial.param_count() == 0 {
        let snapshot = fit_and_validate(panel, initial, kind, 0)?;
        let meta = SnapshotMeta {
            iteration: 0,
            validation_loglik: snapshot.validation_loglik,
        };
        return Ok(TrainResult { best: snapshot, history: vec![meta], aborted: None });
    }

    let mut rng = Rng::new(cfg.seed);
    let mut transform = initial.clone();
    let mut params = transform.params();
    let mut adam = Adam::new(params.len(), cfg.adam);
    let mut history: Vec<SnapshotMeta> = Vec::new();
    let mut best: Option<Snapshot> = None;
    let n_stocks = panel.series.len();
    let window_len = cfg.batch.window_length.unwrap_or(train_range.len());

    let abort = |best: Option<Snapshot>, history: Vec<SnapshotMeta>, msg: String| {
        match best {
            Some(b) => Ok(TrainResult { best: b, history, aborted: Some(msg) }),
            None => Err(Error::Divergence(format!(
                "training diverged before the first snapshot: {msg}"
            ))),
        }
    };

    for iteration in 1..=cfg.iterations {
        // refit the decoupled estimators on the full training pool
        let (har_params, res) = match fit_har_residual(panel, &transform, kind) {
            Ok(f) => f,
            Err(Error::Divergence(msg)) => return abort(best, history, msg),
            Err(e) => return Err(e),
        };

        // sample the mini-batch of (stock, window) pairs
        let stock_idx = rng.sample_indices(n_stocks, cfg.batch.stocks_per_batch);
        let windows: Vec<&[f64]> = stock_idx
            .iter()
            .map(|&s| {
                let start = if window_len == train_range.len() {
                    0
                } else {
                    rng.index(train_range.len() - window_len + 1)
                };
                &panel.series[s].values[start..start + window_len]
            })
            .collect();

        // mean objective gradient over the batch, deterministic order
        let results: Vec<Result<(f64, Vec<f64>)>> = windows
            .par_iter()
            .map(|w| window_loglik_grad(w, &transform, &har_params, &res))
            .collect();
        let mut grad = vec![0.0f64; params.len()];
        let mut diverged: Option<String> = None;
        for r in results {
            match r {
                Ok((_, g)) => {
                    for (acc, gi) in grad.iter_mut().zip(&g) {
                        *acc += gi;
                    }
                }
                Err(Error::Divergence(msg)) => {
                    diverged = Some(msg);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if let Some(msg) = diverged {
            return abort(best, history, msg);
        }
        let scale = 1.0 / windows.len() as f64;
        for g in grad.iter_mut() {
            *g *= scale;
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return abort(best, history, "non-finite gradient".into());
        }

        adam.ascend(&mut params, &grad);
        transform = transform.with_params(&params);

        if iteration % cfg.eval_every == 0 {
            let snapshot = match fit_and_validate(panel, &transform, kind, iteration) {
                Ok(s) => s,
                Err(Error::Divergence(msg)) => return abort(best, history, msg),
                Err(e) => return Err(e),
            };
            if !snapshot.validation_loglik.is_finite() {
                return abort(
                    best,
                    history,
                    format!("validation log-likelihood not finite at iteration {iteration}"),
                );
            }
            history.push(SnapshotMeta {
                iteration,
                validation_loglik: snapshot.validation_loglik,
            });
            let better = best
                .as_ref()
                .map(|b| snapshot.validation_loglik > b.validation_loglik)
                .unwrap_or(true);
            if better {
                best = Some(snapshot);
            }
        }
    }

    Ok(TrainResult {
        best: best.expect("iterations >= eval_every guarantees a snapshot"),
        history,
        aborted: None,
    })
}

/// Which out-of-sample region to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalRegion {
    Validation,
    Test,
}

#[derive(Debug, Clone)]
pub struct StockPrediction {
    pub symbol: String,
    /// one-step-ahead forecasts on the standardized scale
    pub predicted: Vec<f64>,
    pub actual: Vec<f64>,
    /// timesteps dropped because the latent forecast fell outside the
    /// transform's invertible range
    pub skipped: usize,
}

/// Rolling one-step predictions over a region: transform the true history,
/// forecast the next latent with HAR, invert. Early timesteps reach back
/// into the preceding region for lag history.
pub fn predict_panel(
    panel: &RvPanel,
    snapshot: &Snapshot,
    region: EvalRegion,
) -> Result<Vec<StockPrediction>> {
    let range = match region {
        EvalRegion::Validation => panel.valid_range(),
        EvalRegion::Test => panel.test_range(),
    };
    panel
        .series
        .par_iter()
        .map(|series| {
            let z = snapshot.transform.forward_series(&series.values[..range.end])?;
            let mut predicted = Vec::with_capacity(range.len());
            let mut actual = Vec::with_capacity(range.len());
            let mut skipped = 0usize;
            for t in range.clone() {
                let features = har::har_features(&z[..t])?;
                let zhat = snapshot.har.predict_features(&features);
                match snapshot.transform.inverse(zhat) {
                    Ok(xhat) => {
                        predicted.push(xhat);
                        actual.push(series.values[t]);
                    }
                    Err(Error::Domain(_)) => skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok(StockPrediction {
                symbol: series.symbol.clone(),
                predicted,
                actual,
                skipped,
            })
        })
        .collect()
}

/// Per-stock in-sample residuals (training region) under a fitted
/// snapshot, for the Gaussianity diagnostics.
pub fn insample_residuals(panel: &RvPanel, snapshot: &Snapshot) -> Result<Vec<Vec<f64>>> {
    let train = panel.train_range();
    panel
        .series
        .par_iter()
        .map(|series| {
            let z = snapshot.transform.forward_series(&series.values[train.clone()])?;
            let mut eps = Vec::with_capacity(train.len() - HAR_LAGS);
            for t in HAR_LAGS..train.end {
                let features = har::har_features(&z[..t])?;
                eps.push(z[t] - snapshot.har.predict_features(&features));
            }
            Ok(eps)
        })
        .collect()
}
