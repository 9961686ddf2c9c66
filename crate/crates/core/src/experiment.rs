//! End-to-end experiment orchestration: train a set of methods on one RV
//! panel, score them all on the test region, and write the report
//! artifacts. Every output is byte-deterministic for a fixed config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cotrain::{self, EvalRegion, Snapshot, SnapshotMeta, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{self, ReportRow};
use crate::market_data::{self, RvPanel, SplitSpec};
use crate::residual::ResidualKind;
use crate::rng::Rng;
use crate::transforms::{NodeConfig, NodeTransform, TanhMixParams, Transform};

/// Which transform family to train, with its structural hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    Identity,
    Wallace,
    YeoJohnson,
    #[serde(rename = "tanh")]
    Tanh { k: usize },
    Node {
        tau: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        steps: Option<usize>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        time_conditioning: bool,
    },
}

impl FamilySpec {
    pub fn default_label(&self) -> String {
        match self {
            FamilySpec::Identity => "identity".into(),
            FamilySpec::Wallace => "wallace".into(),
            FamilySpec::YeoJohnson => "yeo_johnson".into(),
            FamilySpec::Tanh { k } => format!("tanh_{k}"),
            FamilySpec::Node { tau, .. } => format!("node_tau{tau}"),
        }
    }

    /// Starting transform for co-training; near the identity map in every
    /// family so the loop starts from the no-transform baseline.
    pub fn initial_transform(&self, rng: &mut Rng) -> Result<Transform> {
        Ok(match self {
            FamilySpec::Identity => Transform::identity(),
            // d = 1 starts well inside the family; large d is the identity end
            FamilySpec::Wallace => {
                Transform::Wallace { params: crate::transforms::WallaceParams::from_d(1.0) }
            }
            FamilySpec::YeoJohnson => Transform::yeo_johnson(1.0),
            FamilySpec::Tanh { k } => {
                if *k == 0 {
                    return Err(Error::Input("tanh family needs k >= 1".into()));
                }
                Transform::tanh_mix(TanhMixParams::near_linear_init(*k))
            }
            FamilySpec::Node { tau, steps, time_conditioning } => {
                let mut cfg = NodeConfig::new(*tau, steps.unwrap_or(NodeConfig::default_steps(*tau)));
                cfg.time_conditioning = *time_conditioning;
                Transform::node(NodeTransform::near_identity_init(cfg, rng))
            }
        })
    }
}

/// One trainable method within an experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSpec {
    #[serde(flatten)]
    pub family: FamilySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<ResidualKind>,
}

impl MethodSpec {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.family.default_label())
    }

    pub fn residual(&self) -> ResidualKind {
        self.residual.unwrap_or(ResidualKind::Gaussian)
    }
}

/// Full experiment description, read from a single JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub rv_input: PathBuf,
    #[serde(default)]
    pub split: SplitSpec,
    pub methods: Vec<MethodSpec>,
    /// Label of the method the t-tests compare against; defaults to the
    /// first method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default)]
    pub train: TrainConfig,
}

/// Everything needed to reproduce and reuse one trained method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunBundle {
    pub label: String,
    pub family: FamilySpec,
    pub residual_kind: ResidualKind,
    pub train: TrainConfig,
    pub split: SplitSpec,
    pub best: Snapshot,
    pub history: Vec<SnapshotMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    /// FNV-1a 64 digest of the input RV file, hex encoded.
    pub input_digest: String,
    pub seed: u64,
    pub artifact_version: String,
}

pub fn fnv1a64(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

pub fn save_run_bundle(path: &Path, bundle: &RunBundle) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(bundle)? + "\n")?;
    Ok(())
}

pub fn load_run_bundle(path: &Path) -> Result<RunBundle> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let bundle: RunBundle = serde_json::from_str(&text)?;
    bundle.best.transform.validate()?;
    Ok(bundle)
}

/// Train one method on a panel; the seed in `train` is used as-is.
pub fn train_method(
    panel: &RvPanel,
    method: &MethodSpec,
    train: &TrainConfig,
    split: SplitSpec,
    input_digest: &str,
) -> Result<RunBundle> {
    let mut rng = Rng::new(train.seed);
    let initial = method.family.initial_transform(&mut rng)?;
    let outcome = cotrain::train(panel, &initial, train, method.residual())?;
    Ok(RunBundle {
        label: method.label(),
        family: method.family,
        residual_kind: method.residual(),
        train: *train,
        split,
        best: outcome.best,
        history: outcome.history,
        aborted: outcome.aborted,
        provenance: Provenance {
            input_digest: input_digest.to_string(),
            seed: train.seed,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

/// Per-method evaluation results plus the assembled report table.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub labels: Vec<String>,
    pub symbols: Vec<String>,
    pub per_stock_rmse: Vec<Vec<f64>>,
    pub rows: Vec<ReportRow>,
    pub skipped_predictions: Vec<usize>,
    /// Pearson matrix of improvements over the identity-family method,
    /// when one is present.
    pub correlation: Option<Vec<Vec<Option<f64>>>>,
}

/// Score trained methods on the test region of a panel.
pub fn evaluate_runs(
    panel: &RvPanel,
    bundles: &[RunBundle],
    reference: Option<&str>,
) -> Result<Evaluation> {
    if bundles.is_empty() {
        return Err(Error::Input("no runs to evaluate".into()));
    }
    let labels: Vec<String> = bundles.iter().map(|b| b.label.clone()).collect();
    {
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return Err(Error::Input(format!("duplicate run label {l:?}")));
            }
        }
    }
    let reference = match reference {
        Some(r) => {
            if !labels.iter().any(|l| l == r) {
                return Err(Error::Input(format!(
                    "reference method {r:?} is not among the runs"
                )));
            }
            r.to_string()
        }
        None => labels[0].clone(),
    };

    let symbols: Vec<String> = panel.series.iter().map(|s| s.symbol.clone()).collect();
    let mut per_stock_rmse = Vec::with_capacity(bundles.len());
    let mut skipped_predictions = Vec::with_capacity(bundles.len());
    let mut gaussianity = Vec::with_capacity(bundles.len());
    for bundle in bundles {
        let preds = cotrain::predict_panel(panel, &bundle.best, EvalRegion::Test)?;
        let rmse: Vec<f64> = preds
            .iter()
            .map(|p| eval::rmse(&p.predicted, &p.actual))
            .collect::<Result<_>>()?;
        skipped_predictions.push(preds.iter().map(|p| p.skipped).sum());
        per_stock_rmse.push(rmse);

        let residuals = cotrain::insample_residuals(panel, &bundle.best)?;
        let qq: Vec<f64> = residuals
            .iter()
            .map(|e| eval::qq_r2(e))
            .collect::<Result<_>>()?;
        let sk: Vec<f64> = residuals
            .iter()
            .map(|e| eval::skewness(e))
            .collect::<Result<_>>()?;
        gaussianity.push((mean(&qq), mean(&sk)));
    }

    let pct = eval::percent_best(&per_stock_rmse)?;
    let ref_idx = labels.iter().position(|l| *l == reference).unwrap();
    let mut rows = Vec::with_capacity(bundles.len());
    for (i, label) in labels.iter().enumerate() {
        let p_value = if i == ref_idx {
            None
        } else {
            let diffs: Vec<f64> = per_stock_rmse[i]
                .iter()
                .zip(&per_stock_rmse[ref_idx])
                .map(|(m, r)| m - r)
                .collect();
            // zero-variance differences (e.g. identical runs) stay blank
            eval::paired_t_test_one_tailed(&diffs).ok()
        };
        rows.push(ReportRow {
            label: label.clone(),
            mean_rmse: mean(&per_stock_rmse[i]),
            pct_best: pct[i],
            mean_qq_r2: gaussianity[i].0,
            mean_skewness: gaussianity[i].1,
            p_value_vs_reference: p_value,
        });
    }

    let identity_idx = bundles
        .iter()
        .position(|b| matches!(b.family, FamilySpec::Identity));
    let correlation = match identity_idx {
        Some(idx) if symbols.len() >= 3 => Some(eval::improvement_correlation(&per_stock_rmse, idx)?),
        _ => None,
    };

    Ok(Evaluation {
        labels,
        symbols,
        per_stock_rmse,
        rows,
        skipped_predictions,
        correlation,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Write every report artifact into `out_dir`.
pub fn write_evaluation(
    out_dir: &Path,
    evaluation: &Evaluation,
    bundles: &[RunBundle],
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    eval::write_report_csv(&out_dir.join("report.csv"), &evaluation.rows)?;
    eval::write_per_stock_csv(
        &out_dir.join("per_stock_rmse.csv"),
        &evaluation.symbols,
        &evaluation.labels,
        &evaluation.per_stock_rmse,
    )?;
    for bundle in bundles {
        let curve = eval::export_transform_curve(&bundle.best.transform, -2.0, 2.0, 201)?;
        eval::write_curve_csv(&out_dir.join(format!("curve_{}.csv", bundle.label)), &curve)?;
    }
    if let Some(corr) = &evaluation.correlation {
        eval::write_correlation_csv(&out_dir.join("correlation.csv"), &evaluation.labels, corr)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub out_dir: PathBuf,
    pub trained: Vec<String>,
    pub failures: BTreeMap<String, String>,
    pub skipped_predictions: BTreeMap<String, usize>,
}

/// Load the config, train every method (derived seeds), evaluate the
/// survivors, and write the full report directory.
pub fn run_experiment(config_path: &Path, out_dir: &Path) -> Result<ExperimentSummary> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", config_path.display())))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Input(format!("invalid experiment config: {e}")))?;
    if config.methods.is_empty() {
        return Err(Error::Input("experiment config lists no methods".into()));
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        for m in &config.methods {
            if !seen.insert(m.label()) {
                return Err(Error::Input(format!("duplicate method label {:?}", m.label())));
            }
        }
    }

    let rv_path = if config.rv_input.is_relative() {
        config_path
            .parent()
            .map(|d| d.join(&config.rv_input))
            .unwrap_or_else(|| config.rv_input.clone())
    } else {
        config.rv_input.clone()
    };
    let bytes = std::fs::read(&rv_path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", rv_path.display())))?;
    let digest = fnv1a64(&bytes);
    let raw = market_data::load_rv_csv(&rv_path)?;
    let panel = market_data::panel_from_raw(&raw, config.split)?;

    std::fs::create_dir_all(out_dir)?;
    let mut bundles = Vec::new();
    let mut failures = BTreeMap::new();
    for (i, method) in config.methods.iter().enumerate() {
        let train_cfg = TrainConfig {
            seed: config.train.seed.wrapping_add(i as u64),
            ..config.train
        };
        match train_method(&panel, method, &train_cfg, config.split, &digest) {
            Ok(bundle) => {
                save_run_bundle(&out_dir.join(format!("run_{}.json", bundle.label)), &bundle)?;
                bundles.push(bundle);
            }
            Err(e) => {
                failures.insert(method.label(), e.to_string());
            }
        }
    }
    if bundles.is_empty() {
        return Err(Error::Degenerate(format!(
            "every method failed: {failures:?}"
        )));
    }

    // fall back to the first surviving method when the reference failed
    let reference = config
        .reference
        .clone()
        .filter(|r| bundles.iter().any(|b| &b.label == r));
    let evaluation = evaluate_runs(&panel, &bundles, reference.as_deref())?;
    write_evaluation(out_dir, &evaluation, &bundles)?;

    let summary = ExperimentSummary {
        out_dir: out_dir.to_path_buf(),
        trained: evaluation.labels.clone(),
        failures,
        skipped_predictions: evaluation
            .labels
            .iter()
            .cloned()
            .zip(evaluation.skipped_predictions.iter().copied())
            .collect(),
    };
    std::fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(summary)
}
