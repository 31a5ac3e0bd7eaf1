//! Trajectory forecasting with a from-scratch linear SVM.
//!
//! Training follows the classic stochastic subgradient scheme for the
//! L2-regularized hinge loss: lambda = 1/(c*n), step 1/(lambda*t), one
//! pass order reshuffled every epoch, bias kept out of the penalty.
//! Evaluation is leave-one-out over the non-dev rows with the
//! preprocessor and model refit inside every fold, so no fold ever
//! sees its held-out row's statistics.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::ModelError;
use crate::stats::{mcnemar_exact, TestResult};
use crate::types::{
    BlockContext, DurationClass, EngagementFeatures, ReasonCategory, TrajectoryLabel, UserId,
    SECONDS_PER_DAY,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PredictionTask {
    Departure,
    RecidivismShort,
    RecidivismLong,
}

impl PredictionTask {
    pub const ALL: [PredictionTask; 3] = [
        PredictionTask::Departure,
        PredictionTask::RecidivismShort,
        PredictionTask::RecidivismLong,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PredictionTask::Departure => "departure",
            PredictionTask::RecidivismShort => "recid_short",
            PredictionTask::RecidivismLong => "recid_long",
        }
    }

    pub fn label(self, l: &TrajectoryLabel) -> bool {
        match self {
            PredictionTask::Departure => l.departed_within_horizon,
            PredictionTask::RecidivismShort => l.recidivist_short,
            PredictionTask::RecidivismLong => l.recidivist_long,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum FeatureSet {
    BaselineReason,
    BaselineDuration,
    CommunityAge,
    Engagement,
    EngagementPlusAge,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 5] = [
        FeatureSet::BaselineReason,
        FeatureSet::BaselineDuration,
        FeatureSet::CommunityAge,
        FeatureSet::Engagement,
        FeatureSet::EngagementPlusAge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::BaselineReason => "baseline_reason",
            FeatureSet::BaselineDuration => "baseline_duration",
            FeatureSet::CommunityAge => "community_age",
            FeatureSet::Engagement => "engagement",
            FeatureSet::EngagementPlusAge => "engagement_age",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, FeatureSet::BaselineReason | FeatureSet::BaselineDuration)
    }
}

/// Everything known about one cohort member at prediction time.
#[derive(Clone, Debug)]
pub struct UserRow {
    pub user: UserId,
    pub label: TrajectoryLabel,
    pub features: EngagementFeatures,
    pub context: BlockContext,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureMatrix {
    pub users: Vec<UserId>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl FeatureMatrix {
    /// Canonical row order: by user id. Everything downstream assumes
    /// this, so matrices of different feature sets stay row-aligned.
    pub fn sort_by_user(&mut self) {
        let mut order: Vec<usize> = (0..self.users.len()).collect();
        order.sort_by(|&a, &b| self.users[a].cmp(&self.users[b]));
        self.users = order.iter().map(|&i| self.users[i].clone()).collect();
        self.rows = order.iter().map(|&i| self.rows[i].clone()).collect();
        self.labels = order.iter().map(|&i| self.labels[i]).collect();
    }
}

const ENGAGEMENT_COLUMNS: [&str; 6] = [
    "contributed_per_day",
    "received_per_day",
    "contributed_raw",
    "received_raw",
    "contributed_spread",
    "received_spread",
];

fn engagement_values(f: &EngagementFeatures) -> Vec<f64> {
    vec![
        f.contributed_per_day,
        f.received_per_day,
        f.contributed_raw as f64,
        f.received_raw as f64,
        f.contributed_spread.unwrap_or(f64::NAN),
        f.received_spread.unwrap_or(f64::NAN),
    ]
}

/// The four reason categories a cohort first block can carry.
const REASON_COLUMNS: [(ReasonCategory, &str); 4] = [
    (ReasonCategory::PersonalAttack, "reason_personal_attack"),
    (ReasonCategory::Harassment, "reason_harassment"),
    (ReasonCategory::EditWarring, "reason_edit_warring"),
    (ReasonCategory::DisruptiveEditing, "reason_disruptive_editing"),
];

/// Assemble the matrix for one task and feature set, rows in user-id
/// order. Undefined spreads surface as NaN for the preprocessor.
pub fn build_matrix(task: PredictionTask, set: FeatureSet, rows: &[UserRow]) -> FeatureMatrix {
    let mut m = FeatureMatrix::default();
    for r in rows {
        let values = match set {
            FeatureSet::BaselineReason => REASON_COLUMNS
                .iter()
                .map(|&(cat, _)| (r.context.reason_category == cat) as u8 as f64)
                .collect(),
            FeatureSet::BaselineDuration => {
                let days = r.context.original_duration_s() as f64 / SECONDS_PER_DAY as f64;
                vec![
                    (1.0 + days).ln(),
                    (r.context.duration_class == DurationClass::Long) as u8 as f64,
                ]
            }
            FeatureSet::CommunityAge => vec![r.features.community_age_days],
            FeatureSet::Engagement => engagement_values(&r.features),
            FeatureSet::EngagementPlusAge => {
                let mut v = engagement_values(&r.features);
                v.push(r.features.community_age_days);
                v
            }
        };
        m.users.push(r.user.clone());
        m.rows.push(values);
        m.labels.push(task.label(&r.label));
    }
    m.columns = match set {
        FeatureSet::BaselineReason => REASON_COLUMNS.iter().map(|&(_, n)| n.to_string()).collect(),
        FeatureSet::BaselineDuration => {
            vec!["ln1p_duration_days".into(), "long_block".into()]
        }
        FeatureSet::CommunityAge => vec!["community_age_days".into()],
        FeatureSet::Engagement => ENGAGEMENT_COLUMNS.iter().map(|s| s.to_string()).collect(),
        FeatureSet::EngagementPlusAge => {
            let mut v: Vec<String> = ENGAGEMENT_COLUMNS.iter().map(|s| s.to_string()).collect();
            v.push("community_age_days".into());
            v
        }
    };
    m.sort_by_user();
    m
}

/// Column-wise impute-then-standardize transform fit on training rows
/// only. NaN cells take the column mean of the defined values; columns
/// whose deviation vanishes are dropped entirely.
#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessor {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub kept: Vec<usize>,
}

const STD_FLOOR: f64 = 1e-12;

impl Preprocessor {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Preprocessor, ModelError> {
        if rows.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let dims = rows[0].len();
        let mut means = vec![0.0; dims];
        for col in 0..dims {
            let defined: Vec<f64> = rows
                .iter()
                .map(|r| r[col])
                .filter(|v| !v.is_nan())
                .collect();
            means[col] = if defined.is_empty() {
                0.0
            } else {
                defined.iter().sum::<f64>() / defined.len() as f64
            };
        }
        let mut stds = vec![0.0; dims];
        for col in 0..dims {
            let sum_sq: f64 = rows
                .iter()
                .map(|r| {
                    let v = if r[col].is_nan() { means[col] } else { r[col] };
                    (v - means[col]).powi(2)
                })
                .sum();
            stds[col] = (sum_sq / rows.len() as f64).sqrt();
        }
        let kept = (0..dims).filter(|&c| stds[c] > STD_FLOOR).collect();
        Ok(Preprocessor { means, stds, kept })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        self.kept
            .iter()
            .map(|&c| {
                let v = if row[c].is_nan() { self.means[c] } else { row[c] };
                (v - self.means[c]) / self.stds[c]
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn score(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.weights.len());
        self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    /// Zero scores resolve to the positive class.
    pub fn classify(&self, row: &[f64]) -> bool {
        self.score(row) >= 0.0
    }
}

/// The value being minimized: (lambda/2)*|w|^2 plus mean hinge loss.
/// The bias carries no penalty.
pub fn svm_objective(model: &LinearModel, rows: &[Vec<f64>], labels: &[f64], lambda: f64) -> f64 {
    let norm_sq: f64 = model.weights.iter().map(|w| w * w).sum();
    let hinge: f64 = rows
        .iter()
        .zip(labels)
        .map(|(r, &y)| (1.0 - y * model.score(r)).max(0.0))
        .sum::<f64>()
        / rows.len() as f64;
    0.5 * lambda * norm_sq + hinge
}

/// Stochastic subgradient training. `labels` are +1/-1. The epoch
/// order reshuffles from a fixed stream, so a (data, seed) pair always
/// produces the same model.
pub fn train_linear_svm(
    rows: &[Vec<f64>],
    labels: &[f64],
    c: f64,
    epochs: usize,
    seed: u64,
) -> Result<LinearModel, ModelError> {
    if rows.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(ModelError::DegenerateInput);
    }
    debug_assert_eq!(rows.len(), labels.len());
    debug_assert!(labels.iter().all(|&y| y == 1.0 || y == -1.0));
    let n = rows.len();
    let dims = rows[0].len();
    let lambda = 1.0 / (c * n as f64);
    let mut w = vec![0.0; dims];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0u64;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let y = labels[i];
            let margin = y * (w.iter().zip(&rows[i]).map(|(w, x)| w * x).sum::<f64>() + b);
            let shrink = 1.0 - eta * lambda;
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(&rows[i]) {
                    *wj = shrink * *wj + eta * y * xj;
                }
                b += eta * y;
            } else {
                for wj in w.iter_mut() {
                    *wj *= shrink;
                }
            }
        }
    }
    Ok(LinearModel { weights: w, bias: b })
}

#[derive(Clone, Debug)]
pub struct ModelConfig {
    pub c_grid: Vec<f64>,
    pub dev_fraction: f64,
    pub seed: u64,
    pub epochs: usize,
}

impl Default for ModelConfig {
    fn default() -> ModelConfig {
        ModelConfig {
            c_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            dev_fraction: 0.2,
            seed: 42,
            epochs: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowPrediction {
    pub user: UserId,
    pub truth: bool,
    pub predicted: bool,
}

#[derive(Clone, Debug)]
pub struct LoocvReport {
    pub chosen_c: f64,
    /// None when the dev split came out empty (tiny inputs).
    pub dev_accuracy: Option<f64>,
    pub accuracy: f64,
    pub n_pool: usize,
    pub n_dev: usize,
    /// One prediction per pool row, in user-id order.
    pub predictions: Vec<RowPrediction>,
}

/// Stratified dev indices: an equal fraction of each class, drawn from
/// one shuffle stream (positives first). Returns (dev, pool), both
/// ascending.
fn stratified_split(labels: &[bool], frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dev = Vec::new();
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let take = (frac * idx.len() as f64).floor() as usize;
        dev.extend(idx.into_iter().take(take));
    }
    dev.sort_unstable();
    let pool = (0..labels.len()).filter(|i| dev.binary_search(i).is_err()).collect();
    (dev, pool)
}

fn to_sign(label: bool) -> f64 {
    if label {
        1.0
    } else {
        -1.0
    }
}

fn fit_and_train(
    rows: &[Vec<f64>],
    labels: &[f64],
    c: f64,
    epochs: usize,
    seed: u64,
) -> Result<(Preprocessor, LinearModel), ModelError> {
    let prep = Preprocessor::fit(rows)?;
    let transformed: Vec<Vec<f64>> = rows.iter().map(|r| prep.apply(r)).collect();
    let model = train_linear_svm(&transformed, labels, c, epochs, seed)?;
    Ok((prep, model))
}

/// Model selection on a held-out dev slice, then leave-one-out over
/// the rest. Accuracy ties on the grid resolve to the smallest c.
pub fn evaluate_loocv(matrix: &FeatureMatrix, cfg: &ModelConfig) -> Result<LoocvReport, ModelError> {
    if matrix.rows.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if cfg.c_grid.is_empty() {
        return Err(ModelError::GridEmpty);
    }
    debug_assert!(matrix.users.windows(2).all(|w| w[0] < w[1]), "canonical order, unique users");
    let mut grid = cfg.c_grid.clone();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    let (dev_idx, pool_idx) = stratified_split(&matrix.labels, cfg.dev_fraction, cfg.seed);
    if pool_idx.len() < 2 {
        return Err(ModelError::TooFewRows(pool_idx.len()));
    }
    let pool_rows: Vec<Vec<f64>> = pool_idx.iter().map(|&i| matrix.rows[i].clone()).collect();
    let pool_signs: Vec<f64> = pool_idx.iter().map(|&i| to_sign(matrix.labels[i])).collect();

    let (chosen_c, dev_accuracy) = if dev_idx.is_empty() {
        (grid[0], None)
    } else {
        let mut best: Option<(f64, f64)> = None; // (accuracy, c)
        for &c in &grid {
            let (prep, model) = fit_and_train(&pool_rows, &pool_signs, c, cfg.epochs, cfg.seed)?;
            let correct = dev_idx
                .iter()
                .filter(|&&i| model.classify(&prep.apply(&matrix.rows[i])) == matrix.labels[i])
                .count();
            let acc = correct as f64 / dev_idx.len() as f64;
            // strict improvement only: equal accuracy keeps smaller c
            if best.map_or(true, |(best_acc, _)| acc > best_acc) {
                best = Some((acc, c));
            }
        }
        let (acc, c) = best.expect("non-empty grid");
        (c, Some(acc))
    };

    let predictions: Result<Vec<RowPrediction>, ModelError> = pool_idx
        .par_iter()
        .enumerate()
        .map(|(fold, &row)| {
            let train_rows: Vec<Vec<f64>> = pool_rows
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != fold)
                .map(|(_, r)| r.clone())
                .collect();
            let train_signs: Vec<f64> = pool_signs
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != fold)
                .map(|(_, &s)| s)
                .collect();
            let (prep, model) =
                fit_and_train(&train_rows, &train_signs, chosen_c, cfg.epochs, cfg.seed)?;
            Ok(RowPrediction {
                user: matrix.users[row].clone(),
                truth: matrix.labels[row],
                predicted: model.classify(&prep.apply(&matrix.rows[row])),
            })
        })
        .collect();
    let predictions = predictions?;
    let correct = predictions.iter().filter(|p| p.truth == p.predicted).count();
    Ok(LoocvReport {
        chosen_c,
        dev_accuracy,
        accuracy: correct as f64 / predictions.len() as f64,
        n_pool: pool_idx.len(),
        n_dev: dev_idx.len(),
        predictions,
    })
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub task: PredictionTask,
    pub feature_set: FeatureSet,
    pub report: LoocvReport,
}

/// McNemar contrast of one feature set against the stronger baseline
/// of its task, over row-aligned leave-one-out correctness.
#[derive(Clone, Debug)]
pub struct BaselineComparison {
    pub task: PredictionTask,
    pub feature_set: FeatureSet,
    pub baseline: FeatureSet,
    pub accuracy_delta: f64,
    pub test: TestResult,
}

/// Run every task against every feature set.
pub fn run_all_tasks(rows: &[UserRow], cfg: &ModelConfig) -> Result<Vec<EvalReport>, ModelError> {
    let combos: Vec<(PredictionTask, FeatureSet)> = PredictionTask::ALL
        .iter()
        .flat_map(|&t| FeatureSet::ALL.iter().map(move |&s| (t, s)))
        .collect();
    combos
        .par_iter()
        .map(|&(task, feature_set)| {
            let matrix = build_matrix(task, feature_set, rows);
            Ok(EvalReport {
                task,
                feature_set,
                report: evaluate_loocv(&matrix, cfg)?,
            })
        })
        .collect()
}

/// Compare each non-baseline set with the task's best baseline. The
/// dev split depends only on labels, so all sets of one task share
/// pool rows and align user-for-user.
pub fn compare_to_baselines(reports: &[EvalReport]) -> Vec<BaselineComparison> {
    let mut by_task: BTreeMap<PredictionTask, Vec<&EvalReport>> = BTreeMap::new();
    for r in reports {
        by_task.entry(r.task).or_default().push(r);
    }
    let mut out = Vec::new();
    for (task, group) in by_task {
        let baseline = group
            .iter()
            .filter(|r| r.feature_set.is_baseline())
            .max_by(|a, b| {
                a.report
                    .accuracy
                    .partial_cmp(&b.report.accuracy)
                    .expect("finite accuracy")
                    // ties keep the earlier feature set
                    .then(b.feature_set.cmp(&a.feature_set))
            });
        let Some(baseline) = baseline else { continue };
        let base_correct: Vec<bool> = baseline
            .report
            .predictions
            .iter()
            .map(|p| p.truth == p.predicted)
            .collect();
        for r in &group {
            if r.feature_set.is_baseline() {
                continue;
            }
            assert!(
                r.report
                    .predictions
                    .iter()
                    .zip(&baseline.report.predictions)
                    .all(|(a, b)| a.user == b.user),
                "pool rows must align across feature sets"
            );
            let correct: Vec<bool> =
                r.report.predictions.iter().map(|p| p.truth == p.predicted).collect();
            out.push(BaselineComparison {
                task,
                feature_set: r.feature_set,
                baseline: baseline.feature_set,
                accuracy_delta: r.report.accuracy - baseline.report.accuracy,
                test: mcnemar_exact(&correct, &base_correct),
            });
        }
    }
    out
}
