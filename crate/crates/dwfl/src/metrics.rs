//! Evaluation suite: confusion-matrix metrics, one-vs-rest ROC-AUC, and
//! multi-run averaging.

use log::warn;

use crate::encoding::EncodedDataset;
use crate::error::{DwflError, Result};
use crate::nn::{argmax, Model};
use crate::tensor::Matrix;

/// Square count matrix: entry (i, j) counts samples of true class i
/// predicted as class j.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(n_classes: usize, counts: Vec<u64>) -> Result<ConfusionMatrix> {
        if counts.len() != n_classes * n_classes {
            return Err(DwflError::Shape(format!(
                "confusion matrix for {n_classes} classes needs {} entries, got {}",
                n_classes * n_classes,
                counts.len()
            )));
        }
        Ok(ConfusionMatrix { n_classes, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.n_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Row sum: number of samples whose true class is `class`.
    pub fn support(&self, class: usize) -> u64 {
        (0..self.n_classes).map(|j| self.get(class, j)).sum()
    }

    /// Column sum: number of samples predicted as `class`.
    pub fn predicted(&self, class: usize) -> u64 {
        (0..self.n_classes).map(|i| self.get(i, class)).sum()
    }
}

/// Counts (true, predicted) pairs into a [`ConfusionMatrix`].
pub fn confusion_matrix(
    y_true: &[usize],
    y_pred: &[usize],
    n_classes: usize,
) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(DwflError::Shape(format!(
            "y_true has {} entries, y_pred has {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut counts = vec![0u64; n_classes * n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n_classes || p >= n_classes {
            return Err(DwflError::Data(format!(
                "class index out of range: true {t}, predicted {p}, n_classes {n_classes}"
            )));
        }
        counts[t * n_classes + p] += 1;
    }
    ConfusionMatrix::from_counts(n_classes, counts)
}

/// Threshold metrics computed from a confusion matrix. Per-class 0/0 ratios
/// are defined as 0; weighted variants weight by true-class support, macro
/// variants average over all classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub f1_weighted: f64,
    pub f1_macro: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    /// Classes whose precision or recall hit the 0/0 convention.
    pub undefined_ratio_classes: usize,
}

pub fn classification_metrics(cm: &ConfusionMatrix) -> Result<ClassificationMetrics> {
    let total = cm.total();
    if total == 0 {
        return Err(DwflError::Data("confusion matrix counts no samples".into()));
    }
    let k = cm.n_classes();
    let total_f = total as f64;

    let mut trace: u64 = 0;
    let mut tp_over_supported: u64 = 0;
    let mut precision_support_sum = 0.0;
    let mut f1_support_sum = 0.0;
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    let mut undefined = 0usize;

    for class in 0..k {
        let tp = cm.get(class, class);
        trace += tp;
        let support = cm.support(class);
        let predicted = cm.predicted(class);

        let precision = if predicted > 0 {
            tp as f64 / predicted as f64
        } else {
            undefined += 1;
            0.0
        };
        let recall = if support > 0 {
            tp as f64 / support as f64
        } else {
            undefined += 1;
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };

        if support > 0 {
            // Support-weighted recall reduces to tp/total per class; keeping
            // the numerator integral preserves the recall==accuracy identity
            // bit-for-bit.
            tp_over_supported += tp;
            precision_support_sum += support as f64 * precision;
            f1_support_sum += support as f64 * f1;
        }
        precision_sum += precision;
        recall_sum += recall;
        f1_sum += f1;
    }

    if undefined > 0 {
        warn!("{undefined} per-class ratios were 0/0 and defined as 0");
    }

    Ok(ClassificationMetrics {
        accuracy: trace as f64 / total_f,
        precision_weighted: precision_support_sum / total_f,
        recall_weighted: tp_over_supported as f64 / total_f,
        f1_weighted: f1_support_sum / total_f,
        f1_macro: f1_sum / k as f64,
        precision_macro: precision_sum / k as f64,
        recall_macro: recall_sum / k as f64,
    undefined_ratio_classes: undefined,
    })
}

/// One-vs-rest ROC-AUC for one class via the rank statistic (tied scores get
/// averaged ranks, i.e. half credit per tied pair).
fn binary_auc(scores: &[f64], positives: &[bool]) -> f64 {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks, averaged over the tie run [i, j].
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    let p = positives.iter().filter(|&&x| x).count() as f64;
    let n_neg = n as f64 - p;
    let rank_sum: f64 = (0..n).filter(|&i| positives[i]).map(|i| ranks[i]).sum();
    (rank_sum - p * (p + 1.0) / 2.0) / (p * n_neg)
}

/// Macro one-vs-rest ROC-AUC: per class, that class's probability column
/// scores positives against all other samples. Classes without both a
/// positive and a negative are skipped with a warning.
pub fn roc_auc_macro_ovr(probs: &Matrix, y_true: &[usize]) -> Result<f64> {
    if probs.rows() != y_true.len() {
        return Err(DwflError::Shape(format!(
            "probs has {} rows, y_true has {}",
            probs.rows(),
            y_true.len()
        )));
    }
    let k = probs.cols();
    let n = probs.rows();
    let mut auc_sum = 0.0;
    let mut scored = 0usize;
    for class in 0..k {
        let positives: Vec<bool> = y_true.iter().map(|&t| t == class).collect();
        let n_pos = positives.iter().filter(|&&x| x).count();
        if n_pos == 0 || n_pos == n {
            warn!("class {class} lacks both positives and negatives; skipped in ROC-AUC");
            continue;
        }
        let scores: Vec<f64> = (0..n).map(|r| probs.get(r, class)).collect();
        auc_sum += binary_auc(&scores, &positives);
        scored += 1;
    }
    if scored == 0 {
        return Err(DwflError::Metric(
            "no class has both positives and negatives; ROC-AUC undefined".into(),
        ));
    }
    Ok(auc_sum / scored as f64)
}

/// Metrics of a single evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub accuracy: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub f1_weighted: f64,
    pub f1_macro: f64,
    pub roc_auc_macro_ovr: f64,
    pub train_seconds: f64,
}

/// Per-run metrics plus their arithmetic mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub n_runs: usize,
    pub per_run: Vec<RunMetrics>,
    pub aggregate: RunMetrics,
}

/// A trained model with its test split, handed back by an experiment closure.
pub struct RunArtifacts {
    pub model: Model,
    pub test: EncodedDataset,
    pub train_seconds: f64,
}

/// Scores a model's probabilities on a labeled test set.
pub fn compute_run_metrics(
    probs: &Matrix,
    y_true: &[usize],
    n_classes: usize,
    train_seconds: f64,
) -> Result<RunMetrics> {
    let y_pred: Vec<usize> = (0..probs.rows()).map(|r| argmax(probs.row(r))).collect();
    let cm = confusion_matrix(y_true, &y_pred, n_classes)?;
    let cls = classification_metrics(&cm)?;
    let auc = roc_auc_macro_ovr(probs, y_true)?;
    Ok(RunMetrics {
        accuracy: cls.accuracy,
        precision_weighted: cls.precision_weighted,
        recall_weighted: cls.recall_weighted,
        f1_weighted: cls.f1_weighted,
        f1_macro: cls.f1_macro,
        roc_auc_macro_ovr: auc,
        train_seconds,
    })
}

/// Runs the experiment once per seed and averages the outcomes. A failing
/// run is logged and dropped; `n_runs` counts completed runs only.
pub fn evaluate_runs<F>(mut experiment: F, seeds: &[u64]) -> Result<MetricsReport>
where
    F: FnMut(u64) -> Result<RunArtifacts>,
{
    if seeds.is_empty() {
        return Err(DwflError::Config("evaluate_runs needs at least one seed".into()));
    }
    let mut per_run = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        match experiment(seed).and_then(|artifacts| {
            let probs = artifacts.model.forward_infer(&artifacts.test.features)?;
            let y_true: Vec<usize> = (0..artifacts.test.n_samples())
                .map(|r| artifacts.test.label_of(r))
                .collect();
            compute_run_metrics(
                &probs,
                &y_true,
                artifacts.test.n_classes(),
                artifacts.train_seconds,
            )
        }) {
            Ok(metrics) => per_run.push(metrics),
            Err(e) => warn!("run with seed {seed} failed and is excluded: {e}"),
        }
    }
    if per_run.is_empty() {
        return Err(DwflError::Metric("every run failed; nothing to report".into()));
    }
    let aggregate = mean_metrics(&per_run);
    Ok(MetricsReport {
        n_runs: per_run.len(),
        per_run,
        aggregate,
    })
}

fn mean_metrics(runs: &[RunMetrics]) -> RunMetrics {
    let n = runs.len() as f64;
    RunMetrics {
        accuracy: runs.iter().map(|r| r.accuracy).sum::<f64>() / n,
        precision_weighted: runs.iter().map(|r| r.precision_weighted).sum::<f64>() / n,
        recall_weighted: runs.iter().map(|r| r.recall_weighted).sum::<f64>() / n,
        f1_weighted: runs.iter().map(|r| r.f1_weighted).sum::<f64>() / n,
        f1_macro: runs.iter().map(|r| r.f1_macro).sum::<f64>() / n,
        roc_auc_macro_ovr: runs.iter().map(|r| r.roc_auc_macro_ovr).sum::<f64>() / n,
        train_seconds: runs.iter().map(|r| r.train_seconds).sum::<f64>() / n,
    }
}

/// Comma-separated table: one row per run plus an aggregate row. Timing is
/// the last column so determinism checks can strip it.
pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from(
        "run,accuracy,precision_weighted,recall_weighted,f1_weighted,f1_macro,roc_auc_macro_ovr,train_seconds\n",
    );
    for (i, r) in report.per_run.iter().enumerate() {
        out.push_str(&csv_row(&(i + 1).to_string(), r));
    }
    out.push_str(&csv_row("aggregate", &report.aggregate));
    out
}

fn csv_row(label: &str, r: &RunMetrics) -> String {
    format!(
        "{label},{},{},{},{},{},{},{:.4}\n",
        r.accuracy,
        r.precision_weighted,
        r.recall_weighted,
        r.f1_weighted,
        r.f1_macro,
        r.roc_auc_macro_ovr,
        r.train_seconds
    )
}

/// Structured text records, one per run plus the aggregate.
pub fn metrics_records(report: &MetricsReport) -> String {
    let mut out = String::new();
    for (i, r) in report.per_run.iter().enumerate() {
        out.push_str(&record_line(&format!("run={}", i + 1), r));
    }
    out.push_str(&record_line(
        &format!("run=aggregate n_runs={}", report.n_runs),
        &report.aggregate,
    ));
    out
}

fn record_line(prefix: &str, r: &RunMetrics) -> String {
    format!(
        "{prefix} accuracy={} precision_weighted={} recall_weighted={} f1_weighted={} \
         f1_macro={} roc_auc_macro_ovr={} train_seconds={:.4}\n",
        r.accuracy, r.precision_weighted, r.recall_weighted, r.f1_weighted, r.f1_macro,
        r.roc_auc_macro_ovr, r.train_seconds
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    type TestRng = rand_chacha::ChaCha8Rng;

    #[test]
    fn confusion_matrix_examples() {
        let cm = confusion_matrix(&[0, 1], &[0, 1], 2).unwrap();
        assert_eq!(cm.get(0, 0), 1);
        assert_eq!(cm.get(1, 1), 1);
        assert_eq!(cm.get(0, 1), 0);

        let cm = confusion_matrix(&[0, 0], &[1, 1], 2).unwrap();
        assert_eq!(cm.get(0, 1), 2);
        assert_eq!(cm.total(), 2);

        assert!(confusion_matrix(&[0, 3], &[0, 0], 2).is_err());
        assert!(confusion_matrix(&[0], &[0, 1], 2).is_err());
    }

    #[test]
    fn confusion_matrix_matches_pair_counting_oracle() {
        let mut rng = TestRng::seed_from_u64(8);
        let n = 200;
        let k = 5;
        let y_true: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let y_pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let cm = confusion_matrix(&y_true, &y_pred, k).unwrap();
        for i in 0..k {
            for j in 0..k {
                let expected = y_true
                    .iter()
                    .zip(&y_pred)
                    .filter(|&(&t, &p)| t == i && p == j)
                    .count() as u64;
                assert_eq!(cm.get(i, j), expected);
            }
        }
    }

    #[test]
    fn perfect_diagonal_scores_one_everywhere() {
        let cm = ConfusionMatrix::from_counts(3, vec![4, 0, 0, 0, 5, 0, 0, 0, 6]).unwrap();
        let m = classification_metrics(&cm).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.precision_weighted, 1.0);
        assert_eq!(m.recall_weighted, 1.0);
        assert_eq!(m.f1_weighted, 1.0);
        assert_eq!(m.f1_macro, 1.0);
    }

    #[test]
    fn symmetric_two_class_case() {
        let cm = ConfusionMatrix::from_counts(2, vec![1, 1, 1, 1]).unwrap();
        let m = classification_metrics(&cm).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.f1_macro, 0.5);
    }

    #[test]
    fn three_class_case_matches_scalar_oracle() {
        let cm =
            ConfusionMatrix::from_counts(3, vec![5, 2, 0, 1, 6, 1, 0, 2, 4]).unwrap();
        let m = classification_metrics(&cm).unwrap();

        // Oracle: evaluate the per-class formulas with plain scalars.
        let tps = [5.0, 6.0, 4.0];
        let supports = [7.0, 8.0, 6.0];
        let predicted = [6.0, 10.0, 5.0];
        let total = 21.0;
        let mut precision_w = 0.0;
        let mut f1_w = 0.0;
        let mut f1_m = 0.0;
        for c in 0..3 {
            let p = tps[c] / predicted[c];
            let r = tps[c] / supports[c];
            let f1 = 2.0 * p * r / (p + r);
            precision_w += supports[c] * p;
            f1_w += supports[c] * f1;
            f1_m += f1;
        }
        assert!((m.accuracy - 15.0 / 21.0).abs() < 1e-15);
        assert!((m.precision_weighted - precision_w / total).abs() < 1e-15);
        assert!((m.f1_weighted - f1_w / total).abs() < 1e-15);
        assert!((m.f1_macro - f1_m / 3.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_recall_equals_accuracy_exactly() {
        let mut rng = TestRng::seed_from_u64(77);
        for _ in 0..100 {
            let k = rng.gen_range(2..6usize);
            let counts: Vec<u64> = (0..k * k).map(|_| rng.gen_range(0..40u64)).collect();
            if counts.iter().sum::<u64>() == 0 {
                continue;
            }
            let cm = ConfusionMatrix::from_counts(k, counts).unwrap();
            let m = classification_metrics(&cm).unwrap();
            assert_eq!(m.recall_weighted, m.accuracy);
        }
    }

    #[test]
    fn zero_support_classes_contribute_zero() {
        // Class 2 never appears and is never predicted.
        let cm = ConfusionMatrix::from_counts(3, vec![3, 1, 0, 0, 4, 0, 0, 0, 0]).unwrap();
        let m = classification_metrics(&cm).unwrap();
        assert_eq!(m.undefined_ratio_classes, 2); // precision and recall of class 2
        let f1_0 = 2.0 * (3.0 / 3.0) * (3.0 / 4.0) / ((3.0 / 3.0) + (3.0 / 4.0));
        let f1_1 = 2.0 * (4.0 / 5.0) * 1.0 / ((4.0 / 5.0) + 1.0);
        assert!((m.f1_macro - (f1_0 + f1_1) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn auc_trivial_cases() {
        // Perfectly separated scores.
        let probs = Matrix::from_rows(&[
            vec![0.9, 0.1],
            vec![0.8, 0.2],
            vec![0.2, 0.8],
            vec![0.1, 0.9],
        ])
        .unwrap();
        let auc = roc_auc_macro_ovr(&probs, &[0, 0, 1, 1]).unwrap();
        assert_eq!(auc, 1.0);

        // All-identical scores: every pair ties, AUC 0.5.
        let probs = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let auc = roc_auc_macro_ovr(&probs, &[0, 1, 1]).unwrap();
        assert_eq!(auc, 0.5);
    }

    #[test]
    fn auc_matches_pairwise_oracle() {
        let mut rng = TestRng::seed_from_u64(15);
        let n = 50;
        let k = 3;
        let mut probs = Matrix::zeros(n, k);
        for r in 0..n {
            let mut row: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
            // A coarse grid of score values produces plenty of ties.
            row.iter_mut().for_each(|v| *v = (*v * 8.0).round() / 8.0);
            let sum: f64 = row.iter().sum();
            for (c, v) in row.into_iter().enumerate() {
                probs.set(r, c, v / sum);
            }
        }
        let y_true: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();

        // O(n^2) oracle: concordant pairs plus half the ties.
        let mut oracle_sum = 0.0;
        let mut scored = 0;
        for class in 0..k {
            let pos: Vec<usize> = (0..n).filter(|&i| y_true[i] == class).collect();
            let neg: Vec<usize> = (0..n).filter(|&i| y_true[i] != class).collect();
            if pos.is_empty() || neg.is_empty() {
                continue;
            }
            let mut credit = 0.0;
            for &p in &pos {
                for &q in &neg {
                    let sp = probs.get(p, class);
                    let sq = probs.get(q, class);
                    if sp > sq {
                        credit += 1.0;
                    } else if sp == sq {
                        credit += 0.5;
                    }
                }
            }
            oracle_sum += credit / (pos.len() * neg.len()) as f64;
            scored += 1;
        }
        let oracle = oracle_sum / scored as f64;
        let got = roc_auc_macro_ovr(&probs, &y_true).unwrap();
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
    }

    #[test]
    fn auc_is_invariant_under_monotone_transforms() {
        let mut rng = TestRng::seed_from_u64(4);
        let n = 30;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let positives: Vec<bool> = (0..n).map(|_| rng.gen::<bool>()).collect();
        if positives.iter().all(|&b| b) || positives.iter().all(|&b| !b) {
            return;
        }
        let base = binary_auc(&scores, &positives);
        let squashed: Vec<f64> = scores.iter().map(|&s| (5.0 * s).exp()).collect();
        assert_eq!(binary_auc(&squashed, &positives), base);
    }

    #[test]
    fn missing_class_is_skipped_and_all_missing_errors() {
        let probs = Matrix::from_rows(&[vec![0.6, 0.3, 0.1], vec![0.2, 0.7, 0.1]]).unwrap();
        // Class 2 has no positives: skipped, mean over classes 0 and 1.
        let auc = roc_auc_macro_ovr(&probs, &[0, 1]).unwrap();
        assert_eq!(auc, 1.0);
        // Single class present everywhere: nothing scorable.
        let probs = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert!(roc_auc_macro_ovr(&probs, &[0, 0]).is_err());
    }

    #[test]
    fn metrics_are_permutation_invariant_in_sample_order() {
        let mut rng = TestRng::seed_from_u64(23);
        let n = 60;
        let k = 3;
        let y_true: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let mut probs = Matrix::zeros(n, k);
        for r in 0..n {
            let row: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
            let sum: f64 = row.iter().sum();
            for (c, v) in row.into_iter().enumerate() {
                probs.set(r, c, v / sum);
            }
        }
        let base = compute_run_metrics(&probs, &y_true, k, 0.0).unwrap();

        // Reverse the sample order and recompute.
        let order: Vec<usize> = (0..n).rev().collect();
        let probs_rev = probs.select_rows(&order);
        let y_rev: Vec<usize> = order.iter().map(|&i| y_true[i]).collect();
        let reversed = compute_run_metrics(&probs_rev, &y_rev, k, 0.0).unwrap();
        assert_eq!(base, reversed);
    }

    #[test]
    fn evaluate_runs_aggregates_and_tolerates_failures() {
        use crate::nn::{LayerSpec, Model};
        let make_artifacts = |seed: u64| -> Result<RunArtifacts> {
            if seed == 3 {
                return Err(DwflError::Data("synthetic failure".into()));
            }
            let model = Model::from_specs(
                vec![LayerSpec::Dense {
                    input_dim: 2,
                    output_dim: 2,
                    l1_coeff: 0.0,
                }],
                seed,
            )?;
            let test = EncodedDataset {
                features: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
                labels_onehot: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
                class_names: vec!["a".into(), "b".into()],
                seq_len: 1,
            };
            Ok(RunArtifacts {
                model,
                test,
                train_seconds: 0.25,
            })
        };

        let report = evaluate_runs(make_artifacts, &[1, 1, 1, 1, 1]).unwrap();
        assert_eq!(report.n_runs, 5);
        for r in &report.per_run {
            assert_eq!(r.accuracy, report.aggregate.accuracy);
        }

        let report = evaluate_runs(make_artifacts, &[1, 2, 3, 4, 5]).unwrap();
        assert_eq!(report.n_runs, 4);
        assert_eq!(report.per_run.len(), 4);

        assert!(evaluate_runs(|_| Err(DwflError::Data("always".into())), &[1]).is_err());
    }

    #[test]
    fn csv_layout_is_fixed() {
        let run = RunMetrics {
            accuracy: 0.5,
            precision_weighted: 0.25,
            recall_weighted: 0.5,
            f1_weighted: 0.4,
            f1_macro: 0.3,
            roc_auc_macro_ovr: 0.6,
            train_seconds: 1.23456,
        };
        let report = MetricsReport {
            n_runs: 1,
            per_run: vec![run.clone()],
            aggregate: run,
        };
        let csv = metrics_csv(&report);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "run,accuracy,precision_weighted,recall_weighted,f1_weighted,f1_macro,roc_auc_macro_ovr,train_seconds"
        );
        assert_eq!(lines.next().unwrap(), "1,0.5,0.25,0.5,0.4,0.3,0.6,1.2346");
        assert_eq!(
            lines.next().unwrap(),
            "aggregate,0.5,0.25,0.5,0.4,0.3,0.6,1.2346"
        );
    }
}
