//! Full-sweep pipeline checks at the library level.

use dwfl::config::{AlphabetMode, DataSource, ExperimentConfig};
use dwfl::experiment::run_experiment;
use dwfl::federation::{AggregationStrategy, DwflExtremumMode};
use dwfl::nn::TrainConfig;
use dwfl::partition::SplitPlan;
use dwfl::synth::SyntheticSpec;

#[test]
fn all_six_strategies_over_five_seeds_produce_six_summary_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        data: DataSource::Synthetic(SyntheticSpec {
            n_samples: 600,
            n_classes: 4,
            seq_len: 12,
            alphabet_size: 8,
            separability: 0.8,
            seed: 6,
        }),
        alphabet_mode: AlphabetMode::DefaultProtein,
        split: SplitPlan::default(),
        n_rounds: 1,
        val_split: 0.1,
        hidden_widths: vec![16],
        dwfl_extremum_mode: DwflExtremumMode::ScaledValues,
        client_train: TrainConfig {
            epochs: 2,
            batch_size: 16,
            dropout_rate: 0.2,
            ..TrainConfig::default()
        },
        global_train: TrainConfig {
            epochs: 1,
            batch_size: 16,
            dropout_rate: 0.2,
            ..TrainConfig::default()
        },
        poison: None,
        strategies: AggregationStrategy::ALL.to_vec(),
        seeds: vec![1, 2, 3, 4, 5],
        out_dir: dir.path().to_path_buf(),
    };

    let summary = run_experiment(&config).unwrap();
    assert_eq!(summary.strategies.len(), 6);

    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7, "header plus one row per strategy");
    for strategy in AggregationStrategy::ALL {
        assert!(csv.contains(strategy.tag()), "{} missing from summary", strategy.tag());
        let per_strategy =
            std::fs::read_to_string(dir.path().join(format!("metrics_{}.csv", strategy.tag())))
                .unwrap();
        // Header, five runs, one aggregate row.
        assert_eq!(per_strategy.lines().count(), 7);
        assert_eq!(summary.strategies.iter().filter(|s| s.strategy == strategy).count(), 1);
    }

    // Every run's metric values are valid fractions.
    for s in &summary.strategies {
        assert_eq!(s.report.n_runs, 5);
        for run in &s.report.per_run {
            for v in [
                run.accuracy,
                run.precision_weighted,
                run.recall_weighted,
                run.f1_weighted,
                run.f1_macro,
                run.roc_auc_macro_ovr,
            ] {
                assert!((0.0..=1.0).contains(&v), "{} out of range", v);
            }
        }
    }
}
