//! Dataset splits for the federated pipeline: stratified train/test,
//! local/global train, equal per-client shards, and a label-poisoning
//! harness. All splits are pure functions of (dataset order, plan).

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use std::fmt;

use crate::encoding::EncodedDataset;
use crate::error::{DwflError, Result};
use crate::nn::EngineRng;
use crate::seeding::derive_seed;

/// How a dataset is carved into test, global-train, and client shards.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub test_fraction: f64,
    /// Fraction of the training data reserved for global fine-tuning.
    pub global_train_fraction: f64,
    pub n_clients: usize,
    pub seed: u64,
    /// Deal shards per class (stratified) instead of over a plain shuffle.
    pub stratify_shards: bool,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            test_fraction: 0.30,
            global_train_fraction: 0.20,
            n_clients: 6,
            seed: 0,
            stratify_shards: true,
        }
    }
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.test_fraction && self.test_fraction < 1.0) {
            return Err(DwflError::Config(format!(
                "test_fraction must be in (0,1), got {}",
                self.test_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.global_train_fraction) {
            return Err(DwflError::Config(format!(
                "global_train_fraction must be in [0,1), got {}",
                self.global_train_fraction
            )));
        }
        if self.n_clients == 0 {
            return Err(DwflError::Config("n_clients must be >= 1".into()));
        }
        Ok(())
    }
}

/// Destination of one sample in a [`FederatedSplit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    Test,
    GlobalTrain,
    Client(usize),
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assignment::Test => write!(f, "test"),
            Assignment::GlobalTrain => write!(f, "global_train"),
            Assignment::Client(i) => write!(f, "client_{i}"),
        }
    }
}

/// Per-sample assignment record kept for audits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleAssignment {
    pub index: usize,
    pub class: usize,
    pub assignment: Assignment,
}

/// The full federated carve-up: disjoint shards, global-train, and test
/// views that jointly cover the input dataset.
#[derive(Debug, Clone)]
pub struct FederatedSplit {
    pub client_shards: Vec<EncodedDataset>,
    pub global_train: EncodedDataset,
    pub test: EncodedDataset,
    pub provenance: Vec<SampleAssignment>,
}

impl FederatedSplit {
    /// Audit table: one `sample_id<TAB>class<TAB>assignment` line per sample.
    pub fn provenance_table(&self, class_names: &[String]) -> String {
        let mut out = String::from("sample_id\tclass\tassignment\n");
        for rec in &self.provenance {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                rec.index, class_names[rec.class], rec.assignment
            ));
        }
        out
    }
}

/// Label-poisoning modes for the robustness harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoisonMode {
    /// Permute label rows uniformly at random (features untouched).
    LabelShuffle,
    /// Shift every label one class forward, cyclically.
    LabelFlip,
}

/// Holds out `round_ties_even(count * fraction)` samples per class from the
/// given index set. Classes with a single sample are kept whole (and logged).
/// Both returned lists are sorted ascending.
fn stratified_holdout(
    indices: &[usize],
    labels: &[usize],
    n_classes: usize,
    fraction: f64,
    rng: &mut EngineRng,
) -> (Vec<usize>, Vec<usize>) {
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for &idx in indices {
        per_class[labels[idx]].push(idx);
    }
    let mut kept = Vec::new();
    let mut held = Vec::new();
    for (class, mut members) in per_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() == 1 {
            warn!("class {class} has a single sample; keeping it in the larger piece");
            kept.push(members[0]);
            continue;
        }
        members.shuffle(rng);
        let take = (members.len() as f64 * fraction).round_ties_even() as usize;
        let take = take.min(members.len());
        held.extend_from_slice(&members[..take]);
        kept.extend_from_slice(&members[take..]);
    }
    kept.sort_unstable();
    held.sort_unstable();
    (kept, held)
}

fn class_labels(ds: &EncodedDataset) -> Vec<usize> {
    (0..ds.n_samples()).map(|r| ds.label_of(r)).collect()
}

/// Index-level stratified split: returns (train, test) index lists.
pub fn stratified_split_indices(
    labels: &[usize],
    n_classes: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if labels.is_empty() {
        return Err(DwflError::Data("cannot split an empty dataset".into()));
    }
    if !(0.0 < test_fraction && test_fraction < 1.0) {
        return Err(DwflError::Config(format!(
            "test_fraction must be in (0,1), got {test_fraction}"
        )));
    }
    let all: Vec<usize> = (0..labels.len()).collect();
    let mut rng = EngineRng::seed_from_u64(seed);
    Ok(stratified_holdout(&all, labels, n_classes, test_fraction, &mut rng))
}

/// Stratified train/test split: per-class test counts are
/// `round_ties_even(class_count * test_fraction)`.
pub fn stratified_split(
    ds: &EncodedDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(EncodedDataset, EncodedDataset)> {
    let labels = class_labels(ds);
    let (train_idx, test_idx) =
        stratified_split_indices(&labels, ds.n_classes(), test_fraction, seed)?;
    Ok((ds.select(&train_idx), ds.select(&test_idx)))
}

/// Splits training data into local (client) and global (fine-tune) portions,
/// stratified per class. A zero fraction yields an empty global portion.
pub fn local_global_split(
    train: &EncodedDataset,
    global_train_fraction: f64,
    seed: u64,
) -> Result<(EncodedDataset, EncodedDataset)> {
    if !(0.0..1.0).contains(&global_train_fraction) {
        return Err(DwflError::Config(format!(
            "global_train_fraction must be in [0,1), got {global_train_fraction}"
        )));
    }
    if global_train_fraction == 0.0 {
        let empty: Vec<usize> = Vec::new();
        return Ok((train.clone(), train.select(&empty)));
    }
    let labels = class_labels(train);
    let all: Vec<usize> = (0..labels.len()).collect();
    let mut rng = EngineRng::seed_from_u64(seed);
    let (local_idx, global_idx) = stratified_holdout(
        &all,
        &labels,
        train.n_classes(),
        global_train_fraction,
        &mut rng,
    );
    Ok((train.select(&local_idx), train.select(&global_idx)))
}

/// Deals samples to `n_clients` shards with one rolling round-robin cursor,
/// so shard sizes differ by at most one. With `stratify` set, samples are
/// dealt class by class (each class's samples land on consecutive shards);
/// otherwise a plain shuffled order is dealt.
pub fn partition_clients(
    ds: &EncodedDataset,
    n_clients: usize,
    seed: u64,
    stratify: bool,
) -> Result<Vec<EncodedDataset>> {
    if n_clients == 0 {
        return Err(DwflError::Config("n_clients must be >= 1".into()));
    }
    if ds.n_samples() < n_clients {
        return Err(DwflError::Data(format!(
            "{} samples cannot cover {} clients",
            ds.n_samples(),
            n_clients
        )));
    }
    let mut rng = EngineRng::seed_from_u64(seed);
    let labels = class_labels(ds);

    let deal_order: Vec<usize> = if stratify {
        let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); ds.n_classes()];
        for (idx, &class) in labels.iter().enumerate() {
            per_class[class].push(idx);
        }
        let mut order = Vec::with_capacity(ds.n_samples());
        for mut members in per_class {
            members.shuffle(&mut rng);
            order.extend(members);
        }
        order
    } else {
        let mut order: Vec<usize> = (0..ds.n_samples()).collect();
        order.shuffle(&mut rng);
        order
    };

    let mut shard_indices: Vec<Vec<usize>> = vec![Vec::new(); n_clients];
    for (cursor, idx) in deal_order.into_iter().enumerate() {
        shard_indices[cursor % n_clients].push(idx);
    }
    for indices in &mut shard_indices {
        indices.sort_unstable();
    }
    Ok(shard_indices.iter().map(|idx| ds.select(idx)).collect())
}

/// Replaces a shard's labels while leaving features untouched.
pub fn poison_shard(shard: &EncodedDataset, mode: PoisonMode, seed: u64) -> EncodedDataset {
    let n = shard.n_samples();
    let mut poisoned = shard.clone();
    match mode {
        PoisonMode::LabelShuffle => {
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = EngineRng::seed_from_u64(seed);
            order.shuffle(&mut rng);
            poisoned.labels_onehot = shard.labels_onehot.select_rows(&order);
        }
        PoisonMode::LabelFlip => {
            let c = shard.n_classes();
            for r in 0..n {
                let label = shard.label_of(r);
                let row = poisoned.labels_onehot.row_mut(r);
                row.iter_mut().for_each(|v| *v = 0.0);
                row[(label + 1) % c] = 1.0;
            }
        }
    }
    poisoned
}

/// Runs the full carve-up: stratified test split, local/global train split,
/// and per-client shards, with a provenance record for every sample.
pub fn split_federated(ds: &EncodedDataset, plan: &SplitPlan) -> Result<FederatedSplit> {
    plan.validate()?;
    if ds.n_samples() == 0 {
        return Err(DwflError::Data("cannot split an empty dataset".into()));
    }
    let labels = class_labels(ds);

    let (train_idx, test_idx) = {
        let all: Vec<usize> = (0..ds.n_samples()).collect();
        let mut rng = EngineRng::seed_from_u64(derive_seed(plan.seed, 0x7e57));
        stratified_holdout(&all, &labels, ds.n_classes(), plan.test_fraction, &mut rng)
    };

    let (local_idx, global_idx) = if plan.global_train_fraction == 0.0 {
        (train_idx.clone(), Vec::new())
    } else {
        let mut rng = EngineRng::seed_from_u64(derive_seed(plan.seed, 0x91f0));
        stratified_holdout(
            &train_idx,
            &labels,
            ds.n_classes(),
            plan.global_train_fraction,
            &mut rng,
        )
    };

    if local_idx.len() < plan.n_clients {
        return Err(DwflError::Data(format!(
            "{} local-train samples cannot cover {} clients",
            local_idx.len(),
            plan.n_clients
        )));
    }

    // Deal local samples to shards (rolling cursor; per-class when stratified).
    let mut rng = EngineRng::seed_from_u64(derive_seed(plan.seed, 0x5a4d));
    let deal_order: Vec<usize> = if plan.stratify_shards {
        let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); ds.n_classes()];
        for &idx in &local_idx {
            per_class[labels[idx]].push(idx);
        }
        let mut order = Vec::with_capacity(local_idx.len());
        for mut members in per_class {
            members.shuffle(&mut rng);
            order.extend(members);
        }
        order
    } else {
        let mut order = local_idx.clone();
        order.shuffle(&mut rng);
        order
    };
    let mut shard_indices: Vec<Vec<usize>> = vec![Vec::new(); plan.n_clients];
    for (cursor, idx) in deal_order.into_iter().enumerate() {
        shard_indices[cursor % plan.n_clients].push(idx);
    }
    for indices in &mut shard_indices {
        indices.sort_unstable();
    }

    let mut provenance: Vec<SampleAssignment> = Vec::with_capacity(ds.n_samples());
    for &idx in &test_idx {
        provenance.push(SampleAssignment {
            index: idx,
            class: labels[idx],
            assignment: Assignment::Test,
        });
    }
    for &idx in &global_idx {
        provenance.push(SampleAssignment {
            index: idx,
            class: labels[idx],
            assignment: Assignment::GlobalTrain,
        });
    }
    for (client, indices) in shard_indices.iter().enumerate() {
        for &idx in indices {
            provenance.push(SampleAssignment {
                index: idx,
                class: labels[idx],
                assignment: Assignment::Client(client),
            });
        }
    }
    provenance.sort_by_key(|rec| rec.index);

    Ok(FederatedSplit {
        client_shards: shard_indices.iter().map(|idx| ds.select(idx)).collect(),
        global_train: ds.select(&global_idx),
        test: ds.select(&test_idx),
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Matrix;
    use proptest::prelude::*;

    /// Dataset with the given per-class sample counts; features are a single
    /// one-hot block so encoding invariants hold.
    fn dataset_with_counts(counts: &[usize]) -> EncodedDataset {
        let n: usize = counts.iter().sum();
        let n_classes = counts.len();
        let width = 3;
        let mut features = Matrix::zeros(n, width);
        let mut labels = Matrix::zeros(n, n_classes);
        let mut row = 0;
        for (class, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                features.set(row, row % width, 1.0);
                labels.set(row, class, 1.0);
                row += 1;
            }
        }
        EncodedDataset {
            features,
            labels_onehot: labels,
            class_names: (0..n_classes).map(|c| format!("class_{c}")).collect(),
            seq_len: 1,
        }
    }

    #[test]
    fn proportional_test_counts() {
        let ds = dataset_with_counts(&[100, 50]);
        let (train, test) = stratified_split(&ds, 0.3, 7).unwrap();
        assert_eq!(test.class_counts(), vec![30, 15]);
        assert_eq!(train.class_counts(), vec![70, 35]);
    }

    #[test]
    fn round_half_even_on_realistic_class_sizes() {
        // 957 * 0.3 rounds to 287 under ties-to-even arithmetic.
        let ds = dataset_with_counts(&[957]);
        let labels: Vec<usize> = vec![0; 957];
        let (_, test_idx) = stratified_split_indices(&labels, 1, 0.3, 1).unwrap();
        assert_eq!(test_idx.len(), 287);
        drop(ds);
    }

    #[test]
    fn split_is_deterministic_in_seed() {
        let ds = dataset_with_counts(&[40, 25, 13]);
        let a = stratified_split_indices(&class_labels(&ds), 3, 0.3, 42).unwrap();
        let b = stratified_split_indices(&class_labels(&ds), 3, 0.3, 42).unwrap();
        assert_eq!(a, b);
        let c = stratified_split_indices(&class_labels(&ds), 3, 0.3, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_sample_class_goes_to_train() {
        let ds = dataset_with_counts(&[10, 1]);
        let (train, test) = stratified_split(&ds, 0.5, 3).unwrap();
        assert_eq!(train.class_counts()[1], 1);
        assert_eq!(test.class_counts()[1], 0);
    }

    #[test]
    fn local_global_split_fractions() {
        let ds = dataset_with_counts(&[600, 400]);
        let (local, global) = local_global_split(&ds, 0.2, 5).unwrap();
        assert_eq!(local.n_samples(), 800);
        assert_eq!(global.n_samples(), 200);
        // Per-class proportions within one sample of the target.
        for (class, &count) in ds.class_counts().iter().enumerate() {
            let expected = count as f64 * 0.2;
            let got = global.class_counts()[class] as f64;
            assert!((got - expected).abs() <= 1.0);
        }
    }

    #[test]
    fn zero_global_fraction_is_degenerate() {
        let ds = dataset_with_counts(&[30, 20]);
        let (local, global) = local_global_split(&ds, 0.0, 5).unwrap();
        assert_eq!(global.n_samples(), 0);
        assert_eq!(local.n_samples(), ds.n_samples());
        assert_eq!(local.features, ds.features);
    }

    #[test]
    fn client_shards_are_equal_within_one() {
        let ds = dataset_with_counts(&[300, 300]);
        let shards = partition_clients(&ds, 6, 2, true).unwrap();
        assert!(shards.iter().all(|s| s.n_samples() == 100));

        let ds = dataset_with_counts(&[301, 300]);
        let shards = partition_clients(&ds, 6, 2, true).unwrap();
        let mut sizes: Vec<usize> = shards.iter().map(|s| s.n_samples()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![100, 100, 100, 100, 100, 101]);
    }

    #[test]
    fn class_with_multiple_of_clients_spreads_exactly() {
        let ds = dataset_with_counts(&[12, 18]);
        let shards = partition_clients(&ds, 6, 9, true).unwrap();
        for shard in &shards {
            assert_eq!(shard.class_counts()[0], 2);
            assert_eq!(shard.class_counts()[1], 3);
        }
    }

    #[test]
    fn too_few_samples_for_clients_is_rejected() {
        let ds = dataset_with_counts(&[2, 2]);
        assert!(matches!(
            partition_clients(&ds, 6, 1, true),
            Err(DwflError::Data(_))
        ));
    }

    #[test]
    fn label_flip_on_two_classes_is_an_involution() {
        let ds = dataset_with_counts(&[5, 7]);
        let once = poison_shard(&ds, PoisonMode::LabelFlip, 3);
        assert_ne!(once.labels_onehot, ds.labels_onehot);
        let twice = poison_shard(&once, PoisonMode::LabelFlip, 3);
        assert_eq!(twice.labels_onehot, ds.labels_onehot);
        assert_eq!(twice.features, ds.features);
    }

    #[test]
    fn label_shuffle_preserves_histogram() {
        let ds = dataset_with_counts(&[4, 9, 2]);
        let poisoned = poison_shard(&ds, PoisonMode::LabelShuffle, 11);
        assert_eq!(poisoned.class_counts(), ds.class_counts());
        assert_eq!(poisoned.features, ds.features);
        // Deterministic in seed.
        let again = poison_shard(&ds, PoisonMode::LabelShuffle, 11);
        assert_eq!(again.labels_onehot, poisoned.labels_onehot);
    }

    #[test]
    fn federated_split_covers_and_is_disjoint() {
        let ds = dataset_with_counts(&[120, 80, 40]);
        let plan = SplitPlan {
            seed: 5,
            ..SplitPlan::default()
        };
        let split = split_federated(&ds, &plan).unwrap();
        assert_eq!(split.provenance.len(), ds.n_samples());
        let mut seen = vec![false; ds.n_samples()];
        for rec in &split.provenance {
            assert!(!seen[rec.index], "sample {} assigned twice", rec.index);
            seen[rec.index] = true;
        }
        assert!(seen.iter().all(|&s| s));
        let total: usize = split
            .client_shards
            .iter()
            .map(EncodedDataset::n_samples)
            .sum::<usize>()
            + split.global_train.n_samples()
            + split.test.n_samples();
        assert_eq!(total, ds.n_samples());

        let table = split.provenance_table(&ds.class_names);
        assert!(table.starts_with("sample_id\tclass\tassignment\n"));
        assert_eq!(table.lines().count(), ds.n_samples() + 1);
    }

    proptest! {
        #[test]
        fn federated_split_invariants_hold_for_random_plans(
            seed in 0u64..1000,
            counts in proptest::collection::vec(8usize..60, 2..5),
            test_fraction in 0.1f64..0.5,
            global_fraction in 0.0f64..0.4,
            n_clients in 1usize..7,
        ) {
            let ds = dataset_with_counts(&counts);
            let plan = SplitPlan {
                test_fraction,
                global_train_fraction: global_fraction,
                n_clients,
                seed,
                stratify_shards: true,
            };
            if let Ok(split) = split_federated(&ds, &plan) {
                // Cover and disjointness.
                let mut seen = vec![false; ds.n_samples()];
                for rec in &split.provenance {
                    prop_assert!(!seen[rec.index]);
                    seen[rec.index] = true;
                }
                prop_assert!(seen.iter().all(|&s| s));
                // Shard sizes differ by at most one.
                let sizes: Vec<usize> =
                    split.client_shards.iter().map(EncodedDataset::n_samples).collect();
                let min = sizes.iter().min().unwrap();
                let max = sizes.iter().max().unwrap();
                prop_assert!(max - min <= 1, "shard sizes {sizes:?}");
                // Determinism.
                let again = split_federated(&ds, &plan).unwrap();
                prop_assert_eq!(again.provenance, split.provenance);
            }
        }
    }
}
