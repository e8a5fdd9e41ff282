use std::collections::BTreeMap;

use alscast_core::eval::rmse;
use alscast_core::learning::{
    chunk_by_days, fine_tune, fit_cohort_model, fit_individual_batch, split_chronological, FineTuneMode, LearningConfig,
};
use alscast_core::model::{LabeledDataset, LabeledRow, ParticipantId, SplitDataset, SubscaleId, Technique};
use alscast_core::rng::PortableRng;
use alscast_core::tuning::SearchSpace;
use chrono::{Duration, NaiveDate};

fn participant_split(id: &str, days: i64, seed: u64) -> SplitDataset {
    let mut rng = PortableRng::new(seed);
    let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
    let names: Vec<String> = (0..6).map(|j| format!("pulse_day_f{j}")).collect();
    let rows = (0..days)
        .map(|d| {
            let latent = 4.0 - 3.0 * d as f64 / 300.0;
            let features: Vec<f64> = (0..6).map(|j| latent * (j as f64 - 2.5) + rng.normal(0.0, 0.5)).collect();
            LabeledRow {
                participant: ParticipantId::new(id),
                date: start + Duration::days(d),
                features,
                target: latent,
            }
        })
        .collect();
    let data = LabeledDataset::new(names, SubscaleId::Walking, Technique::Linear, rows).unwrap();
    split_chronological(&data).unwrap()
}

fn cohort() -> BTreeMap<ParticipantId, SplitDataset> {
    [("P1", 200, 1), ("P2", 120, 2), ("P3", 150, 3)]
        .into_iter()
        .map(|(id, days, seed)| (ParticipantId::new(id), participant_split(id, days, seed)))
        .collect()
}

fn config() -> LearningConfig {
    LearningConfig {
        n_iter: 3,
        fine_tune_budget: 20,
        space: SearchSpace {
            n_estimators: vec![16, 32],
            max_depth: vec![2, 3],
            ..SearchSpace::default()
        },
        ..LearningConfig::default()
    }
}

#[test]
fn cohort_model_excludes_target() {
    let splits = cohort();
    let target = ParticipantId::new("P2");
    let model = fit_cohort_model(&splits, &target, &config(), 5).unwrap();
    assert!(!model.sources.contains(&target));
    assert_eq!(model.sources.len(), 2);
    let expected: usize = model.sources.iter().map(|p| splits[p].train.len()).sum();
    assert_eq!(model.pool_rows, expected);
}

#[test]
fn both_modes_share_cohort_model() {
    let splits = cohort();
    let target = ParticipantId::new("P1");
    let a = fit_cohort_model(&splits, &target, &config(), 5).unwrap();
    let b = fit_cohort_model(&splits, &target, &config(), 5).unwrap();
    assert_eq!(a.tuned.model, b.tuned.model);
}

#[test]
fn incremental_tree_count() {
    let splits = cohort();
    let target = ParticipantId::new("P1");
    let cfg = config();
    let cohort_model = fit_cohort_model(&splits, &target, &cfg, 5).unwrap();
    let base_trees = cohort_model.tuned.model.trees.len();
    let split = &splits[&target];
    let k = chunk_by_days(&split.train, cfg.chunk_days).len();
    let run = fine_tune(&cohort_model, split, FineTuneMode::Incremental, &cfg, 5).unwrap();
    assert_eq!(run.model.trees.len(), base_trees + k * cfg.fine_tune_budget.div_ceil(k));
    let batch = fine_tune(&cohort_model, split, FineTuneMode::Batch, &cfg, 5).unwrap();
    assert_eq!(batch.model.trees.len(), base_trees + cfg.fine_tune_budget);
}

#[test]
fn too_few_sources_rejected() {
    let mut splits = cohort();
    splits.remove(&ParticipantId::new("P3"));
    assert!(fit_cohort_model(&splits, &ParticipantId::new("P1"), &config(), 5).is_err());
}

#[test]
fn individual_batch_beats_training_mean() {
    let splits = cohort();
    let target = ParticipantId::new("P3");
    let split = &splits[&target];
    let (run, _) = fit_individual_batch(&target, split, &config(), 9).unwrap();
    let train_mean = split.train.targets().iter().sum::<f64>() / split.train.len() as f64;
    let baseline = rmse(&split.test.targets(), &vec![train_mean; split.test.len()]).unwrap();
    let got = rmse(&run.test_targets, &run.predictions).unwrap();
    assert!(got.is_finite() && got <= baseline, "{got} vs mean baseline {baseline}");
}
