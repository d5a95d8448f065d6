use flowsentinel_core::model::{build_model, ArchitectureConfig};
use flowsentinel_core::optim::AdamConfig;
use flowsentinel_core::pipeline::{
    apply_standardizer, encode_labels, fit_standardizer, one_hot_rows, PreprocState,
};
use flowsentinel_core::synthetic::{gaussian_blobs, standard_normal};
use flowsentinel_core::trainer::{evaluate, fit, predict, score, train, Samples};
use flowsentinel_core::{seeded_rng, Dataset, Error, Task, Taxonomy, Tensor, TrainConfig};

fn samples(ds: &Dataset, preproc: &PreprocState) -> Samples {
    let idx: Vec<usize> = ds
        .raw_labels
        .iter()
        .map(|l| preproc.class_index(l).unwrap())
        .collect();
    Samples::new(
        apply_standardizer(&preproc.standardizer, &ds.features).unwrap(),
        one_hot_rows(&idx, preproc.class_count()).unwrap(),
    )
    .unwrap()
}

fn preproc_for(train_ds: &Dataset) -> PreprocState {
    let (map, _) = encode_labels(&train_ds.raw_labels).unwrap();
    PreprocState::new(
        fit_standardizer(&train_ds.features).unwrap(),
        map,
        Task::Multiclass,
    )
    .unwrap()
}

/// 32 standard-normal samples, 16 features, labels assigned round-robin to 3
/// classes, so memorizing them needs the full network.
fn noise_batch() -> Dataset {
    let mut rng = seeded_rng(77);
    let data: Vec<f64> = (0..32 * 16).map(|_| standard_normal(&mut rng)).collect();
    Dataset::new(
        Tensor::new(vec![32, 16], data).unwrap(),
        (0..32).map(|i| format!("c{}", i % 3)).collect(),
        "noise".into(),
        (0..16).map(|j| format!("f{j}")).collect(),
    )
    .unwrap()
}

fn memorize_cfg() -> TrainConfig {
    TrainConfig {
        epochs: 300,
        adam: AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    }
}

#[test]
fn separable_blobs_reach_high_validation_accuracy() {
    let train_ds = gaussian_blobs(100, 3, 16, 5.0, 1).unwrap();
    let val_ds = gaussian_blobs(20, 3, 16, 5.0, 2).unwrap();
    let preproc = preproc_for(&train_ds);
    let model = build_model(ArchitectureConfig::new(16, 3), &mut seeded_rng(3)).unwrap();
    let (model, hist) = train(
        model,
        &samples(&train_ds, &preproc),
        &samples(&val_ds, &preproc),
        &TrainConfig::default(),
    )
    .unwrap();
    assert_eq!(hist.epochs.len(), 10);
    let acc = hist.epochs.last().unwrap().val_accuracy.unwrap();
    assert!(acc >= 0.95, "validation accuracy {acc}");

    let report = evaluate(
        &model,
        &preproc,
        &val_ds,
        &Taxonomy::parse("prefix,blob,x").unwrap(),
        Task::Multiclass,
    );
    // blob labels are not covered by category rules, but multiclass keeps them raw
    assert!(report.is_ok());
}

#[test]
fn memorizes_a_single_batch() {
    let ds = noise_batch();
    let preproc = preproc_for(&ds);
    let set = samples(&ds, &preproc);
    let model = build_model(ArchitectureConfig::new(16, 3), &mut seeded_rng(5)).unwrap();
    let empty = Samples::new(
        Tensor::zeros(&[0, 16, 1]).unwrap(),
        Tensor::zeros(&[0, 3]).unwrap(),
    )
    .unwrap();
    let (model, hist) = train(model, &set, &empty, &memorize_cfg()).unwrap();

    let (_, acc) = score(&model, &set).unwrap();
    assert_eq!(acc, 1.0);

    // predictions on the raw training rows give back their labels
    let pred = predict(&model, &preproc, &ds.features).unwrap();
    for (i, &c) in pred.classes.iter().enumerate() {
        assert_eq!(preproc.label_map[c], ds.raw_labels[i]);
        let total: f64 = pred.probabilities.row(i).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    // the full-batch loss keeps falling after Adam's warm-up until it is small
    let losses: Vec<f64> = hist.epochs.iter().map(|e| e.train_loss).collect();
    for w in losses[10..].windows(2) {
        if w[0] < 1e-2 {
            break;
        }
        assert!(w[1] < w[0], "loss rose from {} to {}", w[0], w[1]);
    }
    assert!(losses.iter().any(|&l| l < 1e-2));

    let report = evaluate(
        &model,
        &preproc,
        &ds,
        &Taxonomy::parse("prefix,c,x").unwrap(),
        Task::Multiclass,
    )
    .unwrap();
    assert_eq!(report.accuracy, 1.0);
    for (i, row) in report.confusion.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            assert!(i == j || v == 0);
        }
    }
}

#[test]
fn identical_inputs_reproduce_bit_for_bit() {
    let ds = gaussian_blobs(30, 3, 12, 3.0, 9).unwrap();
    let tax = Taxonomy::parse("prefix,blob,blob").unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        seed: 1234,
        ..TrainConfig::default()
    };
    let a = fit(&ds, &tax, Task::Multiclass, &cfg, |_, _| {}).unwrap();
    let b = fit(&ds, &tax, Task::Multiclass, &cfg, |_, _| {}).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.history, b.history);
    assert_eq!(a.validation, b.validation);
    for (x, y) in a.model.params().iter().zip(b.model.params()) {
        assert!(x
            .data()
            .iter()
            .zip(y.data())
            .all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    let c = fit(
        &ds,
        &tax,
        Task::Multiclass,
        &TrainConfig { seed: 1235, ..cfg },
        |_, _| {},
    )
    .unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn early_stopping_restores_best_epoch() {
    // heavily overlapping blobs with a large learning rate overfit quickly
    let train_ds = gaussian_blobs(20, 2, 12, 0.3, 4).unwrap();
    let val_ds = gaussian_blobs(40, 2, 12, 0.3, 5).unwrap();
    let preproc = preproc_for(&train_ds);
    let (tr, va) = (samples(&train_ds, &preproc), samples(&val_ds, &preproc));
    let cfg = TrainConfig {
        epochs: 60,
        batch_size: 8,
        early_stop_patience: 3,
        adam: AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let model = build_model(ArchitectureConfig::new(12, 2), &mut seeded_rng(8)).unwrap();
    let (model, hist) = train(model, &tr, &va, &cfg).unwrap();
    assert!(hist.stopped_early, "expected an early stop in 60 epochs");
    let best = hist.best_epoch.unwrap();
    assert_eq!(hist.epochs.len(), best + 1 + 3);
    let best_loss = hist.epochs[best].val_loss.unwrap();
    assert!(hist.epochs.iter().all(|e| e.val_loss.unwrap() >= best_loss));
    let (restored_loss, _) = score(&model, &va).unwrap();
    assert_eq!(restored_loss, best_loss);
}

#[test]
fn best_epoch_tracks_minimum_validation_loss() {
    let train_ds = gaussian_blobs(20, 2, 12, 2.0, 10).unwrap();
    let val_ds = gaussian_blobs(10, 2, 12, 2.0, 11).unwrap();
    let preproc = preproc_for(&train_ds);
    let model = build_model(ArchitectureConfig::new(12, 2), &mut seeded_rng(1)).unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let (_, hist) = train(
        model,
        &samples(&train_ds, &preproc),
        &samples(&val_ds, &preproc),
        &cfg,
    )
    .unwrap();
    let losses: Vec<f64> = hist.epochs.iter().map(|e| e.val_loss.unwrap()).collect();
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(losses[hist.best_epoch.unwrap()], min);
    assert!(!hist.stopped_early);
}

#[test]
fn training_errors() {
    let arch = ArchitectureConfig::new(12, 2);
    let model = build_model(arch, &mut seeded_rng(1)).unwrap();
    let empty = Samples::new(
        Tensor::zeros(&[0, 12, 1]).unwrap(),
        Tensor::zeros(&[0, 2]).unwrap(),
    )
    .unwrap();
    let err = train(model.clone(), &empty, &empty, &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Validation(_)));

    let three = Samples::new(
        Tensor::zeros(&[1, 12, 1]).unwrap(),
        Tensor::new(vec![1, 3], vec![0.0, 1.0, 0.0]).unwrap(),
    )
    .unwrap();
    let err = train(model.clone(), &three, &empty, &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Dimension(_)));

    let bad = TrainConfig {
        batch_size: 0,
        ..TrainConfig::default()
    };
    let two = Samples::new(
        Tensor::zeros(&[1, 12, 1]).unwrap(),
        Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap(),
    )
    .unwrap();
    assert!(matches!(
        train(model, &two, &empty, &bad),
        Err(Error::Config(_))
    ));
}

#[test]
fn tied_logits_predict_lowest_class() {
    // zero weights everywhere give identical logits for every class
    let arch = ArchitectureConfig::new(12, 4);
    let mut model = build_model(arch, &mut seeded_rng(1)).unwrap();
    for p in model.params_mut() {
        p.data_mut().fill(0.0);
    }
    let preproc = PreprocState::new(
        fit_standardizer(&Tensor::new(vec![2, 12], (0..24).map(f64::from).collect()).unwrap())
            .unwrap(),
        vec!["a".into(), "b".into(), "c".into(), "d".into()],
        Task::Multiclass,
    )
    .unwrap();
    let pred = predict(&model, &preproc, &Tensor::zeros(&[3, 12]).unwrap()).unwrap();
    assert_eq!(pred.classes, vec![0, 0, 0]);
    assert!(pred.probabilities.data().iter().all(|&p| p == 0.25));

    let err = predict(&model, &preproc, &Tensor::zeros(&[1, 11]).unwrap()).unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
}

#[test]
fn evaluate_contract_checks() {
    let ds = gaussian_blobs(10, 2, 12, 5.0, 3).unwrap();
    let labels: Vec<String> = ds
        .raw_labels
        .iter()
        .map(|l| {
            if l == "blob0" {
                "Benign".into()
            } else {
                "DDoS-X".into()
            }
        })
        .collect();
    let ds = Dataset::new(
        ds.features.clone(),
        labels,
        "x".into(),
        ds.feature_names.clone(),
    )
    .unwrap();
    let tax = Taxonomy::default();
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    let out = fit(&ds, &tax, Task::Binary, &cfg, |_, _| {}).unwrap();
    assert_eq!(out.preproc.label_map, ["Attack", "Benign"]);

    let err = evaluate(&out.model, &out.preproc, &ds, &tax, Task::Multiclass).unwrap_err();
    assert!(matches!(err, Error::Config(_)));

    let empty = ds.select(&[]).unwrap();
    let err = evaluate(&out.model, &out.preproc, &empty, &tax, Task::Binary).unwrap_err();
    assert!(matches!(err, Error::Validation(_)));

    let report = evaluate(&out.model, &out.preproc, &ds, &tax, Task::Binary).unwrap();
    assert_eq!(report.total(), 20);
}

#[test]
fn fit_rejects_empty_and_uncovered_data() {
    let ds = gaussian_blobs(5, 2, 12, 5.0, 3).unwrap();
    let err = fit(
        &ds.select(&[]).unwrap(),
        &Taxonomy::default(),
        Task::Binary,
        &TrainConfig::default(),
        |_, _| {},
    )
    .unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
    let err = fit(
        &ds,
        &Taxonomy::default(),
        Task::Binary,
        &TrainConfig::default(),
        |_, _| {},
    )
    .unwrap_err();
    assert!(matches!(err, Error::Taxonomy(ref m) if m.contains("blob0")));
}
