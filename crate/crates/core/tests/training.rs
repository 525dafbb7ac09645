use domain_bridge::blse::{load_model, save_model, train, tune, Init, Optimizer, TrainConfig};
use domain_bridge::corpus::LabeledCorpus;
use domain_bridge::lexicon::ProjectionLexicon;
use domain_bridge::synth::{generate_synthetic, Rotation, SyntheticSpec};
use domain_bridge::Error;

fn config() -> TrainConfig {
    TrainConfig {
        alpha: 0.5,
        epochs: 15,
        batch_size: 20,
        learning_rate: 0.01,
        seed: 9,
        init: Init::Glorot,
        optimizer: Optimizer::Adam,
        ablate_target_matrix: false,
        joint_dim: None,
    }
}

#[test]
fn joint_loss_at_least_halves() {
    let data = generate_synthetic(&SyntheticSpec::default()).unwrap();
    for optimizer in [Optimizer::Adam, Optimizer::Sgd] {
        let cfg = TrainConfig {
            optimizer,
            learning_rate: if optimizer == Optimizer::Sgd { 0.05 } else { 0.01 },
            ..config()
        };
        let (_, report) = train(
            &data.source_embeddings,
            &data.target_embeddings,
            &data.lexicon,
            &data.source.train,
            &data.source.dev,
            &cfg,
        )
        .unwrap();
        let last = *report.joint_loss.last().unwrap();
        assert!(last <= 0.5 * report.initial.joint, "{optimizer:?}: {last} vs initial {}", report.initial.joint);
    }
}

#[test]
fn zero_alpha_leaves_classifier_untrained() {
    let data = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let run = |seed, epochs| {
        train(
            &data.source_embeddings,
            &data.target_embeddings,
            &data.lexicon,
            &data.source.train,
            &data.source.dev,
            &TrainConfig {
                alpha: 0.0,
                seed,
                epochs,
                ..config()
            },
        )
        .unwrap()
    };
    let (short, _) = run(9, 1);
    let (long, _) = run(9, 15);
    assert_eq!(short.classifier, long.classifier);

    // A single run scores like a random linear classifier; averaged over
    // initializations it sits at chance.
    let runs = 32;
    let mean: f64 = (0..runs)
        .map(|seed| {
            let (_, report) = run(seed, 15);
            report.dev_macro_f1.iter().sum::<f64>() / report.dev_macro_f1.len() as f64
        })
        .sum::<f64>()
        / runs as f64;
    assert!((mean - 0.5).abs() <= 0.15, "mean dev F1 {mean}");
}

#[test]
fn equal_seeds_give_identical_runs() {
    let data = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let run = |seed| {
        train(
            &data.source_embeddings,
            &data.target_embeddings,
            &data.lexicon,
            &data.source.train,
            &data.source.dev,
            &TrainConfig { seed, ..config() },
        )
        .unwrap()
    };
    let (a, ra) = run(3);
    let (b, rb) = run(3);
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    let (c, _) = run(4);
    assert_ne!(a, c);
}

#[test]
fn best_epoch_parameters_are_returned() {
    let data = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let (_, report) = train(
        &data.source_embeddings,
        &data.target_embeddings,
        &data.lexicon,
        &data.source.train,
        &data.source.dev,
        &config(),
    )
    .unwrap();
    let best = report.best_dev_macro_f1().unwrap();
    let first_max = report.dev_macro_f1.iter().position(|&f| f == best).unwrap() + 1;
    assert_eq!(report.best_epoch, first_max);
    assert!(report.dev_macro_f1.iter().all(|&f| f <= best));
}

#[test]
fn unrotated_target_matches_source_with_one_matrix() {
    let spec = SyntheticSpec {
        rotation: Rotation::Identity,
        noise: 0.0,
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&spec).unwrap();
    let (model, _) = train(
        &data.source_embeddings,
        &data.target_embeddings,
        &data.lexicon,
        &data.source.train,
        &data.source.dev,
        &TrainConfig {
            ablate_target_matrix: true,
            ..config()
        },
    )
    .unwrap();
    let on_source = model.classify_source(&data.source_embeddings, &data.target_test, 1).unwrap();
    let on_target = model.classify_target(&data.target_embeddings, &data.target_test, 1).unwrap();
    assert_eq!(on_source, on_target);
}

#[test]
fn saved_model_reproduces_predictions() {
    let data = generate_synthetic(&SyntheticSpec {
        test_size: 1000,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let (model, _) = train(
        &data.source_embeddings,
        &data.target_embeddings,
        &data.lexicon,
        &data.source.train,
        &data.source.dev,
        &TrainConfig { epochs: 5, ..config() },
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded, model);
    let a = model.classify_target(&data.target_embeddings, &data.target_test, 0).unwrap();
    let b = loaded.classify_target(&data.target_embeddings, &data.target_test, 0).unwrap();
    assert_eq!(a.labels.len(), 1000);
    assert_eq!(a, b);

    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(load_model(&path).is_err());
}

#[test]
fn empty_inputs_are_rejected() {
    let data = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let empty = LabeledCorpus::new("empty", Vec::new());
    let err = train(
        &data.source_embeddings,
        &data.target_embeddings,
        &data.lexicon,
        &empty,
        &data.source.dev,
        &config(),
    );
    assert!(matches!(err, Err(Error::Config(_))));

    let unknown = ProjectionLexicon::new([("nope".to_string(), "nada".to_string())]);
    let err = train(
        &data.source_embeddings,
        &data.target_embeddings,
        &unknown,
        &data.source.train,
        &data.source.dev,
        &config(),
    );
    assert!(matches!(err, Err(Error::Config(_))));
}

#[test]
fn divergent_learning_rate_aborts() {
    let data = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let err = train(
        &data.source_embeddings,
        &data.target_embeddings,
        &data.lexicon,
        &data.source.train,
        &data.source.dev,
        &TrainConfig {
            optimizer: Optimizer::Sgd,
            learning_rate: 1e6,
            ..config()
        },
    );
    assert!(matches!(err, Err(Error::NonFiniteLoss { .. })), "{err:?}");
}

#[test]
fn tuning_keeps_the_best_trial() {
    let data = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let result = tune(
        &data.source_embeddings,
        &data.target_embeddings,
        &data.lexicon,
        &data.source.train,
        &data.source.dev,
        &TrainConfig { epochs: 5, ..config() },
        &[0.0, 0.5],
        &[20, 100],
    )
    .unwrap();
    assert_eq!(result.trials.len(), 4);
    let best = result.trials.iter().map(|t| t.dev_macro_f1).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(result.report.best_dev_macro_f1(), Some(best));
    assert!(result.report.config.alpha > 0.0);
}
