mod common;

use stress_explain::corpus::{Corpus, Split};
use stress_explain::harness::evaluate_classifier;
use stress_explain::models::{
    load_model, save_model, train_mlp, train_nb, Classifier, MlpConfig, NbVariant, ProbModel, Target,
};

#[test]
fn mlp_gradient_matches_finite_differences() {
    let err = common::mlp_gradient_max_rel_error();
    assert!(err <= 1e-4, "max relative error {err}");
}

#[test]
fn naive_bayes_matches_hand_computation() {
    let err = common::nb_hand_oracle_max_error();
    assert!(err <= 1e-9, "max error {err}");
}

#[test]
fn trained_models_survive_persistence() {
    let train = Corpus::from_documents(common::synthetic_documents(150, 8, "tr"), Split::Train).unwrap();
    let test = Corpus::from_documents(common::synthetic_documents(30, 9, "te"), Split::Test).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let models = [
        ProbModel::NaiveBayes(train_nb(&train, Target::Context, NbVariant::Bernoulli, 1.0).unwrap()),
        ProbModel::Mlp(
            train_mlp(
                &train,
                Target::Context,
                &MlpConfig {
                    max_epochs: 20,
                    ..MlpConfig::default()
                },
            )
            .unwrap(),
        ),
    ];
    for (i, model) in models.into_iter().enumerate() {
        let path = dir.path().join(format!("m{i}.json"));
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.kind(), model.kind());
        for doc in test.iter() {
            assert_eq!(model.predict(&doc.raw_text).unwrap(), loaded.predict(&doc.raw_text).unwrap());
        }
        let report = evaluate_classifier(&loaded, &test, Target::Context).unwrap();
        assert!(report.accuracy > 0.8, "{report:?}");
    }
}
