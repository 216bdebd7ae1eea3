use domepilot_core::knn::Scaling;
use domepilot_core::model::{Classifier, ModelKind, SavedModel};
use domepilot_core::pipeline::{evaluate_on_split, train, KChoice, TrainSpec};
use domepilot_core::rng::SplitMix64;
use domepilot_core::synthetic::synthetic_observations;
use domepilot_core::weather_data::{to_samples, ConditionTable, LabeledSample};
use domepilot_core::Error;

fn samples(n: usize, seed: u64) -> Vec<LabeledSample> {
    to_samples(&synthetic_observations(n, seed), &ConditionTable::builtin()).0
}

fn probes(rng: &mut SplitMix64, n: usize) -> Vec<[f64; 6]> {
    (0..n)
        .map(|_| {
            [
                rng.uniform(0.0, 45.0),
                rng.uniform(0.0, 30.0),
                rng.uniform(0.05, 0.9),
                rng.next_below(24) as f64,
                rng.uniform(1.0, 16.0),
                rng.uniform(995.0, 1030.0),
            ]
        })
        .collect()
}

fn specs() -> Vec<TrainSpec> {
    let mut scaled = TrainSpec::defaults(ModelKind::Knn);
    scaled.scaling = Scaling::Standardize;
    scaled.k = KChoice::Fixed(7);
    vec![
        TrainSpec::defaults(ModelKind::Dt),
        TrainSpec::defaults(ModelKind::Knn),
        scaled,
    ]
}

#[test]
fn save_load_preserves_predictions() {
    let data = samples(1200, 3);
    let mut rng = SplitMix64::new(99);
    let probes = probes(&mut rng, 1000);
    for spec in specs() {
        let saved = train(&data, &spec).unwrap();
        let json = saved.to_json().unwrap();
        let loaded = SavedModel::from_json(&json).unwrap();
        assert_eq!(loaded, saved);
        assert_eq!(loaded.to_json().unwrap(), json);
        for p in &probes {
            assert_eq!(
                loaded.model.predict(p).unwrap(),
                saved.model.predict(p).unwrap()
            );
        }
    }
}

#[test]
fn same_seed_same_bytes() {
    let data = samples(1200, 4);
    for spec in specs() {
        let a = train(&data, &spec).unwrap();
        let b = train(&data, &spec).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let ra = evaluate_on_split(&a.model, &data, &spec.split).unwrap();
        let rb = evaluate_on_split(&b.model, &data, &spec.split).unwrap();
        assert_eq!(
            serde_json::to_string(&ra).unwrap(),
            serde_json::to_string(&rb).unwrap()
        );
        assert_eq!(ra.to_table(), rb.to_table());
    }
}

#[test]
fn corrupt_files_are_rejected() {
    let data = samples(300, 5);
    let json = train(&data, &TrainSpec::defaults(ModelKind::Knn))
        .unwrap()
        .to_json()
        .unwrap();
    for cut in [0, 1, json.len() / 3, json.len() - 1] {
        assert!(SavedModel::from_json(&json[..cut]).is_err(), "cut {cut}");
    }
    let bumped = json.replace("\"version\":1", "\"version\":2");
    assert!(matches!(
        SavedModel::from_json(&bumped),
        Err(Error::VersionMismatch {
            found: 2,
            supported: 1
        })
    ));
    let wrong_kind = json.replace("\"model\":\"knn\"", "\"model\":\"svm\"");
    assert!(SavedModel::from_json(&wrong_kind).is_err());
    let bad_k = json.replace("\"k\":", "\"k\":99999");
    assert!(SavedModel::from_json(&bad_k).is_err());
}
