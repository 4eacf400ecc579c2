use unmasking_trees::coding::FeatureCoding;
use unmasking_trees::dataset::{iris, two_moons, Field, Schema, TabularDataset};
use unmasking_trees::engine::{self, EngineConfig, UnmaskingModel};
use unmasking_trees::gbdt::GbdtParams;
use unmasking_trees::Error;

fn quick() -> EngineConfig {
    EngineConfig {
        k_dup: 10,
        tree: GbdtParams {
            rounds: 30,
            ..GbdtParams::default()
        },
        ..EngineConfig::default()
    }
}

#[test]
fn moons_model_classifier_sizes() {
    let data = two_moons(200, 0.1, 0).unwrap();
    let model = engine::fit(&data, &EngineConfig::default()).unwrap();
    assert_eq!(model.classifiers().len(), 2);
    for j in 0..2 {
        assert_eq!(model.classifiers()[j].n_classes(), model.codings()[j].n_classes());
        assert_eq!(model.codings()[j].n_classes(), 20);
    }
}

#[test]
fn saved_model_generates_identically() {
    let data = two_moons(200, 0.1, 1).unwrap();
    let model = engine::fit(&data, &quick()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("moons.umtr");
    engine::save_model(&model, &path).unwrap();
    let loaded = engine::load_model(&path).unwrap();
    assert_eq!(engine::generate(&loaded, 200, 0).unwrap(), engine::generate(&model, 200, 0).unwrap());
    let holey = data.with_cells_masked(0, 0..50).unwrap();
    assert_eq!(
        engine::impute(&loaded, &holey, 2, 5).unwrap(),
        engine::impute(&model, &holey, 2, 5).unwrap()
    );
}

#[test]
fn refit_gives_identical_bytes() {
    let data = iris();
    let a = engine::fit(&data, &quick()).unwrap().to_bytes();
    let b = engine::fit(&data, &quick()).unwrap().to_bytes();
    assert_eq!(a, b);
    let other = EngineConfig { seed: 1, ..quick() };
    assert_ne!(engine::fit(&data, &other).unwrap().to_bytes(), a);
}

#[test]
fn corrupted_file_yields_no_model() {
    let model = engine::fit(&two_moons(60, 0.1, 2).unwrap(), &quick()).unwrap();
    let mut bytes = model.to_bytes();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    assert!(matches!(UnmaskingModel::from_bytes(&bytes), Err(Error::Checksum { .. })));
}

#[test]
fn iris_categorical_species_round_trips() {
    let data = iris();
    let model = engine::fit(&data, &quick()).unwrap();
    assert_eq!(model.classifiers().len(), 5);
    assert!(matches!(model.codings()[4], FeatureCoding::Categorical { cardinality: 3 }));
    let out = engine::generate(&model, 300, 3).unwrap();
    let species = out.column(4);
    assert!(species.iter().all(|&s| s == 0.0 || s == 1.0 || s == 2.0));
    for s in 0..3 {
        // every species turns up in a 300-row sample
        assert!(species.iter().filter(|&&v| v == s as f64).count() > 30);
    }
}

#[test]
fn generated_values_respect_training_ranges() {
    let data = iris();
    let model = engine::fit(&data, &quick()).unwrap();
    let out = engine::generate(&model, 500, 8).unwrap();
    for j in 0..4 {
        let (lo, hi) = model.train_ranges()[j];
        assert!(out.column(j).iter().all(|&v| v >= lo && v <= hi), "feature {j}");
    }
}

#[test]
fn multiple_imputations_differ_only_on_missing_cells() {
    let truth = two_moons(100, 0.1, 4).unwrap();
    let masked = truth.with_cells_masked(1, (0..100).step_by(4)).unwrap();
    let model = engine::fit(&masked, &quick()).unwrap();
    let outs = engine::impute(&model, &masked, 10, 9).unwrap();
    assert_eq!(outs.len(), 10);
    let mut differing_cells = 0;
    for i in 0..100 {
        for j in 0..2 {
            let values: Vec<u64> = outs.iter().map(|o| o.value(i, j).unwrap().to_bits()).collect();
            let all_same = values.iter().all(|&v| v == values[0]);
            if masked.is_observed(i, j) {
                assert!(all_same);
            } else if !all_same {
                differing_cells += 1;
            }
        }
    }
    assert!(differing_cells > 0);
}

#[test]
fn single_feature_generation_matches_marginal_within_3_se() {
    let values: Vec<Option<f64>> = (0..400).map(|i| Some(((i * 37) % 101) as f64 / 10.0)).collect();
    let data = TabularDataset::from_columns(Schema::new(vec![Field::continuous("v")]).unwrap(), vec![values]).unwrap();
    let config = EngineConfig { top_p: 1.0, ..quick() };
    let model = engine::fit(&data, &config).unwrap();
    let FeatureCoding::Binned(spec) = &model.codings()[0] else {
        panic!("expected bins");
    };
    let n = 20_000;
    let out = engine::generate(&model, n, 1).unwrap();
    let mut counts = vec![0usize; spec.n_bins()];
    for &v in out.column(0) {
        counts[spec.transform(v)] += 1;
    }
    for (k, &c) in counts.iter().enumerate() {
        let p = model.marginals()[0][k];
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let f = c as f64 / n as f64;
        // the model's probabilities sit within 1e-3 of the stored marginal
        assert!((f - p).abs() < 3.0 * se + 1e-3, "bin {k}: {f} vs {p}");
    }
}

#[test]
fn single_bin_generation_is_uniform_over_range() {
    let data = two_moons(200, 0.1, 6).unwrap();
    let config = EngineConfig { n_bins: 1, ..quick() };
    let model = engine::fit(&data, &config).unwrap();
    let out = engine::generate(&model, 4000, 2).unwrap();
    for j in 0..2 {
        let (lo, hi) = model.train_ranges()[j];
        let col = out.column(j);
        assert!(col.iter().all(|&v| v >= lo && v <= hi));
        // uniform: the mean is the midpoint and a quarter falls in each quarter
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let sd = (hi - lo) / 12f64.sqrt() / (col.len() as f64).sqrt();
        assert!((mean - (lo + hi) / 2.0).abs() < 4.0 * sd);
        let first_quarter = col.iter().filter(|&&v| v < lo + (hi - lo) / 4.0).count() as f64 / col.len() as f64;
        assert!((first_quarter - 0.25).abs() < 0.03);
    }
}
