use std::collections::BTreeSet;
use std::fs;

use znnrad::ingest::{augment, group_of, load_dataset, split, write_pgm, IngestError};
use znnrad::{Dataset, GrayImage, Label, LabeledSample};

fn sample(id: &str, label: Label, value: f64) -> LabeledSample {
    LabeledSample {
        image: GrayImage::from_fn(8, 8, |r, c| (value + 0.01 * (r + c) as f64).min(1.0)).unwrap(),
        label,
        source_id: id.to_string(),
        augmented_from: None,
    }
}

fn toy() -> Dataset {
    let samples = (0..3)
        .flat_map(|k| {
            [
                sample(&format!("cancer/c{k}.pgm"), Label::Cancer, 0.6 + 0.05 * k as f64),
                sample(&format!("noncancer/n{k}.pgm"), Label::NonCancer, 0.2 + 0.05 * k as f64),
            ]
        })
        .collect();
    Dataset::new(samples).unwrap()
}

fn groups(d: &Dataset) -> BTreeSet<String> {
    d.samples().iter().map(|s| s.group().to_string()).collect()
}

#[test]
fn augmented_siblings_never_straddle_split() {
    for seed in 0..50 {
        let data = toy().augmented(4, seed).unwrap();
        assert_eq!(data.len(), 6 * 5);
        let (train, test) = split(&data, 0.3, seed).unwrap();
        assert!(groups(&train).is_disjoint(&groups(&test)));
        assert_eq!(train.len() + test.len(), data.len());
        for label in Label::ALL {
            assert!(train.count(label) > 0 && test.count(label) > 0);
        }
    }
}

#[test]
fn split_is_seed_deterministic() {
    let data = toy().augmented(3, 1).unwrap();
    let a = split(&data, 0.3, 5).unwrap();
    let b = split(&data, 0.3, 5).unwrap();
    assert_eq!(a.1.manifest_hash(), b.1.manifest_hash());
}

#[test]
fn augmentation_keeps_labels_and_parents() {
    let parent = sample("cancer/x.pgm", Label::Cancer, 0.5);
    let kids = augment(&parent, 15, 99).unwrap();
    assert_eq!(kids.len(), 15);
    for (k, child) in kids.iter().enumerate() {
        assert_eq!(child.label, Label::Cancer);
        assert_eq!(child.source_id, format!("cancer/x.pgm#aug{k:03}"));
        assert_eq!(group_of(&child.source_id), "cancer/x.pgm");
        assert!(child.image.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
    }
    assert_eq!(augment(&parent, 15, 99).unwrap(), kids);
}

#[test]
fn load_augment_split_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let originals = toy();
    for s in originals.samples() {
        let path = dir.path().join(&s.source_id);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        write_pgm(&path, &s.image).unwrap();
    }
    fs::write(dir.path().join("cancer/broken.pgm"), b"P5\n8 8\n255\nshort").unwrap();
    fs::write(dir.path().join("noncancer/notes.txt"), b"ignored").unwrap();

    let loaded = load_dataset::<f64>(dir.path()).unwrap();
    assert_eq!(loaded.skipped.len(), 1);
    assert!(loaded.skipped[0].path.ends_with("broken.pgm"));
    let data = loaded.dataset;
    assert_eq!(data.len(), 6);
    for (a, b) in data.samples().iter().zip(originals.samples()) {
        assert_eq!(a.source_id, b.source_id);
        assert_eq!(a.image.to_bytes(), b.image.to_bytes());
    }
    let (train, test) = split(&data.augmented(2, 3).unwrap(), 0.3, 3).unwrap();
    assert_eq!(train.len() + test.len(), 18);
    assert!(groups(&train).is_disjoint(&groups(&test)));
}

#[test]
fn missing_or_empty_class_directory_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("cancer")).unwrap();
    assert!(matches!(load_dataset::<f64>(dir.path()), Err(IngestError::Config(_))));
    fs::create_dir_all(dir.path().join("noncancer")).unwrap();
    write_pgm(&dir.path().join("cancer/a.pgm"), &GrayImage::filled(4, 4, 0.5).unwrap()).unwrap();
    assert!(matches!(load_dataset::<f64>(dir.path()), Err(IngestError::Config(_))));
}

#[test]
fn single_group_class_cannot_be_split() {
    let data = Dataset::new(vec![
        sample("cancer/a.pgm", Label::Cancer, 0.5),
        sample("noncancer/b.pgm", Label::NonCancer, 0.5),
        sample("noncancer/c.pgm", Label::NonCancer, 0.5),
    ])
    .unwrap()
    .augmented(3, 0)
    .unwrap();
    assert!(matches!(split(&data, 0.5, 0), Err(IngestError::Split(_))));
}
