use std::path::PathBuf;

use choicekit_core::choice::{filter_experiment_subset, load_choices13k, read_canonical, write_canonical};

fn sample() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/choices13k_sample.csv")
}

#[test]
fn bundled_sample_has_known_flag_counts() {
    let ds = load_choices13k(sample()).unwrap();
    assert_eq!(ds.len(), 200);
    let amb = ds.problems().filter(|p| p.ambiguous).count();
    let no_feedback = ds.problems().filter(|p| !p.feedback).count();
    let both = ds.problems().filter(|p| p.ambiguous && !p.feedback).count();
    assert_eq!((amb, no_feedback, both), (40, 50, 10));
    let kept = filter_experiment_subset(&ds);
    assert_eq!(kept.len(), 120);
    assert_eq!(filter_experiment_subset(&kept), kept);
}

#[test]
fn lotteries_keep_expected_value() {
    let ds = load_choices13k(sample()).unwrap();
    let with_lottery: Vec<_> = ds.problems().filter(|p| p.gamble_b.len() > 2).collect();
    assert!(!with_lottery.is_empty());
    for p in with_lottery {
        p.gamble_b.validate().unwrap();
    }
}

#[test]
fn canonical_file_round_trips() {
    let ds = load_choices13k(sample()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sample.jsonl");
    write_canonical(&ds, std::fs::File::create(&path).unwrap()).unwrap();
    let back = read_canonical(&path).unwrap();
    assert_eq!(back.len(), ds.len());
    assert_eq!(back.human_props(), ds.human_props());
    assert_eq!(back.max_ev_vector(), ds.max_ev_vector());
}
