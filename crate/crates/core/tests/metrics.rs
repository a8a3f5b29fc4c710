use znnrad::metrics::{accuracy, confusion, emit_report, roc_score, ConfusionCounts, EvalReport, SampleOutcome};
use znnrad::Label;

fn labels(c: &ConfusionCounts) -> (Vec<Label>, Vec<Label>) {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for (n, t, p) in [
        (c.tp, Label::Cancer, Label::Cancer),
        (c.tn, Label::NonCancer, Label::NonCancer),
        (c.fp, Label::NonCancer, Label::Cancer),
        (c.fn_, Label::Cancer, Label::NonCancer),
    ] {
        for _ in 0..n {
            truth.push(t);
            pred.push(p);
        }
    }
    (truth, pred)
}

#[test]
fn exhaustive_small_confusions() {
    let mut checked = 0;
    for tp in 0..=10u64 {
        for tn in 0..=10u64 {
            for fp in 0..=10u64 {
                for fn_ in 0..=10u64 {
                    let c = ConfusionCounts { tp, tn, fp, fn_ };
                    if c.total() == 0 {
                        assert!(accuracy::<f64>(&c).is_err());
                        continue;
                    }
                    let (truth, pred) = labels(&c);
                    assert_eq!(confusion(&truth, &pred).unwrap(), c);
                    let acc: f64 = accuracy(&c).unwrap();
                    assert_eq!(acc, (tp + tn) as f64 / c.total() as f64);
                    assert!((0.0..=1.0).contains(&acc));
                    let (pos, neg) = (tp + fn_, tn + fp);
                    if pos == 0 || neg == 0 {
                        assert!(roc_score::<f64>(&c).is_err());
                        continue;
                    }
                    let roc: f64 = roc_score(&c).unwrap();
                    let expected = 0.5 * (tp as f64 / pos as f64 + tn as f64 / neg as f64);
                    assert!((roc - expected).abs() <= 1e-15);
                    // equal sensitivity and specificity: tp·neg == tn·pos
                    if tp * neg == tn * pos {
                        assert!((roc - acc).abs() <= 1e-12, "{c:?}");
                    }
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 10_000);
}

#[test]
fn mismatched_lengths_rejected() {
    assert!(confusion(&[Label::Cancer], &[]).is_err());
}

#[test]
fn report_files_are_written() {
    let outcomes = vec![
        SampleOutcome { source_id: "cancer/a.pgm".into(), truth: Label::Cancer, predicted: Label::Cancer, score: 0.5 },
        SampleOutcome {
            source_id: "noncancer/b.pgm".into(),
            truth: Label::NonCancer,
            predicted: Label::Cancer,
            score: 0.1,
        },
    ];
    let report = EvalReport::from_outcomes(outcomes, 42, "abc123".into()).unwrap();
    assert_eq!(report.accuracy, 0.5);
    assert_eq!(report.roc, 0.5);
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_report(&report, dir.path()).unwrap();
    assert_eq!(paths.len(), 3);
    let back: EvalReport = serde_json::from_str(&std::fs::read_to_string(&paths[0]).unwrap()).unwrap();
    assert_eq!(back, report);
    let csv = std::fs::read_to_string(&paths[1]).unwrap();
    assert!(csv.starts_with("source_id,true_label,predicted_label,score\n"));
    assert!(csv.trim_end().ends_with("# config_digest=abc123"));
    let svg = std::fs::read_to_string(&paths[2]).unwrap();
    assert!(svg.contains("abc123") && svg.contains("class=\"bar\""));
}
