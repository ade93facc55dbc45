use litkg::metrics::{confusion, ConfusionCounts, Metrics, DEFAULT_THRESHOLD};
use proptest::prelude::*;

fn counts() -> impl Strategy<Value = ConfusionCounts> {
    (0u64..50, 0u64..50, 0u64..50, 0u64..50).prop_map(|(tp, tn, fp, r#fn)| ConfusionCounts { tp, tn, fp, r#fn })
}

#[test]
fn fixture_from_scores() {
    let preds = [0.91, 0.05, 0.62, 0.49, 0.77, 0.12, 0.5, 0.3];
    let labels = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0];
    let m = Metrics::evaluate(&preds, &labels, DEFAULT_THRESHOLD).unwrap();
    assert!((m.acc - 0.625).abs() < 1e-9);
    assert!((m.precision - 0.75).abs() < 1e-9);
    assert!((m.recall - 0.6).abs() < 1e-9);
    assert!((m.f1 - 0.6667).abs() < 1e-4);
}

#[test]
fn all_negative_predictions() {
    let m = Metrics::evaluate(&[0.1, 0.2], &[1.0, 0.0], 0.5).unwrap();
    assert_eq!(m.acc, 0.5);
    assert_eq!(m.f1, 0.0);
    assert!(m.flags.precision_undefined);
    assert!(!m.flags.recall_undefined);
}

#[test]
fn empty_input_is_flagged() {
    let m = Metrics::evaluate(&[], &[], 0.5).unwrap();
    assert!(m.flags.accuracy_undefined);
    assert_eq!(m.acc, 0.0);
}

proptest! {
    #[test]
    fn f1_is_harmonic_mean(c in counts()) {
        let m = Metrics::from_counts(c);
        if m.precision > 0.0 && m.recall > 0.0 {
            let h = 2.0 / (1.0 / m.precision + 1.0 / m.recall);
            prop_assert!((m.f1 - h).abs() < 1e-12);
        } else {
            prop_assert_eq!(m.f1, 0.0);
        }
        for v in [m.acc, m.precision, m.recall, m.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
        prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-12 || m.f1 == 0.0);
    }

    #[test]
    fn invariant_under_permutation(
        pairs in prop::collection::vec((0.0f64..1.0, prop::bool::ANY), 1..60),
        shift in 0usize..60,
    ) {
        let preds: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let labels: Vec<f64> = pairs.iter().map(|p| if p.1 { 1.0 } else { 0.0 }).collect();
        let k = shift % pairs.len();
        let mut rp = preds.clone();
        let mut rl = labels.clone();
        rp.rotate_left(k);
        rl.rotate_left(k);
        rp.reverse();
        rl.reverse();
        prop_assert_eq!(Metrics::evaluate(&preds, &labels, 0.5).unwrap(), Metrics::evaluate(&rp, &rl, 0.5).unwrap());
        prop_assert_eq!(confusion(&preds, &labels, 0.5).unwrap().total(), pairs.len() as u64);
    }

    #[test]
    fn perfect_scores_give_one(labels in prop::collection::vec(prop::bool::ANY, 1..40)) {
        prop_assume!(labels.iter().any(|&b| b));
        let y: Vec<f64> = labels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let m = Metrics::evaluate(&y, &y, 0.5).unwrap();
        prop_assert_eq!((m.acc, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }
}
