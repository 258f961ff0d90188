use deeptective::corpus::Label;
use deeptective::metrics::{confusion, labels_from_counts, render_table, BinaryCounts, TableFormat, TABLE_COLUMNS};
use proptest::prelude::*;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 0.005
}

#[test]
fn published_rows_reproduce() {
    // cross-project row: 240 TN, 32 FN, 241 TP, 33 FP
    let (t, p) = labels_from_counts(BinaryCounts { tn: 240, fn_: 32, tp: 241, fp: 33 });
    let r = confusion(&t, &p).unwrap();
    assert_eq!(r.binary(), BinaryCounts { tn: 240, fn_: 32, tp: 241, fp: 33 });
    assert!(close(r.accuracy(), 88.10), "{}", r.accuracy());
    assert!(close(r.precision(), 87.96), "{}", r.precision());
    assert!(close(r.recall(), 88.28), "{}", r.recall());
    assert!(close(r.f1(), 88.12), "{}", r.f1());

    // function-level SARD row: 277 TN, 0 FN, 149 TP, 16 FP
    let b = BinaryCounts { tn: 277, fn_: 0, tp: 149, fp: 16 };
    assert!(close(b.accuracy(), 96.38), "{}", b.accuracy());
    assert!(close(b.precision(), 90.30), "{}", b.precision());
    assert!(close(b.recall(), 100.0));
    assert!(close(b.f1(), 94.90), "{}", b.f1());
}

#[test]
fn wrong_vulnerability_class_is_still_a_true_positive() {
    let truth = [Label::Xss, Label::Sqli, Label::Osci, Label::Safe];
    let pred = [Label::Sqli, Label::Sqli, Label::Safe, Label::Osci];
    let r = confusion(&truth, &pred).unwrap();
    assert_eq!(r.binary(), BinaryCounts { tn: 0, fn_: 1, tp: 2, fp: 1 });
    assert!(close(r.multiclass_accuracy(), 25.0));
}

#[test]
fn csv_table_round_trips() {
    let (t, p) = labels_from_counts(BinaryCounts { tn: 5, fn_: 1, tp: 3, fp: 2 });
    let r = confusion(&t, &p).unwrap();
    let text = render_table(&[("a", &r), ("b, quoted", &r)], TableFormat::Csv);
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), TABLE_COLUMNS);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[1][0], "b, quoted");
    assert_eq!(rows[0][1].parse::<usize>().unwrap(), 5);
    assert!(close(rows[0][5].parse().unwrap(), r.accuracy()));
    let plain = render_table(&[("a", &r)], TableFormat::Text);
    assert_eq!(plain.lines().count(), 2);
    assert!(plain.starts_with("Model"));
}

fn label() -> impl Strategy<Value = Label> {
    (0usize..4).prop_map(|i| Label::from_index(i).unwrap())
}

proptest! {
    #[test]
    fn counts_are_conserved(pairs in prop::collection::vec((label(), label()), 1..200)) {
        let (t, p): (Vec<Label>, Vec<Label>) = pairs.into_iter().unzip();
        let r = confusion(&t, &p).unwrap();
        let b = r.binary();
        prop_assert_eq!(b.total(), t.len());
        prop_assert_eq!(b.tp + b.fn_, t.iter().filter(|l| l.is_unsafe()).count());
        prop_assert_eq!(b.tp + b.fp, p.iter().filter(|l| l.is_unsafe()).count());
        prop_assert!(r.multiclass_accuracy() <= r.accuracy() + 1e-9);
    }

    #[test]
    fn f1_lies_between_precision_and_recall(tn in 0usize..100, fn_ in 0usize..100, tp in 0usize..100, fp in 0usize..100) {
        let b = BinaryCounts { tn, fn_, tp, fp };
        let (p, r, f) = (b.precision(), b.recall(), b.f1());
        prop_assert!(f <= p.max(r) + 1e-9);
        prop_assert!(f >= p.min(r) - 1e-9);
        for v in [b.accuracy(), p, r, f] {
            prop_assert!((0.0..=100.0).contains(&v));
        }
    }
}
