use glassboost::dataio::{load_csv, stratified_splits, write_csv, Cell, ColumnKind, ColumnSchema, LoadOptions, SplitSpec, TabularFrame};
use proptest::prelude::*;

fn frame_strategy() -> impl Strategy<Value = TabularFrame> {
    (4usize..40).prop_flat_map(|n| {
        (
            proptest::collection::vec(prop_oneof![4 => (-1e6f64..1e6).prop_map(Some), 1 => Just(None)], n),
            proptest::collection::vec(prop_oneof![4 => (0u32..4).prop_map(Some), 1 => Just(None)], n),
            proptest::collection::vec(0u8..2, n),
        )
    })
    .prop_filter("both classes", |(_, _, y)| y.contains(&0) && y.contains(&1))
    .prop_map(|(num, cat, y)| {
        // Categories listed in first-appearance order, as the loader does.
        let mut cats: Vec<u32> = Vec::new();
        for c in cat.iter().flatten() {
            if !cats.contains(c) {
                cats.push(*c);
            }
        }
        let labels: Vec<String> = cats.iter().map(|c| format!("level {c}")).collect();
        let columns = vec![ColumnSchema::numeric("x"), ColumnSchema::categorical("kind", labels)];
        let mut cells = Vec::new();
        for (v, c) in num.iter().zip(&cat) {
            cells.push(v.map_or(Cell::Missing, Cell::Num));
            cells.push(c.map_or(Cell::Missing, |c| Cell::Cat(cats.iter().position(|k| *k == c).unwrap() as u32)));
        }
        TabularFrame::new(columns, cells, y).unwrap().with_target_labels("label", "no", "yes")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_lossless(frame in frame_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_csv(&frame, &path).unwrap();
        let mut opts = LoadOptions::default();
        // A column of all-missing or all-numeric-looking labels would be
        // re-inferred differently, so pin the kinds.
        opts.column_kinds.insert("x".into(), ColumnKind::Numeric);
        opts.column_kinds.insert("kind".into(), ColumnKind::Categorical);
        let back = load_csv(&path, "label", None, &opts).unwrap();
        prop_assert_eq!(back, frame);
    }

    #[test]
    fn splits_are_stratified_partitions(
        y in proptest::collection::vec(0u8..2, 8..300),
        frac in 0.1f64..0.5,
        seed in any::<u64>(),
    ) {
        let n_pos = y.iter().filter(|&&v| v == 1).count();
        prop_assume!(n_pos >= 2 && y.len() - n_pos >= 2);
        let rows: Vec<Vec<f64>> = (0..y.len()).map(|i| vec![i as f64]).collect();
        let frame = TabularFrame::from_numeric_rows(&["i"], &rows, y.clone()).unwrap();
        let spec = SplitSpec::new(frac, 3, seed);
        let a = stratified_splits(&frame, &spec).unwrap();
        prop_assert_eq!(&a, &stratified_splits(&frame, &spec).unwrap());
        for s in &a {
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
            for class in 0..2u8 {
                let total = y.iter().filter(|&&v| v == class).count();
                let in_test = s.test.iter().filter(|&&r| y[r] == class).count();
                let want = ((frac * total as f64).round() as usize).clamp(1, total - 1);
                prop_assert_eq!(in_test, want);
            }
        }
    }
}

#[test]
fn different_seeds_give_different_splits() {
    let y: Vec<u8> = (0..100).map(|i| (i % 3 == 0) as u8).collect();
    let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
    let frame = TabularFrame::from_numeric_rows(&["i"], &rows, y).unwrap();
    let a = stratified_splits(&frame, &SplitSpec::new(0.25, 1, 1)).unwrap();
    let b = stratified_splits(&frame, &SplitSpec::new(0.25, 1, 2)).unwrap();
    assert_ne!(a[0].test, b[0].test);
}
