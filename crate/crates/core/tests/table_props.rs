use std::collections::BTreeSet;

use proptest::prelude::*;
use somrst::corpus;
use somrst::rough::partition_by;
use somrst::table::{load_table, split_random, AttributeSpec, DecisionTable, InformationSystem};

fn tables() -> impl Strategy<Value = DecisionTable> {
    (1usize..4, 1usize..15).prop_flat_map(|(m, n)| {
        let cell = prop_oneof![9 => (-1e6f64..1e6).prop_map(Some), 1 => Just(None)];
        proptest::collection::vec(proptest::collection::vec(cell, m + 1), n).prop_map(move |rows| {
            let mut specs: Vec<AttributeSpec> = (0..m).map(|i| AttributeSpec::condition(format!("x{i}"))).collect();
            specs.push(AttributeSpec::decision("y"));
            DecisionTable::new(specs, rows).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn csv_round_trip(t in tables()) {
        let back = load_table(&t.to_csv(), t.specs()).unwrap();
        prop_assert_eq!(back.len(), t.len());
        for (a, b) in t.rows().iter().zip(back.rows()) {
            for (x, y) in a.iter().zip(b) {
                match (x, y) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300)),
                    (None, None) => {}
                    _ => prop_assert!(false, "missing marker lost"),
                }
            }
        }
    }

    #[test]
    fn split_covers_universe(t in tables(), fraction in 0.01f64..=1.0, seed in any::<u64>()) {
        let (train, test) = split_random(&t, fraction, seed).unwrap();
        let a: BTreeSet<usize> = train.ids().iter().copied().collect();
        let b: BTreeSet<usize> = test.ids().iter().copied().collect();
        prop_assert!(a.is_disjoint(&b));
        prop_assert_eq!(a.union(&b).copied().collect::<BTreeSet<_>>(), t.ids().iter().copied().collect());
        prop_assert!(!train.is_empty());
    }
}

#[test]
fn projection_then_partition() {
    let t = corpus::table1();
    for attrs in [&["Cp", "Phip"][..], &["Cb"], &["Tp", "Tb", "Csz"]] {
        let mut keep: Vec<&str> = attrs.to_vec();
        keep.push("MVV");
        let projected = t.project(&keep).unwrap();
        assert_eq!(partition_by(&projected, attrs).unwrap(), partition_by(&t, attrs).unwrap());
    }
}

#[test]
fn corpus_indiscernibility_on_six_strength_attributes() {
    let p = partition_by(&corpus::table1(), &["Cp", "Phip", "Cb", "Phib", "Csz", "Phisz"]).unwrap();
    let mut blocks: Vec<Vec<usize>> = p.blocks().iter().filter(|b| b.len() > 1).cloned().collect();
    blocks.sort();
    assert_eq!(blocks, vec![vec![0, 8], vec![5, 6]]);
    assert_eq!(p.blocks().len(), 10);
}

#[test]
fn bad_inputs_are_data_errors() {
    let schema = corpus::table1_schema();
    assert!(matches!(load_table("Cp,Phip\n1,2\n", &schema), Err(somrst::Error::Data(_))));
    let empty = load_table(corpus::TABLE1_CSV.lines().next().unwrap(), &schema).unwrap();
    assert!(empty.is_empty());
    assert!(matches!(split_random(&empty, 0.7, 1), Err(somrst::Error::Data(_))));
}
