use moyal_heat::evolve::{read_records_csv, write_records_csv, GridInfo, Outcome, SweepRecord};
use proptest::prelude::*;

fn outcome() -> impl Strategy<Value = Outcome> {
    prop_oneof![Just(Outcome::BlowUp), Just(Outcome::GlobalCandidate), Just(Outcome::Undecided)]
}

fn record() -> impl Strategy<Value = SweepRecord> {
    (
        (1.01f64..5.0, 1e-4f64..1e2, outcome(), proptest::option::of(0.0f64..1e4), 0.0f64..1e8),
        (-10.0f64..10.0, 0.0f64..5.0, 1.0f64..50.0, 0.0f64..10.0, proptest::option::of(-2.0f64..2.0)),
        (1e-6f64..1.0, any::<u64>(), proptest::option::of((1usize..4, 1.0f64..100.0, 1usize..64))),
    )
        .prop_map(|((p, amplitude, outcome, t_detect, max_uinf), (margin, beta, q, r, decay_fit), (dt, seed, grid))| {
            SweepRecord {
                p,
                amplitude,
                outcome,
                t_detect,
                max_uinf,
                lemma61_margin: margin,
                beta,
                q,
                r,
                decay_fit,
                dt_final: dt,
                cell_seed: seed,
                grid: grid.map(|(d, l, n)| GridInfo { d, l, n: 4 * n }),
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_roundtrip(mut recs in proptest::collection::vec(record(), 0..8)) {
        let with_grid = recs.first().is_some_and(|r| r.grid.is_some());
        for r in &mut recs {
            if !with_grid {
                r.grid = None;
            } else if r.grid.is_none() {
                r.grid = Some(GridInfo { d: 1, l: 40.0, n: 2048 });
            }
        }
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &recs, with_grid).unwrap();
        let back = read_records_csv(&buf[..]).unwrap();
        prop_assert_eq!(back, recs);
    }
}

#[test]
fn header_is_fixed() {
    assert_eq!(
        SweepRecord::header(false).join(","),
        "p,amplitude,outcome,t_detect,max_uinf,lemma61_margin,beta,q,r,decay_fit,dt_final,cell_seed"
    );
    assert_eq!(SweepRecord::header(true)[12..].join(","), "d,L,n");
}
