use rotorlab_core::ergostat::{qn_decay, wick_mixing_curve, StreamPlan};
use rotorlab_core::{CMVector, RotorFamily, TimeGrid};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn estimators_do_not_depend_on_worker_count() {
    let g = TimeGrid::new(32).unwrap();
    let h = CMVector::from_fn(g, 1, |_, _| 1.0).unwrap();
    let fam = RotorFamily::Sign { grid: g };
    let run = || {
        let d = qn_decay(&fam, &h, &h, 4, 3000, 0.1, StreamPlan::new(42)).unwrap();
        let m = wick_mixing_curve(&fam, &h, &h, 4, 3000, StreamPlan::new(43)).unwrap();
        (d, m)
    };
    let (d1, m1) = in_pool(1, run);
    let (d4, m4) = in_pool(4, run);
    let bits = |xs: Vec<f64>| xs.into_iter().map(f64::to_bits).collect::<Vec<_>>();
    assert_eq!(
        bits(d1.rows.iter().map(|r| r.second_moment).collect()),
        bits(d4.rows.iter().map(|r| r.second_moment).collect())
    );
    assert_eq!(
        bits(m1.rows.iter().map(|r| r.estimate).collect()),
        bits(m4.rows.iter().map(|r| r.estimate).collect())
    );
    assert_eq!(d1, d4);
    assert_eq!(m1, m4);
}
