use domepilot_core::eval::{
    accuracy, confusion, f1, mse, precision_recall, support_weighted, weighted_f1, ConfusionMatrix,
    EvalReport,
};
use domepilot_core::rng::SplitMix64;
use domepilot_core::DomeState;

fn random_vectors(rng: &mut SplitMix64) -> (Vec<DomeState>, Vec<DomeState>) {
    let n = 1 + rng.next_below(200) as usize;
    let bias = rng.next_f64();
    let draw = |rng: &mut SplitMix64| DomeState::from_bool(rng.next_f64() < bias);
    let pred = (0..n).map(|_| draw(rng)).collect();
    let truth = (0..n).map(|_| draw(rng)).collect();
    (pred, truth)
}

fn flip(v: &[DomeState]) -> Vec<DomeState> {
    v.iter().map(|s| s.flipped()).collect()
}

#[test]
fn identities_on_random_vectors() {
    let mut rng = SplitMix64::new(500);
    for _ in 0..500 {
        let (p, y) = random_vectors(&mut rng);
        let m = confusion(&p, &y).unwrap();
        let acc = accuracy(&m).unwrap();
        let n = p.len();
        // Exact in integers: squared errors plus hits is n. The two floats
        // each carry one rounding of the same rational.
        let e = mse(&p, &y).unwrap();
        assert_eq!(e, (n - m.correct()) as f64 / n as f64);
        assert_eq!((e * n as f64).round() as usize + m.correct(), n);
        assert!((e - (1.0 - acc)).abs() <= f64::EPSILON);

        let swapped = confusion(&flip(&p), &flip(&y)).unwrap();
        assert_eq!(swapped, m.swapped());
        assert_eq!(
            f1(&swapped, DomeState::Open).unwrap(),
            f1(&m, DomeState::Close).unwrap()
        );
        assert_eq!(
            f1(&swapped, DomeState::Close).unwrap(),
            f1(&m, DomeState::Open).unwrap()
        );
        assert_eq!(accuracy(&swapped).unwrap(), acc);

        let (f0, f1v) = (
            f1(&m, DomeState::Close).unwrap(),
            f1(&m, DomeState::Open).unwrap(),
        );
        let w = weighted_f1(&m).unwrap();
        assert!(w >= f0.min(f1v) - 1e-12 && w <= f0.max(f1v) + 1e-12);
        for v in [acc, f0, f1v, w] {
            assert!((0.0..=1.0).contains(&v));
        }

        // F1 from precision and recall, where both are defined and nonzero.
        if let (Some(pr), Some(rc)) = precision_recall(&m, DomeState::Open) {
            if pr + rc > 0.0 {
                assert!((2.0 * pr * rc / (pr + rc) - f1v).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn spot_values() {
    let m = ConfusionMatrix {
        tp: 49,
        tn: 49,
        fp: 1,
        fn_: 1,
    };
    assert!((accuracy(&m).unwrap() - 0.98).abs() < 1e-12);

    // P = R = 0.5.
    let m = ConfusionMatrix {
        tp: 1,
        tn: 0,
        fp: 1,
        fn_: 1,
    };
    assert_eq!(
        precision_recall(&m, DomeState::Open),
        (Some(0.5), Some(0.5))
    );
    assert!((f1(&m, DomeState::Open).unwrap() - 0.5).abs() < 1e-12);

    assert!((support_weighted([0.6, 0.8], [50, 50]) - 0.7).abs() < 1e-12);
}

#[test]
fn degenerate_inputs() {
    let all_close = vec![DomeState::Close; 10];
    let r = EvalReport::from_predictions("x", &all_close, &all_close).unwrap();
    assert_eq!(r.accuracy, 1.0);
    assert_eq!(r.f1_class1, 0.0);
    assert_eq!(r.degenerate_f1, vec![DomeState::Open]);
    assert!(confusion(&all_close, &all_close[..3]).is_err());
    assert!(EvalReport::from_predictions("x", &[], &[]).is_err());
}

#[test]
fn report_matches_components() {
    let mut rng = SplitMix64::new(501);
    for _ in 0..50 {
        let (p, y) = random_vectors(&mut rng);
        let r = EvalReport::from_predictions("m", &p, &y).unwrap();
        let m = confusion(&p, &y).unwrap();
        assert_eq!(r.matrix, m);
        assert_eq!(r.n_test, p.len());
        assert_eq!(r.f1_class1, f1(&m, DomeState::Open).unwrap());
        assert_eq!(r.weighted_f1, weighted_f1(&m).unwrap());
        assert_eq!(r.mse, mse(&p, &y).unwrap());
    }
}
