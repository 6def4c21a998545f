use adanav::{AdaptiveController, ControlFrame, ControlLimits, PidGains};
use proptest::prelude::*;

const DT: f64 = 0.25;

fn gains() -> impl Strategy<Value = PidGains<f64>> {
    (
        prop::array::uniform9(0.0..0.5f64),
        prop::array::uniform2(0.0..0.01f64),
    )
        .prop_map(|(k, b)| {
            PidGains::from_array([k[0], k[1], k[2], k[3], k[4], k[5], k[6], k[7], k[8], b[0], b[1]])
        })
}

fn frames(len: usize) -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-8.0..8.0f64, -8.0..8.0f64, 0.0..1.0f64), 1..len)
}

fn frame(a_l: f64, a_r: f64, f_prev: f64) -> ControlFrame<f64> {
    ControlFrame { a_l, a_r, f_prev, dt: DT }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn zero_input_is_a_fixpoint(g in gains(), steps in 1usize..50) {
        let mut ctl = AdaptiveController::new(g, ControlLimits::default()).unwrap();
        for _ in 0..steps {
            prop_assert_eq!(ctl.adapt_step(&frame(0.0, 0.0, 0.0)).unwrap(), (0.0, 0.0));
        }
    }

    #[test]
    fn proportional_gain_contracts_geometrically(
        kp_l in 0.001..1.999f64,
        kp_r in 0.001..1.999f64,
        a0 in (-3.0..3.0f64, -3.0..3.0f64),
        steps in 1usize..40,
    ) {
        let g = PidGains { k_pl: kp_l, k_pr: kp_r, ..PidGains::zero() };
        let mut ctl = AdaptiveController::new(g, ControlLimits::default()).unwrap();
        let (mut l, mut r) = a0;
        for n in 1..=steps {
            let (nl, nr) = ctl.adapt_step(&frame(l, r, 0.0)).unwrap();
            prop_assert!((nl.abs() - (1.0 - kp_l).abs() * l.abs()).abs() <= 1e-12);
            prop_assert!((nr.abs() - (1.0 - kp_r).abs() * r.abs()).abs() <= 1e-12);
            let expect_l = (1.0 - kp_l).abs().powi(n as i32) * a0.0.abs();
            prop_assert!((nl.abs() - expect_l).abs() <= 1e-9);
            l = nl;
            r = nr;
        }
    }

    #[test]
    fn swapping_channels_swaps_outputs(g in gains(), xs in frames(40)) {
        // Equal bounds on both channels so the clamp is symmetric too.
        let limits = ControlLimits { max_longitudinal: 4.0, max_rotational: 4.0, ..ControlLimits::default() };
        let mut a = AdaptiveController::new(g, limits).unwrap();
        let mut b = AdaptiveController::new(g.swapped_channels(), limits).unwrap();
        for &(l, r, f) in &xs {
            let (al, ar) = a.adapt_step(&frame(l, r, f)).unwrap();
            let (bl, br) = b.adapt_step(&frame(r, l, f)).unwrap();
            prop_assert_eq!((al, ar), (br, bl));
        }
    }

    #[test]
    fn outputs_respect_clamps(
        k in prop::array::uniform11(0.0..50.0f64),
        xs in frames(60),
        ml in 0.1..6.0f64,
        mr in 0.1..6.0f64,
    ) {
        let limits = ControlLimits { max_longitudinal: ml, max_rotational: mr, ..ControlLimits::default() };
        let mut ctl = AdaptiveController::new(PidGains::from_array(k), limits).unwrap();
        for &(l, r, f) in &xs {
            let (al, ar) = ctl.adapt_step(&frame(l, r, f)).unwrap();
            prop_assert!(al.abs() <= ml && ar.abs() <= mr);
            for s in ctl.states() {
                prop_assert!(s.integral().abs() <= limits.integral_clamp);
            }
        }
    }

    #[test]
    fn identical_state_and_frame_give_identical_output(g in gains(), xs in frames(30)) {
        let mut a = AdaptiveController::new(g, ControlLimits::default()).unwrap();
        for &(l, r, f) in &xs {
            let mut b = a.clone();
            let fr = frame(l, r, f);
            prop_assert_eq!(a.adapt_step(&fr).unwrap(), b.adapt_step(&fr).unwrap());
            prop_assert_eq!(&a, &b);
        }
    }
}

#[test]
fn reference_gains_first_tick() {
    let mut ctl = AdaptiveController::new(PidGains::reference(), ControlLimits::default()).unwrap();
    let (l, r) = ctl.adapt_step(&frame(1.0, 0.0, 0.0)).unwrap();
    // 1 - K_Pl - K_Il*dt - K_Dl/dt
    let expect = 1.0 - 0.0113 - 0.0065 * DT - 0.0137 / DT;
    assert!((l - expect).abs() < 1e-12, "{l} vs {expect}");
    assert_eq!(r, 0.0);
}

#[test]
fn non_finite_frame_is_rejected() {
    let mut ctl = AdaptiveController::new(PidGains::reference(), ControlLimits::default()).unwrap();
    assert!(ctl.adapt_step(&frame(f64::NAN, 0.0, 0.0)).is_err());
    assert!(ctl.adapt_step(&ControlFrame { dt: 0.0, ..frame(0.0, 0.0, 0.0) }).is_err());
}
