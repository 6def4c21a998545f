use adanav::surrogate::clip_count;
use adanav::{
    decompose, detect_scr, fit_surrogate, make_clips, reconstruct, synth_session, ChannelNorms, Clip, ClipLayout,
    DecompositionConfig, DetectorParams, NormParams, OracleParams, SurrogateModel, Trace, Unit,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RATE: f64 = 4.0;
const CLIP_S: f64 = 2.25;
const L: usize = 9;

fn unit_norms() -> ChannelNorms<f64> {
    let p = NormParams::new(0.0, 1.0).unwrap();
    ChannelNorms { a_l: p, a_r: p, phasic: p }
}

fn layout() -> ClipLayout<f64> {
    ClipLayout {
        clip_len_s: CLIP_S,
        rate_hz: RATE,
        norms: unit_norms(),
    }
}

/// A planted map whose outputs stay inside `[0, 1]` for inputs in `[0, 1]`.
fn planted(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let p = 6 * L + 1;
    (0..L * p)
        .map(|k| {
            if k % p == p - 1 {
                0.5
            } else {
                rng.random_range(-0.008..0.008)
            }
        })
        .collect()
}

fn apply(w: &[f64], x: &[f64]) -> Vec<f64> {
    let p = x.len() + 1;
    w.chunks_exact(p)
        .map(|row| row[p - 1] + row[..p - 1].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

#[test]
fn planted_linear_map_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let w = planted(&mut rng);
    let clips: Vec<Clip<f64>> = (0..400)
        .map(|_| {
            let x: Vec<f64> = (0..6 * L).map(|_| rng.random::<f64>()).collect();
            let y = apply(&w, &x);
            Clip::new(x, y).unwrap()
        })
        .collect();
    let model = fit_surrogate(&clips, 0.0, layout()).unwrap();
    assert!(model.train_mae() < 1e-6, "train mae {}", model.train_mae());
    let max_dw = model
        .weights()
        .iter()
        .zip(&w)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(max_dw < 1e-6, "weight error {max_dw}");

    // Fresh inputs from the same map.
    let test: Vec<Clip<f64>> = (0..50)
        .map(|_| {
            let x: Vec<f64> = (0..6 * L).map(|_| rng.random::<f64>()).collect();
            let y = apply(&w, &x);
            Clip::new(x, y).unwrap()
        })
        .collect();
    assert!(model.mae(&test).unwrap() < 1e-6);
    for c in &test {
        let pred = model.predict_clip(c.accel_window()).unwrap();
        assert_eq!(pred.len(), L);
        for (a, b) in pred.iter().zip(c.target()) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn rank_deficient_inputs_without_ridge_are_singular() {
    let clips: Vec<Clip<f64>> = (0..100).map(|_| Clip::new(vec![0.3; 6 * L], vec![0.1; L]).unwrap()).collect();
    assert!(matches!(
        fit_surrogate(&clips, 0.0, layout()),
        Err(adanav::Error::Singular)
    ));
    let m = fit_surrogate(&clips, 1e-3, layout()).unwrap();
    assert!(m.train_mae() < 1e-3);
}

#[test]
fn zero_targets_give_zero_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let clips: Vec<Clip<f64>> = (0..80)
        .map(|_| Clip::new((0..6 * L).map(|_| rng.random::<f64>()).collect(), vec![0.0; L]).unwrap())
        .collect();
    let m = fit_surrogate(&clips, 0.1, layout()).unwrap();
    assert!(m.weights().iter().all(|w| *w == 0.0));
    assert_eq!(m.train_mae(), 0.0);
}

#[test]
fn model_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let w = planted(&mut rng);
    let m = SurrogateModel::from_parts(w, CLIP_S, RATE, unit_norms(), 0.0125).unwrap();
    let text = m.to_text();
    assert_eq!(SurrogateModel::<f64>::from_text(&text).unwrap(), m);
    assert!(SurrogateModel::<f64>::from_text(&text.replace("weights=9x55", "weights=9x54")).is_err());
}

fn session(n: usize, seed: u64) -> (Trace<f64>, Trace<f64>, Trace<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gen = |unit| Trace::new((0..n).map(|_| rng.random::<f64>()).collect(), RATE, unit).unwrap();
    (
        gen(Unit::MetersPerSecond2),
        gen(Unit::RadiansPerSecond2),
        gen(Unit::Microsiemens),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clips_reconstruct_to_targets(n in 27usize..400, seed in any::<u64>()) {
        let (a_l, a_r, phasic) = session(n, seed);
        let clips = make_clips(&a_l, &a_r, &phasic, CLIP_S, L, &unit_norms()).unwrap();
        prop_assert_eq!(clips.len(), clip_count(n, L, L));
        let targets: Vec<Vec<f64>> = clips.iter().map(|c| c.target().to_vec()).collect();
        let back = reconstruct(&targets, L, RATE).unwrap();
        prop_assert_eq!(back.len(), L * (n / L));
        for (a, b) in back.samples().iter().zip(phasic.samples()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn windows_hold_previous_current_next(n in 27usize..200, seed in any::<u64>(), stride in 1usize..=9) {
        let (a_l, a_r, phasic) = session(n, seed);
        let clips = make_clips(&a_l, &a_r, &phasic, CLIP_S, stride, &unit_norms()).unwrap();
        for (k, c) in clips.iter().enumerate() {
            let start = (k * stride) as isize - L as isize;
            for (ch, trace) in [&a_l, &a_r].into_iter().enumerate() {
                for (j, &v) in c.channel(ch).iter().enumerate() {
                    let p = start + j as isize;
                    let expect = if p < 0 || p as usize >= n { 0.0 } else { trace.samples()[p as usize] };
                    prop_assert_eq!(v, expect);
                }
            }
        }
    }
}

#[test]
fn session_of_four_minutes_gives_106_clips() {
    let (a_l, a_r, phasic) = session(960, 3);
    let clips = make_clips(&a_l, &a_r, &phasic, CLIP_S, L, &unit_norms()).unwrap();
    assert_eq!(clips.len(), 106);
    // The last clip starts at 945; its next-clip context 954..963 runs three
    // samples past the end.
    let tail = &clips[105].channel(0)[2 * L..];
    assert!(tail[..6].iter().all(|&v| v != 0.0));
    assert!(tail[6..].iter().all(|&v| v == 0.0));
    assert!(clips[0].channel(1)[..L].iter().all(|&v| v == 0.0));
}

fn quiet_oracle() -> OracleParams<f64> {
    OracleParams {
        tonic_drift: 0.0,
        noise_sd: 0.0,
        ..OracleParams::default()
    }
}

fn one_pulse(amp: f64, n: usize, at_s: f64) -> (Trace<f64>, Trace<f64>) {
    let a_l = Trace::from_fn(n, RATE, Unit::MetersPerSecond2, |t: f64| {
        if t >= at_s && t < at_s + 1.0 {
            amp
        } else {
            0.0
        }
    })
    .unwrap();
    (a_l, Trace::zeros(n, RATE, Unit::RadiansPerSecond2).unwrap())
}

fn phasic_peak(eda: &Trace<f64>) -> (usize, f64) {
    let p = decompose(eda, &DecompositionConfig::default()).unwrap().phasic;
    p.samples()
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

#[test]
fn oracle_single_pulse_gives_one_delayed_peak() {
    let params = quiet_oracle();
    let (a_l, a_r) = one_pulse(1.0, 240, 20.0);
    let eda = synth_session(&a_l, &a_r, &params).unwrap();
    let phasic = decompose(&eda, &DecompositionConfig::default()).unwrap().phasic;
    let events = detect_scr(&phasic, &DetectorParams::neurokit()).unwrap();
    assert_eq!(events.len(), 1, "{events:?}");
    let peak_s = events[0].peak_idx as f64 / RATE;
    let lag = peak_s - 20.0;
    assert!(lag >= params.latency_s && lag <= params.latency_s + 5.0, "lag {lag}");
}

#[test]
fn oracle_response_scales_with_amplitude() {
    let params = quiet_oracle();
    for amp in [0.2, 0.7, 1.5] {
        let (l1, r1) = one_pulse(amp, 240, 20.0);
        let (l2, r2) = one_pulse(2.0 * amp, 240, 20.0);
        let p1 = phasic_peak(&synth_session(&l1, &r1, &params).unwrap()).1;
        let p2 = phasic_peak(&synth_session(&l2, &r2, &params).unwrap()).1;
        assert!(p2 >= 2.0 * p1 - 1e-9, "{p1} -> {p2}");
    }
}

#[test]
fn oracle_is_deterministic_per_seed() {
    let (a_l, a_r) = one_pulse(1.0, 200, 10.0);
    let p = OracleParams { seed: 17, ..OracleParams::default() };
    let a = synth_session(&a_l, &a_r, &p).unwrap();
    assert_eq!(a, synth_session(&a_l, &a_r, &p).unwrap());
    let other = synth_session(&a_l, &a_r, &OracleParams { seed: 18, ..p }).unwrap();
    assert_ne!(a, other);
}

#[test]
fn oracle_without_stimulus_is_the_baseline() {
    let z = Trace::zeros(100, RATE, Unit::MetersPerSecond2).unwrap();
    let eda = synth_session(&z, &z, &quiet_oracle()).unwrap();
    assert!(eda.samples().iter().all(|&v| v == 2.0));
}
