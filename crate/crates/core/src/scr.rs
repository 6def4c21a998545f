//! Event-related skin conductance response (ER-SCR) detection on a phasic
//! trace.
//!
//! Three detector styles are provided:
//!
//! - [`DetectorMethod::Kim2004`]: every maximal rising run of the trace (an
//!   upward zero crossing of the first difference followed by the next
//!   downward crossing) is a candidate; candidates must clear an amplitude
//!   threshold relative to the trace's peak-to-peak range.
//! - [`DetectorMethod::Gamboa2008`]: the same rising runs, but runs separated
//!   by less than `min_separation_s` are merged first and the amplitude
//!   threshold is absolute.
//! - [`DetectorMethod::Neurokit`]: local maxima whose topographic prominence
//!   clears a relative threshold; the onset is the lowest sample in the
//!   admissible rise window before the peak.
//!
//! Every method applies `min_amplitude` as an absolute floor and keeps only
//! events whose rise time lies in `[min_rise_s, max_rise_s]`.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::scalar::{all_finite, Scalar};
use crate::signal::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorMethod {
    Kim2004,
    Gamboa2008,
    Neurokit,
}

impl DetectorMethod {
    pub const ALL: [DetectorMethod; 3] = [
        DetectorMethod::Kim2004,
        DetectorMethod::Gamboa2008,
        DetectorMethod::Neurokit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorMethod::Kim2004 => "kim2004",
            DetectorMethod::Gamboa2008 => "gamboa2008",
            DetectorMethod::Neurokit => "neurokit",
        }
    }
}

impl fmt::Display for DetectorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown detector `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams<T> {
    pub method: DetectorMethod,
    /// Absolute amplitude floor, in the trace's units.
    pub min_amplitude: T,
    /// Fraction of the peak-to-peak range an event must reach (amplitude for
    /// the run-based methods, prominence for `Neurokit`). Zero disables it.
    pub relative_threshold: T,
    /// Runs closer than this are merged (`Gamboa2008` only).
    pub min_separation_s: T,
    pub min_rise_s: T,
    pub max_rise_s: T,
}

impl<T: Scalar> DetectorParams<T> {
    fn base(method: DetectorMethod) -> Self {
        Self {
            method,
            min_amplitude: T::lit(0.02),
            relative_threshold: T::zero(),
            min_separation_s: T::zero(),
            min_rise_s: T::lit(0.25),
            max_rise_s: T::lit(5.0),
        }
    }

    pub fn kim2004() -> Self {
        Self {
            relative_threshold: T::lit(0.05),
            ..Self::base(DetectorMethod::Kim2004)
        }
    }

    pub fn gamboa2008() -> Self {
        Self {
            min_amplitude: T::lit(0.01),
            min_separation_s: T::one(),
            ..Self::base(DetectorMethod::Gamboa2008)
        }
    }

    pub fn neurokit() -> Self {
        Self {
            relative_threshold: T::lit(0.1),
            ..Self::base(DetectorMethod::Neurokit)
        }
    }

    pub fn default_for(method: DetectorMethod) -> Self {
        match method {
            DetectorMethod::Kim2004 => Self::kim2004(),
            DetectorMethod::Gamboa2008 => Self::gamboa2008(),
            DetectorMethod::Neurokit => Self::neurokit(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.min_amplitude,
            self.relative_threshold,
            self.min_separation_s,
            self.min_rise_s,
            self.max_rise_s,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("detector parameters must be finite"));
        }
        if self.min_amplitude <= T::zero() {
            return Err(invalid("min_amplitude must be > 0"));
        }
        if self.relative_threshold < T::zero() || self.min_separation_s < T::zero() {
            return Err(invalid("relative_threshold and min_separation_s must be >= 0"));
        }
        if self.min_rise_s < T::zero() || self.max_rise_s < self.min_rise_s {
            return Err(invalid("rise-time band must satisfy 0 <= min_rise_s <= max_rise_s"));
        }
        Ok(())
    }
}

/// The kim2004 / gamboa2008 / neurokit detector triple with default thresholds.
pub fn standard_detectors<T: Scalar>() -> [DetectorParams<T>; 3] {
    DetectorMethod::ALL.map(DetectorParams::default_for)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrEvent<T> {
    pub onset_idx: usize,
    pub peak_idx: usize,
    /// Peak value minus onset value.
    pub amplitude: T,
    pub rise_time_s: T,
}

impl<T: Scalar> ScrEvent<T> {
    fn new(xs: &[T], onset_idx: usize, peak_idx: usize, rate: T) -> Self {
        Self {
            onset_idx,
            peak_idx,
            amplitude: xs[peak_idx] - xs[onset_idx],
            rise_time_s: T::from_count(peak_idx - onset_idx) / rate,
        }
    }
}

/// Detects ER-SCRs, ordered by onset.
pub fn detect_scr<T: Scalar>(phasic: &Trace<T>, params: &DetectorParams<T>) -> Result<Vec<ScrEvent<T>>> {
    params.validate()?;
    phasic.require_nonempty("detect_scr")?;
    let xs = phasic.samples();
    if let Some(index) = all_finite(xs) {
        return Err(Error::NonFinite {
            what: "phasic trace",
            index,
        });
    }
    let rate = phasic.rate_hz();
    let (lo, hi) = phasic.min_max().expect("non-empty");
    let span = hi - lo;
    let threshold = params.min_amplitude.max(params.relative_threshold * span);

    let candidates = match params.method {
        DetectorMethod::Kim2004 => rising_runs(xs, rate),
        DetectorMethod::Gamboa2008 => merge_close(xs, rising_runs(xs, rate), params.min_separation_s, rate),
        DetectorMethod::Neurokit => return Ok(prominent_peaks(xs, rate, threshold, params)),
    };
    Ok(candidates
        .into_iter()
        .filter(|e| e.amplitude >= threshold && rise_ok(e, params))
        .collect())
}

pub fn count_er_scr<T: Scalar>(phasic: &Trace<T>, params: &DetectorParams<T>) -> Result<usize> {
    detect_scr(phasic, params).map(|events| events.len())
}

fn rise_ok<T: Scalar>(e: &ScrEvent<T>, params: &DetectorParams<T>) -> bool {
    e.rise_time_s >= params.min_rise_s && e.rise_time_s <= params.max_rise_s
}

/// Maximal strictly rising runs `[onset, peak]` that start after a
/// non-rising step (or flat start) and end before a non-rising step.
fn rising_runs<T: Scalar>(xs: &[T], rate: T) -> Vec<ScrEvent<T>> {
    let n = xs.len();
    let mut events = Vec::new();
    let mut i = 1;
    while i < n {
        if xs[i] > xs[i - 1] {
            let onset = i - 1;
            while i < n && xs[i] > xs[i - 1] {
                i += 1;
            }
            let peak = i - 1;
            // A run touching either edge has no zero crossing on that side.
            let has_upward_crossing = onset > 0;
            let has_downward_crossing = peak < n - 1;
            if has_upward_crossing && has_downward_crossing {
                events.push(ScrEvent::new(xs, onset, peak, rate));
            }
        } else {
            i += 1;
        }
    }
    events
}

/// Merges a run into its predecessor when the gap from the predecessor's peak
/// to its onset is shorter than `min_sep_s`. The merged event keeps the
/// earlier onset and the higher of the two peaks.
fn merge_close<T: Scalar>(xs: &[T], runs: Vec<ScrEvent<T>>, min_sep_s: T, rate: T) -> Vec<ScrEvent<T>> {
    let mut merged: Vec<ScrEvent<T>> = Vec::with_capacity(runs.len());
    for run in runs {
        match merged.last_mut() {
            Some(prev) if T::from_count(run.onset_idx - prev.peak_idx) / rate < min_sep_s => {
                let peak = if xs[run.peak_idx] > xs[prev.peak_idx] {
                    run.peak_idx
                } else {
                    prev.peak_idx
                };
                *prev = ScrEvent::new(xs, prev.onset_idx, peak, rate);
            }
            _ => merged.push(run),
        }
    }
    merged
}

/// Interior local maxima (left edge of a plateau) with prominence at or above
/// `threshold`.
fn prominent_peaks<T: Scalar>(xs: &[T], rate: T, threshold: T, params: &DetectorParams<T>) -> Vec<ScrEvent<T>> {
    let n = xs.len();
    let max_rise = (params.max_rise_s * rate).floor().to_usize().unwrap_or(0);
    let mut events = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if xs[i] > xs[i - 1] {
            let mut j = i;
            while j + 1 < n && xs[j + 1] == xs[i] {
                j += 1;
            }
            if j + 1 < n && xs[j + 1] < xs[i] && prominence(xs, i, j) >= threshold {
                let from = i.saturating_sub(max_rise);
                // Latest minimum in the rise window, so flat baselines give
                // the sample just before the rise.
                let onset = (from..i)
                    .rev()
                    .min_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite"))
                    .expect("window non-empty");
                let event = ScrEvent::new(xs, onset, i, rate);
                if rise_ok(&event, params) {
                    events.push(event);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    events
}

/// Height of the plateau `[left, right]` above the higher of its two bases.
fn prominence<T: Scalar>(xs: &[T], left: usize, right: usize) -> T {
    let top = xs[left];
    let mut left_min = top;
    for &x in xs[..left].iter().rev() {
        if x > top {
            break;
        }
        left_min = left_min.min(x);
    }
    let mut right_min = top;
    for &x in &xs[right + 1..] {
        if x > top {
            break;
        }
        right_min = right_min.min(x);
    }
    top - left_min.max(right_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Unit;
    use proptest::prelude::*;

    fn trace(xs: Vec<f64>) -> Trace<f64> {
        Trace::new(xs, 4.0, Unit::Normalized).unwrap()
    }

    fn pulse_train(pulses: &[(f64, f64)], len: usize) -> Trace<f64> {
        let (tr, td) = (0.75f64, 2.0f64);
        let tp = (td / tr).ln() * tr * td / (td - tr);
        let peak = (-tp / td).exp() - (-tp / tr).exp();
        Trace::from_fn(len, 4.0, Unit::Normalized, |t| {
            pulses
                .iter()
                .map(|&(at, amp)| {
                    let s = t - at;
                    if s <= 0.0 {
                        0.0
                    } else {
                        amp * ((-s / td).exp() - (-s / tr).exp()) / peak
                    }
                })
                .sum()
        })
        .unwrap()
    }

    #[test]
    fn zero_trace_has_no_events() {
        let t = trace(vec![0.0; 200]);
        for p in standard_detectors::<f64>() {
            assert_eq!(count_er_scr(&t, &p).unwrap(), 0, "{}", p.method);
        }
    }

    #[test]
    fn single_pulse_one_event_each_method() {
        let t = pulse_train(&[(20.0, 0.5)], 240);
        for p in standard_detectors::<f64>() {
            let ev = detect_scr(&t, &p).unwrap();
            assert_eq!(ev.len(), 1, "{}", p.method);
            let e = ev[0];
            assert!(e.onset_idx < e.peak_idx);
            assert!((e.amplitude - 0.5).abs() < 0.01, "{}: {}", p.method, e.amplitude);
        }
    }

    #[test]
    fn two_pulses_two_events_each_method() {
        let t = pulse_train(&[(20.0, 0.5), (30.0, 0.4)], 240);
        for p in standard_detectors::<f64>() {
            assert_eq!(count_er_scr(&t, &p).unwrap(), 2, "{}", p.method);
        }
    }

    #[test]
    fn gamboa_merges_fragmented_rise() {
        // A rise interrupted by a one-sample dip reads as two runs.
        let mut xs = vec![0.0; 40];
        let rise = [0.0, 0.1, 0.2, 0.3, 0.28, 0.4, 0.5, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];
        xs[10..10 + rise.len()].copy_from_slice(&rise);
        let t = trace(xs);
        let kim = DetectorParams {
            relative_threshold: 0.0,
            ..DetectorParams::kim2004()
        };
        assert_eq!(count_er_scr(&t, &kim).unwrap(), 2);
        let g = detect_scr(&t, &DetectorParams::gamboa2008()).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!((g[0].onset_idx, g[0].peak_idx), (10, 17));
        assert!((g[0].amplitude - 0.6).abs() < 1e-12);
    }

    #[test]
    fn rise_time_band_is_enforced() {
        // Single-sample spike rises in 0.25 s: admitted at the lower bound.
        let mut xs = vec![0.0; 40];
        xs[20] = 1.0;
        let t = trace(xs);
        for p in standard_detectors::<f64>() {
            assert_eq!(count_er_scr(&t, &p).unwrap(), 1, "{}", p.method);
            let strict = DetectorParams {
                min_rise_s: 0.5,
                ..p
            };
            assert_eq!(count_er_scr(&t, &strict).unwrap(), 0, "{}", p.method);
        }
        // 8 s linear rise exceeds the 5 s ceiling for the run-based methods.
        let mut xs = vec![0.0; 80];
        for (k, x) in xs[10..43].iter_mut().enumerate() {
            *x = k as f64 * 0.03;
        }
        let t = trace(xs);
        assert_eq!(count_er_scr(&t, &DetectorParams::kim2004()).unwrap(), 0);
        assert_eq!(count_er_scr(&t, &DetectorParams::gamboa2008()).unwrap(), 0);
    }

    #[test]
    fn edge_runs_are_not_events() {
        let rising: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
        let t = trace(rising);
        for p in standard_detectors::<f64>() {
            assert_eq!(count_er_scr(&t, &p).unwrap(), 0, "{}", p.method);
        }
    }

    #[test]
    fn rejects_invalid_params() {
        let t = trace(vec![0.0; 10]);
        let bad = DetectorParams {
            min_amplitude: 0.0,
            ..DetectorParams::<f64>::kim2004()
        };
        assert!(matches!(detect_scr(&t, &bad), Err(Error::InvalidParam(_))));
        let empty = trace(vec![]);
        assert!(matches!(
            detect_scr(&empty, &DetectorParams::kim2004()),
            Err(Error::Empty(_))
        ));
    }

    fn quantized(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0i32..64, len).prop_map(|v| v.into_iter().map(|k| k as f64 / 64.0).collect())
    }

    proptest! {
        #[test]
        fn events_satisfy_type_invariants(xs in quantized(2..120)) {
            let t = trace(xs);
            for p in standard_detectors::<f64>() {
                for e in detect_scr(&t, &p).unwrap() {
                    prop_assert!(e.onset_idx < e.peak_idx);
                    prop_assert!(e.amplitude > 0.0);
                    prop_assert_eq!(e.rise_time_s, (e.peak_idx - e.onset_idx) as f64 / 4.0);
                }
            }
        }
    }
}
