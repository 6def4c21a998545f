//! Uniformly sampled time series and the EDA preprocessing primitives:
//! resampling, min-max normalization, temporal derivative, and the
//! tonic/phasic split.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::scalar::{all_finite, Scalar};

/// Physical unit attached to a [`Trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Microsiemens,
    MetersPerSecond2,
    RadiansPerSecond2,
    Normalized,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Microsiemens => "microsiemens",
            Unit::MetersPerSecond2 => "m_per_s2",
            Unit::RadiansPerSecond2 => "rad_per_s2",
            Unit::Normalized => "normalized",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "microsiemens" => Ok(Unit::Microsiemens),
            "m_per_s2" => Ok(Unit::MetersPerSecond2),
            "rad_per_s2" => Ok(Unit::RadiansPerSecond2),
            "normalized" => Ok(Unit::Normalized),
            other => Err(Error::Parse(format!("unknown unit `{other}`"))),
        }
    }
}

/// A uniformly sampled scalar time series.
///
/// Construction guarantees a positive finite rate and finite samples. An empty
/// trace can be built, but every operation that consumes samples rejects it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    samples: Vec<T>,
    rate_hz: T,
    unit: Unit,
}

impl<T: Scalar> Trace<T> {
    pub fn new(samples: Vec<T>, rate_hz: T, unit: Unit) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > T::zero()) {
            return Err(Error::InvalidRate(rate_hz.to_f64_lossy()));
        }
        if let Some(index) = all_finite(&samples) {
            return Err(Error::NonFinite {
                what: "trace",
                index,
            });
        }
        Ok(Self {
            samples,
            rate_hz,
            unit,
        })
    }

    pub fn zeros(len: usize, rate_hz: T, unit: Unit) -> Result<Self> {
        Self::new(vec![T::zero(); len], rate_hz, unit)
    }

    /// Builds a trace by evaluating `f` at each sample time `i / rate_hz`.
    pub fn from_fn(len: usize, rate_hz: T, unit: Unit, f: impl Fn(T) -> T) -> Result<Self> {
        let samples = (0..len)
            .map(|i| f(T::from_count(i) / rate_hz))
            .collect::<Vec<_>>();
        Self::new(samples, rate_hz, unit)
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn rate_hz(&self) -> T {
        self.rate_hz
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample period in seconds.
    pub fn dt(&self) -> T {
        T::one() / self.rate_hz
    }

    pub fn duration_s(&self) -> T {
        T::from_count(self.len()) / self.rate_hz
    }

    pub fn with_unit(mut self, unit: Unit) -> Self {
        self.unit = unit;
        self
    }

    /// Replaces the samples, keeping rate and unit. Revalidates finiteness.
    pub fn with_samples(&self, samples: Vec<T>) -> Result<Self> {
        Self::new(samples, self.rate_hz, self.unit)
    }

    pub fn min_max(&self) -> Option<(T, T)> {
        let first = *self.samples.first()?;
        Some(self.samples.iter().fold((first, first), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        }))
    }

    pub(crate) fn require_nonempty(&self, what: &'static str) -> Result<()> {
        if self.samples.is_empty() {
            Err(Error::Empty(what))
        } else {
            Ok(())
        }
    }

    /// True when both traces share length and (to within 1e-9 Hz) sample rate.
    pub fn is_aligned_with(&self, other: &Trace<T>) -> bool {
        self.len() == other.len() && same_rate(self.rate_hz, other.rate_hz)
    }
}

pub(crate) fn same_rate<T: Scalar>(a: T, b: T) -> bool {
    (a - b).abs() <= T::lit(1e-9) * a.abs().max(T::one())
}

/// Linear interpolation onto a uniform grid at `target_hz` covering the same
/// duration. The output has `round(n * target_hz / rate_hz)` samples (at least
/// one); grid points past the last input sample hold its value.
pub fn resample<T: Scalar>(t: &Trace<T>, target_hz: T) -> Result<Trace<T>> {
    t.require_nonempty("resample")?;
    if !(target_hz.is_finite() && target_hz > T::zero()) {
        return Err(Error::InvalidRate(target_hz.to_f64_lossy()));
    }
    let n = t.len();
    let xs = t.samples();
    let m = (T::from_count(n) * target_hz / t.rate_hz())
        .round()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let last = n - 1;
    let out = (0..m)
        .map(|j| {
            // Position in input-sample units.
            let pos = T::from_count(j) * t.rate_hz() / target_hz;
            let i0 = pos.floor().to_usize().unwrap_or(last);
            if i0 >= last {
                xs[last]
            } else {
                let frac = pos - T::from_count(i0);
                xs[i0] + (xs[i0 + 1] - xs[i0]) * frac
            }
        })
        .collect();
    Trace::new(out, target_hz, t.unit())
}

/// Min-max scaling parameters; `max > min` always holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams<T> {
    min: T,
    max: T,
}

impl<T: Scalar> NormParams<T> {
    pub fn new(min: T, max: T) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(invalid("normalization bounds must be finite"));
        }
        if max <= min {
            return Err(Error::ZeroRange);
        }
        Ok(Self { min, max })
    }

    /// Fits bounds to the extremes of `xs`.
    pub fn fit(xs: &[T]) -> Result<Self> {
        let first = *xs.first().ok_or(Error::Empty("normalization input"))?;
        let (lo, hi) = xs
            .iter()
            .fold((first, first), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        Self::new(lo, hi)
    }

    pub fn min(&self) -> T {
        self.min
    }

    pub fn max(&self) -> T {
        self.max
    }

    pub fn range(&self) -> T {
        self.max - self.min
    }

    #[inline]
    pub fn apply(&self, x: T) -> T {
        (x - self.min) / self.range()
    }

    #[inline]
    pub fn invert(&self, y: T) -> T {
        y * self.range() + self.min
    }
}

/// Scales a trace to `[0, 1]` and returns the parameters that undo it.
pub fn normalize<T: Scalar>(t: &Trace<T>) -> Result<(Trace<T>, NormParams<T>)> {
    t.require_nonempty("normalize")?;
    let params = NormParams::fit(t.samples())?;
    let out = t.samples().iter().map(|&x| params.apply(x)).collect();
    Ok((Trace::new(out, t.rate_hz(), Unit::Normalized)?, params))
}

pub fn denormalize<T: Scalar>(t: &Trace<T>, params: &NormParams<T>, unit: Unit) -> Result<Trace<T>> {
    let out = t.samples().iter().map(|&y| params.invert(y)).collect();
    Trace::new(out, t.rate_hz(), unit)
}

/// Backward difference scaled by the sample rate, with `out[0] = 0`.
pub fn derivative<T: Scalar>(t: &Trace<T>) -> Result<Trace<T>> {
    if t.len() < 2 {
        return Err(Error::TooShort {
            what: "derivative",
            needed: 2,
            got: t.len(),
        });
    }
    let xs = t.samples();
    let mut out = Vec::with_capacity(xs.len());
    out.push(T::zero());
    out.extend(xs.windows(2).map(|w| (w[1] - w[0]) * t.rate_hz()));
    Trace::new(out, t.rate_hz(), t.unit())
}

/// Window lengths of the tonic smoother, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionConfig<T> {
    pub median_window_s: T,
    pub average_window_s: T,
}

impl<T: Scalar> Default for DecompositionConfig<T> {
    fn default() -> Self {
        Self {
            median_window_s: T::lit(8.0),
            average_window_s: T::lit(8.0),
        }
    }
}

impl<T: Scalar> DecompositionConfig<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("median_window_s", self.median_window_s),
            ("average_window_s", self.average_window_s),
        ] {
            if !(w.is_finite() && w > T::zero()) {
                return Err(invalid(format!("{name} must be positive, got {w}")));
            }
        }
        Ok(())
    }

    fn window_samples(w: T, rate: T) -> usize {
        (w * rate).round().to_usize().unwrap_or(1).max(1)
    }

    /// Median and average window lengths in samples at `rate_hz`.
    pub fn windows(&self, rate_hz: T) -> (usize, usize) {
        (
            Self::window_samples(self.median_window_s, rate_hz),
            Self::window_samples(self.average_window_s, rate_hz),
        )
    }
}

/// An EDA trace split into slow tonic level and fast phasic response.
///
/// `original = tonic + phasic` holds sample by sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EdaDecomposition<T> {
    pub original: Trace<T>,
    pub tonic: Trace<T>,
    pub phasic: Trace<T>,
}

/// Tonic level as a moving median followed by a moving average (both centred,
/// replicate-padded at the edges); phasic is the residual.
pub fn decompose<T: Scalar>(eda: &Trace<T>, cfg: &DecompositionConfig<T>) -> Result<EdaDecomposition<T>> {
    cfg.validate()?;
    eda.require_nonempty("decompose")?;
    let (w_med, w_avg) = cfg.windows(eda.rate_hz());
    let needed = 2 * w_med.max(w_avg);
    if eda.len() < needed {
        return Err(Error::TooShort {
            what: "decompose",
            needed,
            got: eda.len(),
        });
    }
    let tonic = moving_average(&moving_median(eda.samples(), w_med), w_avg);
    let phasic = eda
        .samples()
        .iter()
        .zip(&tonic)
        .map(|(&x, &s)| x - s)
        .collect();
    Ok(EdaDecomposition {
        original: eda.clone(),
        tonic: eda.with_samples(tonic)?,
        phasic: eda.with_samples(phasic)?,
    })
}

/// Centred window `[i - w/2, i - w/2 + w)` with out-of-range indices clamped
/// to the nearest edge sample.
fn padded_window<T: Copy>(xs: &[T], i: usize, w: usize) -> impl Iterator<Item = T> + '_ {
    let last = xs.len() as isize - 1;
    let start = i as isize - (w / 2) as isize;
    (start..start + w as isize).map(move |k| xs[k.clamp(0, last) as usize])
}

fn moving_median<T: Scalar>(xs: &[T], w: usize) -> Vec<T> {
    let mut buf = Vec::with_capacity(w);
    (0..xs.len())
        .map(|i| {
            buf.clear();
            buf.extend(padded_window(xs, i, w));
            buf.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
            if w % 2 == 1 {
                buf[w / 2]
            } else {
                (buf[w / 2 - 1] + buf[w / 2]) / T::lit(2.0)
            }
        })
        .collect()
}

fn moving_average<T: Scalar>(xs: &[T], w: usize) -> Vec<T> {
    let denom = T::from_count(w);
    (0..xs.len())
        .map(|i| padded_window(xs, i, w).fold(T::zero(), |acc, x| acc + x) / denom)
        .collect()
}
