//! The simulated user: a windowed regressor from bi-channel acceleration
//! context to phasic EDA, plus a synthetic physiological oracle that produces
//! ground-truth sessions.
//!
//! A clip pairs `L` phasic samples `[kS, kS+L)` with the acceleration window
//! `[kS-L, kS+2L)` on both channels (previous, current and next clip).
//! Samples outside the session are zero-padded in normalized units.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::scalar::{clamp, Scalar};
use crate::signal::{same_rate, NormParams, Trace, Unit};

/// Corpus-level normalization for the two acceleration channels and phasic
/// EDA. Fitted on training data and frozen for inference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelNorms<T> {
    pub a_l: NormParams<T>,
    pub a_r: NormParams<T>,
    pub phasic: NormParams<T>,
}

impl<T: Scalar> ChannelNorms<T> {
    /// Fits each channel's bounds over every session in the corpus.
    pub fn fit<'a, I>(sessions: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a Trace<T>, &'a Trace<T>, &'a Trace<T>)>,
    {
        let mut bounds: [Option<(T, T)>; 3] = [None; 3];
        for (a_l, a_r, phasic) in sessions {
            for (slot, t) in bounds.iter_mut().zip([a_l, a_r, phasic]) {
                if let Some((lo, hi)) = t.min_max() {
                    *slot = Some(match *slot {
                        Some((l, h)) => (l.min(lo), h.max(hi)),
                        None => (lo, hi),
                    });
                }
            }
        }
        // A channel that never moves (no turns at all, say) keeps unit range
        // so that it normalizes to zero instead of failing.
        let make = |b: Option<(T, T)>| -> Result<NormParams<T>> {
            let (lo, hi) = b.ok_or(Error::Empty("normalization corpus"))?;
            NormParams::new(lo, if hi > lo { hi } else { lo + T::one() })
        };
        Ok(Self {
            a_l: make(bounds[0])?,
            a_r: make(bounds[1])?,
            phasic: make(bounds[2])?,
        })
    }

    fn unit(p: &NormParams<T>, x: T) -> T {
        clamp(p.apply(x), T::zero(), T::one())
    }

    /// Normalized phasic value clamped to `[0, 1]`.
    pub fn phasic_unit(&self, x: T) -> T {
        Self::unit(&self.phasic, x)
    }
}

/// Samples per clip at `rate_hz`.
pub fn clip_samples<T: Scalar>(clip_len_s: T, rate_hz: T) -> Result<usize> {
    if !(clip_len_s.is_finite() && clip_len_s > T::zero()) {
        return Err(invalid("clip length must be positive"));
    }
    let l = (clip_len_s * rate_hz).round().to_usize().unwrap_or(0);
    if l == 0 {
        return Err(invalid("clip shorter than one sample"));
    }
    Ok(l)
}

/// One training pair. `window` holds `2 × 3L` values, longitudinal channel
/// first, each in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip<T> {
    window: Vec<T>,
    target: Vec<T>,
}

impl<T: Scalar> Clip<T> {
    pub fn new(window: Vec<T>, target: Vec<T>) -> Result<Self> {
        let l = target.len();
        if l == 0 {
            return Err(Error::Empty("clip target"));
        }
        if window.len() != 6 * l {
            return Err(Error::ShapeMismatch {
                expected: 6 * l,
                got: window.len(),
            });
        }
        Ok(Self { window, target })
    }

    pub fn clip_len(&self) -> usize {
        self.target.len()
    }

    pub fn accel_window(&self) -> &[T] {
        &self.window
    }

    /// Window samples of channel 0 (longitudinal) or 1 (rotational).
    pub fn channel(&self, c: usize) -> &[T] {
        let w = 3 * self.clip_len();
        &self.window[c * w..(c + 1) * w]
    }

    pub fn target(&self) -> &[T] {
        &self.target
    }
}

fn check_aligned<T: Scalar>(traces: &[&Trace<T>]) -> Result<()> {
    let first = traces[0];
    first.require_nonempty("session trace")?;
    for t in &traces[1..] {
        if !first.is_aligned_with(t) {
            return Err(Error::Misaligned(format!(
                "lengths {} vs {}, rates {} vs {}",
                first.len(),
                t.len(),
                first.rate_hz(),
                t.rate_hz()
            )));
        }
    }
    Ok(())
}

/// Number of clips with a complete target `[kS, kS+L)` inside `n` samples.
pub fn clip_count(n: usize, l: usize, stride: usize) -> usize {
    if n < l || stride == 0 {
        0
    } else {
        (n - l) / stride + 1
    }
}

/// Normalized acceleration windows for every clip start `k*stride`.
pub fn accel_windows<T: Scalar>(
    a_l: &Trace<T>,
    a_r: &Trace<T>,
    l: usize,
    stride: usize,
    norms: &ChannelNorms<T>,
) -> Result<Vec<Vec<T>>> {
    check_aligned(&[a_l, a_r])?;
    if stride == 0 {
        return Err(invalid("stride must be positive"));
    }
    let n = a_l.len();
    if n < 3 * l {
        return Err(Error::TooShort {
            what: "clip construction",
            needed: 3 * l,
            got: n,
        });
    }
    let nl = ChannelNorms::unit;
    Ok((0..clip_count(n, l, stride))
        .map(|k| {
            let start = (k * stride) as isize - l as isize;
            let mut w = Vec::with_capacity(6 * l);
            for (trace, params) in [(a_l, &norms.a_l), (a_r, &norms.a_r)] {
                let xs = trace.samples();
                w.extend((start..start + 3 * l as isize).map(|p| {
                    if p < 0 || p as usize >= n {
                        T::zero()
                    } else {
                        nl(params, xs[p as usize])
                    }
                }));
            }
            w
        })
        .collect())
}

/// Builds clips from one session using frozen normalization parameters.
pub fn make_clips<T: Scalar>(
    a_l: &Trace<T>,
    a_r: &Trace<T>,
    phasic: &Trace<T>,
    clip_len_s: T,
    stride: usize,
    norms: &ChannelNorms<T>,
) -> Result<Vec<Clip<T>>> {
    check_aligned(&[a_l, a_r, phasic])?;
    let l = clip_samples(clip_len_s, a_l.rate_hz())?;
    let windows = accel_windows(a_l, a_r, l, stride, norms)?;
    let ps = phasic.samples();
    windows
        .into_iter()
        .enumerate()
        .map(|(k, w)| {
            let s = k * stride;
            let target = ps[s..s + l].iter().map(|&x| norms.phasic_unit(x)).collect();
            Clip::new(w, target)
        })
        .collect()
}

/// Overlap-averaged concatenation of clips placed `stride` samples apart.
/// Output length is `stride*(n-1) + L`.
pub fn reconstruct<T: Scalar>(clips: &[Vec<T>], stride: usize, rate_hz: T) -> Result<Trace<T>> {
    let l = clips.first().ok_or(Error::Empty("clip list"))?.len();
    if l == 0 {
        return Err(Error::Empty("clip"));
    }
    if stride == 0 || stride > l {
        return Err(invalid(format!("stride must be in 1..={l}, got {stride}")));
    }
    let len = stride * (clips.len() - 1) + l;
    let mut sum = vec![T::zero(); len];
    let mut count = vec![0usize; len];
    for (k, clip) in clips.iter().enumerate() {
        if clip.len() != l {
            return Err(Error::ShapeMismatch {
                expected: l,
                got: clip.len(),
            });
        }
        for (j, &v) in clip.iter().enumerate() {
            sum[k * stride + j] = sum[k * stride + j] + v;
            count[k * stride + j] += 1;
        }
    }
    let out = sum
        .into_iter()
        .zip(count)
        .map(|(s, c)| s / T::from_count(c))
        .collect();
    Trace::new(out, rate_hz, Unit::Normalized)
}

/// Ridge-regularized linear map from a flattened acceleration window (plus a
/// bias input) to a phasic clip.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel<T> {
    /// Row-major `L × (6L + 1)`; the last column is the bias.
    weights: Vec<T>,
    clip_len_s: T,
    rate_hz: T,
    clip_samples: usize,
    norms: ChannelNorms<T>,
    train_mae: T,
}

impl<T: Scalar> SurrogateModel<T> {
    pub fn from_parts(
        weights: Vec<T>,
        clip_len_s: T,
        rate_hz: T,
        norms: ChannelNorms<T>,
        train_mae: T,
    ) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > T::zero()) {
            return Err(Error::InvalidRate(rate_hz.to_f64_lossy()));
        }
        let l = clip_samples(clip_len_s, rate_hz)?;
        let expected = l * (6 * l + 1);
        if weights.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("model weights must be finite"));
        }
        if !(train_mae.is_finite() && train_mae >= T::zero()) {
            return Err(invalid("train_mae must be >= 0"));
        }
        Ok(Self {
            weights,
            clip_len_s,
            rate_hz,
            clip_samples: l,
            norms,
            train_mae,
        })
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn clip_len_s(&self) -> T {
        self.clip_len_s
    }

    pub fn rate_hz(&self) -> T {
        self.rate_hz
    }

    pub fn clip_samples(&self) -> usize {
        self.clip_samples
    }

    pub fn inputs(&self) -> usize {
        6 * self.clip_samples + 1
    }

    pub fn norms(&self) -> &ChannelNorms<T> {
        &self.norms
    }

    pub fn train_mae(&self) -> T {
        self.train_mae
    }

    /// Affine map of the window, clamped to `[0, 1]`.
    pub fn predict_clip(&self, window: &[T]) -> Result<Vec<T>> {
        let p = self.inputs();
        if window.len() != p - 1 {
            return Err(Error::ShapeMismatch {
                expected: p - 1,
                got: window.len(),
            });
        }
        Ok(self
            .weights
            .chunks_exact(p)
            .map(|row| {
                let y = row[..p - 1]
                    .iter()
                    .zip(window)
                    .fold(row[p - 1], |acc, (&w, &x)| acc + w * x);
                clamp(y, T::zero(), T::one())
            })
            .collect())
    }

    /// Mean absolute error of [`Self::predict_clip`] over every target sample.
    pub fn mae(&self, clips: &[Clip<T>]) -> Result<T> {
        if clips.is_empty() {
            return Err(Error::Empty("clip set"));
        }
        let mut total = T::zero();
        let mut n = 0usize;
        for clip in clips {
            let pred = self.predict_clip(clip.accel_window())?;
            if pred.len() != clip.clip_len() {
                return Err(Error::ShapeMismatch {
                    expected: pred.len(),
                    got: clip.clip_len(),
                });
            }
            total = total + pred.iter().zip(clip.target()).map(|(&a, &b)| (a - b).abs()).sum::<T>();
            n += pred.len();
        }
        Ok(total / T::from_count(n))
    }

    pub(crate) fn check_rate(&self, rate_hz: T) -> Result<()> {
        if same_rate(self.rate_hz, rate_hz) {
            Ok(())
        } else {
            Err(Error::ModelMismatch(format!(
                "model expects {} Hz, session is {} Hz",
                self.rate_hz, rate_hz
            )))
        }
    }

    /// Predicts a whole session from clips placed `stride` samples apart
    /// (`1..=L`), overlap-averaged into a normalized phasic trace. Stride `L`
    /// covers `L * floor(n / L)` samples, stride 1 covers all `n`.
    pub fn predict_session(&self, a_l: &Trace<T>, a_r: &Trace<T>, stride: usize) -> Result<Trace<T>> {
        self.check_rate(a_l.rate_hz())?;
        let l = self.clip_samples;
        if stride == 0 || stride > l {
            return Err(invalid(format!("prediction stride must be in 1..={l}, got {stride}")));
        }
        let clips = accel_windows(a_l, a_r, l, stride, &self.norms)?
            .iter()
            .map(|w| self.predict_clip(w))
            .collect::<Result<Vec<_>>>()?;
        reconstruct(&clips, stride, self.rate_hz)
    }

    /// Plain-text model file: `key=value` header, then the weight matrix as
    /// CSV rows.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# adanav surrogate v1\n");
        let n = &self.norms;
        s += &format!("clip_len_s={}\n", self.clip_len_s);
        s += &format!("rate_hz={}\n", self.rate_hz);
        s += &format!("norm_a_l={},{}\n", n.a_l.min(), n.a_l.max());
        s += &format!("norm_a_r={},{}\n", n.a_r.min(), n.a_r.max());
        s += &format!("norm_phasic={},{}\n", n.phasic.min(), n.phasic.max());
        s += &format!("train_mae={}\n", self.train_mae);
        s += &format!("weights={}x{}\n", self.clip_samples, self.inputs());
        for row in self.weights.chunks_exact(self.inputs()) {
            let cells: Vec<String> = row.iter().map(|w| w.to_string()).collect();
            s += &cells.join(",");
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut header = std::collections::BTreeMap::new();
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let mut dims = None;
        for line in lines.by_ref() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("model header: bad line `{line}`")))?;
            if k.trim() == "weights" {
                let (r, c) = v
                    .trim()
                    .split_once('x')
                    .ok_or_else(|| Error::Parse("model header: weights=<rows>x<cols>".into()))?;
                dims = Some((parse_usize(r)?, parse_usize(c)?));
                break;
            }
            header.insert(k.trim().to_string(), v.trim().to_string());
        }
        let (rows, cols) = dims.ok_or_else(|| Error::Parse("model file: missing weights".into()))?;
        let get = |k: &str| -> Result<&String> {
            header
                .get(k)
                .ok_or_else(|| Error::Parse(format!("model header: missing `{k}`")))
        };
        let pair = |k: &str| -> Result<NormParams<T>> {
            let v = get(k)?;
            let (a, b) = v
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("model header: `{k}` needs min,max")))?;
            NormParams::new(parse_scalar(a)?, parse_scalar(b)?)
        };
        let norms = ChannelNorms {
            a_l: pair("norm_a_l")?,
            a_r: pair("norm_a_r")?,
            phasic: pair("norm_phasic")?,
        };
        let mut weights = Vec::with_capacity(rows * cols);
        for line in lines {
            let before = weights.len();
            for cell in line.split(',') {
                weights.push(parse_scalar(cell)?);
            }
            if weights.len() - before != cols {
                return Err(Error::ShapeMismatch {
                    expected: cols,
                    got: weights.len() - before,
                });
            }
        }
        if weights.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: rows * cols,
                got: weights.len(),
            });
        }
        let model = Self::from_parts(
            weights,
            parse_scalar(get("clip_len_s")?)?,
            parse_scalar(get("rate_hz")?)?,
            norms,
            parse_scalar(get("train_mae")?)?,
        )?;
        if model.clip_samples != rows || model.inputs() != cols {
            return Err(Error::ModelMismatch(format!(
                "weights {rows}x{cols} inconsistent with clip length {} at {} Hz",
                model.clip_len_s, model.rate_hz
            )));
        }
        Ok(model)
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|e| Error::Parse(format!("`{}`: {e}", s.trim())))
}

pub(crate) fn parse_scalar<T: Scalar>(s: &str) -> Result<T> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("`{}`: {e}", s.trim())))?;
    Ok(T::lit(v))
}

/// Clip geometry and normalization shared by every clip in a training set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipLayout<T> {
    pub clip_len_s: T,
    pub rate_hz: T,
    pub norms: ChannelNorms<T>,
}

/// Solves `min ‖Y − X Wᵀ‖² + λ‖W‖²` through the normal equations.
pub fn fit_surrogate<T: Scalar>(clips: &[Clip<T>], ridge_lambda: T, layout: ClipLayout<T>) -> Result<SurrogateModel<T>> {
    if clips.is_empty() {
        return Err(Error::Empty("training clips"));
    }
    if !(ridge_lambda.is_finite() && ridge_lambda >= T::zero()) {
        return Err(invalid("ridge_lambda must be >= 0"));
    }
    let l = clip_samples(layout.clip_len_s, layout.rate_hz)?;
    let p = 6 * l + 1;
    let mut gram = vec![T::zero(); p * p];
    let mut rhs = vec![T::zero(); p * l];
    let mut x = vec![T::zero(); p];
    for clip in clips {
        if clip.clip_len() != l {
            return Err(Error::ShapeMismatch {
                expected: l,
                got: clip.clip_len(),
            });
        }
        x[..p - 1].copy_from_slice(clip.accel_window());
        x[p - 1] = T::one();
        for i in 0..p {
            if x[i] == T::zero() {
                continue;
            }
            for j in i..p {
                gram[i * p + j] = gram[i * p + j] + x[i] * x[j];
            }
            for (o, &y) in clip.target().iter().enumerate() {
                rhs[i * l + o] = rhs[i * l + o] + x[i] * y;
            }
        }
    }
    for i in 0..p {
        gram[i * p + i] = gram[i * p + i] + ridge_lambda;
        for j in 0..i {
            gram[i * p + j] = gram[j * p + i];
        }
    }
    let chol = cholesky(&gram, p)?;
    let mut weights = vec![T::zero(); l * p];
    let mut col = vec![T::zero(); p];
    for o in 0..l {
        for i in 0..p {
            col[i] = rhs[i * l + o];
        }
        let sol = cholesky_solve(&chol, p, &col);
        weights[o * p..(o + 1) * p].copy_from_slice(&sol);
    }
    let mut model = SurrogateModel::from_parts(weights, layout.clip_len_s, layout.rate_hz, layout.norms, T::zero())?;
    model.train_mae = model.mae(clips)?;
    Ok(model)
}

/// Lower-triangular factor of a symmetric positive definite matrix.
fn cholesky<T: Scalar>(a: &[T], n: usize) -> Result<Vec<T>> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(T::zero(), T::max);
    let tol = scale * T::epsilon() * T::from_count(n) * T::lit(16.0);
    let mut lower = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - lower[i * n + k] * lower[j * n + k];
            }
            if i == j {
                if !(s > tol) {
                    return Err(Error::Singular);
                }
                lower[i * n + i] = s.sqrt();
            } else {
                lower[i * n + j] = s / lower[j * n + j];
            }
        }
    }
    Ok(lower)
}

fn cholesky_solve<T: Scalar>(lower: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - lower[i * n + k] * y[k];
        }
        y[i] = s / lower[i * n + i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s = s - lower[k * n + i] * x[k];
        }
        x[i] = s / lower[i * n + i];
    }
    x
}

/// Parameters of the synthetic skin-conductance oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleParams<T> {
    pub tau_rise_s: T,
    pub tau_decay_s: T,
    /// Response gain, µS per (m/s² · s) of stimulus.
    pub gain: T,
    pub latency_s: T,
    pub baseline: T,
    /// Tonic drift, µS/s.
    pub tonic_drift: T,
    pub noise_sd: T,
    pub seed: u64,
}

impl<T: Scalar> Default for OracleParams<T> {
    fn default() -> Self {
        Self {
            tau_rise_s: T::lit(0.75),
            tau_decay_s: T::lit(2.0),
            gain: T::lit(0.3),
            latency_s: T::one(),
            baseline: T::lit(2.0),
            tonic_drift: T::lit(0.001),
            noise_sd: T::lit(0.002),
            seed: 0,
        }
    }
}

impl<T: Scalar> OracleParams<T> {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.tau_rise_s,
            self.tau_decay_s,
            self.gain,
            self.latency_s,
            self.baseline,
            self.tonic_drift,
            self.noise_sd,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(invalid("oracle parameters must be finite"));
        }
        if !(self.tau_rise_s > T::zero() && self.tau_rise_s < self.tau_decay_s) {
            return Err(invalid("oracle needs 0 < tau_rise_s < tau_decay_s"));
        }
        if self.latency_s < T::zero() || self.noise_sd < T::zero() {
            return Err(invalid("oracle latency_s and noise_sd must be >= 0"));
        }
        Ok(())
    }

    /// Time of the kernel maximum.
    pub fn kernel_peak_s(&self) -> T {
        let (r, d) = (self.tau_rise_s, self.tau_decay_s);
        (d / r).ln() * r * d / (d - r)
    }

    /// Difference-of-exponentials impulse response with unit peak.
    pub fn kernel(&self, t: T) -> T {
        if t < T::zero() {
            return T::zero();
        }
        let raw = |s: T| (-s / self.tau_decay_s).exp() - (-s / self.tau_rise_s).exp();
        raw(t) / raw(self.kernel_peak_s())
    }
}

/// Synthesizes EDA (µS) for an acceleration pair:
/// `baseline + drift*t + gain*(s ⊛ h)(t − latency) + noise`, with stimulus
/// `s = |a_l| + 0.5|a_r|`.
pub fn synth_session<T: Scalar>(a_l: &Trace<T>, a_r: &Trace<T>, params: &OracleParams<T>) -> Result<Trace<T>> {
    params.validate()?;
    check_aligned(&[a_l, a_r])?;
    let n = a_l.len();
    let dt = a_l.dt();
    let stimulus: Vec<T> = a_l
        .samples()
        .iter()
        .zip(a_r.samples())
        .map(|(&l, &r)| l.abs() + T::lit(0.5) * r.abs())
        .collect();
    let horizon = (T::lit(12.0) * params.tau_decay_s / dt)
        .ceil()
        .to_usize()
        .unwrap_or(n)
        .min(n);
    let kernel: Vec<T> = (0..horizon).map(|k| params.kernel(T::from_count(k) * dt) * dt).collect();
    let lag = (params.latency_s / dt).round().to_usize().unwrap_or(0);

    let mut response = vec![T::zero(); n];
    for (i, &s) in stimulus.iter().enumerate() {
        if s == T::zero() {
            continue;
        }
        for (k, &h) in kernel.iter().enumerate() {
            let j = i + lag + k;
            if j >= n {
                break;
            }
            response[j] = response[j] + s * h;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise_sd = params.noise_sd.to_f64_lossy();
    let normal = Normal::new(0.0, noise_sd.max(f64::MIN_POSITIVE)).map_err(|e| invalid(e.to_string()))?;
    let eda = (0..n)
        .map(|i| {
            let t = T::from_count(i) * dt;
            let noise = if noise_sd > 0.0 {
                T::lit(normal.sample(&mut rng))
            } else {
                T::zero()
            };
            params.baseline + params.tonic_drift * t + params.gain * response[i] + noise
        })
        .collect();
    Trace::new(eda, a_l.rate_hz(), Unit::Microsiemens)
}
