//! Synthetic cohorts: randomized navigation acceleration profiles paired with
//! oracle EDA, and the train/eval manifest.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::signal::{Trace, Unit};
use crate::simulate::SessionRecord;
use crate::surrogate::{synth_session, OracleParams};

/// Shape of the randomized navigation profiles.
///
/// A session is a sequence of manoeuvres separated by idle gaps. Longitudinal
/// manoeuvres are a strong forward push followed by a gentler, longer brake;
/// rotational manoeuvres start and stop a turn with opposite-sign pulses.
/// Every pulse is a raised-cosine bump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileParams<T> {
    pub gap_s: (T, T),
    pub push_amplitude: (T, T),
    pub push_duration_s: (T, T),
    /// Brake amplitude as a fraction of the push amplitude.
    pub brake_ratio: (T, T),
    pub brake_duration_s: (T, T),
    pub turn_amplitude: (T, T),
    pub turn_duration_s: (T, T),
    /// Probability that a manoeuvre includes a turn.
    pub turn_probability: f64,
}

impl<T: Scalar> Default for ProfileParams<T> {
    fn default() -> Self {
        let r = |a: f64, b: f64| (T::lit(a), T::lit(b));
        Self {
            gap_s: r(4.0, 12.0),
            push_amplitude: r(0.8, 3.0),
            push_duration_s: r(2.0, 4.0),
            brake_ratio: r(0.05, 0.15),
            brake_duration_s: r(4.0, 8.0),
            turn_amplitude: r(0.3, 1.2),
            turn_duration_s: r(1.0, 2.0),
            turn_probability: 0.5,
        }
    }
}

impl<T: Scalar> ProfileParams<T> {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("gap_s", self.gap_s),
            ("push_amplitude", self.push_amplitude),
            ("push_duration_s", self.push_duration_s),
            ("brake_ratio", self.brake_ratio),
            ("brake_duration_s", self.brake_duration_s),
            ("turn_amplitude", self.turn_amplitude),
            ("turn_duration_s", self.turn_duration_s),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo >= T::zero() && hi >= lo) {
                return Err(invalid(format!("profile range {name} must satisfy 0 <= lo <= hi")));
            }
        }
        if !(0.0..=1.0).contains(&self.turn_probability) {
            return Err(invalid("turn_probability must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn uniform<T: Scalar>(rng: &mut ChaCha8Rng, (lo, hi): (T, T)) -> T {
    let u: f64 = rng.random();
    lo + T::lit(u) * (hi - lo)
}

/// Adds `amp * sin²(π (t - start) / dur)` for `t` in `[start, start + dur)`.
fn add_bump<T: Scalar>(xs: &mut [T], rate: T, start_s: T, dur_s: T, amp: T) {
    let n = xs.len();
    let first = (start_s * rate).ceil().to_usize().unwrap_or(n);
    let last = ((start_s + dur_s) * rate).ceil().to_usize().unwrap_or(n).min(n);
    for (i, x) in xs.iter_mut().enumerate().take(last).skip(first) {
        let phase = (T::from_count(i) / rate - start_s) / dur_s;
        let s = (T::lit(std::f64::consts::PI) * phase).sin();
        *x = *x + amp * s * s;
    }
}

/// Longitudinal (m/s²) and rotational (rad/s²) acceleration traces.
pub fn synth_profile<T: Scalar>(
    n: usize,
    rate_hz: T,
    params: &ProfileParams<T>,
    rng: &mut ChaCha8Rng,
) -> Result<(Trace<T>, Trace<T>)> {
    params.validate()?;
    let mut a_l = vec![T::zero(); n];
    let mut a_r = vec![T::zero(); n];
    let end = T::from_count(n) / rate_hz;
    let mut t = uniform(rng, params.gap_s) * T::lit(0.5);
    while t < end {
        let amp = uniform(rng, params.push_amplitude);
        let push = uniform(rng, params.push_duration_s);
        add_bump(&mut a_l, rate_hz, t, push, amp);
        let brake_at = t + push + uniform(rng, (T::zero(), T::lit(2.0)));
        let brake = uniform(rng, params.brake_duration_s);
        add_bump(&mut a_l, rate_hz, brake_at, brake, -amp * uniform(rng, params.brake_ratio));
        if rng.random_bool(params.turn_probability) {
            let sign = if rng.random_bool(0.5) { T::one() } else { -T::one() };
            let turn_amp = sign * uniform(rng, params.turn_amplitude);
            let dur = uniform(rng, params.turn_duration_s);
            let turn_at = t + uniform(rng, (T::zero(), push));
            add_bump(&mut a_r, rate_hz, turn_at, dur, turn_amp);
            let hold = uniform(rng, (T::lit(0.5), T::lit(2.0)));
            add_bump(&mut a_r, rate_hz, turn_at + dur + hold, dur, -turn_amp);
        }
        t = brake_at + brake + uniform(rng, params.gap_s);
    }
    Ok((
        Trace::new(a_l, rate_hz, Unit::MetersPerSecond2)?,
        Trace::new(a_r, rate_hz, Unit::RadiansPerSecond2)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Eval,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "eval" => Ok(Split::Eval),
            other => Err(Error::Parse(format!("unknown split `{other}`"))),
        }
    }
}

/// Session ids and their split, in dataset order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<(String, Split)>,
}

impl Manifest {
    /// The first `round(n * train_fraction)` ids train, the rest evaluate.
    pub fn split(ids: impl IntoIterator<Item = String>, train_fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(invalid("train_fraction must lie in [0, 1]"));
        }
        let ids: Vec<String> = ids.into_iter().collect();
        let n_train = (ids.len() as f64 * train_fraction).round() as usize;
        Ok(Self {
            entries: ids
                .into_iter()
                .enumerate()
                .map(|(i, id)| (id, if i < n_train { Split::Train } else { Split::Eval }))
                .collect(),
        })
    }

    pub fn ids(&self, split: Split) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(move |(_, s)| *s == split)
            .map(|(id, _)| id.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("session_id,split\n");
        for (id, split) in &self.entries {
            s += &format!("{id},{split}\n");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        match lines.next().map(str::trim) {
            Some("session_id,split") => {}
            other => return Err(Error::Parse(format!("manifest header: expected `session_id,split`, got {other:?}"))),
        }
        let mut entries = Vec::new();
        for line in lines {
            let (id, split) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("manifest row `{line}`")))?;
            let id = id.trim();
            if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
                return Err(Error::Parse(format!("manifest: invalid session id `{id}`")));
            }
            if entries.iter().any(|(e, _): &(String, Split)| e == id) {
                return Err(Error::Parse(format!("manifest: duplicate session id `{id}`")));
            }
            entries.push((id.to_string(), split.trim().parse()?));
        }
        Ok(Self { entries })
    }
}

/// Everything needed to generate a synthetic cohort.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortSpec<T> {
    pub sessions: usize,
    pub duration_s: T,
    pub rate_hz: T,
    pub seed: u64,
    pub oracle: OracleParams<T>,
    pub profile: ProfileParams<T>,
}

impl<T: Scalar> Default for CohortSpec<T> {
    fn default() -> Self {
        Self {
            sessions: 40,
            duration_s: T::lit(240.0),
            rate_hz: T::lit(4.0),
            seed: 0,
            oracle: OracleParams::default(),
            profile: ProfileParams::default(),
        }
    }
}

impl<T: Scalar> CohortSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.sessions == 0 {
            return Err(invalid("cohort needs at least one session"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > T::zero()) {
            return Err(invalid("duration_s must be positive"));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > T::zero()) {
            return Err(Error::InvalidRate(self.rate_hz.to_f64_lossy()));
        }
        self.oracle.validate()?;
        self.profile.validate()
    }

    pub fn samples_per_session(&self) -> usize {
        (self.duration_s * self.rate_hz).round().to_usize().unwrap_or(0)
    }
}

/// Generates `spec.sessions` sessions named `s000`, `s001`, ... Each session
/// draws its profile and oracle noise seed from one master stream, so the
/// cohort is a pure function of the spec.
pub fn synth_cohort<T: Scalar>(spec: &CohortSpec<T>) -> Result<Vec<SessionRecord<T>>> {
    spec.validate()?;
    let n = spec.samples_per_session();
    let mut master = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.sessions)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(master.random());
            let (a_l, a_r) = synth_profile(n, spec.rate_hz, &spec.profile, &mut rng)?;
            let oracle = OracleParams {
                seed: rng.random(),
                ..spec.oracle
            };
            let eda = synth_session(&a_l, &a_r, &oracle)?;
            SessionRecord::new(format!("s{k:03}"), a_l, a_r, eda)
        })
        .collect()
}
