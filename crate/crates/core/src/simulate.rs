//! Running the adaptation law over a recorded session against the surrogate
//! user, and counting ER-SCRs before and after adaptation.

use std::fmt;
use std::str::FromStr;

use crate::control::{AdaptiveController, ControlFrame, ControlLimits, PidGains};
use crate::error::{invalid, Error, Result};
use crate::metrics::msdv;
use crate::scalar::Scalar;
use crate::scr::{count_er_scr, standard_detectors, DetectorParams};
use crate::signal::{decompose, DecompositionConfig, Trace};
use crate::surrogate::SurrogateModel;

/// One user session: acceleration pair and the EDA recorded alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord<T> {
    pub id: String,
    pub a_l: Trace<T>,
    pub a_r: Trace<T>,
    pub eda: Trace<T>,
}

impl<T: Scalar> SessionRecord<T> {
    pub fn new(id: impl Into<String>, a_l: Trace<T>, a_r: Trace<T>, eda: Trace<T>) -> Result<Self> {
        let id = id.into();
        if a_l.is_empty() {
            return Err(Error::Empty("session traces"));
        }
        if !(a_l.is_aligned_with(&a_r) && a_l.is_aligned_with(&eda)) {
            return Err(Error::Misaligned(format!("session `{id}` traces differ in length or rate")));
        }
        Ok(Self { id, a_l, a_r, eda })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulationMode {
    /// The phasic input of the law is the recorded session's phasic EDA.
    Offline,
    /// The phasic input comes from the surrogate's own rolling prediction.
    ClosedLoop,
}

/// Which phasic trace the "before adaptation" ER-SCR count is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawBasis {
    /// Surrogate prediction from the raw accelerations; both arms go through
    /// the same simulated user.
    Predicted,
    /// Decomposed phasic of the recorded EDA.
    Recorded,
}

macro_rules! str_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::Parse(format!(concat!("unknown ", stringify!($ty), " `{}`"), other))),
                }
            }
        }
    };
}

str_enum!(SimulationMode { Offline => "offline", ClosedLoop => "closed_loop" });
str_enum!(RawBasis { Predicted => "predicted", Recorded => "recorded" });

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig<T> {
    pub mode: SimulationMode,
    pub raw_basis: RawBasis,
    pub decomposition: DecompositionConfig<T>,
    pub limits: ControlLimits<T>,
    pub detectors: [DetectorParams<T>; 3],
    /// Clip spacing, in samples, when predicting a whole session.
    pub predict_stride: usize,
}

impl<T: Scalar> Default for SimulationConfig<T> {
    fn default() -> Self {
        Self {
            mode: SimulationMode::Offline,
            raw_basis: RawBasis::Predicted,
            decomposition: DecompositionConfig::default(),
            limits: ControlLimits::default(),
            detectors: standard_detectors(),
            predict_stride: 1,
        }
    }
}

impl<T: Scalar> SimulationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.decomposition.validate()?;
        self.limits.validate()?;
        if self.predict_stride == 0 {
            return Err(invalid("predict_stride must be positive"));
        }
        self.detectors.iter().try_for_each(|d| d.validate())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult<T> {
    pub id: String,
    pub adapted_a_l: Trace<T>,
    pub adapted_a_r: Trace<T>,
    /// Surrogate prediction for the adapted accelerations (normalized).
    pub predicted_phasic: Trace<T>,
    pub n_raw: [usize; 3],
    pub n_adapted: [usize; 3],
    /// (raw, adapted)
    pub msdv_l: (T, T),
    /// (raw, adapted)
    pub msdv_r: (T, T),
}

impl<T: Scalar> SimulationResult<T> {
    /// Per detector, whether the ER-SCR count strictly decreased.
    pub fn positives(&self) -> [bool; 3] {
        std::array::from_fn(|d| self.n_raw[d] > self.n_adapted[d])
    }
}

/// Gain-independent quantities of a session, computed once per dataset.
#[derive(Debug, Clone)]
pub struct PreparedSession<T> {
    pub record: SessionRecord<T>,
    /// Recorded phasic EDA mapped through the model's phasic normalization.
    pub phasic_unit: Vec<T>,
    pub n_raw: [usize; 3],
    pub msdv_raw: (T, T),
}

pub fn count_all<T: Scalar>(phasic: &Trace<T>, detectors: &[DetectorParams<T>; 3]) -> Result<[usize; 3]> {
    let mut out = [0; 3];
    for (slot, d) in out.iter_mut().zip(detectors) {
        *slot = count_er_scr(phasic, d)?;
    }
    Ok(out)
}

pub fn prepare_session<T: Scalar>(
    rec: &SessionRecord<T>,
    model: &SurrogateModel<T>,
    cfg: &SimulationConfig<T>,
) -> Result<PreparedSession<T>> {
    cfg.validate()?;
    model.check_rate(rec.a_l.rate_hz())?;
    let needed = 3 * model.clip_samples();
    if rec.a_l.len() < needed {
        return Err(Error::TooShort {
            what: "simulated session",
            needed,
            got: rec.a_l.len(),
        });
    }
    let phasic = decompose(&rec.eda, &cfg.decomposition)?.phasic;
    let norms = model.norms();
    let phasic_unit: Vec<T> = phasic.samples().iter().map(|&x| norms.phasic_unit(x)).collect();
    let n_raw = match cfg.raw_basis {
        RawBasis::Recorded => count_all(&phasic.with_samples(phasic_unit.clone())?, &cfg.detectors)?,
        RawBasis::Predicted => count_all(&model.predict_session(&rec.a_l, &rec.a_r, cfg.predict_stride)?, &cfg.detectors)?,
    };
    let msdv_raw = (msdv(&rec.a_l, 2)?, msdv(&rec.a_r, 2)?);
    Ok(PreparedSession {
        record: rec.clone(),
        phasic_unit,
        n_raw,
        msdv_raw,
    })
}

pub fn simulate_session<T: Scalar>(
    rec: &SessionRecord<T>,
    gains: &PidGains<T>,
    model: &SurrogateModel<T>,
    cfg: &SimulationConfig<T>,
) -> Result<SimulationResult<T>> {
    simulate_prepared(&prepare_session(rec, model, cfg)?, gains, model, cfg)
}

pub fn simulate_prepared<T: Scalar>(
    prep: &PreparedSession<T>,
    gains: &PidGains<T>,
    model: &SurrogateModel<T>,
    cfg: &SimulationConfig<T>,
) -> Result<SimulationResult<T>> {
    let rec = &prep.record;
    let mut ctl = AdaptiveController::new(*gains, cfg.limits)?;
    let (adapted_l, adapted_r) = match cfg.mode {
        SimulationMode::Offline => adapt_offline(&mut ctl, rec, &prep.phasic_unit)?,
        SimulationMode::ClosedLoop => adapt_closed_loop(&mut ctl, rec, model)?,
    };
    let adapted_a_l = rec.a_l.with_samples(adapted_l)?;
    let adapted_a_r = rec.a_r.with_samples(adapted_r)?;
    let predicted_phasic = model.predict_session(&adapted_a_l, &adapted_a_r, cfg.predict_stride)?;
    let n_adapted = count_all(&predicted_phasic, &cfg.detectors)?;
    Ok(SimulationResult {
        id: rec.id.clone(),
        msdv_l: (prep.msdv_raw.0, msdv(&adapted_a_l, 2)?),
        msdv_r: (prep.msdv_raw.1, msdv(&adapted_a_r, 2)?),
        adapted_a_l,
        adapted_a_r,
        predicted_phasic,
        n_raw: prep.n_raw,
        n_adapted,
    })
}

fn adapt_offline<T: Scalar>(
    ctl: &mut AdaptiveController<T>,
    rec: &SessionRecord<T>,
    phasic_unit: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    let dt = rec.a_l.dt();
    let n = rec.a_l.len();
    let mut out_l = Vec::with_capacity(n);
    let mut out_r = Vec::with_capacity(n);
    for i in 0..n {
        let frame = ControlFrame {
            a_l: rec.a_l.samples()[i],
            a_r: rec.a_r.samples()[i],
            f_prev: if i == 0 { T::zero() } else { phasic_unit[i - 1] },
            dt,
        };
        let (l, r) = ctl.adapt_step(&frame)?;
        out_l.push(l);
        out_r.push(r);
    }
    Ok((out_l, out_r))
}

/// At each clip boundary the surrogate predicts the coming clip from the
/// adapted history; acceleration not yet produced is held at the latest
/// adapted value (zero before the first tick).
fn adapt_closed_loop<T: Scalar>(
    ctl: &mut AdaptiveController<T>,
    rec: &SessionRecord<T>,
    model: &SurrogateModel<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let dt = rec.a_l.dt();
    let n = rec.a_l.len();
    let l = model.clip_samples();
    let norms = model.norms();
    let unit = |p: &crate::signal::NormParams<T>, x: T| crate::scalar::clamp(p.apply(x), T::zero(), T::one());
    let mut out_l: Vec<T> = Vec::with_capacity(n);
    let mut out_r: Vec<T> = Vec::with_capacity(n);
    let mut rolling: Vec<T> = Vec::with_capacity(n);
    for i in 0..n {
        if i % l == 0 && i + l <= n {
            let hold = (
                out_l.last().copied().unwrap_or(T::zero()),
                out_r.last().copied().unwrap_or(T::zero()),
            );
            let start = i as isize - l as isize;
            let mut window = Vec::with_capacity(6 * l);
            for (hist, held, params) in [(&out_l, hold.0, &norms.a_l), (&out_r, hold.1, &norms.a_r)] {
                window.extend((start..start + 3 * l as isize).map(|p| {
                    if p < 0 || p as usize >= n {
                        T::zero()
                    } else if (p as usize) < i {
                        unit(params, hist[p as usize])
                    } else {
                        unit(params, held)
                    }
                }));
            }
            rolling.extend(model.predict_clip(&window)?);
        } else if rolling.len() <= i {
            // Tail shorter than a clip: hold the last prediction.
            let last = rolling.last().copied().unwrap_or(T::zero());
            rolling.push(last);
        }
        let frame = ControlFrame {
            a_l: rec.a_l.samples()[i],
            a_r: rec.a_r.samples()[i],
            f_prev: if i == 0 { T::zero() } else { rolling[i - 1] },
            dt,
        };
        let (a_l, a_r) = ctl.adapt_step(&frame)?;
        out_l.push(a_l);
        out_r.push(a_r);
    }
    Ok((out_l, out_r))
}
