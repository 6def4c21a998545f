//! Fitting the surrogate on recorded sessions: decompose each EDA trace, fit
//! corpus normalization on the training split, cut clips and solve the ridge
//! problem.

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::signal::{decompose, DecompositionConfig, Trace};
use crate::simulate::SessionRecord;
use crate::surrogate::{fit_surrogate, make_clips, ChannelNorms, Clip, ClipLayout, SurrogateModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig<T> {
    pub clip_len_s: T,
    /// Clip stride in samples. Zero means one clip length.
    pub stride: usize,
    pub ridge_lambda: T,
    pub decomposition: DecompositionConfig<T>,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            clip_len_s: T::lit(2.25),
            stride: 0,
            ridge_lambda: T::lit(1e-3),
            decomposition: DecompositionConfig::default(),
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_len_s.is_finite() && self.clip_len_s > T::zero()) {
            return Err(invalid("clip_len_s must be positive"));
        }
        if !(self.ridge_lambda.is_finite() && self.ridge_lambda >= T::zero()) {
            return Err(invalid("ridge_lambda must be >= 0"));
        }
        self.decomposition.validate()
    }

    fn stride_for(&self, clip_samples: usize) -> usize {
        if self.stride == 0 {
            clip_samples
        } else {
            self.stride
        }
    }
}

fn phasic_of<T: Scalar>(rec: &SessionRecord<T>, cfg: &DecompositionConfig<T>) -> Result<Trace<T>> {
    Ok(decompose(&rec.eda, cfg)?.phasic)
}

/// Clips of every session under frozen `norms`.
pub fn session_clips<T: Scalar>(
    records: &[SessionRecord<T>],
    cfg: &TrainConfig<T>,
    norms: &ChannelNorms<T>,
) -> Result<Vec<Clip<T>>> {
    let mut out = Vec::new();
    for rec in records {
        let phasic = phasic_of(rec, &cfg.decomposition)?;
        let l = crate::surrogate::clip_samples(cfg.clip_len_s, rec.a_l.rate_hz())?;
        out.extend(make_clips(
            &rec.a_l,
            &rec.a_r,
            &phasic,
            cfg.clip_len_s,
            cfg.stride_for(l),
            norms,
        )?);
    }
    Ok(out)
}

pub fn train_surrogate<T: Scalar>(records: &[SessionRecord<T>], cfg: &TrainConfig<T>) -> Result<SurrogateModel<T>> {
    cfg.validate()?;
    let first = records.first().ok_or(Error::Empty("training sessions"))?;
    let rate = first.a_l.rate_hz();
    let phasics = records
        .iter()
        .map(|r| phasic_of(r, &cfg.decomposition))
        .collect::<Result<Vec<_>>>()?;
    let norms = ChannelNorms::fit(records.iter().zip(&phasics).map(|(r, p)| (&r.a_l, &r.a_r, p)))?;
    let clips = session_clips(records, cfg, &norms)?;
    fit_surrogate(
        &clips,
        cfg.ridge_lambda,
        ClipLayout {
            clip_len_s: cfg.clip_len_s,
            rate_hz: rate,
            norms,
        },
    )
}

/// Mean absolute error of `model` on clips cut from `records`, in normalized
/// phasic units.
pub fn heldout_mae<T: Scalar>(
    records: &[SessionRecord<T>],
    model: &SurrogateModel<T>,
    cfg: &TrainConfig<T>,
) -> Result<T> {
    let clips = session_clips(records, cfg, model.norms())?;
    model.mae(&clips)
}
