//! Search over the eleven adaptation coefficients for the gains that maximize
//! the share of sessions whose ER-SCR count drops, summed over the three
//! detectors (`P_pn`, range 0..=300).
//!
//! The search is two-phase: uniform sampling over the ranges for the first
//! part of the budget, then Gaussian perturbation around the running best
//! with a step that halves after every `patience` non-improving trials.
//!
//! With the MSDV guard on (the default), a trial whose adapted acceleration
//! has a larger dose than the raw one on either channel, in any session, is
//! infeasible and only wins while no feasible trial has been seen. Without
//! it the search tends to find gains that wind the integral up against its
//! clamp: the adapted signal leaves the surrogate's input range, the
//! predicted phasic goes flat and every count drops to zero.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::control::PidGains;
use crate::error::{invalid, Error, Result};
use crate::scalar::{clamp, Scalar};
use crate::simulate::{prepare_session, simulate_prepared, PreparedSession, SessionRecord, SimulationConfig};
use crate::surrogate::SurrogateModel;

/// Closed search interval per coefficient, in [`PidGains::KEYS`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainRanges<T> {
    pub bounds: [(T, T); 11],
}

impl<T: Scalar> Default for GainRanges<T> {
    fn default() -> Self {
        let k = (T::zero(), T::lit(0.5));
        let beta = (T::zero(), T::lit(0.01));
        Self {
            bounds: [k, k, k, k, k, k, k, k, k, beta, beta],
        }
    }
}

impl<T: Scalar> GainRanges<T> {
    pub fn validate(&self) -> Result<()> {
        for (key, &(lo, hi)) in PidGains::<T>::KEYS.iter().zip(&self.bounds) {
            if !(lo.is_finite() && hi.is_finite()) || lo < T::zero() {
                return Err(invalid(format!("range for {key} must be finite and >= 0")));
            }
            if hi < lo {
                return Err(invalid(format!("empty range for {key}: [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn width(&self, i: usize) -> T {
        self.bounds[i].1 - self.bounds[i].0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub budget: usize,
    pub seed: u64,
    /// Share of the budget spent on uniform sampling.
    pub explore_fraction: f64,
    /// Initial perturbation standard deviation, as a fraction of each range.
    pub initial_step: f64,
    /// Non-improving refinement trials before the step halves.
    pub patience: usize,
    pub msdv_guard: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            budget: 400,
            seed: 0,
            explore_fraction: 0.6,
            initial_step: 0.1,
            patience: 10,
            msdv_guard: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(invalid("optimizer budget must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.explore_fraction) {
            return Err(invalid("explore_fraction must lie in [0, 1]"));
        }
        if !(self.initial_step.is_finite() && self.initial_step > 0.0) {
            return Err(invalid("initial_step must be positive"));
        }
        if self.patience == 0 {
            return Err(invalid("patience must be >= 1"));
        }
        Ok(())
    }

    /// Number of uniform-sampling trials; at least one.
    pub fn explore_trials(&self) -> usize {
        ((self.budget as f64 * self.explore_fraction).ceil() as usize).clamp(1, self.budget)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation<T> {
    /// Sum of the three percentages.
    pub objective: T,
    pub percentages: [T; 3],
    /// Sessions where adaptation raised MSDV on at least one channel.
    pub msdv_worse: usize,
}

/// A dataset prepared against one surrogate and simulation setup, ready for
/// repeated objective evaluations.
#[derive(Debug, Clone)]
pub struct Objective<'m, T> {
    sessions: Vec<PreparedSession<T>>,
    model: &'m SurrogateModel<T>,
    cfg: SimulationConfig<T>,
}

impl<'m, T: Scalar> Objective<'m, T> {
    pub fn new(dataset: &[SessionRecord<T>], model: &'m SurrogateModel<T>, cfg: SimulationConfig<T>) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        let sessions = dataset
            .par_iter()
            .map(|rec| prepare_session(rec, model, &cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { sessions, model, cfg })
    }

    pub fn sessions(&self) -> &[PreparedSession<T>] {
        &self.sessions
    }

    pub fn evaluate(&self, gains: &PidGains<T>) -> Result<Evaluation<T>> {
        let runs = self
            .sessions
            .par_iter()
            .map(|s| {
                simulate_prepared(s, gains, self.model, &self.cfg)
                    .map(|r| (r.positives(), r.msdv_l.1 > r.msdv_l.0 || r.msdv_r.1 > r.msdv_r.0))
            })
            .collect::<Result<Vec<_>>>()?;
        let flags: Vec<[bool; 3]> = runs.iter().map(|r| r.0).collect();
        let total = T::from_count(flags.len());
        let percentages: [T; 3] = std::array::from_fn(|d| {
            T::lit(100.0) * T::from_count(flags.iter().filter(|f| f[d]).count()) / total
        });
        Ok(Evaluation {
            objective: percentages.iter().copied().sum(),
            percentages,
            msdv_worse: runs.iter().filter(|r| r.1).count(),
        })
    }
}

/// `P_pn` of `gains` over `dataset`.
pub fn objective_ppn<T: Scalar>(
    dataset: &[SessionRecord<T>],
    gains: &PidGains<T>,
    model: &SurrogateModel<T>,
    cfg: &SimulationConfig<T>,
) -> Result<T> {
    Objective::new(dataset, model, *cfg)?.evaluate(gains).map(|e| e.objective)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Explore,
    Refine,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Explore => "explore",
            Phase::Refine => "refine",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial<T> {
    pub index: usize,
    pub phase: Phase,
    pub gains: PidGains<T>,
    pub objective: T,
    pub percentages: [T; 3],
    pub msdv_worse: usize,
    pub feasible: bool,
}

/// Every evaluated trial in order, plus the index of the best one: feasible
/// before infeasible, then highest objective, earliest on ties.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialHistory<T> {
    trials: Vec<Trial<T>>,
    best: usize,
}

impl<T: Scalar> TrialHistory<T> {
    fn new() -> Self {
        Self {
            trials: Vec::new(),
            best: 0,
        }
    }

    fn push(&mut self, trial: Trial<T>) -> bool {
        let improved = self
            .trials
            .get(self.best)
            .is_none_or(|b| match (trial.feasible, b.feasible) {
                (true, false) => true,
                (false, true) => false,
                _ => trial.objective > b.objective,
            });
        if improved {
            self.best = self.trials.len();
        }
        self.trials.push(trial);
        improved
    }

    pub fn trials(&self) -> &[Trial<T>] {
        &self.trials
    }

    pub fn best_index(&self) -> usize {
        self.best
    }

    pub fn best(&self) -> &Trial<T> {
        &self.trials[self.best]
    }

    /// Running maximum of the feasible objectives after each trial; negative
    /// infinity until the first feasible one.
    pub fn running_best(&self) -> Vec<T> {
        let mut acc = T::neg_infinity();
        self.trials
            .iter()
            .map(|t| {
                if t.feasible {
                    acc = acc.max(t.objective);
                }
                acc
            })
            .collect()
    }

    pub fn to_csv(&self, detector_names: &[&str; 3]) -> String {
        let mut s = String::from("trial,phase");
        for k in PidGains::<T>::KEYS {
            s.push(',');
            s += k;
        }
        s += ",objective,msdv_worse,feasible";
        for name in detector_names {
            let _ = write!(s, ",pct_{name}");
        }
        s.push('\n');
        for t in &self.trials {
            let _ = write!(s, "{},{}", t.index, t.phase.as_str());
            for v in t.gains.to_array() {
                let _ = write!(s, ",{v}");
            }
            let _ = write!(s, ",{},{},{}", t.objective, t.msdv_worse, t.feasible);
            for p in t.percentages {
                let _ = write!(s, ",{p}");
            }
            s.push('\n');
        }
        s
    }
}

fn sample_uniform<T: Scalar>(rng: &mut ChaCha8Rng, ranges: &GainRanges<T>) -> PidGains<T> {
    PidGains::from_array(std::array::from_fn(|i| {
        let (lo, hi) = ranges.bounds[i];
        let u: f64 = rng.random();
        lo + T::lit(u) * (hi - lo)
    }))
}

fn perturb<T: Scalar>(rng: &mut ChaCha8Rng, center: &PidGains<T>, ranges: &GainRanges<T>, step: f64) -> PidGains<T> {
    let c = center.to_array();
    PidGains::from_array(std::array::from_fn(|i| {
        let z: f64 = rng.sample(StandardNormal);
        let (lo, hi) = ranges.bounds[i];
        clamp(c[i] + T::lit(z * step) * ranges.width(i), lo, hi)
    }))
}

/// Runs the two-phase search. Deterministic for a given seed regardless of
/// the thread count: random draws happen on the calling thread and results
/// are merged in trial order.
pub fn optimize<T: Scalar>(
    objective: &Objective<'_, T>,
    ranges: &GainRanges<T>,
    cfg: &OptimizerConfig,
) -> Result<(PidGains<T>, TrialHistory<T>)> {
    ranges.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = TrialHistory::new();

    let explore = cfg.explore_trials();
    let candidates: Vec<PidGains<T>> = (0..explore).map(|_| sample_uniform(&mut rng, ranges)).collect();
    let evaluated = candidates
        .par_iter()
        .map(|g| objective.evaluate(g))
        .collect::<Result<Vec<_>>>()?;
    let trial = |index, phase, gains, e: Evaluation<T>| Trial {
        index,
        phase,
        gains,
        objective: e.objective,
        percentages: e.percentages,
        msdv_worse: e.msdv_worse,
        feasible: !cfg.msdv_guard || e.msdv_worse == 0,
    };
    for (index, (gains, e)) in candidates.into_iter().zip(evaluated).enumerate() {
        history.push(trial(index, Phase::Explore, gains, e));
    }

    let mut step = cfg.initial_step;
    let mut stale = 0usize;
    for index in explore..cfg.budget {
        let gains = perturb(&mut rng, &history.best().gains, ranges, step);
        let e = objective.evaluate(&gains)?;
        let improved = history.push(trial(index, Phase::Refine, gains, e));
        if improved {
            stale = 0;
        } else {
            stale += 1;
            if stale == cfg.patience {
                step *= 0.5;
                stale = 0;
            }
        }
    }
    Ok((history.best().gains, history))
}
