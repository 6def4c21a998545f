//! Run configuration: one TOML file, command-line overrides, validation into
//! the core library's config types.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use adanav::{
    dataset::ProfileParams, CohortSpec, ControlLimits, DecompositionConfig, DetectorMethod, DetectorParams,
    GainRanges, OptimizerConfig, OracleParams, PidGains, RawBasis, SimulationConfig, SimulationMode, TrainConfig,
};
use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const OUTPUT_DIR_ENV: &str = "ADANAV_OUTPUT_DIR";

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Worker threads for parallel evaluation; 0 lets the pool decide.
    pub threads: usize,
    pub out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub sessions: usize,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub train_fraction: f64,
    pub gap_s: [f64; 2],
    pub push_amplitude: [f64; 2],
    pub push_duration_s: [f64; 2],
    pub brake_ratio: [f64; 2],
    pub brake_duration_s: [f64; 2],
    pub turn_amplitude: [f64; 2],
    pub turn_duration_s: [f64; 2],
    pub turn_probability: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let c = CohortSpec::<f64>::default();
        let p = c.profile;
        let pair = |(a, b): (f64, f64)| [a, b];
        Self {
            sessions: c.sessions,
            duration_s: c.duration_s,
            rate_hz: c.rate_hz,
            train_fraction: 0.75,
            gap_s: pair(p.gap_s),
            push_amplitude: pair(p.push_amplitude),
            push_duration_s: pair(p.push_duration_s),
            brake_ratio: pair(p.brake_ratio),
            brake_duration_s: pair(p.brake_duration_s),
            turn_amplitude: pair(p.turn_amplitude),
            turn_duration_s: pair(p.turn_duration_s),
            turn_probability: p.turn_probability,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub tau_rise_s: f64,
    pub tau_decay_s: f64,
    pub gain: f64,
    pub latency_s: f64,
    pub baseline: f64,
    pub tonic_drift: f64,
    pub noise_sd: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        let o = OracleParams::<f64>::default();
        Self {
            tau_rise_s: o.tau_rise_s,
            tau_decay_s: o.tau_decay_s,
            gain: o.gain,
            latency_s: o.latency_s,
            baseline: o.baseline,
            tonic_drift: o.tonic_drift,
            noise_sd: o.noise_sd,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSection {
    pub clip_len_s: f64,
    /// Training clip stride in samples; 0 means one clip length.
    pub stride: usize,
    pub ridge_lambda: f64,
    /// Clip stride when predicting whole sessions during simulation.
    pub predict_stride: usize,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        let t = TrainConfig::<f64>::default();
        Self {
            clip_len_s: t.clip_len_s,
            stride: t.stride,
            ridge_lambda: t.ridge_lambda,
            predict_stride: SimulationConfig::<f64>::default().predict_stride,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecompositionSection {
    pub median_window_s: f64,
    pub average_window_s: f64,
}

impl Default for DecompositionSection {
    fn default() -> Self {
        let d = DecompositionConfig::<f64>::default();
        Self {
            median_window_s: d.median_window_s,
            average_window_s: d.average_window_s,
        }
    }
}

/// Overrides on top of each detector's own defaults.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_separation_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_rise_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rise_s: Option<f64>,
}

impl DetectorSection {
    fn from_params(p: DetectorParams<f64>) -> Self {
        Self {
            min_amplitude: Some(p.min_amplitude),
            relative_threshold: Some(p.relative_threshold),
            min_separation_s: Some(p.min_separation_s),
            min_rise_s: Some(p.min_rise_s),
            max_rise_s: Some(p.max_rise_s),
        }
    }

    fn to_params(&self, method: DetectorMethod) -> DetectorParams<f64> {
        let d = DetectorParams::default_for(method);
        DetectorParams {
            method,
            min_amplitude: self.min_amplitude.unwrap_or(d.min_amplitude),
            relative_threshold: self.relative_threshold.unwrap_or(d.relative_threshold),
            min_separation_s: self.min_separation_s.unwrap_or(d.min_separation_s),
            min_rise_s: self.min_rise_s.unwrap_or(d.min_rise_s),
            max_rise_s: self.max_rise_s.unwrap_or(d.max_rise_s),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorsSection {
    pub kim2004: DetectorSection,
    pub gamboa2008: DetectorSection,
    pub neurokit: DetectorSection,
}

impl Default for DetectorsSection {
    fn default() -> Self {
        Self {
            kim2004: DetectorSection::from_params(DetectorParams::kim2004()),
            gamboa2008: DetectorSection::from_params(DetectorParams::gamboa2008()),
            neurokit: DetectorSection::from_params(DetectorParams::neurokit()),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub mode: String,
    pub raw_basis: String,
    pub integral_clamp: f64,
    pub max_longitudinal: f64,
    pub max_rotational: f64,
}

impl Default for ControlSection {
    fn default() -> Self {
        let s = SimulationConfig::<f64>::default();
        Self {
            mode: s.mode.to_string(),
            raw_basis: s.raw_basis.to_string(),
            integral_clamp: s.limits.integral_clamp,
            max_longitudinal: s.limits.max_longitudinal,
            max_rotational: s.limits.max_rotational,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub budget: usize,
    pub explore_fraction: f64,
    pub initial_step: f64,
    pub patience: usize,
    pub msdv_guard: bool,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let o = OptimizerConfig::default();
        Self {
            budget: o.budget,
            explore_fraction: o.explore_fraction,
            initial_step: o.initial_step,
            patience: o.patience,
            msdv_guard: o.msdv_guard,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Existing dataset directory to use instead of `<out>/dataset`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub synth: SynthSection,
    pub oracle: OracleSection,
    pub surrogate: SurrogateSection,
    pub decomposition: DecompositionSection,
    pub detectors: DetectorsSection,
    pub control: ControlSection,
    pub optimizer: OptimizerSection,
    /// Search interval per gain key (`K_Pl = [0.0, 0.5]`); missing keys keep
    /// the default range.
    pub ranges: BTreeMap<String, [f64; 2]>,
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ranges = GainRanges::<f64>::default();
        Self {
            run: RunSection::default(),
            synth: SynthSection::default(),
            oracle: OracleSection::default(),
            surrogate: SurrogateSection::default(),
            decomposition: DecompositionSection::default(),
            detectors: DetectorsSection::default(),
            control: ControlSection::default(),
            optimizer: OptimizerSection::default(),
            ranges: PidGains::<f64>::KEYS
                .iter()
                .zip(ranges.bounds)
                .map(|(k, (lo, hi))| (k.to_string(), [lo, hi]))
                .collect(),
            paths: PathsSection::default(),
        }
    }
}

/// Everything a command needs, checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub threads: usize,
    pub out: PathBuf,
    pub dataset_dir: PathBuf,
    pub cohort: CohortSpec<f64>,
    pub train_fraction: f64,
    pub train: TrainConfig<f64>,
    pub sim: SimulationConfig<f64>,
    pub optimizer: OptimizerConfig,
    pub ranges: GainRanges<f64>,
}

impl Resolved {
    pub fn model_path(&self) -> PathBuf {
        self.out.join("model.txt")
    }

    pub fn gains_path(&self) -> PathBuf {
        self.out.join("gains.txt")
    }

    pub fn history_path(&self) -> PathBuf {
        self.out.join("history.csv")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out.join("report")
    }
}

/// Inserts `value` at a dotted `path`, creating tables on the way.
fn set_path(root: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("bad override key `{path}`");
    }
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut table = root;
    for p in parents {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override `{path}`: `{p}` is not a section"))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Parses the right-hand side of `--set key=value` as a TOML value, falling
/// back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` is not KEY=VALUE"))?;
    set_path(root, key.trim(), parse_value(value.trim()))
}

pub fn load_table(path: Option<&Path>) -> Result<toml::Table> {
    match path {
        None => Ok(toml::Table::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

impl RunConfig {
    pub fn from_table(table: toml::Table) -> Result<Self> {
        toml::Value::Table(table).try_into().context("invalid configuration")
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let s = &self.synth;
        let pair = |[a, b]: [f64; 2]| (a, b);
        let profile = ProfileParams {
            gap_s: pair(s.gap_s),
            push_amplitude: pair(s.push_amplitude),
            push_duration_s: pair(s.push_duration_s),
            brake_ratio: pair(s.brake_ratio),
            brake_duration_s: pair(s.brake_duration_s),
            turn_amplitude: pair(s.turn_amplitude),
            turn_duration_s: pair(s.turn_duration_s),
            turn_probability: s.turn_probability,
        };
        let o = &self.oracle;
        let cohort = CohortSpec {
            sessions: s.sessions,
            duration_s: s.duration_s,
            rate_hz: s.rate_hz,
            seed: self.run.seed,
            oracle: OracleParams {
                tau_rise_s: o.tau_rise_s,
                tau_decay_s: o.tau_decay_s,
                gain: o.gain,
                latency_s: o.latency_s,
                baseline: o.baseline,
                tonic_drift: o.tonic_drift,
                noise_sd: o.noise_sd,
                seed: 0,
            },
            profile,
        };
        cohort.validate().context("[synth]/[oracle]")?;
        if !(s.train_fraction > 0.0 && s.train_fraction < 1.0) {
            bail!("[synth] train_fraction must lie strictly between 0 and 1");
        }

        let decomposition = DecompositionConfig {
            median_window_s: self.decomposition.median_window_s,
            average_window_s: self.decomposition.average_window_s,
        };
        let train = TrainConfig {
            clip_len_s: self.surrogate.clip_len_s,
            stride: self.surrogate.stride,
            ridge_lambda: self.surrogate.ridge_lambda,
            decomposition,
        };
        train.validate().context("[surrogate]/[decomposition]")?;

        let c = &self.control;
        let d = &self.detectors;
        let sim = SimulationConfig {
            mode: c.mode.parse::<SimulationMode>().context("[control] mode")?,
            raw_basis: c.raw_basis.parse::<RawBasis>().context("[control] raw_basis")?,
            decomposition,
            limits: ControlLimits {
                integral_clamp: c.integral_clamp,
                max_longitudinal: c.max_longitudinal,
                max_rotational: c.max_rotational,
            },
            detectors: [
                d.kim2004.to_params(DetectorMethod::Kim2004),
                d.gamboa2008.to_params(DetectorMethod::Gamboa2008),
                d.neurokit.to_params(DetectorMethod::Neurokit),
            ],
            predict_stride: self.surrogate.predict_stride,
        };
        sim.validate().context("[control]/[detectors]")?;

        let op = &self.optimizer;
        let optimizer = OptimizerConfig {
            budget: op.budget,
            seed: self.run.seed,
            explore_fraction: op.explore_fraction,
            initial_step: op.initial_step,
            patience: op.patience,
            msdv_guard: op.msdv_guard,
        };
        optimizer.validate().context("[optimizer]")?;

        let mut ranges = GainRanges::default();
        for (key, &[lo, hi]) in &self.ranges {
            let i = PidGains::<f64>::KEYS
                .iter()
                .position(|k| k == key)
                .ok_or_else(|| anyhow!("[ranges] unknown gain `{key}`"))?;
            ranges.bounds[i] = (lo, hi);
        }
        ranges.validate().context("[ranges]")?;

        let out = self.run.out.clone();
        let dataset_dir = self.paths.dataset.clone().unwrap_or_else(|| out.join("dataset"));
        Ok(Resolved {
            threads: self.run.threads,
            out,
            dataset_dir,
            cohort,
            train_fraction: s.train_fraction,
            train,
            sim,
            optimizer,
            ranges,
        })
    }
}
