//! Motion sickness dose value, the one-sample chi-square test against a 50/50
//! split with its phi effect size, and report assembly.

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::scr::DetectorMethod;
use crate::signal::Trace;
use crate::simulate::SimulationResult;

/// `(Σ a_i^n · dt)^(1/n)` over the whole trace.
pub fn msdv<T: Scalar>(a: &Trace<T>, n: u32) -> Result<T> {
    a.require_nonempty("msdv")?;
    if n < 2 || !n.is_multiple_of(2) {
        return Err(invalid(format!("msdv order must be a positive even integer >= 2, got {n}")));
    }
    let dt = a.dt();
    let integral = a
        .samples()
        .iter()
        .map(|&x| x.powi(n as i32) * dt)
        .sum::<T>();
    Ok(integral.powf(T::one() / T::from_count(n as usize)))
}

/// Chi-square critical values at df = 1.
pub const CHI2_CRIT_P05: f64 = 3.841;
pub const CHI2_CRIT_P01: f64 = 6.635;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Significance {
    P01,
    P05,
    None,
}

impl Significance {
    pub fn label(self) -> &'static str {
        match self {
            Significance::P01 => "<.01",
            Significance::P05 => "<.05",
            Significance::None => "n.s.",
        }
    }
}

/// Which side of the 50/50 null the observed positives fall on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Better,
    Worse,
    Even,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::Better => "better",
            Direction::Worse => "worse",
            Direction::Even => "even",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatResult<T> {
    pub chi2: T,
    pub significant_at: Significance,
    pub phi: T,
    pub positives: usize,
    pub total: usize,
    pub direction: Direction,
}

impl<T: Scalar> StatResult<T> {
    pub fn percentage(&self) -> T {
        T::lit(100.0) * T::from_count(self.positives) / T::from_count(self.total)
    }
}

/// Goodness of fit of `positives` out of `total` against an even split.
pub fn chi_square_phi<T: Scalar>(positives: usize, total: usize) -> Result<StatResult<T>> {
    if total == 0 {
        return Err(Error::Empty("chi-square sample"));
    }
    if positives > total {
        return Err(invalid(format!("positives {positives} exceed total {total}")));
    }
    let n = T::from_count(total);
    let expected = n / T::lit(2.0);
    let pos = T::from_count(positives);
    let neg = T::from_count(total - positives);
    let chi2 = ((pos - expected).powi(2) + (neg - expected).powi(2)) / expected;
    let phi = (chi2 / n).sqrt();
    let significant_at = if chi2 >= T::lit(CHI2_CRIT_P01) {
        Significance::P01
    } else if chi2 >= T::lit(CHI2_CRIT_P05) {
        Significance::P05
    } else {
        Significance::None
    };
    let direction = match (2 * positives).cmp(&total) {
        std::cmp::Ordering::Greater => Direction::Better,
        std::cmp::Ordering::Less => Direction::Worse,
        std::cmp::Ordering::Equal => Direction::Even,
    };
    Ok(StatResult {
        chi2,
        significant_at,
        phi,
        positives,
        total,
        direction,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRow<T> {
    pub id: String,
    pub n_raw: [usize; 3],
    pub n_adapted: [usize; 3],
    pub msdv_l: (T, T),
    pub msdv_r: (T, T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report<T> {
    pub detectors: Vec<(DetectorMethod, StatResult<T>)>,
    pub msdv_l: StatResult<T>,
    pub msdv_r: StatResult<T>,
    pub sessions: Vec<SessionRow<T>>,
}

/// Aggregates per-session results. A session is positive for a detector when
/// its ER-SCR count strictly decreased, and for an MSDV channel when the dose
/// strictly decreased.
pub fn build_report<T: Scalar>(results: &[SimulationResult<T>], detectors: &[DetectorMethod; 3]) -> Result<Report<T>> {
    if results.is_empty() {
        return Err(Error::Empty("simulation results"));
    }
    let sessions = results
        .iter()
        .map(|r| SessionRow {
            id: r.id.clone(),
            n_raw: r.n_raw,
            n_adapted: r.n_adapted,
            msdv_l: r.msdv_l,
            msdv_r: r.msdv_r,
        })
        .collect();
    Report::from_sessions(sessions, detectors)
}

impl<T: Scalar> Report<T> {
    pub fn from_sessions(sessions: Vec<SessionRow<T>>, detectors: &[DetectorMethod; 3]) -> Result<Self> {
        if sessions.is_empty() {
            return Err(Error::Empty("session rows"));
        }
        let total = sessions.len();
        let detector_stats = (0..3)
            .map(|d| {
                let pos = sessions.iter().filter(|r| r.n_raw[d] > r.n_adapted[d]).count();
                chi_square_phi(pos, total).map(|s| (detectors[d], s))
            })
            .collect::<Result<Vec<_>>>()?;
        let msdv_l = chi_square_phi(sessions.iter().filter(|r| r.msdv_l.1 < r.msdv_l.0).count(), total)?;
        let msdv_r = chi_square_phi(sessions.iter().filter(|r| r.msdv_r.1 < r.msdv_r.0).count(), total)?;
        Ok(Report {
            detectors: detector_stats,
            msdv_l,
            msdv_r,
            sessions,
        })
    }

    /// Parses the output of [`Self::sessions_csv`] and recomputes the summary.
    pub fn from_sessions_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or(Error::Empty("sessions csv"))?.split(',').collect();
        if header.len() != 11 || header[0] != "session_id" {
            return Err(Error::Parse("sessions csv: unexpected header".into()));
        }
        let mut detectors = DetectorMethod::ALL;
        for (d, slot) in detectors.iter_mut().enumerate() {
            let name = header[1 + 2 * d]
                .strip_prefix("n_raw_")
                .ok_or_else(|| Error::Parse(format!("sessions csv: column `{}`", header[1 + 2 * d])))?;
            *slot = name.parse()?;
        }
        let rows = lines
            .enumerate()
            .map(|(i, line)| {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 11 {
                    return Err(Error::Parse(format!("sessions csv row {}: expected 11 fields", i + 1)));
                }
                let count = |k: usize| {
                    f[k].trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Parse(format!("sessions csv row {}: {e}", i + 1)))
                };
                let real = |k: usize| crate::surrogate::parse_scalar::<T>(f[k]);
                Ok(SessionRow {
                    id: f[0].to_string(),
                    n_raw: [count(1)?, count(3)?, count(5)?],
                    n_adapted: [count(2)?, count(4)?, count(6)?],
                    msdv_l: (real(7)?, real(8)?),
                    msdv_r: (real(9)?, real(10)?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_sessions(rows, &detectors)
    }

    /// Summary table: one row per detector plus the two MSDV channels.
    pub fn table_csv(&self) -> String {
        let mut s = String::from("method,positives,total,percentage,chi2,p_value,phi,direction\n");
        let rows = self
            .detectors
            .iter()
            .map(|(m, r)| (m.as_str().to_string(), r))
            .chain([("msdv_l".to_string(), &self.msdv_l), ("msdv_r".to_string(), &self.msdv_r)]);
        for (name, r) in rows {
            let _ = writeln!(
                s,
                "{name},{},{},{:.1},{:.4},{},{:.4},{}",
                r.positives,
                r.total,
                r.percentage().to_f64_lossy(),
                r.chi2.to_f64_lossy(),
                r.significant_at.label(),
                r.phi.to_f64_lossy(),
                r.direction.label()
            );
        }
        s
    }

    pub fn sessions_csv(&self) -> String {
        let mut s = String::from("session_id");
        for (m, _) in &self.detectors {
            let _ = write!(s, ",n_raw_{m},n_adapted_{m}");
        }
        s += ",msdv_l_raw,msdv_l_adapted,msdv_r_raw,msdv_r_adapted\n";
        for row in &self.sessions {
            s += &row.id;
            for d in 0..3 {
                let _ = write!(s, ",{},{}", row.n_raw[d], row.n_adapted[d]);
            }
            let _ = writeln!(
                s,
                ",{},{},{},{}",
                row.msdv_l.0, row.msdv_l.1, row.msdv_r.0, row.msdv_r.1
            );
        }
        s
    }
}

/// Grouped bar chart of raw versus adapted MSDV per session, one panel per
/// channel.
pub fn msdv_svg<T: Scalar>(sessions: &[SessionRow<T>]) -> String {
    let (w, panel_h, margin) = (900.0f64, 260.0f64, 40.0f64);
    let height = 2.0 * panel_h + 3.0 * margin;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{height}\" viewBox=\"0 0 {w} {height}\">\n"
    );
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    let n = sessions.len().max(1) as f64;
    let slot = (w - 2.0 * margin) / n;
    let bar = (slot * 0.4).max(0.5);
    let panels: [(&str, fn(&SessionRow<T>) -> (T, T)); 2] =
        [("MSDV longitudinal", |r| r.msdv_l), ("MSDV rotational", |r| r.msdv_r)];
    for (p, (title, get)) in panels.iter().enumerate() {
        let top = margin + p as f64 * (panel_h + margin);
        let base = top + panel_h;
        let peak = sessions
            .iter()
            .map(|r| {
                let (a, b) = get(r);
                a.to_f64_lossy().max(b.to_f64_lossy())
            })
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let _ = writeln!(
            s,
            "<text x=\"{margin}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"14\">{title} (red: raw, blue: adapted)</text>",
            top - 8.0
        );
        let _ = writeln!(
            s,
            "<line x1=\"{margin}\" y1=\"{base:.1}\" x2=\"{:.1}\" y2=\"{base:.1}\" stroke=\"black\"/>",
            w - margin
        );
        for (i, r) in sessions.iter().enumerate() {
            let (raw, adapted) = get(r);
            let x0 = margin + i as f64 * slot + slot * 0.1;
            for (k, (v, colour)) in [(raw, "#c0392b"), (adapted, "#2e6fba")].into_iter().enumerate() {
                let h = v.to_f64_lossy() / peak * (panel_h - 10.0);
                let _ = writeln!(
                    s,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{bar:.2}\" height=\"{h:.2}\" fill=\"{colour}\"><title>{} {:.4}</title></rect>",
                    x0 + k as f64 * bar,
                    base - h,
                    r.id,
                    v.to_f64_lossy()
                );
            }
        }
    }
    s += "</svg>\n";
    s
}
