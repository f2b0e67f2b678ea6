//! One-parameter state families and curve diagnostics.

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io::FileError;
use crate::measures::{Evaluator, Family, MeasureSpec};
use crate::states;
use crate::tensor::{PureState, C64};

/// How a template term depends on theta.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trig {
    Sin,
    Cos,
    Const,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateTerm {
    /// Flat basis index, subsystem 1 most significant.
    pub index: usize,
    pub scale: [f64; 2],
    pub theta: Trig,
}

/// User-supplied family `sum_t scale_t f_t(theta) |index_t>`, renormalized at
/// every theta.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomTemplate {
    pub version: u32,
    pub dims: Vec<usize>,
    pub terms: Vec<TemplateTerm>,
}

impl CustomTemplate {
    pub fn parse(text: &str) -> std::result::Result<Self, FileError> {
        let t: CustomTemplate = serde_json::from_str(text).map_err(|e| FileError::Format(e.to_string()))?;
        if t.version != 1 {
            return Err(FileError::Format(format!("unsupported version {}", t.version)));
        }
        let total: usize = t.dims.iter().product();
        if let Some(bad) = t.terms.iter().find(|term| term.index >= total) {
            return Err(FileError::Format(format!("index {} out of range", bad.index)));
        }
        Ok(t)
    }

    pub fn state(&self, theta: f64) -> Result<PureState> {
        let total: usize = self.dims.iter().product();
        let mut amps = vec![C64::new(0.0, 0.0); total];
        let (s, c) = theta.sin_cos();
        for term in &self.terms {
            let f = match term.theta {
                Trig::Sin => s,
                Trig::Cos => c,
                Trig::Const => 1.0,
            };
            amps[term.index] += C64::new(term.scale[0], term.scale[1]) * f;
        }
        PureState::normalized(self.dims.clone(), amps)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Template {
    Fig1,
    Fig2,
    Custom(CustomTemplate),
}

impl Template {
    pub fn state(&self, theta: f64) -> Result<PureState> {
        match self {
            Template::Fig1 => Ok(states::fig1(theta)),
            Template::Fig2 => Ok(states::fig2(theta)),
            Template::Custom(t) => t.state(theta),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match self {
            Template::Fig1 | Template::Fig2 => vec![2; 4],
            Template::Custom(t) => t.dims.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    /// Any family; the curve pair is always (GM member, ME member).
    pub family: Family,
    pub k: usize,
    pub param: Option<f64>,
    pub theta_start: f64,
    pub theta_end: f64,
    pub steps: usize,
    pub template: Template,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub gm: f64,
    pub me: f64,
}

impl SweepRow {
    pub fn fields(&self) -> [f64; 3] {
        [self.theta, self.gm, self.me]
    }
}

pub const SWEEP_HEADER: [&str; 3] = ["theta", "value_gm", "value_me"];

/// Evenly spaced grid including both endpoints.
pub fn theta_grid(start: f64, end: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::InvalidParam(format!("steps = {steps}, need at least 2")));
    }
    if !start.is_finite() || !end.is_finite() {
        return Err(Error::InvalidParam("theta range must be finite".into()));
    }
    let last = (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| {
            if i == steps - 1 {
                end
            } else {
                start + (end - start) * i as f64 / last
            }
        })
        .collect())
}

fn curve_specs(cfg: &SweepConfig) -> (MeasureSpec, MeasureSpec) {
    let gm_family = match cfg.family {
        Family::KGm | Family::KMe => Family::KGm,
        Family::QkGm | Family::QkMe => Family::QkGm,
        Family::AlphaKGm => Family::AlphaKGm,
    };
    let me_family = match gm_family {
        Family::KGm => Family::KMe,
        Family::QkGm => Family::QkMe,
        // no minimum-type alpha measure: the ME column is the smallest alpha score
        _ => Family::AlphaKGm,
    };
    (
        MeasureSpec::new(gm_family, cfg.k, cfg.param),
        MeasureSpec::new(me_family, cfg.k, cfg.param),
    )
}

/// Evaluates the GM/ME curve pair on the theta grid.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let grid = theta_grid(cfg.theta_start, cfg.theta_end, cfg.steps)?;
    let dims = cfg.template.dims();
    let (gs, ms) = curve_specs(cfg);
    let gm = Evaluator::new(&dims, gs)?;
    let me = Evaluator::new(&dims, ms)?;
    let alpha_min = ms.family == Family::AlphaKGm;
    grid.par_iter()
        .map(|&theta| {
            let psi = cfg.template.state(theta)?;
            let g = gm.value(&psi)?;
            let m = if alpha_min {
                me.scores(&psi)?.into_iter().fold(f64::INFINITY, f64::min)
            } else {
                me.value(&psi)?
            };
            Ok(SweepRow { theta, gm: g, me: m })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let fields: Vec<[f64; 3]> = rows.iter().map(SweepRow::fields).collect();
    crate::io::csv(&SWEEP_HEADER, &fields)
}

/// Grid indices `i` (interior points only) where the second central
/// difference exceeds `factor` times the median absolute second difference.
pub fn detect_kinks(values: &[f64], factor: f64) -> Vec<usize> {
    if values.len() < 3 {
        return Vec::new();
    }
    let d2: Vec<f64> = values.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).collect();
    let mut sorted = d2.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    let threshold = factor * median;
    d2.iter()
        .enumerate()
        .filter(|(_, &d)| d > threshold)
        .map(|(i, _)| i + 1)
        .collect()
}

/// Order reversal between the two curves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderReversal {
    pub i: usize,
    pub j: usize,
    /// `min(me[i] - me[j], gm[j] - gm[i])`, positive for a genuine reversal.
    pub margin: f64,
}

/// The pair `(i, j)` with `me[i] > me[j]` and `gm[i] < gm[j]` whose smaller
/// gap is largest; `None` when no pair reverses by more than `min_margin`.
pub fn find_order_reversal(rows: &[SweepRow], min_margin: f64) -> Option<OrderReversal> {
    let mut best: Option<OrderReversal> = None;
    for (i, a) in rows.iter().enumerate() {
        for (j, b) in rows.iter().enumerate() {
            let margin = (a.me - b.me).min(b.gm - a.gm);
            if margin > min_margin && best.is_none_or(|r| margin > r.margin) {
                best = Some(OrderReversal { i, j, margin });
            }
        }
    }
    best
}

/// Parses an angle such as `0.3`, `pi`, `-pi/2`, `3pi/4` or `2*pi/3`.
pub fn parse_angle(text: &str) -> Result<f64> {
    let bad = || Error::InvalidParam(format!("cannot parse angle {text:?}"));
    let s: String = text
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_lowercase();
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.to_string(), b.parse::<f64>().map_err(|_| bad())?),
        None => (s.clone(), 1.0),
    };
    let value = if let Some(coef) = num.strip_suffix("pi") {
        let coef = coef.strip_suffix('*').unwrap_or(coef);
        let c = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            c => c.parse::<f64>().map_err(|_| bad())?,
        };
        c * std::f64::consts::PI
    } else {
        num.parse::<f64>().map_err(|_| bad())?
    };
    let v = value / den;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}
