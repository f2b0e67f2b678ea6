//! Per-cut concurrences and the five partition-based measure families.
//!
//! Every family scores a k-partition `A_1|...|A_k` from the reduced states
//! `rho_{A_t}` taken against their full complements:
//!
//! | family   | partition score                          | aggregate      |
//! |----------|------------------------------------------|----------------|
//! | kGM      | `sqrt(2 sum_t (1 - Tr rho^2) / k)`       | geometric mean |
//! | qkGM     | `sqrt(2 sum_t (1 - Tr rho^q) / k)`       | geometric mean |
//! | alphakGM | `sqrt(2 sum_t (Tr rho^a - 1) / k)`       | geometric mean |
//! | kME      | `sqrt(2 sum_t (1 - Tr rho^2) / k)`       | minimum        |
//! | qkME     | `sum_t (1 - Tr rho^q) / k`               | minimum        |

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::partitions::{binomial, enumerate_k_partitions, KPartition};
use crate::tensor::{CutLayout, IndexSubset, PureState, Spectrum};

/// Scores at or below this make a geometric mean exactly zero.
pub const GM_ZERO_FLOOR: f64 = 1e-300;

/// Number of distinct cuts above which cut spectra are computed in parallel.
const PARALLEL_CUTS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    KGm,
    QkGm,
    AlphaKGm,
    KMe,
    QkMe,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::KGm, Family::QkGm, Family::AlphaKGm, Family::KMe, Family::QkMe];

    /// Geometric-mean families (as opposed to minimum families).
    pub fn is_geometric(self) -> bool {
        matches!(self, Family::KGm | Family::QkGm | Family::AlphaKGm)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::KGm => "kgm",
            Family::QkGm => "qkgm",
            Family::AlphaKGm => "akgm",
            Family::KMe => "kme",
            Family::QkMe => "qkme",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kgm" => Ok(Family::KGm),
            "qkgm" => Ok(Family::QkGm),
            "akgm" | "alphakgm" => Ok(Family::AlphaKGm),
            "kme" => Ok(Family::KMe),
            "qkme" => Ok(Family::QkMe),
            other => Err(Error::InvalidParam(format!("unknown family '{other}'"))),
        }
    }
}

/// Family, partition size and (for the parametrized families) `q` or `alpha`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureSpec {
    pub family: Family,
    pub k: usize,
    pub param: Option<f64>,
}

impl MeasureSpec {
    pub fn new(family: Family, k: usize, param: Option<f64>) -> Self {
        MeasureSpec { family, k, param }
    }

    pub fn kgm(k: usize) -> Self {
        Self::new(Family::KGm, k, None)
    }

    pub fn kme(k: usize) -> Self {
        Self::new(Family::KMe, k, None)
    }

    pub fn qkgm(k: usize, q: f64) -> Self {
        Self::new(Family::QkGm, k, Some(q))
    }

    pub fn qkme(k: usize, q: f64) -> Self {
        Self::new(Family::QkMe, k, Some(q))
    }

    pub fn alpha_kgm(k: usize, alpha: f64) -> Self {
        Self::new(Family::AlphaKGm, k, Some(alpha))
    }

    /// Checks `2 <= k <= n` and the parameter range of the family.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k < 2 || self.k > n {
            return Err(Error::InvalidK { k: self.k, n });
        }
        match (self.family, self.param) {
            (Family::KGm | Family::KMe, None) => Ok(()),
            (Family::KGm | Family::KMe, Some(p)) => Err(Error::InvalidParam(format!(
                "{} takes no parameter (got {p})",
                self.family
            ))),
            (Family::QkGm | Family::QkMe, Some(q)) if q > 1.0 && q.is_finite() => Ok(()),
            (Family::QkGm | Family::QkMe, p) => {
                Err(Error::InvalidParam(format!("{} needs q > 1, got {p:?}", self.family)))
            }
            (Family::AlphaKGm, Some(a)) if (0.0..1.0).contains(&a) => Ok(()),
            (Family::AlphaKGm, p) => Err(Error::InvalidParam(format!("akgm needs 0 <= alpha < 1, got {p:?}"))),
        }
    }

    /// Per-cut quantity entering the partition sum.
    fn cut_value(&self, spec: &Spectrum) -> f64 {
        match self.family {
            Family::KGm | Family::KMe => spec.q_concurrence(2.0),
            Family::QkGm | Family::QkMe => spec.q_concurrence(self.param.unwrap_or(2.0)),
            Family::AlphaKGm => spec.alpha_concurrence(self.param.unwrap_or(0.0)),
        }
    }

    /// Partition score from the sum of per-block cut values.
    fn score_from_sum(&self, sum: f64) -> f64 {
        let k = self.k as f64;
        match self.family {
            Family::QkMe => sum / k,
            _ => (2.0 * sum / k).max(0.0).sqrt(),
        }
    }

    fn notes(&self) -> Vec<String> {
        match (self.family, self.param) {
            (Family::QkGm | Family::QkMe, Some(q)) if q < 2.0 => {
                vec![format!("extrapolated regime: q = {q} < 2")]
            }
            _ => Vec::new(),
        }
    }
}

/// Outcome of [`evaluate`].
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureResult {
    pub value: f64,
    /// For minimum families: first partition attaining the minimum.
    pub attaining_partition: Option<KPartition>,
    pub per_partition_scores: Option<Vec<(KPartition, f64)>>,
    pub notes: Vec<String>,
}

fn check_q(q: f64) -> Result<()> {
    if q > 1.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("q must be > 1, got {q}")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("alpha must be in [0, 1), got {alpha}")))
    }
}

/// `1 - Tr(rho_A^q)` across `cut`.
pub fn cut_q_concurrence(state: &PureState, cut: &IndexSubset, q: f64) -> Result<f64> {
    check_q(q)?;
    Ok(crate::tensor::schmidt_spectrum(state, cut)?.q_concurrence(q))
}

/// `Tr(rho_A^alpha) - 1` across `cut`; rank minus one at `alpha = 0`.
pub fn cut_alpha_concurrence(state: &PureState, cut: &IndexSubset, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(crate::tensor::schmidt_spectrum(state, cut)?.alpha_concurrence(alpha))
}

/// Score of a single k-partition under `spec`.
pub fn partition_score(state: &PureState, part: &KPartition, spec: &MeasureSpec) -> Result<f64> {
    spec.validate(state.n())?;
    if part.k() != spec.k || part.n() != state.n() {
        return Err(Error::InvalidPartition(format!(
            "partition {part} has {} blocks over {} parties, expected {} over {}",
            part.k(),
            part.n(),
            spec.k,
            state.n()
        )));
    }
    let sum = part
        .blocks()
        .iter()
        .map(|b| crate::tensor::schmidt_spectrum(state, b).map(|s| spec.cut_value(&s)))
        .sum::<Result<f64>>()?;
    Ok(spec.score_from_sum(sum))
}

/// Evaluates a measure on many states with the same dimensions.
///
/// Holds the partition list of `T_k` and one reshaping layout per distinct
/// cut. A block and its complement share a Schmidt spectrum, so each cut is
/// stored once under the side that contains subsystem 1.
#[derive(Clone, Debug)]
pub struct Evaluator {
    dims: Vec<usize>,
    spec: MeasureSpec,
    partitions: Vec<KPartition>,
    /// Indices into `layouts` for every block of every partition.
    block_cuts: Vec<Vec<usize>>,
    layouts: Vec<CutLayout>,
}

impl Evaluator {
    pub fn new(dims: &[usize], spec: MeasureSpec) -> Result<Self> {
        let n = dims.len();
        crate::tensor::validate_dims(dims, 2)?;
        spec.validate(n)?;
        let partitions: Vec<KPartition> = enumerate_k_partitions(n, spec.k)?.collect();
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut cuts: Vec<IndexSubset> = Vec::new();
        let block_cuts = partitions
            .iter()
            .map(|p| {
                p.blocks()
                    .iter()
                    .map(|b| {
                        let canon = if b.contains(0) {
                            b.clone()
                        } else {
                            b.complement(n).expect("block of a k >= 2 partition is proper")
                        };
                        *index.entry(canon.mask()).or_insert_with(|| {
                            cuts.push(canon);
                            cuts.len() - 1
                        })
                    })
                    .collect()
            })
            .collect();
        let layouts = cuts.iter().map(|c| CutLayout::new(dims, c)).collect();
        Ok(Evaluator {
            dims: dims.to_vec(),
            spec,
            partitions,
            block_cuts,
            layouts,
        })
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn partitions(&self) -> &[KPartition] {
        &self.partitions
    }

    fn check_state(&self, state: &PureState) -> Result<()> {
        if state.dims() != self.dims.as_slice() {
            return Err(Error::IncompatibleDims(format!(
                "evaluator built for {:?}, state has {:?}",
                self.dims,
                state.dims()
            )));
        }
        Ok(())
    }

    fn cut_values(&self, state: &PureState) -> Result<Vec<f64>> {
        let one = |l: &CutLayout| l.spectrum(state.amps()).map(|s| self.spec.cut_value(&s));
        if self.layouts.len() >= PARALLEL_CUTS {
            self.layouts.par_iter().map(one).collect()
        } else {
            self.layouts.iter().map(one).collect()
        }
    }

    /// Partition scores in enumeration order.
    pub fn scores(&self, state: &PureState) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let cv = self.cut_values(state)?;
        Ok(self
            .block_cuts
            .iter()
            .map(|blocks| self.spec.score_from_sum(blocks.iter().map(|&c| cv[c]).sum()))
            .collect())
    }

    /// Aggregated value: geometric mean or minimum, plus the argmin index.
    fn aggregate(&self, scores: &[f64]) -> (f64, Option<usize>) {
        if self.spec.family.is_geometric() {
            if scores.iter().any(|&s| s <= GM_ZERO_FLOOR) {
                return (0.0, None);
            }
            let mean_log = scores.iter().map(|s| s.ln()).sum::<f64>() / scores.len() as f64;
            (mean_log.exp(), None)
        } else {
            let mut best = 0;
            for (i, &s) in scores.iter().enumerate() {
                if s < scores[best] {
                    best = i;
                }
            }
            (scores[best], Some(best))
        }
    }

    /// Measure value only.
    pub fn value(&self, state: &PureState) -> Result<f64> {
        let scores = self.scores(state)?;
        Ok(self.aggregate(&scores).0)
    }

    /// Full result including per-partition scores.
    pub fn evaluate(&self, state: &PureState) -> Result<MeasureResult> {
        let scores = self.scores(state)?;
        let (value, arg) = self.aggregate(&scores);
        Ok(MeasureResult {
            value,
            attaining_partition: arg.map(|i| self.partitions[i].clone()),
            per_partition_scores: Some(self.partitions.iter().cloned().zip(scores).collect()),
            notes: self.spec.notes(),
        })
    }
}

/// Evaluates `spec` on a pure state.
pub fn evaluate(state: &PureState, spec: &MeasureSpec) -> Result<MeasureResult> {
    Evaluator::new(state.dims(), *spec)?.evaluate(state)
}

/// Shorthand for `evaluate(state, spec)?.value`.
pub fn measure_value(state: &PureState, spec: &MeasureSpec) -> Result<f64> {
    Evaluator::new(state.dims(), *spec)?.value(state)
}

/// Conversion factor between 2-GM concurrence and the geometric mean of
/// bipartite concurrence: `(prod_i 2(D_i - 1)/D_i)^(1/|T_2|)` with
/// `D_i = min(dim A_i, dim complement)` over all bipartitions.
pub fn gbc_factor(dims: &[usize]) -> Result<f64> {
    crate::tensor::validate_dims(dims, 2)?;
    let n = dims.len();
    let total: usize = dims.iter().product();
    let cuts = crate::partitions::bipartitions(n)?;
    let log_sum: f64 = cuts
        .iter()
        .map(|c| {
            let da: usize = c.members().iter().map(|&i| dims[i]).product();
            let d = da.min(total / da) as f64;
            (2.0 * (d - 1.0) / d).ln()
        })
        .sum();
    Ok((log_sum / cuts.len() as f64).exp())
}

/// `G_{alpha-2}(GHZ_n) = sqrt(2 (2^(1-alpha) - 1))`.
pub fn ghz_alpha2(n: usize, alpha: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParam(format!("GHZ needs n >= 2, got {n}")));
    }
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Ok(std::f64::consts::SQRT_2);
    }
    Ok((2.0 * (2f64.powf(1.0 - alpha) - 1.0)).sqrt())
}

/// `alpha`-concurrence of `W_n` across a cut of `p` qubits.
fn w_cut_alpha(n: usize, p: usize, alpha: f64) -> f64 {
    let nf = n as f64;
    (p as f64 / nf).powf(alpha) + ((n - p) as f64 / nf).powf(alpha) - 1.0
}

/// Closed form of `G_{alpha-2}(W_n)`: the `C(n,p)` cuts of `p < n/2` qubits,
/// plus for even `n` the `C(n, n/2)/2` balanced cuts, which score like GHZ.
/// Accumulated as a weighted mean of logs.
pub fn w_alpha2(n: usize, alpha: f64) -> Result<f64> {
    if !(3..=128).contains(&n) {
        return Err(Error::InvalidParam(format!(
            "W closed form needs 3 <= n <= 128, got {n}"
        )));
    }
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Ok(std::f64::consts::SQRT_2);
    }
    let overflow = || Error::Overflow(format!("binomial coefficients for n = {n}"));
    let mut weighted = 0.0;
    let mut weight_total = 0.0;
    for p in 1..n.div_ceil(2) {
        let w = binomial(n as u64, p as u64).ok_or_else(overflow)? as f64;
        weighted += w * 0.5 * (2.0 * w_cut_alpha(n, p, alpha)).ln();
        weight_total += w;
    }
    if n.is_multiple_of(2) {
        let w = binomial(n as u64, (n / 2) as u64).ok_or_else(overflow)? as f64 / 2.0;
        weighted += w * ghz_alpha2(n, alpha)?.ln();
        weight_total += w;
    }
    debug_assert!((weight_total - (2f64.powi(n as i32 - 1) - 1.0)).abs() <= 1e-6 * weight_total);
    Ok((weighted / weight_total).exp())
}

/// `G_{alpha-2}(W_n) / G_{alpha-2}(GHZ_n)`; exactly 1 at `alpha = 0`.
pub fn ghz_w_ratio(n: usize, alpha: f64) -> Result<f64> {
    if alpha == 0.0 {
        w_alpha2(n, alpha)?;
        return Ok(1.0);
    }
    Ok(w_alpha2(n, alpha)? / ghz_alpha2(n, alpha)?)
}
