//! Mixed-state bounds.
//!
//! The convex roof `inf sum_i p_i G(psi_i)` over pure-state decompositions
//! is not computed exactly. [`convex_roof_upper_bound`] searches
//! decompositions and returns the best one found, which certifies an upper
//! bound and nothing more.
//!
//! Decompositions of `rho = V V^dagger` (`V` = eigenvectors scaled by
//! `sqrt(lambda)`, `D x r`) with `m` members are exactly `W = V U` for an
//! `r x m` matrix `U` with orthonormal rows; member `j` is column `j` of `W`
//! with weight `|w_j|^2`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::{Evaluator, Family, MeasureSpec};
use crate::tensor::{permutations, permute_subsystems, pi_part, DensityMatrix, PureState, C64, RANK_TOL};

/// Maximum entrywise error allowed when an ensemble rebuilds its target.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;
/// Members lighter than this are dropped from returned ensembles.
const MIN_WEIGHT: f64 = 1e-15;
const GOLDEN_STEPS: usize = 24;
const EARLY_STOP_REL: f64 = 1e-9;

/// Probability-weighted list of pure states.
#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionEnsemble {
    entries: Vec<(f64, PureState)>,
}

impl DecompositionEnsemble {
    /// Requires positive weights summing to 1 within `1e-10` and a common
    /// dimension list.
    pub fn new(entries: Vec<(f64, PureState)>) -> Result<Self> {
        let Some((_, first)) = entries.first() else {
            return Err(Error::InvalidState("empty ensemble".into()));
        };
        if let Some((p, _)) = entries.iter().find(|(p, _)| !(*p > 0.0)) {
            return Err(Error::InvalidState(format!("non-positive weight {p}")));
        }
        if entries.iter().any(|(_, s)| s.dims() != first.dims()) {
            return Err(Error::IncompatibleDims("ensemble members differ in dims".into()));
        }
        let total: f64 = entries.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("weights sum to {total}")));
        }
        Ok(DecompositionEnsemble { entries })
    }

    pub fn entries(&self) -> &[(f64, PureState)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dims(&self) -> &[usize] {
        self.entries[0].1.dims()
    }

    /// `sum_i p_i |psi_i><psi_i|`.
    pub fn density(&self) -> DensityMatrix {
        let d = self.entries[0].1.dim();
        let mut acc = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
        for (p, s) in &self.entries {
            let v = nalgebra::DVector::from_column_slice(s.amps());
            acc += (&v * v.adjoint()) * C64::new(*p, 0.0);
        }
        DensityMatrix::from_parts_unchecked(self.dims().to_vec(), acc)
    }

    /// Largest entrywise deviation of the rebuilt operator from `rho`.
    pub fn reconstruction_error(&self, rho: &DensityMatrix) -> f64 {
        if self.dims() != rho.dims() {
            return f64::INFINITY;
        }
        self.density().max_abs_diff(rho)
    }

    /// `sum_i p_i G(psi_i)`.
    pub fn average(&self, ev: &Evaluator) -> Result<f64> {
        self.entries.iter().map(|(p, s)| Ok(p * ev.value(s)?)).sum()
    }
}

/// Search settings for [`convex_roof_upper_bound`].
#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub seed: u64,
    /// Ensemble sizes to try; `None` means `rank..=rank + 2`.
    pub ensemble_sizes: Option<Vec<usize>>,
    pub restarts: usize,
    pub refine_iters: usize,
    /// Slack used by the sandwich assertions in [`pi_lower_bound_check`].
    pub tolerance: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            seed: 0,
            ensemble_sizes: None,
            restarts: 32,
            refine_iters: 200,
            tolerance: 1e-7,
        }
    }
}

/// Best decomposition found and its ensemble average.
#[derive(Clone, Debug)]
pub struct RoofBound {
    pub value: f64,
    pub best: DecompositionEnsemble,
}

/// Working ensemble: columns of `w` plus cached weights and member values.
struct Candidate {
    w: DMatrix<C64>,
    weights: Vec<f64>,
    values: Vec<f64>,
}

fn member(dims: &[usize], col: &[C64]) -> Result<Option<(f64, PureState)>> {
    let p: f64 = col.iter().map(|a| a.norm_sqr()).sum();
    if p < MIN_WEIGHT {
        return Ok(None);
    }
    Ok(Some((p, PureState::normalized(dims.to_vec(), col.to_vec())?)))
}

fn member_value(ev: &Evaluator, dims: &[usize], col: &[C64]) -> Result<(f64, f64)> {
    match member(dims, col)? {
        Some((p, s)) => Ok((p, ev.value(&s)?)),
        None => Ok((0.0, 0.0)),
    }
}

impl Candidate {
    fn new(w: DMatrix<C64>, ev: &Evaluator, dims: &[usize]) -> Result<Self> {
        let mut weights = Vec::with_capacity(w.ncols());
        let mut values = Vec::with_capacity(w.ncols());
        for j in 0..w.ncols() {
            let (p, g) = member_value(ev, dims, w.column(j).as_slice())?;
            weights.push(p);
            values.push(g);
        }
        Ok(Candidate { w, weights, values })
    }

    fn objective(&self) -> f64 {
        self.weights.iter().zip(&self.values).map(|(p, g)| p * g).sum()
    }

    fn rotated_pair(&self, j: usize, l: usize, theta: f64, phase: C64) -> (Vec<C64>, Vec<C64>) {
        let (s, c) = theta.sin_cos();
        let wj = self.w.column(j);
        let wl = self.w.column(l);
        let a = wj.iter().zip(wl.iter()).map(|(x, y)| x * c + phase * y * s).collect();
        let b = wj
            .iter()
            .zip(wl.iter())
            .map(|(x, y)| -phase.conj() * x * s + y * c)
            .collect();
        (a, b)
    }

    /// Golden-section search over the rotation angle of columns `j`, `l`;
    /// the rotation is applied only if it lowers the objective.
    fn refine_pair(&mut self, ev: &Evaluator, dims: &[usize], j: usize, l: usize, phase: C64) -> Result<()> {
        let current = self.weights[j] * self.values[j] + self.weights[l] * self.values[l];
        let pair_cost = |theta: f64| -> Result<f64> {
            let (a, b) = self.rotated_pair(j, l, theta, phase);
            let (pa, ga) = member_value(ev, dims, &a)?;
            let (pb, gb) = member_value(ev, dims, &b)?;
            Ok(pa * ga + pb * gb)
        };
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        let mut f1 = pair_cost(x1)?;
        let mut f2 = pair_cost(x2)?;
        for _ in 0..GOLDEN_STEPS {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_phi * (hi - lo);
                f1 = pair_cost(x1)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (hi - lo);
                f2 = pair_cost(x2)?;
            }
        }
        let (theta, best) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        if best < current {
            let (a, b) = self.rotated_pair(j, l, theta, phase);
            let (pa, ga) = member_value(ev, dims, &a)?;
            let (pb, gb) = member_value(ev, dims, &b)?;
            self.w.set_column(j, &nalgebra::DVector::from_vec(a));
            self.w.set_column(l, &nalgebra::DVector::from_vec(b));
            self.weights[j] = pa;
            self.values[j] = ga;
            self.weights[l] = pb;
            self.values[l] = gb;
        }
        Ok(())
    }

    fn refine<R: Rng>(&mut self, ev: &Evaluator, dims: &[usize], iters: usize, rng: &mut R) -> Result<()> {
        let m = self.w.ncols();
        if m < 2 {
            return Ok(());
        }
        let window = (m * (m - 1) / 2).max(1);
        let mut window_start = self.objective();
        for it in 0..iters {
            let j = rng.random_range(0..m);
            let mut l = rng.random_range(0..m - 1);
            if l >= j {
                l += 1;
            }
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            self.refine_pair(ev, dims, j, l, C64::from_polar(1.0, phi))?;
            if (it + 1) % window == 0 {
                let now = self.objective();
                if window_start - now <= EARLY_STOP_REL * window_start.abs() {
                    break;
                }
                window_start = now;
            }
        }
        Ok(())
    }

    fn into_ensemble(self, dims: &[usize]) -> Result<DecompositionEnsemble> {
        let mut entries = Vec::new();
        for j in 0..self.w.ncols() {
            if let Some(m) = member(dims, self.w.column(j).as_slice())? {
                entries.push(m);
            }
        }
        let total: f64 = entries.iter().map(|(p, _)| p).sum();
        entries.iter_mut().for_each(|(p, _)| *p /= total);
        DecompositionEnsemble::new(entries)
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Upper bound on the convex roof of `spec` at `rho`.
///
/// Candidates, in order: the supplied `seeds` (each must rebuild `rho`),
/// the eigen-decomposition, then for every restart and ensemble size a Haar
/// random isometry refined by pairwise rotations. Restart `r` draws from its
/// own RNG stream, so results do not depend on scheduling and adding
/// restarts never raises the bound.
pub fn convex_roof_upper_bound(
    rho: &DensityMatrix,
    spec: &MeasureSpec,
    cfg: &SearchConfig,
    seeds: &[DecompositionEnsemble],
) -> Result<RoofBound> {
    if cfg.restarts == 0 {
        return Err(Error::InvalidParam("restarts must be >= 1".into()));
    }
    let dims = rho.dims().to_vec();
    let ev = Evaluator::new(&dims, *spec)?;

    let (vals, vecs) = rho.eigen();
    if let Some(&min) = vals.first() {
        if min < -crate::tensor::PSD_TOL {
            return Err(Error::NotPsd(min));
        }
    }
    let kept: Vec<usize> = (0..vals.len()).rev().filter(|&i| vals[i] > RANK_TOL).collect();
    let rank = kept.len();
    if rank == 0 {
        return Err(Error::InvalidState("density matrix has rank 0".into()));
    }
    let scaled = DMatrix::from_fn(rho.dim(), rank, |r, c| vecs[(r, kept[c])] * vals[kept[c]].sqrt());

    let sizes = match &cfg.ensemble_sizes {
        Some(s) => {
            if let Some(bad) = s.iter().find(|&&m| m < rank) {
                return Err(Error::InvalidParam(format!("ensemble size {bad} below rank {rank}")));
            }
            s.clone()
        }
        None => (rank..=rank + 2).collect(),
    };

    let mut best: Option<(f64, DecompositionEnsemble)> = None;
    let mut offer = |value: f64, ens: DecompositionEnsemble| {
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, ens));
        }
    };

    for seed in seeds {
        let err = seed.reconstruction_error(rho);
        if !(err <= RECONSTRUCTION_TOL) {
            return Err(Error::InvalidParam(format!(
                "seed ensemble does not rebuild the target (error {err:e})"
            )));
        }
        offer(seed.average(&ev)?, seed.clone());
    }

    let eigen = Candidate::new(scaled.clone(), &ev, &dims)?.into_ensemble(&dims)?;
    offer(eigen.average(&ev)?, eigen);

    if rank > 1 {
        let jobs: Vec<(usize, usize)> = (0..cfg.restarts)
            .flat_map(|r| (0..sizes.len()).map(move |s| (r, s)))
            .collect();
        let results: Vec<Result<(f64, DecompositionEnsemble)>> = jobs
            .par_iter()
            .map(|&(r, s)| {
                let mut rng = stream_rng(cfg.seed, ((r as u64) << 16) | s as u64);
                let iso = crate::random::haar_isometry(sizes[s], rank, &mut rng);
                let w = &scaled * iso.transpose();
                let mut cand = Candidate::new(w, &ev, &dims)?;
                cand.refine(&ev, &dims, cfg.refine_iters, &mut rng)?;
                let ens = cand.into_ensemble(&dims)?;
                Ok((ens.average(&ev)?, ens))
            })
            .collect();
        for r in results {
            let (v, e) = r?;
            offer(v, e);
        }
    }

    let (value, best) = best.expect("eigen candidate always offered");
    Ok(RoofBound { value, best })
}

/// A pure state or a density matrix.
#[derive(Clone, Copy, Debug)]
pub enum StateInput<'a> {
    Pure(&'a PureState),
    Mixed(&'a DensityMatrix),
}

/// k-GM versus k-ME comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct KmeBoundReport {
    /// k-GM value (pure) or its convex-roof upper bound (mixed).
    pub gm: f64,
    /// k-ME value (pure) or the k-ME average over the ensemble behind `gm`.
    pub me: f64,
    /// Independent k-ME convex-roof upper bound; mixed inputs only.
    pub me_upper_bound: Option<f64>,
    /// `gm >= me - 1e-10`. For mixed inputs this is the member-wise
    /// statement on one ensemble, the only one that is checkable.
    pub holds: bool,
}

/// k-ME as a lower bound of k-GM.
pub fn kme_lower_bound(input: StateInput<'_>, spec: &MeasureSpec, cfg: &SearchConfig) -> Result<KmeBoundReport> {
    if spec.family != Family::KGm {
        return Err(Error::InvalidParam(format!("expected a kgm spec, got {}", spec.family)));
    }
    let me_spec = MeasureSpec::kme(spec.k);
    match input {
        StateInput::Pure(psi) => {
            let gm = Evaluator::new(psi.dims(), *spec)?.value(psi)?;
            let me = Evaluator::new(psi.dims(), me_spec)?.value(psi)?;
            Ok(KmeBoundReport {
                gm,
                me,
                me_upper_bound: None,
                holds: gm >= me - 1e-10,
            })
        }
        StateInput::Mixed(rho) => {
            let gm = convex_roof_upper_bound(rho, spec, cfg, &[])?;
            let me_ev = Evaluator::new(rho.dims(), me_spec)?;
            let me = gm.best.average(&me_ev)?;
            let ub_me = convex_roof_upper_bound(rho, &me_spec, cfg, std::slice::from_ref(&gm.best))?;
            Ok(KmeBoundReport {
                gm: gm.value,
                me,
                me_upper_bound: Some(ub_me.value),
                holds: gm.value >= me - 1e-10,
            })
        }
    }
}

/// One local-unitary sample of the PI sandwich.
#[derive(Clone, Debug, PartialEq)]
pub struct PiSample {
    /// Convex-roof upper bound at `(U rho U^dagger)^PI`.
    pub upper_bound: f64,
    /// Average over the symmetrized seed ensemble `{1/n!, Pi_j U psi}`.
    pub seed_average: f64,
    /// Measure of `U psi`.
    pub rotated_value: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiBoundReport {
    pub pure_value: f64,
    pub samples: Vec<PiSample>,
    /// Largest certified upper bound over the sampled unitaries.
    pub max_upper_bound: f64,
    pub all_passed: bool,
}

/// Checks `UB(G((U psi)^PI)) <= G(psi) + tolerance` for the identity and
/// `unitary_samples - 1` Haar local unitaries.
pub fn pi_lower_bound_check(
    psi: &PureState,
    spec: &MeasureSpec,
    cfg: &SearchConfig,
    unitary_samples: usize,
) -> Result<PiBoundReport> {
    if unitary_samples == 0 {
        return Err(Error::InvalidParam("need at least one unitary sample".into()));
    }
    let dims = psi.dims();
    let ev = Evaluator::new(dims, *spec)?;
    let pure_value = ev.value(psi)?;
    let perms = permutations(psi.n());
    let mut rng = stream_rng(cfg.seed, u64::MAX);
    let mut samples = Vec::with_capacity(unitary_samples);
    for i in 0..unitary_samples {
        let rotated = if i == 0 {
            psi.clone()
        } else {
            psi.apply_local(&crate::random::local_unitaries(dims, &mut rng))?
        };
        let rho_pi = pi_part(&rotated.to_density())?;
        let w = 1.0 / perms.len() as f64;
        let seed = DecompositionEnsemble::new(
            perms
                .iter()
                .map(|p| Ok((w, permute_subsystems(&rotated, p)?)))
                .collect::<Result<Vec<_>>>()?,
        )?;
        let seed_average = seed.average(&ev)?;
        let bound = convex_roof_upper_bound(&rho_pi, spec, cfg, &[seed])?;
        samples.push(PiSample {
            upper_bound: bound.value,
            seed_average,
            rotated_value: ev.value(&rotated)?,
            passed: bound.value <= pure_value + cfg.tolerance,
        });
    }
    let max_upper_bound = samples.iter().map(|s| s.upper_bound).fold(f64::NEG_INFINITY, f64::max);
    let all_passed = samples.iter().all(|s| s.passed);
    Ok(PiBoundReport {
        pure_value,
        samples,
        max_upper_bound,
        all_passed,
    })
}

/// `(G_{q-k}(psi), sqrt(2) C_{q-k}(psi))`; the first is never below the second.
pub fn sqrt2_qkme_bound(psi: &PureState, k: usize, q: f64) -> Result<(f64, f64)> {
    let g = Evaluator::new(psi.dims(), MeasureSpec::qkgm(k, q))?.value(psi)?;
    let c = Evaluator::new(psi.dims(), MeasureSpec::qkme(k, q))?.value(psi)?;
    Ok((g, std::f64::consts::SQRT_2 * c))
}
