//! Dense multipartite states.
//!
//! Amplitudes are stored in lexicographic basis order with subsystem 0 as the
//! most significant digit: for dims `[d0, d1, ..., d(n-1)]` the basis state
//! `|a0 a1 ... a(n-1)>` sits at index `a0*(d1*...*d(n-1)) + ... + a(n-1)`.
//! Subsystem indices are 0-based in the API and printed 1-based.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Allowed deviation of `sum |a_i|^2` from 1 for a pure state.
pub const NORM_TOL: f64 = 1e-8;
/// Entrywise Hermiticity tolerance for density matrices.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Allowed deviation of a density matrix trace from 1.
pub const TRACE_TOL: f64 = 1e-8;
/// Eigenvalues in `[-PSD_TOL, 0)` are clamped to zero; anything lower is an error.
pub const PSD_TOL: f64 = 1e-10;
/// Eigenvalues below this count as zero when a rank is requested (exponent 0).
pub const RANK_TOL: f64 = 1e-10;
/// Singular values below `SCHMIDT_CUTOFF * sigma_max` are numerical zeros.
pub const SCHMIDT_CUTOFF: f64 = 1e-12;
/// Default budget for [`pi_part`]: `n! * dim^2` for eight qubits.
pub const DEFAULT_PI_BUDGET: u128 = 40_320 * 256 * 256;

pub(crate) fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

pub(crate) fn validate_dims(dims: &[usize], min_parties: usize) -> Result<usize> {
    if dims.len() < min_parties {
        return Err(Error::IncompatibleDims(format!(
            "need at least {min_parties} subsystems, got {}",
            dims.len()
        )));
    }
    if let Some(d) = dims.iter().find(|&&d| d < 2) {
        return Err(Error::IncompatibleDims(format!("subsystem dimension {d} < 2")));
    }
    dims.iter().try_fold(1usize, |acc, &d| {
        acc.checked_mul(d)
            .ok_or_else(|| Error::Overflow("total Hilbert space dimension".into()))
    })
}

/// Row-major strides, subsystem 0 most significant.
pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for j in (0..dims.len().saturating_sub(1)).rev() {
        s[j] = s[j + 1] * dims[j + 1];
    }
    s
}

/// Calls `f(index, digits)` for every basis index in order.
pub(crate) fn for_each_digits(dims: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let total: usize = dims.iter().product();
    let mut digits = vec![0usize; dims.len()];
    for idx in 0..total {
        f(idx, &digits);
        for j in (0..dims.len()).rev() {
            digits[j] += 1;
            if digits[j] < dims[j] {
                break;
            }
            digits[j] = 0;
        }
    }
}

/// A set of subsystem indices (0-based, strictly increasing, non-empty).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSubset {
    members: Vec<usize>,
}

impl IndexSubset {
    /// Builds a subset of `0..n`. Order of `members` does not matter; duplicates,
    /// out-of-range indices and the empty set are rejected.
    pub fn new(members: impl IntoIterator<Item = usize>, n: usize) -> Result<Self> {
        let mut m: Vec<usize> = members.into_iter().collect();
        if m.is_empty() {
            return Err(Error::InvalidSubset("empty subset".into()));
        }
        m.sort_unstable();
        if m.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSubset(format!("duplicate index in {m:?}")));
        }
        if let Some(&last) = m.last() {
            if last >= n {
                return Err(Error::InvalidSubset(format!(
                    "index {} out of range for n = {n}",
                    last + 1
                )));
            }
        }
        Ok(IndexSubset { members: m })
    }

    /// Same as [`IndexSubset::new`] with 1-based indices.
    pub fn from_one_based(members: &[usize], n: usize) -> Result<Self> {
        if members.contains(&0) {
            return Err(Error::InvalidSubset("index 0 in 1-based subset".into()));
        }
        Self::new(members.iter().map(|&i| i - 1), n)
    }

    pub fn full(n: usize) -> Self {
        IndexSubset {
            members: (0..n).collect(),
        }
    }

    pub fn from_mask(mask: u64, n: usize) -> Result<Self> {
        Self::new((0..n.min(64)).filter(|&i| mask >> i & 1 == 1), n)
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn mask(&self) -> u64 {
        self.members.iter().fold(0u64, |m, &i| m | 1 << i)
    }

    pub fn is_proper(&self, n: usize) -> bool {
        self.members.len() < n && self.members.iter().all(|&i| i < n)
    }

    /// Complement within `0..n`, `None` when the subset is full.
    pub fn complement(&self, n: usize) -> Option<Self> {
        let rest: Vec<usize> = (0..n).filter(|i| !self.contains(*i)).collect();
        if rest.is_empty() {
            None
        } else {
            Some(IndexSubset { members: rest })
        }
    }

    /// Image of the subset under `perm` (subsystem `i` moves to `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut m: Vec<usize> = self.members.iter().map(|&i| perm[i]).collect();
        m.sort_unstable();
        IndexSubset { members: m }
    }

    pub(crate) fn check_cut(&self, n: usize) -> Result<()> {
        if self.members.iter().any(|&i| i >= n) {
            return Err(Error::InvalidSubset(format!("{self} out of range for n = {n}")));
        }
        if self.members.len() >= n {
            return Err(Error::InvalidSubset(format!("{self} is not a proper subset")));
        }
        Ok(())
    }
}

impl fmt::Display for IndexSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wide = self.members.iter().any(|&i| i >= 9);
        for (j, &i) in self.members.iter().enumerate() {
            if wide && j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        Ok(())
    }
}

/// Precomputed reshaping of an amplitude vector into a `rows x cols` matrix
/// for the cut `keep | complement`.
#[derive(Clone, Debug)]
pub(crate) struct CutLayout {
    pub rows: usize,
    pub cols: usize,
    pub pos: Vec<(u32, u32)>,
}

impl CutLayout {
    pub fn new(dims: &[usize], keep: &IndexSubset) -> Self {
        let n = dims.len();
        let mut rstride = vec![0usize; n];
        let mut cstride = vec![0usize; n];
        let (mut rows, mut cols) = (1usize, 1usize);
        for j in (0..n).rev() {
            if keep.contains(j) {
                rstride[j] = rows;
                rows *= dims[j];
            } else {
                cstride[j] = cols;
                cols *= dims[j];
            }
        }
        let mut pos = Vec::with_capacity(rows * cols);
        for_each_digits(dims, |_, digits| {
            let (mut r, mut c) = (0usize, 0usize);
            for (j, &a) in digits.iter().enumerate() {
                r += a * rstride[j];
                c += a * cstride[j];
            }
            pos.push((r as u32, c as u32));
        });
        CutLayout { rows, cols, pos }
    }

    pub fn reshape(&self, amps: &[C64]) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.rows, self.cols, czero());
        for (a, &(r, c)) in amps.iter().zip(&self.pos) {
            m[(r as usize, c as usize)] = *a;
        }
        m
    }

    /// Squared Schmidt coefficients via SVD of the reshaped amplitudes.
    pub fn spectrum(&self, amps: &[C64]) -> Result<Spectrum> {
        let m = self.reshape(amps);
        let sv = if self.rows <= self.cols {
            m.adjoint().singular_values()
        } else {
            m.singular_values()
        };
        let smax = sv.iter().cloned().fold(0.0f64, f64::max);
        let vals = sv
            .iter()
            .map(|&s| if s < SCHMIDT_CUTOFF * smax { 0.0 } else { s * s })
            .collect();
        Spectrum::from_eigenvalues(vals)
    }
}

/// Eigenvalues of a reduced state, non-increasing, clamped to `[0, 1]`,
/// renormalized to unit sum.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Validates raw eigenvalues. Values in `[-PSD_TOL, 0)` are clamped to 0,
    /// lower values give [`Error::NotPsd`]. The sum must be 1 within `1e-6`.
    pub fn from_eigenvalues(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidState("empty spectrum".into()));
        }
        let mut values = Vec::with_capacity(raw.len());
        for v in raw {
            if !v.is_finite() {
                return Err(Error::InvalidState("non-finite eigenvalue".into()));
            }
            if v < -PSD_TOL {
                return Err(Error::NotPsd(v));
            }
            values.push(v.clamp(0.0, 1.0 + 1e-6));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidState(format!("spectrum sums to {sum}")));
        }
        for v in values.iter_mut() {
            *v = (*v / sum).min(1.0);
        }
        values.sort_unstable_by(|a, b| b.total_cmp(a));
        Ok(Spectrum { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of eigenvalues at or above [`RANK_TOL`].
    pub fn rank(&self) -> usize {
        self.values.iter().filter(|&&v| v >= RANK_TOL).count()
    }

    fn tail(&self) -> (f64, &[f64]) {
        let rest = &self.values[1..];
        (rest.iter().sum(), rest)
    }

    /// `1 - Tr rho^q`. The leading eigenvalue is written as `1 - s` with `s` the
    /// tail mass so that nearly pure reductions do not lose precision.
    pub fn q_concurrence(&self, q: f64) -> f64 {
        let (s, rest) = self.tail();
        if s == 0.0 {
            return 0.0;
        }
        let head = -(q * (-s).ln_1p()).exp_m1();
        let tail: f64 = rest.iter().filter(|&&v| v > 0.0).map(|v| v.powf(q)).sum();
        (head - tail).max(0.0)
    }

    /// `Tr rho^alpha - 1`; at `alpha = 0` this is `rank - 1`.
    pub fn alpha_concurrence(&self, alpha: f64) -> f64 {
        if alpha == 0.0 {
            return self.rank().saturating_sub(1) as f64;
        }
        let (s, rest) = self.tail();
        if s == 0.0 {
            return 0.0;
        }
        let head = (alpha * (-s).ln_1p()).exp_m1();
        let tail: f64 = rest.iter().filter(|&&v| v > 0.0).map(|v| v.powf(alpha)).sum();
        (head + tail).max(0.0)
    }
}

/// `sum_i lambda_i^e`. With `e = 0` this counts eigenvalues `>= RANK_TOL`.
pub fn trace_power(spec: &Spectrum, e: f64) -> Result<f64> {
    if !(e >= 0.0) || !e.is_finite() {
        return Err(Error::InvalidParam(format!("exponent {e} must be finite and >= 0")));
    }
    if e == 0.0 {
        return Ok(spec.rank() as f64);
    }
    Ok(spec.values.iter().filter(|&&v| v > 0.0).map(|v| v.powf(e)).sum())
}

/// Normalized pure state over a list of subsystem dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    dims: Vec<usize>,
    amps: Vec<C64>,
}

impl PureState {
    /// Requires `sum |a_i|^2 = 1` within [`NORM_TOL`].
    pub fn new(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        let total = validate_dims(&dims, 2)?;
        if amps.len() != total {
            return Err(Error::IncompatibleDims(format!(
                "{} amplitudes for total dimension {total}",
                amps.len()
            )));
        }
        let ns: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if !ns.is_finite() || (ns - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("squared norm {ns} is not 1")));
        }
        Ok(PureState { dims, amps })
    }

    /// Rescales any non-zero vector to unit norm.
    pub fn normalized(dims: Vec<usize>, mut amps: Vec<C64>) -> Result<Self> {
        let ns: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if !(ns > 0.0) || !ns.is_finite() {
            return Err(Error::InvalidState("zero or non-finite vector".into()));
        }
        let s = 1.0 / ns.sqrt();
        amps.iter_mut().for_each(|a| *a *= s);
        Self::new(dims, amps)
    }

    /// Computational basis state `|digits>`.
    pub fn basis(dims: Vec<usize>, digits: &[usize]) -> Result<Self> {
        let total = validate_dims(&dims, 2)?;
        if digits.len() != dims.len() || digits.iter().zip(&dims).any(|(a, d)| a >= d) {
            return Err(Error::InvalidState(format!("basis label {digits:?} for dims {dims:?}")));
        }
        let idx: usize = digits.iter().zip(strides(&dims)).map(|(a, s)| a * s).sum();
        let mut amps = vec![czero(); total];
        amps[idx] = C64::new(1.0, 0.0);
        Ok(PureState { dims, amps })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn to_density(&self) -> DensityMatrix {
        let v = nalgebra::DVector::from_column_slice(&self.amps);
        DensityMatrix {
            dims: self.dims.clone(),
            mat: &v * v.adjoint(),
        }
    }

    /// Applies one unitary per subsystem, `(U_0 ⊗ U_1 ⊗ ...) |psi>`.
    pub fn apply_local(&self, unitaries: &[DMatrix<C64>]) -> Result<PureState> {
        if unitaries.len() != self.n() {
            return Err(Error::IncompatibleDims(format!(
                "{} local operators for {} subsystems",
                unitaries.len(),
                self.n()
            )));
        }
        let st = strides(&self.dims);
        let mut cur = self.amps.clone();
        for (j, u) in unitaries.iter().enumerate() {
            let d = self.dims[j];
            if u.nrows() != d || u.ncols() != d {
                return Err(Error::IncompatibleDims(format!(
                    "operator on subsystem {} is {}x{}, expected {d}x{d}",
                    j + 1,
                    u.nrows(),
                    u.ncols()
                )));
            }
            let mut next = vec![czero(); cur.len()];
            for (idx, out) in next.iter_mut().enumerate() {
                let a = (idx / st[j]) % d;
                let base = idx - a * st[j];
                let mut acc = czero();
                for b in 0..d {
                    acc += u[(a, b)] * cur[base + b * st[j]];
                }
                *out = acc;
            }
            cur = next;
        }
        PureState::normalized(self.dims.clone(), cur)
    }
}

/// Density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    mat: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(dims: Vec<usize>, mat: DMatrix<C64>) -> Result<Self> {
        let total = validate_dims(&dims, 1)?;
        if mat.nrows() != total || mat.ncols() != total {
            return Err(Error::IncompatibleDims(format!(
                "{}x{} matrix for total dimension {total}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let herm = (0..total)
            .flat_map(|i| (0..total).map(move |j| (i, j)))
            .map(|(i, j)| (mat[(i, j)] - mat[(j, i)].conj()).norm())
            .fold(0.0f64, f64::max);
        if !(herm <= HERMITIAN_TOL) {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let rho = DensityMatrix { dims, mat };
        let (evals, _) = rho.eigen();
        if let Some(&min) = evals.first() {
            if min < -PSD_TOL {
                return Err(Error::NotPsd(min));
            }
        }
        Ok(rho)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<C64>) {
        let h = (&self.mat + self.mat.adjoint()) * C64::new(0.5, 0.0);
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(self.dim(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
        (vals, vecs)
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        Spectrum::from_eigenvalues(self.eigen().0)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        (&self.mat - &other.mat).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `Pi rho Pi^dagger` for the subsystem permutation `perm`.
    pub fn conjugate_by_permutation(&self, perm: &[usize]) -> Result<DensityMatrix> {
        let map = permutation_index_map(&self.dims, perm)?;
        let d = self.dim();
        let mut out = DMatrix::from_element(d, d, czero());
        for a in 0..d {
            for b in 0..d {
                out[(map[a], map[b])] = self.mat[(a, b)];
            }
        }
        Ok(DensityMatrix {
            dims: self.dims.clone(),
            mat: out,
        })
    }

    pub(crate) fn from_parts_unchecked(dims: Vec<usize>, mat: DMatrix<C64>) -> Self {
        DensityMatrix { dims, mat }
    }
}

/// Partial trace of `|psi><psi|` over the complement of `keep`.
pub fn reduced_density(state: &PureState, keep: &IndexSubset) -> Result<DensityMatrix> {
    keep.check_cut(state.n())?;
    let m = CutLayout::new(state.dims(), keep).reshape(state.amps());
    let rho = &m * m.adjoint();
    let dims = keep.members().iter().map(|&i| state.dims()[i]).collect();
    Ok(DensityMatrix::from_parts_unchecked(dims, rho))
}

/// Schmidt spectrum across `cut | complement`, of length
/// `min(dim cut, dim complement)`.
pub fn schmidt_spectrum(state: &PureState, cut: &IndexSubset) -> Result<Spectrum> {
    cut.check_cut(state.n())?;
    CutLayout::new(state.dims(), cut).spectrum(state.amps())
}

fn check_permutation(dims: &[usize], perm: &[usize]) -> Result<()> {
    let n = dims.len();
    if perm.len() != n {
        return Err(Error::InvalidParam(format!(
            "permutation of length {} for {n} subsystems",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidParam(format!("{perm:?} is not a bijection")));
        }
        seen[p] = true;
    }
    if let Some(i) = (0..n).find(|&i| dims[perm[i]] != dims[i]) {
        return Err(Error::IncompatibleDims(format!(
            "subsystem {} (dim {}) cannot move to position {} (dim {})",
            i + 1,
            dims[i],
            perm[i] + 1,
            dims[perm[i]]
        )));
    }
    Ok(())
}

/// `map[i]` is the index that basis state `i` moves to under `perm`.
pub(crate) fn permutation_index_map(dims: &[usize], perm: &[usize]) -> Result<Vec<usize>> {
    check_permutation(dims, perm)?;
    let st = strides(dims);
    let mut map = Vec::with_capacity(dims.iter().product());
    for_each_digits(dims, |_, digits| {
        map.push(digits.iter().enumerate().map(|(i, &a)| a * st[perm[i]]).sum());
    });
    Ok(map)
}

/// Reorders subsystems: subsystem `i` of the input becomes subsystem
/// `perm[i]` of the output.
pub fn permute_subsystems(state: &PureState, perm: &[usize]) -> Result<PureState> {
    let map = permutation_index_map(state.dims(), perm)?;
    let mut amps = vec![czero(); state.dim()];
    for (i, &j) in map.iter().enumerate() {
        amps[j] = state.amps()[i];
    }
    Ok(PureState {
        dims: state.dims().to_vec(),
        amps,
    })
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = vec![p.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
        out.push(p.clone());
    }
}

fn factorial(n: usize) -> Option<u128> {
    (1..=n as u128).try_fold(1u128, |acc, k| acc.checked_mul(k))
}

/// Permutationally invariant part, `(1/n!) sum_j Pi_j rho Pi_j^dagger`,
/// with the default budget.
pub fn pi_part(rho: &DensityMatrix) -> Result<DensityMatrix> {
    pi_part_with_budget(rho, DEFAULT_PI_BUDGET)
}

pub fn pi_part_with_budget(rho: &DensityMatrix, budget: u128) -> Result<DensityMatrix> {
    let dims = rho.dims();
    if dims.iter().any(|&d| d != dims[0]) {
        return Err(Error::IncompatibleDims(format!(
            "PI part needs equal subsystem dimensions, got {dims:?}"
        )));
    }
    let d = rho.dim() as u128;
    let needed = factorial(dims.len())
        .and_then(|f| f.checked_mul(d * d))
        .unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let perms = permutations(dims.len());
    let dim = rho.dim();
    let mut acc = DMatrix::from_element(dim, dim, czero());
    for perm in &perms {
        let map = permutation_index_map(dims, perm)?;
        for a in 0..dim {
            for b in 0..dim {
                acc[(map[a], map[b])] += rho.matrix()[(a, b)];
            }
        }
    }
    acc /= C64::new(perms.len() as f64, 0.0);
    Ok(DensityMatrix::from_parts_unchecked(dims.to_vec(), acc))
}
