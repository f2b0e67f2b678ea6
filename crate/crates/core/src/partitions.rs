//! k-partitions of `{1..n}`.
//!
//! Partitions are enumerated as restricted growth strings `a` (`a[0] = 0`,
//! `a[i] <= max(a[..i]) + 1`) using exactly `k` labels, in lexicographic
//! order. Element `i` belongs to block `a[i]`, so blocks come out ordered by
//! their smallest element.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::tensor::IndexSubset;

/// Unordered partition of `0..n` into disjoint, covering, non-empty blocks,
/// kept in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KPartition {
    n: usize,
    blocks: Vec<IndexSubset>,
}

impl KPartition {
    /// Canonicalizes and validates an arbitrary list of blocks.
    pub fn new(n: usize, blocks: Vec<IndexSubset>) -> Result<Self> {
        let mut seen = vec![false; n];
        for b in &blocks {
            for &i in b.members() {
                if i >= n {
                    return Err(Error::InvalidPartition(format!("index {} out of range", i + 1)));
                }
                if seen[i] {
                    return Err(Error::InvalidPartition(format!("index {} in two blocks", i + 1)));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("index {} not covered", i + 1)));
        }
        let mut blocks = blocks;
        blocks.sort_by_key(|b| b.members()[0]);
        Ok(KPartition { n, blocks })
    }

    /// Builds the partition encoded by a restricted growth string.
    pub fn from_rgs(rgs: &[usize]) -> Result<Self> {
        let n = rgs.len();
        let k = rgs.iter().max().map_or(0, |m| m + 1);
        let mut members = vec![Vec::new(); k];
        let mut max = None;
        for (i, &a) in rgs.iter().enumerate() {
            let limit = max.map_or(0, |m: usize| m + 1);
            if a > limit {
                return Err(Error::InvalidPartition(format!(
                    "{rgs:?} is not a restricted growth string"
                )));
            }
            max = Some(max.map_or(a, |m: usize| m.max(a)));
            members[a].push(i);
        }
        let blocks = members
            .into_iter()
            .map(|m| IndexSubset::new(m, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(KPartition { n, blocks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[IndexSubset] {
        &self.blocks
    }

    /// Image under the subsystem permutation `perm` (re-canonicalized).
    pub fn permuted(&self, perm: &[usize]) -> KPartition {
        let blocks = self.blocks.iter().map(|b| b.permuted(perm)).collect();
        KPartition::new(self.n, blocks).expect("permutation preserves partition structure")
    }
}

impl fmt::Display for KPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wide = self.n > 9;
        for (j, b) in self.blocks.iter().enumerate() {
            if j > 0 {
                write!(f, "|")?;
            }
            if wide {
                let parts: Vec<String> = b.members().iter().map(|i| (i + 1).to_string()).collect();
                write!(f, "{}", parts.join(","))?;
            } else {
                write!(f, "{b}")?;
            }
        }
        Ok(())
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    Ok(())
}

/// Lazy enumeration of every k-partition of `0..n` in RGS lexicographic order.
#[derive(Clone, Debug)]
pub struct KPartitions {
    k: usize,
    rgs: Vec<usize>,
    done: bool,
}

impl KPartitions {
    fn first(n: usize, k: usize) -> Vec<usize> {
        let mut a = vec![0; n];
        for j in 1..k {
            a[n - k + j] = j;
        }
        a
    }

    /// Advances to the next string with exactly `k` labels; false when exhausted.
    fn advance(&mut self) -> bool {
        let n = self.rgs.len();
        let k = self.k;
        // prefix maxima
        let mut pmax = vec![0usize; n];
        for i in 1..n {
            pmax[i] = pmax[i - 1].max(self.rgs[i]);
        }
        for i in (1..n).rev() {
            let bound = (pmax[i - 1] + 1).min(k - 1);
            let v = self.rgs[i] + 1;
            if v > bound {
                continue;
            }
            let m = pmax[i - 1].max(v);
            let missing = k - 1 - m;
            let room = n - 1 - i;
            if missing > room {
                continue;
            }
            self.rgs[i] = v;
            for slot in self.rgs[i + 1..].iter_mut() {
                *slot = 0;
            }
            for j in 0..missing {
                self.rgs[n - missing + j] = m + 1 + j;
            }
            return true;
        }
        false
    }
}

impl Iterator for KPartitions {
    type Item = KPartition;

    fn next(&mut self) -> Option<KPartition> {
        if self.done {
            return None;
        }
        let out = KPartition::from_rgs(&self.rgs).expect("generator emits valid strings");
        if !self.advance() {
            self.done = true;
        }
        Some(out)
    }
}

/// Every k-partition of `{1..n}` exactly once, in RGS lexicographic order.
pub fn enumerate_k_partitions(n: usize, k: usize) -> Result<KPartitions> {
    check_k(n, k)?;
    Ok(KPartitions {
        k,
        rgs: KPartitions::first(n, k),
        done: false,
    })
}

fn binomial_big(n: usize, r: usize) -> BigInt {
    let mut acc = BigInt::from(1u32);
    for i in 0..r {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Stirling number of the second kind, `|T_k|`, from
/// `sum_t (-1)^(k-t) t^(n-1) / ((t-1)! (k-t)!)`.
///
/// Multiplying through by `(k-1)!` turns each term into
/// `(-1)^(k-t) C(k-1, t-1) t^(n-1)`; the single division at the end is exact.
pub fn stirling2(n: usize, k: usize) -> Result<u128> {
    check_k(n, k)?;
    let mut sum = BigInt::zero();
    for t in 1..=k {
        let term = binomial_big(k - 1, t - 1) * num_traits::pow(BigInt::from(t), n - 1);
        if (k - t).is_multiple_of(2) {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let fact = (1..k).fold(BigInt::from(1u32), |acc, i| acc * BigInt::from(i));
    debug_assert!((&sum % &fact).is_zero());
    (sum / fact)
        .to_u128()
        .ok_or_else(|| Error::Overflow(format!("S({n}, {k}) does not fit in u128")))
}

/// One representative per unordered bipartition: the block containing
/// subsystem 1. There are `2^(n-1) - 1` of them.
pub fn bipartitions(n: usize) -> Result<Vec<IndexSubset>> {
    Ok(enumerate_k_partitions(n, 2)?.map(|p| p.blocks()[0].clone()).collect())
}

/// Exact binomial coefficient, `None` on overflow.
pub fn binomial(n: u64, r: u64) -> Option<u128> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}
