//! Seeded sampling of Haar-random states, unitaries and isometries.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::partitions::{enumerate_k_partitions, KPartition};
use crate::tensor::{czero, strides, PureState, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random unit vector of length `dim`.
pub fn haar_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    let mut v: Vec<C64> = (0..dim).map(|_| gaussian(rng)).collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

pub fn haar_state<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<PureState> {
    let total = crate::tensor::validate_dims(dims, 2)?;
    PureState::normalized(dims.to_vec(), haar_vector(total, rng))
}

/// `rows x cols` matrix with orthonormal columns (`rows >= cols`), Haar
/// distributed: QR of a complex Ginibre matrix with the phases of `R`'s
/// diagonal pushed into `Q`.
pub fn haar_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<C64> {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = DMatrix::from_fn(rows, cols, |_, _| gaussian(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..cols {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..rows {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    haar_isometry(dim, dim, rng)
}

/// One independent Haar unitary per subsystem.
pub fn local_unitaries<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Vec<DMatrix<C64>> {
    dims.iter().map(|&d| haar_unitary(d, rng)).collect()
}

/// Uniform random permutation of `0..n`.
pub fn permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}

/// Product of Haar-random states across a uniformly chosen k-partition.
pub fn k_separable_state<R: Rng + ?Sized>(dims: &[usize], k: usize, rng: &mut R) -> Result<(PureState, KPartition)> {
    crate::tensor::validate_dims(dims, 2)?;
    let n = dims.len();
    let count = enumerate_k_partitions(n, k)?.count();
    let part = enumerate_k_partitions(n, k)?
        .nth(rng.random_range(0..count))
        .expect("index within count");
    let block_states: Vec<Vec<C64>> = part
        .blocks()
        .iter()
        .map(|b| haar_vector(b.members().iter().map(|&i| dims[i]).product(), rng))
        .collect();
    let block_strides: Vec<Vec<usize>> = part
        .blocks()
        .iter()
        .map(|b| strides(&b.members().iter().map(|&i| dims[i]).collect::<Vec<_>>()))
        .collect();
    let mut amps = vec![czero(); dims.iter().product()];
    crate::tensor::for_each_digits(dims, |idx, digits| {
        let mut a = C64::new(1.0, 0.0);
        for (b, block) in part.blocks().iter().enumerate() {
            let local: usize = block
                .members()
                .iter()
                .zip(&block_strides[b])
                .map(|(&i, s)| digits[i] * s)
                .sum();
            a *= block_states[b][local];
        }
        amps[idx] = a;
    });
    Ok((PureState::normalized(dims.to_vec(), amps)?, part))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = haar_unitary(4, &mut rng);
        let err = (u.adjoint() * &u - DMatrix::<C64>::identity(4, 4)).norm();
        assert!(err < 1e-13);
        let v = haar_isometry(6, 3, &mut rng);
        assert!((v.adjoint() * &v - DMatrix::<C64>::identity(3, 3)).norm() < 1e-13);
    }

    #[test]
    fn permutation_is_bijection() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = permutation(7, &mut rng);
        p.sort_unstable();
        assert_eq!(p, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let a = haar_state(&[2, 3], &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = haar_state(&[2, 3], &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
