//! Named qubit states used throughout the examples and tests.

use crate::tensor::{czero, PureState, C64};

fn from_terms(n: usize, terms: &[(&str, f64)]) -> PureState {
    let mut amps = vec![czero(); 1 << n];
    for (label, a) in terms {
        let idx = usize::from_str_radix(label, 2).expect("binary basis label");
        amps[idx] += C64::new(*a, 0.0);
    }
    PureState::normalized(vec![2; n], amps).expect("named states are non-zero")
}

/// `(|0...0> + |1...1>)/sqrt(2)`.
pub fn ghz(n: usize) -> PureState {
    let mut amps = vec![czero(); 1 << n];
    amps[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    amps[(1 << n) - 1] = amps[0];
    PureState::new(vec![2; n], amps).expect("n >= 2")
}

/// Uniform superposition of the `n` single-excitation basis states.
pub fn w(n: usize) -> PureState {
    let mut amps = vec![czero(); 1 << n];
    let a = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    for i in 0..n {
        amps[1 << i] = a;
    }
    PureState::normalized(vec![2; n], amps).expect("n >= 2")
}

/// `(|0000> + |1011> + |1101> + |1111>)/2`.
pub fn psi1() -> PureState {
    from_terms(4, &[("0000", 0.5), ("1011", 0.5), ("1101", 0.5), ("1111", 0.5)])
}

/// `(|0000> + |1001> + |1110> + |1111>)/2`.
pub fn psi2() -> PureState {
    from_terms(4, &[("0000", 0.5), ("1001", 0.5), ("1110", 0.5), ("1111", 0.5)])
}

/// `sin t (|0001>/3 + sqrt(2)|0100>/3 + sqrt(6)|1000>/3) + cos t |0011>`.
pub fn fig1(theta: f64) -> PureState {
    let (s, c) = theta.sin_cos();
    from_terms(
        4,
        &[
            ("0001", s / 3.0),
            ("0100", s * 2f64.sqrt() / 3.0),
            ("1000", s * 6f64.sqrt() / 3.0),
            ("0011", c),
        ],
    )
}

/// `(sqrt(3)/3) sin t (|0001> + |0100> + |1000>) + cos t |0011>`.
pub fn fig2(theta: f64) -> PureState {
    let (s, c) = theta.sin_cos();
    let a = s * 3f64.sqrt() / 3.0;
    from_terms(4, &[("0001", a), ("0100", a), ("1000", a), ("0011", c)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_norm_is_identically_one() {
        for i in 0..=100 {
            let t = i as f64 * std::f64::consts::PI / 100.0;
            for psi in [fig1(t), fig2(t)] {
                let ns: f64 = psi.amps().iter().map(|a| a.norm_sqr()).sum();
                assert!((ns - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn fig1_at_zero_is_basis_state() {
        assert_eq!(fig1(0.0), PureState::basis(vec![2; 4], &[0, 0, 1, 1]).unwrap());
    }
}
