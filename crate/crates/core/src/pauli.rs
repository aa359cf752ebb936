//! Pauli labels, strings and their superoperators.
//!
//! Single-qubit order is (I, X, Y, Z) with codes 0..4; an n-qubit string is
//! indexed base 4 with qubit 0 as the most significant digit.

use crate::error::{invalid, Result};
use crate::tensor::{kron, unitary_superop, CMatrix, C64, ONE, ZERO};

pub const LABELS: [char; 4] = ['I', 'X', 'Y', 'Z'];

pub fn pauli_matrix(p: u8) -> CMatrix {
    let i = C64::new(0.0, 1.0);
    match p {
        0 => CMatrix::identity(2, 2),
        1 => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
        3 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("pauli code {p} out of range"),
    }
}

pub fn string_matrix(labels: &[u8]) -> CMatrix {
    labels
        .iter()
        .fold(CMatrix::identity(1, 1), |acc, &p| kron(&acc, &pauli_matrix(p)))
}

pub fn index_to_labels(mut index: usize, n: usize) -> Vec<u8> {
    let mut out = vec![0u8; n];
    for q in (0..n).rev() {
        out[q] = (index % 4) as u8;
        index /= 4;
    }
    out
}

pub fn labels_to_index(labels: &[u8]) -> usize {
    labels.iter().fold(0, |acc, &p| acc * 4 + p as usize)
}

pub fn format_labels(labels: &[u8]) -> String {
    labels.iter().map(|&p| LABELS[p as usize]).collect()
}

pub fn parse_labels(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|ch| match ch.to_ascii_uppercase() {
            'I' => Ok(0),
            'X' => Ok(1),
            'Y' => Ok(2),
            'Z' => Ok(3),
            other => invalid(format!("unknown Pauli label '{other}'")),
        })
        .collect()
}

/// `log2(d)` when `d` is a power of two.
pub fn qubit_count(d: usize) -> Result<usize> {
    if d == 0 || !d.is_power_of_two() {
        return invalid(format!("dimension {d} is not a power of two"));
    }
    Ok(d.trailing_zeros() as usize)
}

/// Monomial form of a Pauli string: `P|c⟩ = phase[c] |c ⊕ flip⟩`.
#[derive(Clone, Debug)]
pub struct Monomial {
    pub flip: usize,
    pub phase: Vec<C64>,
}

impl Monomial {
    pub fn new(labels: &[u8]) -> Self {
        let n = labels.len();
        let dim = 1usize << n;
        let mut flip = 0usize;
        for (q, &p) in labels.iter().enumerate() {
            if p == 1 || p == 2 {
                flip |= 1 << (n - 1 - q);
            }
        }
        let phase = (0..dim)
            .map(|c| {
                let mut ph = ONE;
                for (q, &p) in labels.iter().enumerate() {
                    let bit = (c >> (n - 1 - q)) & 1;
                    ph *= match (p, bit) {
                        (0, _) | (1, _) => ONE,
                        (2, 0) => C64::new(0.0, 1.0),
                        (2, _) => C64::new(0.0, -1.0),
                        (3, 0) => ONE,
                        _ => -ONE,
                    };
                }
                ph
            })
            .collect();
        Self { flip, phase }
    }

    /// `P M P†` for a matrix of matching dimension.
    pub fn conjugate(&self, m: &CMatrix) -> CMatrix {
        let d = self.phase.len();
        let mut out = CMatrix::zeros(d, d);
        for c in 0..d {
            for r in 0..d {
                out[(r ^ self.flip, c ^ self.flip)] = self.phase[r] * m[(r, c)] * self.phase[c].conj();
            }
        }
        out
    }
}

/// Superoperator `P̄ ⊗ P` of a Pauli string; its entries are real.
pub fn superop(labels: &[u8]) -> CMatrix {
    unitary_superop(&string_matrix(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip_and_order() {
        assert_eq!(index_to_labels(0b0110, 2), vec![1, 2]);
        assert_eq!(labels_to_index(&[3, 0]), 12);
        assert_eq!(format_labels(&parse_labels("ixYz").unwrap()), "IXYZ");
        assert!(parse_labels("XQ").is_err());
    }

    #[test]
    fn monomial_matches_dense_conjugation() {
        let m = CMatrix::from_fn(4, 4, |i, j| C64::new(i as f64 + 0.3 * j as f64, j as f64 - 1.0));
        for idx in 0..16 {
            let labels = index_to_labels(idx, 2);
            let p = string_matrix(&labels);
            let dense = &p * &m * p.adjoint();
            assert!((Monomial::new(&labels).conjugate(&m) - dense).norm() < 1e-14);
        }
    }

    #[test]
    fn pauli_superops_are_real() {
        for idx in 0..16 {
            let s = superop(&index_to_labels(idx, 2));
            assert!(s.iter().all(|z| z.im.abs() < 1e-15));
        }
    }

    #[test]
    fn y_is_i_x_z() {
        let i = C64::new(0.0, 1.0);
        let xz = pauli_matrix(1) * pauli_matrix(3);
        assert!((pauli_matrix(2) - xz.map(|z| z * i)).norm() < 1e-15);
    }
}
