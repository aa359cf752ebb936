use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pauli::pauli_matrix;
use crate::process::SeDilation;
use crate::tensor::{expm_hermitian, kron, CMatrix, C64};

/// Single-qubit system coupled to a single-qubit environment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkedModel {
    /// `H = -θ/2 (XX + YY + ZZ)`.
    Heisenberg,
    /// `H = -θ/2 (X_S ⊗ I_E − X_S ⊗ Z_E)`: an X rotation controlled by the environment.
    Crx,
    /// `H = H_heisenberg(π/2) − θ (X + Y + Z)_S ⊗ I_E`.
    HeisenbergField,
}

impl FromStr for WorkedModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heisenberg" => Ok(Self::Heisenberg),
            "crx" => Ok(Self::Crx),
            "heisenberg_field" | "heisenberg-field" => Ok(Self::HeisenbergField),
            other => invalid(format!("unknown model '{other}'")),
        }
    }
}

impl WorkedModel {
    /// Hamiltonian on environment ⊗ system.
    pub fn hamiltonian(self, theta: f64) -> CMatrix {
        let p = |i: u8| pauli_matrix(i);
        let id = CMatrix::identity(2, 2);
        let half = C64::new(-0.5, 0.0);
        let heis = |t: f64| {
            (kron(&p(1), &p(1)) + kron(&p(2), &p(2)) + kron(&p(3), &p(3))) * (half * t)
        };
        match self {
            Self::Heisenberg => heis(theta),
            Self::Crx => (kron(&id, &p(1)) - kron(&p(3), &p(1))) * (half * theta),
            Self::HeisenbergField => {
                let field = kron(&id, &(p(1) + p(2) + p(3)));
                heis(std::f64::consts::FRAC_PI_2) - field * C64::new(theta, 0.0)
            }
        }
    }
}

/// Dilation with `U = exp(-iH(θ))` at each of `k + 1` steps and the
/// environment initialised in `|+⟩`.
pub fn worked_hamiltonian(model: WorkedModel, theta: f64, k: usize) -> Result<SeDilation> {
    let u = expm_hermitian(&model.hamiltonian(theta))?;
    let plus = CMatrix::from_element(2, 2, C64::new(0.5, 0.0));
    SeDilation::time_homogeneous(2, 2, u, k, plus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ONE;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn proportional(a: &CMatrix, b: &CMatrix) -> bool {
        let (i, j) = (0..a.nrows())
            .flat_map(|i| (0..a.ncols()).map(move |j| (i, j)))
            .max_by(|&x, &y| b[x].norm().total_cmp(&b[y].norm()))
            .unwrap();
        let ph = a[(i, j)] / b[(i, j)];
        (ph.norm() - 1.0).abs() < 1e-12 && (a - b * ph).norm() < 1e-12
    }

    #[test]
    fn heisenberg_special_points() {
        let swap = CMatrix::from_fn(4, 4, |r, c| if r == (c % 2) * 2 + c / 2 { ONE } else { C64::new(0.0, 0.0) });
        let d = worked_hamiltonian(WorkedModel::Heisenberg, FRAC_PI_2, 1).unwrap();
        assert!(proportional(&d.unitaries()[0], &swap));
        let d = worked_hamiltonian(WorkedModel::Heisenberg, PI, 1).unwrap();
        assert!(proportional(&d.unitaries()[0], &CMatrix::identity(4, 4)));
    }

    #[test]
    fn crx_is_cnot_up_to_a_phase_on_the_control() {
        let u = worked_hamiltonian(WorkedModel::Crx, FRAC_PI_2, 0).unwrap().unitaries()[0].clone();
        let cnot = {
            let mut m = CMatrix::identity(4, 4);
            m[(2, 2)] = C64::new(0.0, 0.0);
            m[(3, 3)] = C64::new(0.0, 0.0);
            m[(2, 3)] = ONE;
            m[(3, 2)] = ONE;
            m
        };
        let d = &u * cnot.adjoint();
        for r in 0..4 {
            for c in 0..4 {
                if r != c {
                    assert!(d[(r, c)].norm() < 1e-12);
                }
            }
        }
        assert!((d[(0, 0)] - ONE).norm() < 1e-12);
        assert!((d[(3, 3)] - C64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn parses_names() {
        assert_eq!("crx".parse::<WorkedModel>().unwrap(), WorkedModel::Crx);
        assert!("ising".parse::<WorkedModel>().is_err());
    }
}
