use serde::Serialize;

use super::dense_multi_time_twirl;
use crate::error::{invalid, Result};
use crate::process::{ChoiOperator, ChoiNormalization};
use crate::tensor::{hermitian_eigen, kron, partial_trace, CMatrix, C64};

const SUPPORT_TOL: f64 = 1e-12;
const LEAK_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// Quantum relative entropy in nats; divergence is reported explicitly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum RelativeEntropy {
    Finite(f64),
    Infinite,
}

impl RelativeEntropy {
    pub fn value(self) -> f64 {
        match self {
            Self::Finite(v) => v,
            Self::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Self::Infinite)
    }
}

fn unit_trace(m: &CMatrix) -> Result<CMatrix> {
    let t = m.trace();
    if t.re <= 0.0 {
        return invalid("operator has non-positive trace");
    }
    Ok(m / t)
}

/// `S(ρ‖σ) = Tr ρ (ln ρ − ln σ)` after normalizing both arguments to unit trace.
pub fn relative_entropy(rho: &CMatrix, sigma: &CMatrix) -> Result<RelativeEntropy> {
    let rho = unit_trace(rho)?;
    let sigma = unit_trace(sigma)?;
    let er = hermitian_eigen(&((&rho + rho.adjoint()) * C64::new(0.5, 0.0)))?;
    let es = hermitian_eigen(&((&sigma + sigma.adjoint()) * C64::new(0.5, 0.0)))?;
    if er.values[0] < -PSD_TOL || es.values[0] < -PSD_TOL {
        return invalid("relative entropy needs positive semidefinite arguments");
    }
    let neg_entropy: f64 = er.values.iter().filter(|&&l| l > 0.0).map(|&l| l * l.ln()).sum();
    let mut cross = 0.0;
    for (i, &s) in es.values.iter().enumerate() {
        let v = es.vectors.column(i);
        let c = (v.adjoint() * &rho * v)[(0, 0)].re;
        if s <= SUPPORT_TOL {
            if c > LEAK_TOL {
                return Ok(RelativeEntropy::Infinite);
            }
            continue;
        }
        cross += c * s.ln();
    }
    let d = neg_entropy - cross;
    Ok(RelativeEntropy::Finite(if d < 0.0 && d > -LEAK_TOL { 0.0 } else { d }))
}

/// Product of the single-time marginals of a Choi operator.
pub fn markov_product(choi: &ChoiOperator) -> Result<CMatrix> {
    let legs = choi.legs();
    let dims = vec![choi.d_s; legs];
    let mut out = CMatrix::identity(1, 1);
    for j in 0..=choi.slots {
        let traced: Vec<usize> = (0..legs).filter(|&l| l / 2 != j).collect();
        out = kron(&out, &partial_trace(&choi.matrix, &dims, &traced)?);
    }
    Ok(out)
}

/// Generalised quantum mutual information `S(Υ ‖ ⊗_j Υ_j)`.
pub fn gqmi(choi: &ChoiOperator) -> Result<RelativeEntropy> {
    let unit = choi.renormalized(ChoiNormalization::Unit);
    relative_entropy(&unit.matrix, &markov_product(&unit)?)
}

/// `S(Υ ‖ 𝒯(Υ))`: the non-Pauli structure removed by the multi-time twirl.
pub fn twirl_rel_entropy(choi: &ChoiOperator) -> Result<RelativeEntropy> {
    let unit = choi.renormalized(ChoiNormalization::Unit);
    let twirled = dense_multi_time_twirl(&unit)?;
    relative_entropy(&unit.matrix, &twirled.matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{build_mpo, mpo_to_choi, SeDilation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&crate::tensor::CVector::from_iterator(
            v.len(),
            v.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }

    #[test]
    fn classical_kl_divergence() {
        let p: [f64; 3] = [0.5, 0.25, 0.25];
        let q: [f64; 3] = [0.25, 0.25, 0.5];
        let want: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum();
        let got = relative_entropy(&diag(&p), &diag(&q)).unwrap().value();
        assert!((got - want).abs() < 1e-14);
        assert_eq!(relative_entropy(&diag(&[0.5, 0.5]), &diag(&[1.0, 0.0])).unwrap(), RelativeEntropy::Infinite);
        assert_eq!(relative_entropy(&diag(&[1.0, 0.0]), &diag(&[0.5, 0.5])).unwrap().value(), 2f64.ln());
        assert!(relative_entropy(&diag(&[1.5, -0.5]), &diag(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn markovian_process_has_zero_gqmi() {
        // Fresh environment at each step: the swap with a reset environment.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let dil = SeDilation::haar_random(2, 1, 2, &mut rng).unwrap();
        let choi = mpo_to_choi(&build_mpo(&dil).unwrap()).unwrap();
        assert!(gqmi(&choi).unwrap().value().abs() < 1e-10);
    }
}
