//! Stochastic Pauli processes: multi-time Pauli twirls and their MPS form.

mod entropy;
mod models;
mod mps;

pub use entropy::{gqmi, relative_entropy, twirl_rel_entropy, RelativeEntropy};
pub use models::{worked_hamiltonian, WorkedModel};
pub use mps::{
    bond_ranks, build_spp_mps, hermitian_basis, reconstruct_twirled_mpo, sample_trajectories, trajectory_weight,
    MpsSite, SppMps, SppMpsJson,
};

use crate::error::{Error, Result};
use crate::pauli::{index_to_labels, qubit_count, superop, Monomial};
use crate::process::{ChoiOperator, ProcessTensorMpo};
use crate::tensor::{ComplexTensor, C64};

/// Pauli tensor `P[α, β, x] = S_x[β, α]` on `n` qubits, with `S_x = P̄_x ⊗ P_x`.
pub fn pauli_tensor(n: usize) -> ComplexTensor {
    let a = 1usize << (2 * n);
    let mut t = ComplexTensor::zeros(vec![a, a, a]);
    for x in 0..a {
        let s = superop(&index_to_labels(x, n));
        for al in 0..a {
            for be in 0..a {
                t.set(&[al, be, x], s[(be, al)]);
            }
        }
    }
    t
}

/// Group average of `(⊗_j P_j ⊗ P_j) Υ (⊗_j P_j ⊗ P_j)†` over all Pauli strings.
pub fn dense_multi_time_twirl(choi: &ChoiOperator) -> Result<ChoiOperator> {
    let n = qubit_count(choi.d_s)?;
    let k1 = choi.slots + 1;
    let strings = 1usize << (2 * n * k1);
    let mut acc = crate::tensor::CMatrix::zeros(choi.matrix.nrows(), choi.matrix.ncols());
    for s in 0..strings {
        let per_slot = index_to_labels(s, n * k1);
        let mut full = Vec::with_capacity(2 * n * k1);
        for j in 0..k1 {
            let p = &per_slot[j * n..(j + 1) * n];
            full.extend_from_slice(p);
            full.extend_from_slice(p);
        }
        acc += Monomial::new(&full).conjugate(&choi.matrix);
    }
    acc /= C64::new(strings as f64, 0.0);
    Ok(ChoiOperator { matrix: acc, ..choi.clone() })
}

/// Twirl each MPO site by contracting two Pauli tensors onto its system legs.
pub fn twirl_mpo_local(mpo: &ProcessTensorMpo) -> Result<ProcessTensorMpo> {
    let n = qubit_count(mpo.d_s)?;
    let p = pauli_tensor(n);
    let norm = C64::new(1.0 / (1u64 << (2 * n)) as f64, 0.0);
    let sites = mpo
        .sites
        .iter()
        .map(|u| {
            // (μ, μ', β', α, x) after summing α' against P[α, α', x].
            let half = u.contract(&[1], &p, &[1])?;
            // Sum β' against P[β', β, x] and x: free (μ, μ', α, β).
            let full = half.contract(&[2, 4], &p, &[0, 2])?;
            let mut out = full.permute(&[0, 2, 1, 3])?;
            out.data_mut().iter_mut().for_each(|z| *z *= norm);
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProcessTensorMpo { sites, ..mpo.clone() })
}

/// Real part of a tensor after checking the imaginary part is negligible.
pub(crate) fn real_part(values: &[C64], tol: f64) -> Result<Vec<f64>> {
    let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let worst = values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst > tol * scale {
        return Err(Error::InvalidArgument(format!(
            "expected a real tensor, imaginary residue {worst:.3e}"
        )));
    }
    Ok(values.iter().map(|z| z.re).collect())
}
