//! Process tensors built from system–environment dilations.
//!
//! The joint space is ordered environment ⊗ system. An MPO site tensor has axes
//! `(μ_in, α, μ_out, β)`: environment bond in, system input leg, environment
//! bond out, system output leg, each a fused (bra, ket) index of squared
//! dimension. The bond dimension is `d_E²`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pauli::qubit_count;
use crate::tensor::{
    devectorize, hermiticity_deviation, hermitian_eigen, rft_transform, unitarity_deviation, unitary_superop,
    vectorize, CMatrix, CVector, ComplexTensor, LegGrouping, C64, ONE, ZERO,
};

/// Largest Choi dimension `(d_S²)^{k+1}` accepted by [`mpo_to_choi`].
pub const CHOI_DIM_CAP: usize = 4096;

const UNITARY_TOL: f64 = 1e-10;

/// A system–environment dilation: initial environment state plus one joint
/// unitary per time step.
#[derive(Clone, Debug)]
pub struct SeDilation {
    d_s: usize,
    d_e: usize,
    unitaries: Vec<CMatrix>,
    env_init: CMatrix,
}

impl SeDilation {
    pub fn new(d_s: usize, d_e: usize, unitaries: Vec<CMatrix>, env_init: CMatrix) -> Result<Self> {
        if d_s == 0 || d_e == 0 {
            return invalid("dimensions must be positive");
        }
        if unitaries.is_empty() {
            return invalid("a dilation needs at least one unitary");
        }
        let d = d_s * d_e;
        for (j, u) in unitaries.iter().enumerate() {
            if u.shape() != (d, d) {
                return Err(Error::ShapeMismatch(format!("unitary {j} is {:?}, expected {d}x{d}", u.shape())));
            }
            let dev = unitarity_deviation(u);
            if dev > UNITARY_TOL {
                return Err(Error::NotUnitary(dev));
            }
        }
        if env_init.shape() != (d_e, d_e) {
            return Err(Error::ShapeMismatch(format!(
                "environment state is {:?}, expected {d_e}x{d_e}",
                env_init.shape()
            )));
        }
        let dev = hermiticity_deviation(&env_init);
        if dev > 1e-10 {
            return Err(Error::NotHermitian(dev));
        }
        if (env_init.trace() - ONE).norm() > 1e-10 {
            return invalid("environment state must have unit trace");
        }
        let sym = (&env_init + env_init.adjoint()).scale(0.5);
        if hermitian_eigen(&sym)?.values[0] < -1e-10 {
            return invalid("environment state is not positive semidefinite");
        }
        Ok(Self { d_s, d_e, unitaries, env_init })
    }

    /// The same unitary applied at each of the `k + 1` steps.
    pub fn time_homogeneous(d_s: usize, d_e: usize, u: CMatrix, k: usize, env_init: CMatrix) -> Result<Self> {
        Self::new(d_s, d_e, vec![u; k + 1], env_init)
    }

    /// Independent Haar unitaries and a random mixed environment state.
    pub fn haar_random<R: Rng + ?Sized>(d_s: usize, d_e: usize, k: usize, rng: &mut R) -> Result<Self> {
        let unitaries = (0..=k).map(|_| haar_unitary(d_s * d_e, rng)).collect();
        Self::new(d_s, d_e, unitaries, random_density(d_e, rng))
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn d_e(&self) -> usize {
        self.d_e
    }

    /// Number of intermediate interventions `k`; there are `k + 1` steps.
    pub fn slots(&self) -> usize {
        self.unitaries.len() - 1
    }

    pub fn unitaries(&self) -> &[CMatrix] {
        &self.unitaries
    }

    pub fn env_init(&self) -> &CMatrix {
        &self.env_init
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: DilationJson = serde_json::from_str(text)?;
        raw.into_dilation()
    }

    pub fn to_json(&self) -> Result<String> {
        let flat = |m: &CMatrix| {
            let mut v = Vec::with_capacity(m.len());
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    v.push([m[(i, j)].re, m[(i, j)].im]);
                }
            }
            v
        };
        let raw = DilationJson {
            d_s: self.d_s,
            d_e: self.d_e,
            env_init: flat(&self.env_init),
            unitaries: self.unitaries.iter().map(flat).collect(),
        };
        Ok(serde_json::to_string(&raw)?)
    }
}

/// Serialized dilation; matrices are row-major lists of `[re, im]` pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DilationJson {
    pub d_s: usize,
    pub d_e: usize,
    pub env_init: Vec<[f64; 2]>,
    pub unitaries: Vec<Vec<[f64; 2]>>,
}

impl DilationJson {
    pub fn into_dilation(self) -> Result<SeDilation> {
        let mat = |v: &[[f64; 2]], d: usize| -> Result<CMatrix> {
            if v.len() != d * d {
                return Err(Error::ShapeMismatch(format!("expected {} entries, got {}", d * d, v.len())));
            }
            Ok(CMatrix::from_row_iterator(d, d, v.iter().map(|p| C64::new(p[0], p[1]))))
        };
        let d = self.d_s * self.d_e;
        let unitaries = self.unitaries.iter().map(|u| mat(u, d)).collect::<Result<Vec<_>>>()?;
        SeDilation::new(self.d_s, self.d_e, unitaries, mat(&self.env_init, self.d_e)?)
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Haar-random unitary from the phase-corrected QR of a Ginibre matrix.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| C64::new(gaussian(rng), gaussian(rng)));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        let diag = r[(j, j)];
        let ph = if diag.norm() > 0.0 { diag / diag.norm() } else { ONE };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Random full-rank density matrix `GG†/Tr(GG†)`.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| C64::new(gaussian(rng), gaussian(rng)));
    let m = &g * g.adjoint();
    let t = m.trace();
    m / t
}

/// Matrix-product-operator form of a process tensor.
#[derive(Clone, Debug)]
pub struct ProcessTensorMpo {
    pub d_s: usize,
    pub d_e: usize,
    /// `k + 1` site tensors with axes `(μ_in, α, μ_out, β)`.
    pub sites: Vec<ComplexTensor>,
    /// Vectorized initial environment state (left boundary).
    pub sigma: CVector,
    /// Vectorized identity (right boundary, the trace).
    pub trace: CVector,
}

impl ProcessTensorMpo {
    pub fn bond_dim(&self) -> usize {
        self.d_e * self.d_e
    }

    pub fn slots(&self) -> usize {
        self.sites.len() - 1
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.sites.len() != other.sites.len() {
            return f64::INFINITY;
        }
        let s = self.sites.iter().zip(&other.sites).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max);
        let b1 = (&self.sigma - &other.sigma).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let b2 = (&self.trace - &other.trace).iter().map(|z| z.norm()).fold(0.0, f64::max);
        s.max(b1).max(b2)
    }
}

pub fn build_mpo(dilation: &SeDilation) -> Result<ProcessTensorMpo> {
    let grouping = LegGrouping::square(&[dilation.d_e, dilation.d_s]);
    let sites = dilation
        .unitaries
        .iter()
        .map(|u| rft_transform(&unitary_superop(u), &grouping))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProcessTensorMpo {
        d_s: dilation.d_s,
        d_e: dilation.d_e,
        sites,
        sigma: vectorize(&dilation.env_init),
        trace: vectorize(&CMatrix::identity(dilation.d_e, dilation.d_e)),
    })
}

/// Trace convention of a Choi operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChoiNormalization {
    /// `Tr Υ = d_S^{2(k+1)}` (`4^{n(k+1)}` for `n` qubits).
    PauliTrace,
    /// `Tr Υ = 1`.
    Unit,
}

/// Choi operator on legs ordered `(in_0, out_0, in_1, out_1, …, in_k, out_k)`.
#[derive(Clone, Debug)]
pub struct ChoiOperator {
    pub matrix: CMatrix,
    pub d_s: usize,
    pub slots: usize,
    pub normalization: ChoiNormalization,
}

impl ChoiOperator {
    pub fn trace_target(&self) -> f64 {
        match self.normalization {
            ChoiNormalization::PauliTrace => (self.d_s as f64).powi(2 * (self.slots as i32 + 1)),
            ChoiNormalization::Unit => 1.0,
        }
    }

    pub fn legs(&self) -> usize {
        2 * (self.slots + 1)
    }

    pub fn renormalized(&self, normalization: ChoiNormalization) -> Self {
        let mut out = self.clone();
        out.normalization = normalization;
        let scale = out.trace_target() / self.trace_target();
        out.matrix *= C64::new(scale, 0.0);
        out
    }
}

/// Contract the MPO into its Choi operator (`PauliTrace` normalization).
pub fn mpo_to_choi(mpo: &ProcessTensorMpo) -> Result<ChoiOperator> {
    let k1 = mpo.sites.len();
    let ds = mpo.d_s;
    let a = ds * ds;
    let choi_dim = (a as u128).checked_pow(k1 as u32).unwrap_or(u128::MAX);
    if choi_dim > CHOI_DIM_CAP as u128 {
        return Err(Error::TooLarge(format!(
            "Choi dimension {choi_dim} exceeds the cap of {CHOI_DIM_CAP}"
        )));
    }
    let db = mpo.bond_dim();
    let mut state: Vec<C64> = mpo.sigma.iter().copied().collect();
    let mut prefix = 1usize;
    for (j, site) in mpo.sites.iter().enumerate() {
        let u = site.data();
        let last = j + 1 == k1;
        let out_bond = if last { 1 } else { db };
        let mut next = vec![ZERO; prefix * a * a * out_bond];
        for p in 0..prefix {
            for mu in 0..db {
                let s = state[p * db + mu];
                if s == ZERO {
                    continue;
                }
                for al in 0..a {
                    for mu2 in 0..db {
                        let w = if last { mpo.trace[mu2] } else { ONE };
                        if w == ZERO {
                            continue;
                        }
                        for be in 0..a {
                            let v = u[((mu * a + al) * db + mu2) * a + be];
                            let dst = ((p * a + al) * a + be) * out_bond + if last { 0 } else { mu2 };
                            next[dst] += s * w * v;
                        }
                    }
                }
            }
        }
        state = next;
        prefix *= a * a;
    }
    let d = choi_dim as usize;
    let mut matrix = CMatrix::zeros(d, d);
    let scale = C64::new((ds as f64).powi(k1 as i32), 0.0);
    let mut digs = vec![0usize; 2 * k1];
    for (idx, &v) in state.iter().enumerate() {
        let mut x = idx;
        for l in (0..2 * k1).rev() {
            digs[l] = x % a;
            x /= a;
        }
        let (mut row, mut col) = (0usize, 0usize);
        for &g in &digs {
            row = row * ds + g % ds;
            col = col * ds + g / ds;
        }
        matrix[(row, col)] = v * scale;
    }
    Ok(ChoiOperator { matrix, d_s: ds, slots: k1 - 1, normalization: ChoiNormalization::PauliTrace })
}

/// Output state after feeding `rho_in` and applying one instrument
/// superoperator between consecutive steps (`k` instruments in total).
pub fn apply_instruments(mpo: &ProcessTensorMpo, rho_in: &CMatrix, instruments: &[CMatrix]) -> Result<CMatrix> {
    let ds = mpo.d_s;
    let a = ds * ds;
    let db = mpo.bond_dim();
    if instruments.len() != mpo.slots() {
        return invalid(format!(
            "expected {} instruments, got {}",
            mpo.slots(),
            instruments.len()
        ));
    }
    if rho_in.shape() != (ds, ds) {
        return Err(Error::ShapeMismatch("input state has the wrong dimension".into()));
    }
    for (j, ins) in instruments.iter().enumerate() {
        if ins.shape() != (a, a) {
            return Err(Error::ShapeMismatch(format!("instrument {j} is {:?}", ins.shape())));
        }
        let choi = superop_choi(ins, ds);
        let dev = hermiticity_deviation(&choi);
        if dev > 1e-10 {
            return invalid(format!("instrument {j} is not Hermiticity preserving"));
        }
        if hermitian_eigen(&(&choi + choi.adjoint()).scale(0.5))?.values[0] < -1e-10 {
            return invalid(format!("instrument {j} is not completely positive"));
        }
    }
    let vr = vectorize(rho_in);
    let mut v: Vec<C64> = (0..db * a).map(|i| mpo.sigma[i / a] * vr[i % a]).collect();
    let mut w = vec![ZERO; db * a];
    for (j, site) in mpo.sites.iter().enumerate() {
        let u = site.data();
        w.iter_mut().for_each(|x| *x = ZERO);
        for mu in 0..db {
            for al in 0..a {
                let s = v[mu * a + al];
                if s == ZERO {
                    continue;
                }
                for mu2 in 0..db {
                    for be in 0..a {
                        w[mu2 * a + be] += s * u[((mu * a + al) * db + mu2) * a + be];
                    }
                }
            }
        }
        if j < instruments.len() {
            let ins = &instruments[j];
            for mu2 in 0..db {
                for al in 0..a {
                    v[mu2 * a + al] = (0..a).map(|be| ins[(al, be)] * w[mu2 * a + be]).sum();
                }
            }
        }
    }
    let out: CVector = CVector::from_iterator(a, (0..a).map(|be| (0..db).map(|mu| mpo.trace[mu] * w[mu * a + be]).sum()));
    devectorize(&out, ds, ds)
}

/// Choi matrix `Σ |i⟩⟨j| ⊗ E(|i⟩⟨j|)` of a superoperator.
pub fn superop_choi(superop: &CMatrix, d: usize) -> CMatrix {
    let mut choi = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let mut e = CMatrix::zeros(d, d);
            e[(i, j)] = ONE;
            let out = superop * vectorize(&e);
            for r in 0..d {
                for c in 0..d {
                    choi[(i * d + r, j * d + c)] = out[r + d * c];
                }
            }
        }
    }
    choi
}

/// `Tr(P Υ)` for every Pauli string `P` on `qubits` qubits, indexed base 4.
pub fn pauli_expectations(matrix: &CMatrix, qubits: usize) -> Result<Vec<C64>> {
    let d = 1usize << qubits;
    if matrix.shape() != (d, d) {
        return Err(Error::ShapeMismatch(format!("matrix is {:?}, expected {d}x{d}", matrix.shape())));
    }
    // Layout: bit (m-1-q) of the row index sits at bit (2m-1-q), columns below.
    let m = qubits;
    let mut buf = vec![ZERO; d * d];
    for r in 0..d {
        for c in 0..d {
            buf[(r << m) | c] = matrix[(r, c)];
        }
    }
    let i = C64::new(0.0, 1.0);
    for q in 0..m {
        let rb = 1usize << (2 * m - 1 - q);
        let cb = 1usize << (m - 1 - q);
        for base in 0..d * d {
            if base & (rb | cb) != 0 {
                continue;
            }
            let m00 = buf[base];
            let m01 = buf[base | cb];
            let m10 = buf[base | rb];
            let m11 = buf[base | rb | cb];
            buf[base] = m00 + m11;
            buf[base | cb] = m01 + m10;
            buf[base | rb] = i * m01 - i * m10;
            buf[base | rb | cb] = m00 - m11;
        }
    }
    let mut out = vec![ZERO; d * d];
    for (idx, &v) in buf.iter().enumerate() {
        let mut p = 0usize;
        for q in 0..m {
            let hi = (idx >> (2 * m - 1 - q)) & 1;
            let lo = (idx >> (m - 1 - q)) & 1;
            p = p * 4 + (hi << 1 | lo);
        }
        out[p] = v;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct CausalityReport {
    /// Largest of the constraint and trace violations.
    pub max_violation: f64,
    pub max_constraint_violation: f64,
    pub trace_deviation: f64,
    pub constraints_checked: usize,
}

/// Check the causal (containment) constraints: every Pauli expectation with a
/// non-identity input at slot `j`, identity on the output of slot `j` and on
/// all later legs vanishes, and the trace matches its normalization.
pub fn check_causality(choi: &ChoiOperator) -> Result<CausalityReport> {
    let n = qubit_count(choi.d_s)?;
    let legs = choi.legs();
    let exps = pauli_expectations(&choi.matrix, n * legs)?;
    let leg_size = 1usize << (2 * n);
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    for j in 0..=choi.slots {
        let prefixes = leg_size.pow(2 * j as u32);
        let suffix = leg_size.pow((2 * (choi.slots - j)) as u32);
        for p in 0..prefixes {
            for q in 1..leg_size {
                let idx = ((p * leg_size + q) * leg_size) * suffix;
                worst = worst.max(exps[idx].norm());
                count += 1;
            }
        }
    }
    let trace_deviation = (exps[0] - C64::new(choi.trace_target(), 0.0)).norm();
    Ok(CausalityReport {
        max_violation: worst.max(trace_deviation),
        max_constraint_violation: worst,
        trace_deviation,
        constraints_checked: count,
    })
}

/// Smallest eigenvalue of the Hermitian part of the Choi operator.
pub fn check_positivity(choi: &ChoiOperator) -> Result<f64> {
    let sym = (&choi.matrix + choi.matrix.adjoint()).scale(0.5);
    Ok(hermitian_eigen(&sym)?.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{index_to_labels, string_matrix};
    use crate::tensor::kron;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn swap(d: usize) -> CMatrix {
        CMatrix::from_fn(d * d, d * d, |r, c| {
            if r == (c % d) * d + c / d {
                ONE
            } else {
                ZERO
            }
        })
    }

    fn pure(v: &[C64]) -> CMatrix {
        let k = CVector::from_column_slice(v);
        &k * k.adjoint()
    }

    fn identity_dilation(k: usize) -> SeDilation {
        SeDilation::time_homogeneous(2, 2, CMatrix::identity(4, 4), k, pure(&[ONE, ZERO])).unwrap()
    }

    fn bell_projector() -> CMatrix {
        let mut phi = CVector::zeros(4);
        phi[0] = ONE;
        phi[3] = ONE;
        &phi * phi.adjoint()
    }

    #[test]
    fn identity_dilation_choi() {
        let choi = mpo_to_choi(&build_mpo(&identity_dilation(1)).unwrap()).unwrap();
        assert_eq!(choi.matrix.nrows(), 16);
        assert!((choi.matrix.trace() - C64::new(16.0, 0.0)).norm() < 1e-12);
        // Markovian identity comb: (2|Φ⟩⟨Φ|)⊗(2|Φ⟩⟨Φ|).
        let want = kron(&bell_projector().scale(2.0), &bell_projector().scale(2.0));
        assert!((&choi.matrix - want).norm() < 1e-12);
        let k0 = mpo_to_choi(&build_mpo(&identity_dilation(0)).unwrap()).unwrap();
        assert!((k0.matrix - bell_projector().scale(2.0)).norm() < 1e-12);
    }

    #[test]
    fn swap_instruments() {
        let rho = pure(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let sigma = pure(&[ONE, ZERO]);
        let k0 = SeDilation::time_homogeneous(2, 2, swap(2), 0, sigma.clone()).unwrap();
        let out = apply_instruments(&build_mpo(&k0).unwrap(), &rho, &[]).unwrap();
        assert!((out - &sigma).norm() < 1e-12);
        let k1 = SeDilation::time_homogeneous(2, 2, swap(2), 1, sigma).unwrap();
        let id = CMatrix::identity(4, 4);
        let out = apply_instruments(&build_mpo(&k1).unwrap(), &rho, &[id]).unwrap();
        assert!((out - rho).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let sigma = pure(&[ONE, ZERO]);
        let bad = CMatrix::from_fn(4, 4, |r, c| if r == 0 && c == 1 { ONE } else { ZERO });
        assert!(matches!(
            SeDilation::new(2, 2, vec![bad], sigma.clone()),
            Err(Error::NotUnitary(_))
        ));
        let mpo = build_mpo(&identity_dilation(1)).unwrap();
        let rho = sigma.clone();
        let not_cp = {
            // Transpose map: positive but not completely positive.
            let mut s = CMatrix::zeros(4, 4);
            for i in 0..2 {
                for j in 0..2 {
                    s[(j + 2 * i, i + 2 * j)] = ONE;
                }
            }
            s
        };
        assert!(apply_instruments(&mpo, &rho, &[not_cp]).is_err());
        assert!(apply_instruments(&mpo, &rho, &[]).is_err());
        let big = identity_dilation(6);
        assert!(matches!(mpo_to_choi(&build_mpo(&big).unwrap()), Err(Error::TooLarge(_))));
    }

    #[test]
    fn pauli_expectations_match_direct_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_density(8, &mut rng);
        let fast = pauli_expectations(&m, 3).unwrap();
        for idx in 0..64 {
            let direct = (string_matrix(&index_to_labels(idx, 3)) * &m).trace();
            assert!((fast[idx] - direct).norm() < 1e-13);
        }
    }

    #[test]
    fn random_dilations_are_causal_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for k in 0..3 {
            let dil = SeDilation::haar_random(2, 2, k, &mut rng).unwrap();
            let choi = mpo_to_choi(&build_mpo(&dil).unwrap()).unwrap();
            let rep = check_causality(&choi).unwrap();
            assert!(rep.max_violation < 1e-10, "{rep:?}");
            assert!(check_positivity(&choi).unwrap() > -1e-10);
            let unit = choi.renormalized(ChoiNormalization::Unit);
            assert!(check_causality(&unit).unwrap().max_violation < 1e-12);
        }
    }

    #[test]
    fn broken_causality_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dil = SeDilation::haar_random(2, 2, 1, &mut rng).unwrap();
        let mut choi = mpo_to_choi(&build_mpo(&dil).unwrap()).unwrap();
        // Add a signalling term X on in_1 with identity elsewhere.
        let pert = string_matrix(&[0, 0, 1, 0]).scale(0.01);
        choi.matrix += pert;
        assert!(check_causality(&choi).unwrap().max_constraint_violation > 0.1);
    }

    #[test]
    fn dilation_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dil = SeDilation::haar_random(2, 2, 2, &mut rng).unwrap();
        let back = SeDilation::from_json(&dil.to_json().unwrap()).unwrap();
        assert_eq!(back.slots(), 2);
        for (a, b) in back.unitaries().iter().zip(dil.unitaries()) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(SeDilation::from_json(r#"{"d_s":2,"d_e":2,"env_init":[[1,0]],"unitaries":[]}"#).is_err());
    }
}
