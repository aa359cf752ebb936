//! Transfer-operator analysis of time-homogeneous SPPs.
//!
//! Bond vectors are rows acting from the left, so `l₁ᵀ T = l₁ᵀ` is the
//! stationary bond state and `T r₁ = r₁` is the trace functional. For a
//! hidden Markov model these are the stationary distribution and the all-ones
//! vector.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::spp::SppMps;
use crate::tensor::{eigen_triples, real_spectrum, RMatrix, RVector, C64};

const DEGENERACY_TOL: f64 = 1e-10;
const FIXED_POINT_IMAG_TOL: f64 = 1e-9;

/// `T = Σ_x A_x`, stored with the leading eigenvalue normalized to 1.
#[derive(Clone, Debug)]
pub struct TransferOperator {
    pub transfer: RMatrix,
    pub kernels: Vec<RMatrix>,
    /// Leading eigenvalue before normalization.
    pub leading: f64,
}

impl TransferOperator {
    pub fn new(kernels: Vec<RMatrix>) -> Result<Self> {
        let d = kernels.first().map(|k| k.nrows()).unwrap_or(0);
        if d == 0 || kernels.iter().any(|k| k.shape() != (d, d)) {
            return Err(Error::ShapeMismatch("kernels must be non-empty and square of equal size".into()));
        }
        let transfer = kernels.iter().fold(RMatrix::zeros(d, d), |acc, k| acc + k);
        let lead = real_spectrum(&transfer)?.eigenvalues[0];
        if lead.re <= 0.0 || lead.im.abs() > DEGENERACY_TOL * lead.norm() {
            return invalid(format!("leading eigenvalue {lead} is not real and positive"));
        }
        let s = 1.0 / lead.re;
        Ok(Self {
            transfer: transfer * s,
            kernels: kernels.into_iter().map(|k| k * s).collect(),
            leading: lead.re,
        })
    }

    /// Per-label matrices of a bulk site `0 < site < k`.
    pub fn from_mps(mps: &SppMps, site: usize) -> Result<Self> {
        if site == 0 || site >= mps.slots() {
            return invalid(format!(
                "site {site} is a boundary site; bulk sites are 1..{}",
                mps.slots()
            ));
        }
        Self::new(mps.sites[site].mats.clone())
    }

    pub fn dim(&self) -> usize {
        self.transfer.nrows()
    }

    pub fn labels(&self) -> usize {
        self.kernels.len()
    }

    /// `E_f = Σ_x f(x) A_x`.
    pub fn emission(&self, f: &[f64]) -> Result<RMatrix> {
        if f.len() != self.labels() {
            return invalid(format!("observable has {} values, expected {}", f.len(), self.labels()));
        }
        Ok(self
            .kernels
            .iter()
            .zip(f)
            .fold(RMatrix::zeros(self.dim(), self.dim()), |acc, (k, &fx)| acc + k * fx))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralSummary {
    /// `[re, im]` pairs normalized so `λ₁ = 1`, by descending magnitude.
    pub eigenvalues: Vec<[f64; 2]>,
    pub lambda_star: f64,
    pub gap: f64,
    /// `None` when the process is non-ergodic.
    pub correlation_length: Option<f64>,
    pub non_ergodic: bool,
    /// All eigenvalues of unit magnitude (within 1e-10).
    pub unit_modulus: Vec<[f64; 2]>,
    /// `‖[T, Tᵀ]‖_F / ‖T‖_F²`; zero for normal `T`.
    pub non_normality: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl SpectralSummary {
    pub fn left_vector(&self) -> RVector {
        RVector::from_vec(self.left.clone())
    }

    pub fn right_vector(&self) -> RVector {
        RVector::from_vec(self.right.clone())
    }
}

fn real_vector(v: &crate::tensor::CVector) -> Result<RVector> {
    let scale = v.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    if v.iter().any(|z| z.im.abs() > FIXED_POINT_IMAG_TOL * scale) {
        return invalid("leading eigenvector is not real");
    }
    Ok(RVector::from_iterator(v.len(), v.iter().map(|z| z.re)))
}

/// `−1/ln λ⋆`, with `λ⋆ = 0` mapped to zero (no memory).
pub fn correlation_length(lambda_star: f64) -> Option<f64> {
    if lambda_star <= 0.0 {
        Some(0.0)
    } else if lambda_star < 1.0 {
        Some(-1.0 / lambda_star.ln())
    } else {
        None
    }
}

pub fn spectral_summary(op: &TransferOperator) -> Result<SpectralSummary> {
    let spec = real_spectrum(&op.transfer)?;
    let lead = spec.eigenvalues[0];
    let vals: Vec<C64> = spec.eigenvalues.iter().map(|v| v / lead).collect();
    let lambda_star = vals.get(1).map(|v| v.norm()).unwrap_or(0.0);
    let unit_modulus: Vec<[f64; 2]> = vals
        .iter()
        .filter(|v| (v.norm() - 1.0).abs() < DEGENERACY_TOL)
        .map(|v| [v.re, v.im])
        .collect();
    let non_ergodic = unit_modulus.len() > 1;
    let t = &op.transfer;
    let comm = t * t.transpose() - t.transpose() * t;
    let tn = t.norm();
    Ok(SpectralSummary {
        eigenvalues: vals.iter().map(|v| [v.re, v.im]).collect(),
        lambda_star,
        gap: 1.0 - lambda_star,
        correlation_length: if non_ergodic { None } else { correlation_length(lambda_star) },
        non_ergodic,
        unit_modulus,
        non_normality: if tn > 0.0 { comm.norm() / (tn * tn) } else { 0.0 },
        left: real_vector(&spec.left)?.iter().copied().collect(),
        right: real_vector(&spec.right)?.iter().copied().collect(),
    })
}

struct Centred {
    left: RVector,
    right: RVector,
}

fn fixed_points(op: &TransferOperator) -> Result<Centred> {
    let s = spectral_summary(op)?;
    if s.non_ergodic {
        return invalid("non-ergodic process: stationary correlations are undefined");
    }
    Ok(Centred { left: s.left_vector(), right: s.right_vector() })
}

fn centred_emission(op: &TransferOperator, fp: &Centred, f: &[f64]) -> Result<RMatrix> {
    let e = op.emission(f)?;
    let mean = fp.left.dot(&(&e * &fp.right));
    Ok(e - &op.transfer * mean)
}

/// Stationary mean `⟨l₁|E_f|r₁⟩`.
pub fn stationary_mean(op: &TransferOperator, f: &[f64]) -> Result<f64> {
    let fp = fixed_points(op)?;
    Ok(fp.left.dot(&(op.emission(f)? * &fp.right)))
}

/// `C(τ) = l₁ᵀ Ẽ_f T^{τ−1} Ẽ_g r₁`; `τ = 1` means adjacent steps.
pub fn covariance(op: &TransferOperator, f: &[f64], g: &[f64], tau: usize) -> Result<f64> {
    Ok(covariance_series(op, f, g, tau)?[tau - 1])
}

/// `C(1), …, C(max_tau)`.
pub fn covariance_series(op: &TransferOperator, f: &[f64], g: &[f64], max_tau: usize) -> Result<Vec<f64>> {
    if max_tau == 0 {
        return invalid("lag must be at least 1");
    }
    let fp = fixed_points(op)?;
    let ef = centred_emission(op, &fp, f)?;
    let eg = centred_emission(op, &fp, g)?;
    let mut row = ef.transpose() * &fp.left;
    let col = eg * &fp.right;
    let mut out = Vec::with_capacity(max_tau);
    for _ in 0..max_tau {
        out.push(row.dot(&col));
        row = op.transfer.transpose() * row;
    }
    Ok(out)
}

/// `C(τ) = Σ_{i≥2} λ_i^{τ−1} ⟨l₁|Ẽ_f|r_i⟩⟨l_i|Ẽ_g|r₁⟩` from the eigentriples.
pub fn spectral_covariance(op: &TransferOperator, f: &[f64], g: &[f64], tau: usize) -> Result<f64> {
    if tau == 0 {
        return invalid("lag must be at least 1");
    }
    let fp = fixed_points(op)?;
    let ef = centred_emission(op, &fp, f)?;
    let eg = centred_emission(op, &fp, g)?;
    let tr = eigen_triples(&op.transfer)?;
    let lf = (ef.transpose() * &fp.left).map(|x| C64::new(x, 0.0));
    let gr = (eg * &fp.right).map(|x| C64::new(x, 0.0));
    let mut total = C64::new(0.0, 0.0);
    for i in 1..tr.values.len() {
        let a = lf.dot(&tr.right.column(i));
        let b = tr.left.row(i).transpose().dot(&gr);
        total += tr.values[i].powi(tau as i32 - 1) * a * b;
    }
    Ok(total.re)
}

/// Connected m-point correlator for observables at strictly increasing times.
pub fn multipoint(op: &TransferOperator, observables: &[(usize, Vec<f64>)]) -> Result<f64> {
    if observables.is_empty() {
        return invalid("need at least one observable");
    }
    if observables.windows(2).any(|w| w[1].0 <= w[0].0) {
        return invalid("observation times must be strictly increasing");
    }
    let fp = fixed_points(op)?;
    let mut row = fp.left.clone();
    for (j, (t, f)) in observables.iter().enumerate() {
        if j > 0 {
            for _ in 0..(t - observables[j - 1].0 - 1) {
                row = op.transfer.transpose() * row;
            }
        }
        row = centred_emission(op, &fp, f)?.transpose() * row;
    }
    Ok(row.dot(&fp.right))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum HmmViolation {
    NegativeEntry { label: usize, row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct HmmCheck {
    pub is_hmm: bool,
    pub violations: Vec<HmmViolation>,
}

/// Entrywise nonnegativity and `Σ_{x,j} (A_x)_{ij} = 1` for every row `i`.
pub fn hmm_check(kernels: &[RMatrix]) -> HmmCheck {
    let mut violations = Vec::new();
    let d = kernels.first().map(|k| k.nrows()).unwrap_or(0);
    for (x, k) in kernels.iter().enumerate() {
        for r in 0..k.nrows() {
            for c in 0..k.ncols() {
                if k[(r, c)] < -1e-12 {
                    violations.push(HmmViolation::NegativeEntry { label: x, row: r, col: c, value: k[(r, c)] });
                }
            }
        }
    }
    for r in 0..d {
        let sum: f64 = kernels.iter().map(|k| k.row(r).sum()).sum();
        if (sum - 1.0).abs() > 1e-10 {
            violations.push(HmmViolation::RowSum { row: r, sum });
        }
    }
    HmmCheck { is_hmm: violations.is_empty(), violations }
}

/// `Pr(x_0, …, x_k) = πᵀ K_{x_0} ⋯ K_{x_k} 1` by forward filtering.
pub fn forward_likelihood(kernels: &[RMatrix], initial: &RVector, sequence: &[usize]) -> f64 {
    let mut alpha = initial.clone();
    for &x in sequence {
        alpha = kernels[x].transpose() * alpha;
    }
    alpha.sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn storm_kernels(a: f64, b: f64, q0: [f64; 4], q1: [f64; 4]) -> Vec<RMatrix> {
        let t = RMatrix::from_row_slice(2, 2, &[1.0 - a, a, b, 1.0 - b]);
        (0..4)
            .map(|x| &t * RMatrix::from_diagonal(&RVector::from_vec(vec![q0[x], q1[x]])))
            .collect()
    }

    const Q0: [f64; 4] = [1.0, 0.0, 0.0, 0.0];
    const Q1: [f64; 4] = [0.97, 0.01, 0.01, 0.01];

    #[test]
    fn storm_summary() {
        let op = TransferOperator::new(storm_kernels(0.1, 0.3, Q0, Q1)).unwrap();
        let s = spectral_summary(&op).unwrap();
        assert!((s.lambda_star - 0.6).abs() < 1e-12);
        assert!((s.gap - 0.4).abs() < 1e-12);
        assert!((s.correlation_length.unwrap() + 1.0 / 0.6f64.ln()).abs() < 1e-10);
        assert!((s.left[0] - 0.75).abs() < 1e-12 && (s.right[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn memoryless_storm_has_no_covariance() {
        let op = TransferOperator::new(storm_kernels(0.5, 0.5, Q0, Q1)).unwrap();
        let f = [0.0, 1.0, 1.0, 1.0];
        let c = covariance_series(&op, &f, &f, 5).unwrap();
        assert!(c.iter().all(|x| x.abs() < 1e-15));
        assert_eq!(spectral_summary(&op).unwrap().correlation_length, Some(0.0));
    }

    #[test]
    fn non_ergodic_is_flagged() {
        let op = TransferOperator::new(vec![RMatrix::identity(2, 2)]).unwrap();
        let s = spectral_summary(&op).unwrap();
        assert!(s.non_ergodic && s.correlation_length.is_none());
        assert_eq!(s.unit_modulus.len(), 2);
        assert!(covariance(&op, &[1.0], &[1.0], 1).is_err());
    }

    #[test]
    fn storm_covariance_closed_form() {
        let (a, b) = (0.05, 0.2);
        let op = TransferOperator::new(storm_kernels(a, b, Q0, Q1)).unwrap();
        let f = [0.0, 1.0, 1.0, 1.0];
        let (p0, p1) = (b / (a + b), a / (a + b));
        let c = covariance_series(&op, &f, &f, 20).unwrap();
        for (i, ci) in c.iter().enumerate() {
            let want = p0 * p1 * 0.03f64.powi(2) * (1.0 - a - b).powi(i as i32 + 1);
            assert!((ci - want).abs() < 1e-15);
            let sp = spectral_covariance(&op, &f, &f, i + 1).unwrap();
            assert!((sp - ci).abs() < 1e-15);
        }
        let two = multipoint(&op, &[(3, f.to_vec()), (7, f.to_vec())]).unwrap();
        assert!((two - c[3]).abs() < 1e-15);
        assert!(multipoint(&op, &[(3, f.to_vec()), (3, f.to_vec())]).is_err());
        let constant = multipoint(&op, &[(0, f.to_vec()), (2, vec![1.0; 4]), (5, f.to_vec())]).unwrap();
        assert!(constant.abs() < 1e-15);
    }

    #[test]
    fn hmm_check_locates_violations() {
        assert!(hmm_check(&storm_kernels(0.1, 0.3, Q0, Q1)).is_hmm);
        let mut k = storm_kernels(0.1, 0.3, Q0, Q1);
        k[2][(1, 0)] -= 0.01;
        let c = hmm_check(&k);
        assert!(!c.is_hmm);
        assert!(c.violations.iter().any(|v| matches!(v, HmmViolation::NegativeEntry { label: 2, row: 1, col: 0, .. })));
        assert!(c.violations.iter().any(|v| matches!(v, HmmViolation::RowSum { row: 1, .. })));
    }

    fn random_stochastic(seed: u64, d: usize) -> RMatrix {
        let mut s = seed.wrapping_add(12345);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            0.05 + (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut m = RMatrix::from_fn(d, d, |_, _| next());
        for r in 0..d {
            let sum = m.row(r).sum();
            m.row_mut(r).scale_mut(1.0 / sum);
        }
        m
    }

    proptest! {
        #[test]
        fn fixed_points_match_power_iteration(seed in 0u64..500) {
            let t = random_stochastic(seed, 5);
            let op = TransferOperator::new(vec![t.clone()]).unwrap();
            let s = spectral_summary(&op).unwrap();
            let mut pi = RVector::from_element(5, 0.2);
            for _ in 0..2000 {
                pi = t.transpose() * pi;
            }
            for i in 0..5 {
                prop_assert!((s.left[i] - pi[i]).abs() < 1e-9);
                prop_assert!((s.right[i] - 1.0).abs() < 1e-9);
            }
            let trace: f64 = s.eigenvalues.iter().map(|v| v[0]).sum();
            prop_assert!((trace - t.trace()).abs() < 1e-10);
        }

        #[test]
        fn spectral_expansion_matches_powers(seed in 0u64..500) {
            let kernels: Vec<RMatrix> = (0..4).map(|x| random_stochastic(seed * 4 + x, 4) * 0.25).collect();
            let op = TransferOperator::new(kernels).unwrap();
            let f = [0.3, -1.0, 2.0, 0.5];
            let g = [1.0, 0.0, -0.5, 0.25];
            let direct = covariance_series(&op, &f, &g, 50).unwrap();
            for tau in [1usize, 2, 7, 20, 50] {
                let sp = spectral_covariance(&op, &f, &g, tau).unwrap();
                prop_assert!((sp - direct[tau - 1]).abs() < 1e-9);
            }
        }
    }
}
