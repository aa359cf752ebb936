use nalgebra::linalg::QR;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{pauli_tensor, real_part};
use crate::error::{invalid, Error, Result};
use crate::pauli::qubit_count;
use crate::process::{build_mpo, ProcessTensorMpo, SeDilation};
use crate::tensor::{vectorize, CMatrix, CVector, ComplexTensor, RMatrix, RVector, C64};

const REALNESS_TOL: f64 = 1e-10;
const CLAMP_BAND: f64 = 1e-9;
const RANK_TOL: f64 = 1e-10;
const ENUMERATION_CAP: usize = 1 << 24;

/// One MPS site: a real `left × right` matrix per Pauli label.
#[derive(Clone, Debug, PartialEq)]
pub struct MpsSite {
    pub left: usize,
    pub right: usize,
    pub mats: Vec<RMatrix>,
}

impl MpsSite {
    fn transfer(&self) -> RMatrix {
        self.mats.iter().fold(RMatrix::zeros(self.left, self.right), |acc, m| acc + m)
    }
}

/// Trajectory weights as a real MPS.
///
/// Site matrices act on row vectors from the left boundary. They are stored
/// divided by `weight_scale` (`4^n` for dilation-derived processes), so the
/// summed site matrix is a trace-preserving map with leading eigenvalue 1.
#[derive(Clone, Debug)]
pub struct SppMps {
    pub n: usize,
    pub sites: Vec<MpsSite>,
    pub left: RVector,
    pub right: RVector,
    pub weight_scale: f64,
    /// Environment dimension when the bonds are in the Hermitian operator basis.
    pub env_dim: Option<usize>,
}

/// Orthonormal Hermitian basis of `d × d` matrices (generalised Gell-Mann,
/// identity first), with `Tr(G_i G_j) = δ_ij`.
pub fn hermitian_basis(d: usize) -> Vec<CMatrix> {
    let mut out = vec![CMatrix::identity(d, d) / C64::new((d as f64).sqrt(), 0.0)];
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in j + 1..d {
            let mut s = CMatrix::zeros(d, d);
            s[(j, k)] = C64::new(r, 0.0);
            s[(k, j)] = C64::new(r, 0.0);
            out.push(s);
            let mut a = CMatrix::zeros(d, d);
            a[(j, k)] = C64::new(0.0, -r);
            a[(k, j)] = C64::new(0.0, r);
            out.push(a);
        }
    }
    for l in 1..d {
        let c = (1.0 / (l * (l + 1)) as f64).sqrt();
        let mut m = CMatrix::zeros(d, d);
        for i in 0..l {
            m[(i, i)] = C64::new(c, 0.0);
        }
        m[(l, l)] = C64::new(-(l as f64) * c, 0.0);
        out.push(m);
    }
    out
}

/// Columns are the vectorized Hermitian basis elements.
fn gauge(d: usize) -> CMatrix {
    let basis = hermitian_basis(d);
    let mut w = CMatrix::zeros(d * d, d * d);
    for (i, g) in basis.iter().enumerate() {
        w.set_column(i, &vectorize(g));
    }
    w
}

fn to_real_matrix(m: &CMatrix) -> Result<RMatrix> {
    let re = real_part(m.as_slice(), REALNESS_TOL)?;
    Ok(RMatrix::from_column_slice(m.nrows(), m.ncols(), &re))
}

fn to_real_vector(v: &CVector) -> Result<RVector> {
    Ok(RVector::from_vec(real_part(v.as_slice(), REALNESS_TOL)?))
}

pub fn build_spp_mps(dilation: &SeDilation) -> Result<SppMps> {
    let n = qubit_count(dilation.d_s())?;
    let de = dilation.d_e();
    let mpo = build_mpo(dilation)?;
    let p = pauli_tensor(n);
    let labels = 1usize << (2 * n);
    let w = gauge(de);
    let wt = w.transpose();
    let wbar = w.map(|z| z.conj());
    let inv_scale = C64::new(1.0 / labels as f64, 0.0);
    let db = de * de;
    let sites = mpo
        .sites
        .iter()
        .map(|u| {
            // A_x[μ, μ'] = Σ_{αβ} U[μ, α, μ', β] P[α, β, x].
            let a = u.contract(&[1, 3], &p, &[0, 1])?;
            let mats = (0..labels)
                .map(|x| {
                    let m = CMatrix::from_fn(db, db, |r, c| a.get(&[r, c, x]) * inv_scale);
                    to_real_matrix(&(&wt * m * &wbar))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(MpsSite { left: db, right: db, mats })
        })
        .collect::<Result<Vec<_>>>()?;
    let left = to_real_vector(&(w.adjoint() * &mpo.sigma))?;
    let right = to_real_vector(&(&wt * &mpo.trace))?;
    Ok(SppMps { n, sites, left, right, weight_scale: labels as f64, env_dim: Some(de) })
}

impl SppMps {
    /// Hidden-Markov form: kernels `A_x` (one per label), initial distribution,
    /// and `k + 1` time steps.
    pub fn from_hmm(kernels: &[RMatrix], initial: &RVector, steps: usize) -> Result<Self> {
        let n = match kernels.len() {
            1 => 0,
            l if l.is_power_of_two() && l.trailing_zeros() % 2 == 0 => l.trailing_zeros() as usize / 2,
            l => return invalid(format!("{l} kernels is not 4^n")),
        };
        let d = initial.len();
        if steps == 0 || kernels.iter().any(|k| k.shape() != (d, d)) {
            return invalid("kernels must be square with the initial distribution's dimension");
        }
        let site = MpsSite { left: d, right: d, mats: kernels.to_vec() };
        Ok(Self {
            n,
            sites: vec![site; steps],
            left: initial.clone(),
            right: RVector::from_element(d, 1.0),
            weight_scale: 1.0,
            env_dim: None,
        })
    }

    pub fn labels(&self) -> usize {
        1 << (2 * self.n)
    }

    pub fn slots(&self) -> usize {
        self.sites.len() - 1
    }

    pub fn steps(&self) -> usize {
        self.sites.len()
    }

    /// Total weight 𝒩 (equals `Tr Υ` for dilation-derived processes).
    pub fn normalization(&self) -> f64 {
        let mut v = self.left.transpose();
        for s in &self.sites {
            v = v * s.transfer();
        }
        (v * &self.right)[(0, 0)] * self.weight_scale.powi(self.sites.len() as i32)
    }

    /// Site tensors with the boundary vectors absorbed into the end sites.
    pub fn site_tensors(&self) -> Vec<MpsSite> {
        let k1 = self.sites.len();
        let lt = RMatrix::from_row_slice(1, self.left.len(), self.left.as_slice());
        let rt = RMatrix::from_column_slice(self.right.len(), 1, self.right.as_slice());
        self.sites
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let mats: Vec<RMatrix> = s
                    .mats
                    .iter()
                    .map(|m| {
                        let mut m = m.clone();
                        if j == 0 {
                            m = &lt * m;
                        }
                        if j + 1 == k1 {
                            m = m * &rt;
                        }
                        m
                    })
                    .collect();
                let (left, right) = (mats[0].nrows(), mats[0].ncols());
                MpsSite { left, right, mats }
            })
            .collect()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        let mut out = vec![1];
        out.extend(self.sites.iter().take(self.sites.len() - 1).map(|s| s.right));
        out.push(1);
        out
    }

    /// Every trajectory weight, indexed with step 0 as the most significant digit.
    pub fn all_weights(&self) -> Result<Vec<f64>> {
        let l = self.labels();
        let total = (l as u128).checked_pow(self.sites.len() as u32).unwrap_or(u128::MAX);
        if total > ENUMERATION_CAP as u128 {
            return Err(Error::TooLarge(format!("{total} trajectories exceed the enumeration cap")));
        }
        let mut front = vec![self.left.transpose()];
        for s in &self.sites {
            let mut next = Vec::with_capacity(front.len() * l);
            for v in &front {
                for m in &s.mats {
                    next.push(v * m);
                }
            }
            front = next;
        }
        let scale = self.weight_scale.powi(self.sites.len() as i32);
        Ok(front.iter().map(|v| (v * &self.right)[(0, 0)] * scale).collect())
    }

    pub fn to_json(&self) -> SppMpsJson {
        let sites = self.site_tensors();
        SppMpsJson {
            n: self.n,
            k: self.slots(),
            bond_dims: self.bond_dims(),
            site_tensors: sites
                .iter()
                .map(|s| {
                    let mut v = Vec::with_capacity(s.left * s.right * s.mats.len());
                    for l in 0..s.left {
                        for m in &s.mats {
                            for r in 0..s.right {
                                v.push(m[(l, r)]);
                            }
                        }
                    }
                    v
                })
                .collect(),
            weight_scale: self.weight_scale,
        }
    }

    pub fn from_json(j: &SppMpsJson) -> Result<Self> {
        let labels = 1usize << (2 * j.n);
        if j.bond_dims.len() != j.k + 2 || j.site_tensors.len() != j.k + 1 {
            return Err(Error::ShapeMismatch("bond_dims needs k+2 entries and k+1 site tensors".into()));
        }
        if j.bond_dims[0] != 1 || j.bond_dims[j.k + 1] != 1 {
            return invalid("boundary bonds must have dimension 1");
        }
        let sites = j
            .site_tensors
            .iter()
            .enumerate()
            .map(|(s, data)| {
                let (l, r) = (j.bond_dims[s], j.bond_dims[s + 1]);
                if data.len() != l * labels * r {
                    return Err(Error::ShapeMismatch(format!("site {s} has {} entries", data.len())));
                }
                let mats = (0..labels)
                    .map(|x| RMatrix::from_fn(l, r, |a, b| data[(a * labels + x) * r + b]))
                    .collect();
                Ok(MpsSite { left: l, right: r, mats })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n: j.n,
            sites,
            left: RVector::from_element(1, 1.0),
            right: RVector::from_element(1, 1.0),
            weight_scale: j.weight_scale,
            env_dim: None,
        })
    }
}

/// Serialized MPS; site tensors are row-major `(left, label, right)` arrays
/// with the boundary vectors absorbed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SppMpsJson {
    pub n: usize,
    pub k: usize,
    pub bond_dims: Vec<usize>,
    pub site_tensors: Vec<Vec<f64>>,
    #[serde(default = "unit")]
    pub weight_scale: f64,
}

fn unit() -> f64 {
    1.0
}

fn check_trajectory(mps: &SppMps, trajectory: &[usize]) -> Result<()> {
    if trajectory.len() != mps.steps() {
        return invalid(format!(
            "trajectory has {} steps, process has {}",
            trajectory.len(),
            mps.steps()
        ));
    }
    if let Some(&x) = trajectory.iter().find(|&&x| x >= mps.labels()) {
        return invalid(format!("label {x} out of range"));
    }
    Ok(())
}

/// Unnormalized weight `w(x_0, …, x_k)`; divide by [`SppMps::normalization`]
/// for a probability.
pub fn trajectory_weight(mps: &SppMps, trajectory: &[usize]) -> Result<f64> {
    check_trajectory(mps, trajectory)?;
    let mut v = mps.left.transpose();
    for (s, &x) in mps.sites.iter().zip(trajectory) {
        v = v * &s.mats[x];
    }
    Ok((v * &mps.right)[(0, 0)] * mps.weight_scale.powi(mps.sites.len() as i32))
}

/// Exact ancestral sampling using precomputed right environments.
pub fn sample_trajectories<R: Rng + ?Sized>(mps: &SppMps, count: usize, rng: &mut R) -> Result<Vec<Vec<u32>>> {
    let k1 = mps.sites.len();
    // u[j][x] = A_{j,x} · R_{j+1}, where R_{j+1} is the summed right environment.
    let mut right_env = mps.right.clone();
    let mut projections: Vec<Vec<RVector>> = vec![Vec::new(); k1];
    for j in (0..k1).rev() {
        projections[j] = mps.sites[j].mats.iter().map(|m| m * &right_env).collect();
        right_env = mps.sites[j].transfer() * right_env;
    }
    let labels = mps.labels();
    let mut masses = vec![0.0; labels];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v = mps.left.transpose();
        let mut traj = Vec::with_capacity(k1);
        for j in 0..k1 {
            let mut total = 0.0;
            let mut abs_total = 0.0;
            for x in 0..labels {
                masses[x] = (&v * &projections[j][x])[(0, 0)];
                abs_total += masses[x].abs();
            }
            for m in masses.iter_mut() {
                if *m < 0.0 {
                    if *m < -CLAMP_BAND * abs_total {
                        return Err(Error::NegativeMass(*m / abs_total));
                    }
                    *m = 0.0;
                }
                total += *m;
            }
            if total <= 0.0 {
                return Err(Error::NegativeMass(0.0));
            }
            let mut u = rng.random::<f64>() * total;
            let mut pick = labels - 1;
            for (x, &m) in masses.iter().enumerate() {
                if u < m {
                    pick = x;
                    break;
                }
                u -= m;
            }
            while masses[pick] == 0.0 {
                pick -= 1;
            }
            traj.push(pick as u32);
            v = (v * &mps.sites[j].mats[pick]) / masses[pick];
        }
        out.push(traj);
    }
    Ok(out)
}

/// Rebuild the twirled MPO `Ũ = Σ_x A_x ⊗ S_x` from a dilation-derived MPS.
pub fn reconstruct_twirled_mpo(mps: &SppMps) -> Result<ProcessTensorMpo> {
    let de = mps
        .env_dim
        .ok_or_else(|| Error::InvalidArgument("MPS carries no environment basis".into()))?;
    let n = mps.n;
    let ds = 1usize << n;
    let a = ds * ds;
    let db = de * de;
    let w = gauge(de);
    let wt = w.transpose();
    let wbar = w.map(|z| z.conj());
    let p = pauli_tensor(n);
    let sites = mps
        .sites
        .iter()
        .map(|s| {
            let mats: Vec<CMatrix> = s
                .mats
                .iter()
                .map(|m| &wbar * m.map(|x| C64::new(x, 0.0)) * &wt)
                .collect();
            let mut t = ComplexTensor::zeros(vec![db, a, db, a]);
            for mu in 0..db {
                for mu2 in 0..db {
                    for al in 0..a {
                        for be in 0..a {
                            let v: C64 = mats
                                .iter()
                                .enumerate()
                                .map(|(x, m)| m[(mu, mu2)] * p.get(&[al, be, x]))
                                .sum();
                            t.set(&[mu, al, mu2, be], v);
                        }
                    }
                }
            }
            t
        })
        .collect();
    let sigma = &w * mps.left.map(|x| C64::new(x, 0.0));
    let trace = &wbar * mps.right.map(|x| C64::new(x, 0.0));
    Ok(ProcessTensorMpo { d_s: ds, d_e: de, sites, sigma, trace })
}

fn qr_r(m: RMatrix) -> RMatrix {
    QR::new(m).r()
}

/// Numerical Schmidt rank of the weight vector across each internal bond.
pub fn bond_ranks(mps: &SppMps) -> Vec<usize> {
    let sites = mps.site_tensors();
    let k1 = sites.len();
    if k1 < 2 {
        return Vec::new();
    }
    // Left factors R_L[j] with L_j = Q R_L[j] for the cut after site j.
    let mut left_factors = Vec::with_capacity(k1 - 1);
    let mut r = RMatrix::identity(1, 1);
    for s in sites.iter().take(k1 - 1) {
        let blocks: Vec<RMatrix> = s.mats.iter().map(|m| &r * m).collect();
        let rows = blocks[0].nrows();
        let stacked = RMatrix::from_fn(rows * blocks.len(), s.right, |i, c| blocks[i / rows][(i % rows, c)]);
        r = qr_r(stacked);
        left_factors.push(r.clone());
    }
    let mut right_factors = vec![RMatrix::zeros(0, 0); k1 - 1];
    let mut r = RMatrix::identity(1, 1);
    for j in (1..k1).rev() {
        let s = &sites[j];
        let blocks: Vec<RMatrix> = s.mats.iter().map(|m| m * &r).collect();
        let cols = blocks[0].ncols();
        let stacked = RMatrix::from_fn(s.left, cols * blocks.len(), |l, i| blocks[i / cols][(l, i % cols)]);
        r = qr_r(stacked.transpose()).transpose();
        right_factors[j - 1] = r.clone();
    }
    left_factors
        .iter()
        .zip(&right_factors)
        .map(|(l, r)| {
            let sv = (l * r).singular_values();
            let top = sv.iter().copied().fold(0.0, f64::max);
            if top == 0.0 {
                0
            } else {
                sv.iter().filter(|&&s| s > RANK_TOL * top).count()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{mpo_to_choi, SeDilation};
    use crate::spp::twirl_mpo_local;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hermitian_basis_is_orthonormal() {
        for d in 1..5 {
            let b = hermitian_basis(d);
            assert_eq!(b.len(), d * d);
            for (i, g) in b.iter().enumerate() {
                assert!((g - g.adjoint()).norm() < 1e-15);
                for (j, h) in b.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!(((g * h).trace() - C64::new(want, 0.0)).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn weights_sum_to_choi_trace_and_are_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in 0..3 {
            let dil = SeDilation::haar_random(2, 2, k, &mut rng).unwrap();
            let mps = build_spp_mps(&dil).unwrap();
            let w = mps.all_weights().unwrap();
            let total: f64 = w.iter().sum();
            let tr = mpo_to_choi(&build_mpo(&dil).unwrap()).unwrap().matrix.trace().re;
            assert!((total - tr).abs() < 1e-8, "{total} vs {tr}");
            assert!((mps.normalization() - tr).abs() < 1e-8);
            assert!(w.iter().all(|&x| x > -1e-12));
        }
    }

    #[test]
    fn weights_are_diagonal_pauli_components_of_choi() {
        // w(x) = Tr[(⊗ |P⟩⟩⟨⟨P| / d) Υ] for each trajectory.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dil = SeDilation::haar_random(2, 2, 1, &mut rng).unwrap();
        let choi = mpo_to_choi(&build_mpo(&dil).unwrap()).unwrap();
        let mps = build_spp_mps(&dil).unwrap();
        let w = mps.all_weights().unwrap();
        let kets: Vec<CVector> = (0..4)
            .map(|x| vectorize(&crate::pauli::pauli_matrix(x as u8)) / C64::new(2f64.sqrt(), 0.0))
            .collect();
        for x0 in 0..4 {
            for x1 in 0..4 {
                // Legs (in, out) per slot; |P⟩⟩ = vec(P) with in as the slow index.
                let ket = kets[x0].kronecker(&kets[x1]);
                let proj = &ket * ket.adjoint();
                let val = (proj * &choi.matrix).trace();
                assert!((val.re - w[x0 * 4 + x1]).abs() < 1e-10, "{x0}{x1}: {val} vs {}", w[x0 * 4 + x1]);
            }
        }
    }

    #[test]
    fn reconstruction_matches_local_twirl() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dil = SeDilation::haar_random(2, 4, 2, &mut rng).unwrap();
        let local = twirl_mpo_local(&build_mpo(&dil).unwrap()).unwrap();
        let rec = reconstruct_twirled_mpo(&build_spp_mps(&dil).unwrap()).unwrap();
        assert!(local.max_abs_diff(&rec) < 1e-12);
    }

    #[test]
    fn identity_dilation_has_unit_ranks_and_all_identity_support() {
        let mut plus = CMatrix::from_element(2, 2, C64::new(0.5, 0.0));
        plus[(0, 0)] = C64::new(0.5, 0.0);
        let dil = SeDilation::time_homogeneous(2, 2, CMatrix::identity(4, 4), 3, plus).unwrap();
        let mps = build_spp_mps(&dil).unwrap();
        assert_eq!(bond_ranks(&mps), vec![1, 1, 1]);
        let w = mps.all_weights().unwrap();
        let n = mps.normalization();
        assert!((w[0] / n - 1.0).abs() < 1e-12);
        assert!(w[1..].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn haar_ranks_saturate() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dil = SeDilation::haar_random(2, 2, 3, &mut rng).unwrap();
        assert_eq!(bond_ranks(&build_spp_mps(&dil).unwrap()), vec![4, 4, 4]);
    }

    #[test]
    fn json_round_trip_preserves_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dil = SeDilation::haar_random(2, 2, 2, &mut rng).unwrap();
        let mps = build_spp_mps(&dil).unwrap();
        let text = serde_json::to_string(&mps.to_json()).unwrap();
        let back = SppMps::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        let (a, b) = (mps.all_weights().unwrap(), back.all_weights().unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        assert_eq!(back.bond_dims(), vec![1, 4, 4, 1]);
    }

    #[test]
    fn sampling_rejects_genuinely_negative_weights() {
        let k = RMatrix::from_row_slice(1, 1, &[1.0]);
        let neg = RMatrix::from_row_slice(1, 1, &[-0.5]);
        let mps = SppMps::from_hmm(&[k.clone(), neg, k.clone(), k], &RVector::from_element(1, 1.0), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(sample_trajectories(&mps, 10, &mut rng), Err(Error::NegativeMass(_))));
    }

    #[test]
    fn sampled_frequencies_match_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dil = SeDilation::haar_random(2, 2, 1, &mut rng).unwrap();
        let mps = build_spp_mps(&dil).unwrap();
        let probs: Vec<f64> = mps.all_weights().unwrap().iter().map(|w| w / mps.normalization()).collect();
        let count = 50_000;
        let samples = sample_trajectories(&mps, count, &mut rng).unwrap();
        let mut freq = [0usize; 16];
        for s in &samples {
            freq[(s[0] * 4 + s[1]) as usize] += 1;
        }
        for (f, p) in freq.iter().zip(&probs) {
            let sd = (p * (1.0 - p) / count as f64).sqrt();
            assert!((*f as f64 / count as f64 - p).abs() < 5.0 * sd + 1e-12);
        }
    }
}
