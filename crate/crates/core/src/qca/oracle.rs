//! Exact PCA enumeration and a dense density-matrix simulation of the
//! microscopic QCA cycle with an explicitly twirled system interaction.

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};
use crate::pauli::pauli_matrix;
use crate::tensor::{kron, CMatrix, C64, ONE, ZERO};

use super::{Lattice, QcaParams};

/// Joint probability keyed by `[s_1, x_1, s_2, x_2, …]`: bath configuration and
/// emission string after each cycle. Site 0 is the most significant bit (base-4 digit).
pub type TrajectoryDistribution = BTreeMap<Vec<u32>, f64>;

const MAX_SITES: usize = 4;
const MAX_CYCLES: usize = 3;
const PRUNE: f64 = 1e-16;

fn bit(config: usize, site: usize, n: usize) -> u8 {
    ((config >> (n - 1 - site)) & 1) as u8
}

fn check_size(lattice: &Lattice, initial: &[f64], cycles: usize) -> Result<()> {
    if lattice.len() > MAX_SITES || cycles > MAX_CYCLES {
        return Err(Error::TooLarge(format!(
            "oracle limited to {MAX_SITES} sites and {MAX_CYCLES} cycles, got {} and {cycles}",
            lattice.len()
        )));
    }
    if initial.len() != 1 << lattice.len() {
        return invalid("initial distribution must cover every bath configuration");
    }
    Ok(())
}

/// Distribution over independent per-site binary outcomes, as configurations.
fn product_distribution(n: usize, p_one: impl Fn(usize) -> f64) -> Vec<f64> {
    (0..1usize << n)
        .map(|c| (0..n).map(|i| if bit(c, i, n) == 1 { p_one(i) } else { 1.0 - p_one(i) }).product())
        .collect()
}

/// Exhaustive enumeration of the PCA joint distribution.
pub fn exact_pca_distribution(
    params: QcaParams,
    lattice: &Lattice,
    initial: &[f64],
    cycles: usize,
) -> Result<TrajectoryDistribution> {
    params.validate()?;
    check_size(lattice, initial, cycles)?;
    let n = lattice.len();
    let w = params.emission_weights();
    let excited = |c: usize, i: usize| lattice.neighbours[i].iter().filter(|&&j| bit(c, j, n) == 1).count();
    let flip_mask = |c: usize, targets_red: bool| {
        product_distribution(n, |i| {
            if lattice.red[i] == targets_red {
                params.flip_probability(excited(c, i))
            } else {
                0.0
            }
        })
    };
    let mut layer: Vec<(Vec<u32>, usize, f64)> =
        initial.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(c, &p)| (Vec::new(), c, p)).collect();
    for _ in 0..cycles {
        let mut next = Vec::new();
        for (hist, s, p) in layer {
            let storm = product_distribution(n, |i| if bit(s, i, n) == 0 { params.a } else { params.b });
            let mut after = vec![0.0; 1 << n];
            for (m1, &p1) in storm.iter().enumerate() {
                if p1 == 0.0 {
                    continue;
                }
                let t = s ^ m1;
                for (m2, &p2) in flip_mask(t, false).iter().enumerate() {
                    if p2 == 0.0 {
                        continue;
                    }
                    let u = t ^ m2;
                    for (m3, &p3) in flip_mask(u, true).iter().enumerate() {
                        after[u ^ m3] += p1 * p2 * p3;
                    }
                }
            }
            for (s1, &ps) in after.iter().enumerate() {
                if ps == 0.0 {
                    continue;
                }
                let mut emissions = vec![(0u32, ps)];
                for i in 0..n {
                    emissions = emissions
                        .into_iter()
                        .flat_map(|(x, q)| {
                            if bit(s1, i, n) == 0 {
                                vec![(x * 4, q)]
                            } else {
                                (1..4).map(|l| (x * 4 + l, q * w[l as usize - 1])).collect()
                            }
                        })
                        .filter(|(_, q)| *q > 0.0)
                        .collect();
                }
                for (x, q) in emissions {
                    let mut h = hist.clone();
                    h.extend([s1 as u32, x]);
                    next.push((h, s1, p * q));
                }
            }
        }
        layer = next;
    }
    let mut out = TrajectoryDistribution::new();
    for (h, _, p) in layer {
        *out.entry(h).or_insert(0.0) += p;
    }
    Ok(out)
}

pub fn total_variation(p: &TrajectoryDistribution, q: &TrajectoryDistribution) -> f64 {
    let mut tv = 0.0;
    for (k, a) in p {
        tv += (a - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, b) in q {
        if !p.contains_key(k) {
            tv += b.abs();
        }
    }
    tv / 2.0
}

/// Unitarity of both operators and `Tr(V₀ V₁†) = 0`.
pub fn hilbert_schmidt_check(v0: &CMatrix, v1: &CMatrix) -> bool {
    let unitary = |v: &CMatrix| v.shape() == (2, 2) && (v * v.adjoint() - CMatrix::identity(2, 2)).iter().all(|z| z.norm() < 1e-12);
    unitary(v0) && unitary(v1) && (v0 * v1.adjoint()).trace().norm() < 1e-12
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub distribution: TrajectoryDistribution,
    /// Largest off-diagonal bath element after the twirled interaction, over all branches and cycles.
    pub max_offdiag: f64,
    pub hilbert_schmidt_valid: bool,
}

/// Single-qubit linear map given by its action on matrix units `|a⟩⟨b|`.
type LocalMap = [[CMatrix; 2]; 2];

fn unit(a: usize, b: usize) -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(a, b)] = ONE;
    m
}

fn apply_local(rho: &CMatrix, n: usize, site: usize, map: &LocalMap) -> CMatrix {
    let dim = rho.nrows();
    let shift = n - 1 - site;
    let mask = !(1usize << shift);
    let mut out = CMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            let v = rho[(r, c)];
            if v == ZERO {
                continue;
            }
            let (a, b) = ((r >> shift) & 1, (c >> shift) & 1);
            let m = &map[a][b];
            for a2 in 0..2 {
                for b2 in 0..2 {
                    let coef = m[(a2, b2)];
                    if coef != ZERO {
                        out[((r & mask) | (a2 << shift), (c & mask) | (b2 << shift))] += v * coef;
                    }
                }
            }
        }
    }
    out
}

fn local_from_kraus(kraus: &[CMatrix]) -> LocalMap {
    let m = |a, b| kraus.iter().map(|k| k * unit(a, b) * k.adjoint()).fold(CMatrix::zeros(2, 2), |s, x| s + x);
    [[m(0, 0), m(0, 1)], [m(1, 0), m(1, 1)]]
}

fn embed(op: &CMatrix, site: usize, n: usize) -> CMatrix {
    (0..n).fold(CMatrix::identity(1, 1), |acc, i| {
        if i == site {
            kron(&acc, op)
        } else {
            kron(&acc, &CMatrix::identity(2, 2))
        }
    })
}

/// Product of controlled `e^{−iθX}` gates over every edge from a control
/// sublattice (`controls_red`) to its neighbours.
fn half_step_unitary(lattice: &Lattice, theta: f64, controls_red: bool) -> CMatrix {
    let n = lattice.len();
    let dim = 1 << n;
    let p0 = unit(0, 0);
    let p1 = unit(1, 1);
    let rot = CMatrix::identity(2, 2) * C64::new(theta.cos(), 0.0) - pauli_matrix(1) * C64::new(0.0, theta.sin());
    let mut u = CMatrix::identity(dim, dim);
    for i in (0..n).filter(|&i| lattice.red[i] == controls_red) {
        for &j in &lattice.neighbours[i] {
            let gate = embed(&p0, i, n) + embed(&p1, i, n) * embed(&rot, j, n);
            u = gate * u;
        }
    }
    u
}

/// Environment maps `B_x` with `Ũ(ρ_E ⊗ ρ_S) = Σ_x B_x(ρ_E) ⊗ P_x ρ_S P_x`, where
/// `Ũ` is the system-twirled controlled unitary `Π₀ ⊗ V₀ + Π₁ ⊗ V₁`.
fn twirled_env_maps(v0: &CMatrix, v1: &CMatrix) -> [LocalMap; 4] {
    let i2 = CMatrix::identity(2, 2);
    let u = kron(&unit(0, 0), v0) + kron(&unit(1, 1), v1);
    let twirled = |x: &CMatrix| {
        (0..4u8).fold(CMatrix::zeros(4, 4), |acc, p| {
            let pp = kron(&i2, &pauli_matrix(p));
            let up = &pp * &u * &pp;
            acc + &up * x * up.adjoint() * C64::new(0.25, 0.0)
        })
    };
    let ptrace_s = |m: &CMatrix| {
        let mut out = CMatrix::zeros(2, 2);
        for a in 0..2 {
            for b in 0..2 {
                out[(a, b)] = m[(2 * a, 2 * b)] + m[(2 * a + 1, 2 * b + 1)];
            }
        }
        out
    };
    // G_y(ρ) = ½ Tr_S[(I ⊗ P_y) Ũ(ρ ⊗ P_y)] = Σ_x s(x, y) B_x(ρ).
    let g: Vec<LocalMap> = (0..4u8)
        .map(|y| {
            let py = pauli_matrix(y);
            let gy = |a, b| ptrace_s(&(kron(&i2, &py) * twirled(&kron(&unit(a, b), &py)))) * C64::new(0.5, 0.0);
            [[gy(0, 0), gy(0, 1)], [gy(1, 0), gy(1, 1)]]
        })
        .collect();
    let sign = |x: u8, y: u8| if x == 0 || y == 0 || x == y { 1.0 } else { -1.0 };
    std::array::from_fn(|x| {
        let m = |a: usize, b: usize| {
            (0..4u8).fold(CMatrix::zeros(2, 2), |acc, y| acc + &g[y as usize][a][b] * C64::new(0.25 * sign(x as u8, y), 0.0))
        };
        [[m(0, 0), m(0, 1)], [m(1, 0), m(1, 1)]]
    })
}

/// Dense simulation with `V₀ = I`, `V₁ = n⃗·σ⃗`.
pub fn dense_micro_oracle(
    params: QcaParams,
    lattice: &Lattice,
    initial: &[f64],
    cycles: usize,
) -> Result<OracleResult> {
    params.validate()?;
    let v1 = (1..4u8).fold(CMatrix::zeros(2, 2), |acc, p| {
        acc + pauli_matrix(p) * C64::new(params.n_vec[p as usize - 1], 0.0)
    });
    dense_micro_oracle_with(params, lattice, initial, cycles, &CMatrix::identity(2, 2), &v1)
}

/// Dense simulation with arbitrary conditional unitaries; `n_vec` in `params` is ignored.
pub fn dense_micro_oracle_with(
    params: QcaParams,
    lattice: &Lattice,
    initial: &[f64],
    cycles: usize,
    v0: &CMatrix,
    v1: &CMatrix,
) -> Result<OracleResult> {
    check_size(lattice, initial, cycles)?;
    let n = lattice.len();
    let dim = 1usize << n;
    let (a, b) = (params.a, params.b);
    let s = |x: f64| C64::new(x.sqrt(), 0.0);
    let storm = local_from_kraus(&[unit(1, 0) * s(a), unit(0, 0) * s(1.0 - a), unit(0, 1) * s(b), unit(1, 1) * s(1.0 - b)]);
    let q = half_step_unitary(lattice, params.theta, false) * half_step_unitary(lattice, params.theta, true);
    let env_maps = twirled_env_maps(v0, v1);

    let mut max_offdiag: f64 = 0.0;
    let mut layer: Vec<(Vec<u32>, CMatrix)> = initial
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(c, &p)| {
            let mut rho = CMatrix::zeros(dim, dim);
            rho[(c, c)] = C64::new(p, 0.0);
            (Vec::new(), rho)
        })
        .collect();
    for _ in 0..cycles {
        let mut next = Vec::new();
        for (hist, rho) in layer {
            let mut rho = (0..n).fold(rho, |r, i| apply_local(&r, n, i, &storm));
            rho = &q * rho * q.adjoint();
            let mut branches = vec![(0u32, rho)];
            for i in 0..n {
                let mut grown = Vec::new();
                for (x, r) in &branches {
                    for (l, map) in env_maps.iter().enumerate() {
                        let r2 = apply_local(r, n, i, map);
                        if r2.trace().re > PRUNE {
                            grown.push((x * 4 + l as u32, r2));
                        }
                    }
                }
                branches = grown;
            }
            for (x, r) in branches {
                for row in 0..dim {
                    for col in 0..dim {
                        if row != col {
                            max_offdiag = max_offdiag.max(r[(row, col)].norm());
                        }
                    }
                }
                for c in 0..dim {
                    let p = r[(c, c)].re;
                    if p > PRUNE {
                        let mut h = hist.clone();
                        h.extend([c as u32, x]);
                        let mut basis = CMatrix::zeros(dim, dim);
                        basis[(c, c)] = C64::new(p, 0.0);
                        next.push((h, basis));
                    }
                }
            }
        }
        layer = next;
    }
    let mut distribution = TrajectoryDistribution::new();
    for (h, rho) in layer {
        *distribution.entry(h).or_insert(0.0) += rho.trace().re;
    }
    Ok(OracleResult { distribution, max_offdiag, hilbert_schmidt_valid: hilbert_schmidt_check(v0, v1) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qca::Boundary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn zeros_initial(n: usize) -> Vec<f64> {
        let mut v = vec![0.0; 1 << n];
        v[0] = 1.0;
        v
    }

    #[test]
    fn oracle_matches_pca_on_path2() {
        let l = Lattice::path(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let n: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>() - 0.5);
            let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
            let p = QcaParams::new(rng.random(), rng.random(), rng.random::<f64>() * PI, n.map(|x| x / norm)).unwrap();
            let init: Vec<f64> = vec![0.4, 0.1, 0.3, 0.2];
            let exact = exact_pca_distribution(p, &l, &init, 2).unwrap();
            let dense = dense_micro_oracle(p, &l, &init, 2).unwrap();
            assert!(dense.hilbert_schmidt_valid);
            assert!(dense.max_offdiag < 1e-12, "{}", dense.max_offdiag);
            let tv = total_variation(&exact, &dense.distribution);
            assert!(tv < 1e-10, "tv {tv}");
            assert!((exact.values().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn emission_branches() {
        let l = Lattice::path(2).unwrap();
        let p = QcaParams::new(1.0, 0.0, 0.0, [1.0, 0.0, 0.0]).unwrap();
        let d = dense_micro_oracle(p, &l, &zeros_initial(2), 1).unwrap().distribution;
        assert_eq!(d.len(), 1);
        assert!((d[&vec![3, 5]] - 1.0).abs() < 1e-12);
        let p = QcaParams::unbiased(0.0, 0.0, 0.0).unwrap();
        let d = dense_micro_oracle(p, &l, &zeros_initial(2), 2).unwrap().distribution;
        assert!((d[&vec![0, 0, 0, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hilbert_schmidt_examples() {
        let i = CMatrix::identity(2, 2);
        assert!(hilbert_schmidt_check(&i, &pauli_matrix(1)));
        let h = (pauli_matrix(1) + pauli_matrix(3)) * C64::new(0.5f64.sqrt(), 0.0);
        assert!(hilbert_schmidt_check(&i, &h));
        let phase = &i * C64::from_polar(1.0, 0.3);
        assert!(!hilbert_schmidt_check(&i, &phase));
        let l = Lattice::path(2).unwrap();
        let p = QcaParams::unbiased(0.3, 0.2, 0.7).unwrap();
        let r = dense_micro_oracle_with(p, &l, &zeros_initial(2), 2, &i, &phase).unwrap();
        assert!(!r.hilbert_schmidt_valid && r.max_offdiag > 1e-3);
    }

    #[test]
    fn black_flips_factorise() {
        let l = Lattice::rectangular(2, 2, Boundary::Open).unwrap();
        let p = QcaParams::unbiased(0.0, 0.0, 0.3).unwrap();
        // Reds 0 and 3 excited; blacks 1 and 2 each see two excited reds.
        let mut init = vec![0.0; 16];
        init[0b1001] = 1.0;
        let d = exact_pca_distribution(p, &l, &init, 1).unwrap();
        let mut joint = [[0.0; 2]; 2];
        for (k, v) in &d {
            let s = k[0] as usize;
            joint[bit(s, 1, 4) as usize][bit(s, 2, 4) as usize] += v;
        }
        let m1 = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
        let m2 = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
        for x in 0..2 {
            for y in 0..2 {
                assert!((joint[x][y] - m1[x] * m2[y]).abs() < 1e-14);
            }
        }
        assert!((m1[1] - (0.6f64).sin().powi(2)).abs() < 1e-14);
    }

    #[test]
    fn size_cap() {
        let l = Lattice::path(5).unwrap();
        let p = QcaParams::unbiased(0.1, 0.1, 0.1).unwrap();
        assert!(matches!(exact_pca_distribution(p, &l, &zeros_initial(5), 1), Err(Error::TooLarge(_))));
    }
}
