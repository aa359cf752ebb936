//! Stabilizer-tableau (CHP) simulator used as an independent reference for the
//! Pauli-frame sampler. Supports up to 64 qubits.

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::rng::key;

use super::circuit::{Op, SurfaceCodeCircuit};
use super::frame::{sample_batch, LANES};

#[derive(Clone, Debug)]
pub struct Tableau {
    n: usize,
    /// Rows `0..n` destabilizers, `n..2n` stabilizers, `2n` scratch.
    x: Vec<u64>,
    z: Vec<u64>,
    r: Vec<bool>,
}

/// Exponent of `i` contributed when multiplying single-qubit Paulis `(x1,z1)·(x2,z2)`.
fn g(x1: bool, z1: bool, x2: bool, z2: bool) -> i32 {
    match (x1, z1) {
        (false, false) => 0,
        (true, true) => z2 as i32 - x2 as i32,
        (true, false) => (z2 as i32) * (2 * x2 as i32 - 1),
        (false, true) => (x2 as i32) * (1 - 2 * z2 as i32),
    }
}

impl Tableau {
    /// All qubits in `|0⟩`.
    pub fn new(n: usize) -> Self {
        assert!(n <= 64);
        let mut t = Self { n, x: vec![0; 2 * n + 1], z: vec![0; 2 * n + 1], r: vec![false; 2 * n + 1] };
        for i in 0..n {
            t.x[i] = 1 << i;
            t.z[n + i] = 1 << i;
        }
        t
    }

    fn rowsum(&mut self, h: usize, i: usize) {
        let mut sum = 2 * (self.r[h] as i32) + 2 * (self.r[i] as i32);
        for j in 0..self.n {
            let b = 1u64 << j;
            sum += g(self.x[i] & b != 0, self.z[i] & b != 0, self.x[h] & b != 0, self.z[h] & b != 0);
        }
        self.r[h] = sum.rem_euclid(4) == 2;
        self.x[h] ^= self.x[i];
        self.z[h] ^= self.z[i];
    }

    pub fn h(&mut self, q: usize) {
        let b = 1u64 << q;
        for i in 0..2 * self.n {
            let (xb, zb) = (self.x[i] & b != 0, self.z[i] & b != 0);
            self.r[i] ^= xb && zb;
            if xb != zb {
                self.x[i] ^= b;
                self.z[i] ^= b;
            }
        }
    }

    pub fn cx(&mut self, c: usize, t: usize) {
        let (bc, bt) = (1u64 << c, 1u64 << t);
        for i in 0..2 * self.n {
            let (xc, zc) = (self.x[i] & bc != 0, self.z[i] & bc != 0);
            let (xt, zt) = (self.x[i] & bt != 0, self.z[i] & bt != 0);
            self.r[i] ^= xc && zt && (xt == zc);
            if xc {
                self.x[i] ^= bt;
            }
            if zt {
                self.z[i] ^= bc;
            }
        }
    }

    /// Apply the Pauli label (0 = I, 1 = X, 2 = Y, 3 = Z) to qubit `q`.
    pub fn pauli(&mut self, q: usize, label: u8) {
        let b = 1u64 << q;
        for i in 0..2 * self.n {
            let (xb, zb) = (self.x[i] & b != 0, self.z[i] & b != 0);
            // A generator anticommutes with X if it has Z there, with Z if it has X there.
            let flip = match label {
                1 => zb,
                2 => xb != zb,
                3 => xb,
                _ => false,
            };
            self.r[i] ^= flip;
        }
    }

    pub fn measure_z<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> bool {
        let n = self.n;
        let b = 1u64 << q;
        if let Some(p) = (n..2 * n).find(|&i| self.x[i] & b != 0) {
            for i in 0..2 * n {
                if i != p && self.x[i] & b != 0 {
                    self.rowsum(i, p);
                }
            }
            self.x[p - n] = self.x[p];
            self.z[p - n] = self.z[p];
            self.r[p - n] = self.r[p];
            let outcome = rng.random::<bool>();
            self.x[p] = 0;
            self.z[p] = b;
            self.r[p] = outcome;
            outcome
        } else {
            let s = 2 * n;
            self.x[s] = 0;
            self.z[s] = 0;
            self.r[s] = false;
            for i in 0..n {
                if self.x[i] & b != 0 {
                    self.rowsum(s, i + n);
                }
            }
            self.r[s]
        }
    }

    pub fn reset_z<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) {
        if self.measure_z(q, rng) {
            self.pauli(q, 1);
        }
    }
}

/// One shot of the noisy circuit; returns detector values and the observable,
/// computed from raw measurement outcomes.
pub fn sample_shot<R: Rng + ?Sized>(circuit: &SurfaceCodeCircuit, rng: &mut R) -> (Vec<bool>, bool) {
    simulate(circuit, rng, true, &[])
}

/// Noiseless run with the given Paulis `(op, qubit, label)` inserted before op `op`.
pub fn run_with_faults<R: Rng + ?Sized>(
    circuit: &SurfaceCodeCircuit,
    faults: &[(usize, usize, u8)],
    rng: &mut R,
) -> (Vec<bool>, bool) {
    simulate(circuit, rng, false, faults)
}

fn simulate<R: Rng + ?Sized>(
    circuit: &SurfaceCodeCircuit,
    rng: &mut R,
    noisy: bool,
    faults: &[(usize, usize, u8)],
) -> (Vec<bool>, bool) {
    let mut t = Tableau::new(circuit.num_qubits());
    let mut record = Vec::with_capacity(circuit.num_measurements);
    for (i, op) in circuit.ops.iter().enumerate() {
        for &(_, q, l) in faults.iter().filter(|f| f.0 == i) {
            t.pauli(q, l);
        }
        match op {
            Op::ResetZ(qs) => qs.iter().for_each(|&q| t.reset_z(q, rng)),
            Op::ResetX(qs) => qs.iter().for_each(|&q| {
                t.reset_z(q, rng);
                t.h(q);
            }),
            Op::H(qs) => qs.iter().for_each(|&q| t.h(q)),
            Op::Cx(pairs) => pairs.iter().for_each(|&(c, tq)| t.cx(c, tq)),
            Op::MeasureZ(qs) => qs.iter().for_each(|&q| record.push(t.measure_z(q, rng))),
            Op::MeasureX(qs) => qs.iter().for_each(|&q| {
                t.h(q);
                record.push(t.measure_z(q, rng));
                t.h(q);
            }),
            _ if !noisy => {}
            Op::XError(p, qs) | Op::ZError(p, qs) => {
                let label = if matches!(op, Op::XError(..)) { 1 } else { 3 };
                for &q in qs {
                    if rng.random::<f64>() < *p {
                        t.pauli(q, label);
                    }
                }
            }
            Op::Depolarize1(p, qs) => {
                for &q in qs {
                    if rng.random::<f64>() < *p {
                        let l = 1 + rng.random_range(0..3u8);
                        t.pauli(q, l);
                    }
                }
            }
            Op::Depolarize2(p, pairs) => {
                for &(a, b) in pairs {
                    if rng.random::<f64>() < *p {
                        let w = rng.random_range(1..16u8);
                        t.pauli(a, w / 4);
                        t.pauli(b, w % 4);
                    }
                }
            }
            Op::RoundStart(_) => {}
        }
    }
    let parity = |ms: &[usize]| ms.iter().fold(false, |acc, &m| acc ^ record[m]);
    (circuit.detectors.iter().map(|d| parity(&d.measurements)).collect(), parity(&circuit.observable))
}

/// Largest detector count (plus the observable bit) handled by [`exact_outcome_distribution`].
pub const MAX_OUTCOME_BITS: usize = 24;

/// Pack detector bits (detector `i` at bit `i`) and the observable (top bit) into an index.
pub fn outcome_index(detectors: &[bool], observable: bool) -> usize {
    let mut idx = detectors.iter().enumerate().fold(0usize, |acc, (i, &b)| acc | (b as usize) << i);
    idx |= (observable as usize) << detectors.len();
    idx
}

/// Exact joint distribution of detector values and the observable for the
/// circuit's Pauli channels. Each channel branch is propagated through the
/// tableau simulator; channels compose by XOR convolution.
pub fn exact_outcome_distribution(circuit: &SurfaceCodeCircuit) -> Result<Vec<f64>> {
    let bits = circuit.detectors.len() + 1;
    if bits > MAX_OUTCOME_BITS {
        return Err(Error::TooLarge(format!("{bits} outcome bits exceed {MAX_OUTCOME_BITS}")));
    }
    let mut rng = rand::rngs::StdRng::seed_from_u64(0);
    let mut dist = vec![0.0; 1 << bits];
    dist[0] = 1.0;
    let mut scratch = vec![0.0; 1 << bits];
    let mut convolve = |dist: &mut Vec<f64>, branches: &[(f64, Vec<(usize, usize, u8)>)]| {
        scratch.iter_mut().for_each(|v| *v = 0.0);
        for (w, faults) in branches {
            let (d, o) = run_with_faults(circuit, faults, &mut rng);
            let mask = outcome_index(&d, o);
            for (s, &v) in dist.iter().enumerate() {
                scratch[s ^ mask] += w * v;
            }
        }
        std::mem::swap(dist, &mut scratch);
    };
    for (i, op) in circuit.ops.iter().enumerate() {
        match op {
            Op::XError(p, qs) | Op::ZError(p, qs) => {
                let label = if matches!(op, Op::XError(..)) { 1 } else { 3 };
                for &q in qs {
                    convolve(&mut dist, &[(1.0 - p, vec![]), (*p, vec![(i, q, label)])]);
                }
            }
            Op::Depolarize1(p, qs) => {
                for &q in qs {
                    let mut branches = vec![(1.0 - p, vec![])];
                    branches.extend((1..4).map(|l| (p / 3.0, vec![(i, q, l)])));
                    convolve(&mut dist, &branches);
                }
            }
            Op::Depolarize2(p, pairs) => {
                for &(a, b) in pairs {
                    let mut branches = vec![(1.0 - p, vec![])];
                    branches.extend((1..16u8).map(|w| (p / 15.0, vec![(i, a, w / 4), (i, b, w % 4)])));
                    convolve(&mut dist, &branches);
                }
            }
            _ => {}
        }
    }
    Ok(dist)
}

/// Empirical outcome histogram of `shots` frame-simulator shots (rounded up to whole batches).
pub fn frame_outcome_histogram(circuit: &SurfaceCodeCircuit, shots: usize, seed: u64) -> Result<Vec<f64>> {
    let bits = circuit.detectors.len() + 1;
    if bits > MAX_OUTCOME_BITS {
        return Err(Error::TooLarge(format!("{bits} outcome bits exceed {MAX_OUTCOME_BITS}")));
    }
    let batches = shots.div_ceil(LANES);
    let mut counts = vec![0u64; 1 << bits];
    for b in 0..batches {
        let s = sample_batch(circuit, key(&[seed, b as u64]), None);
        for lane in 0..LANES {
            let d: Vec<bool> = s.detectors.iter().map(|w| (w >> lane) & 1 == 1).collect();
            counts[outcome_index(&d, (s.observable >> lane) & 1 == 1)] += 1;
        }
    }
    let total = (batches * LANES) as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

/// Total-variation distance between two distributions on the same index set.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Expected TV between `p` and an `n`-sample empirical estimate of it (normal approximation).
pub fn expected_sampling_tv(p: &[f64], n: usize) -> f64 {
    let c = (2.0 / (std::f64::consts::PI * n as f64)).sqrt();
    0.5 * p.iter().map(|&x| c * (x * (1.0 - x)).sqrt()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qec::circuit::{apply_baseline_noise, build_memory_circuit, Basis};
    use crate::qec::frame::{propagate_faults, FaultSite};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bell_pair_correlations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let mut t = Tableau::new(2);
            t.h(0);
            t.cx(0, 1);
            assert_eq!(t.measure_z(0, &mut rng), t.measure_z(1, &mut rng));
        }
        let mut t = Tableau::new(1);
        t.pauli(0, 2);
        assert!(t.measure_z(0, &mut rng));
        t.h(0);
        t.pauli(0, 3);
        t.h(0);
        assert!(!t.measure_z(0, &mut rng));
    }

    #[test]
    fn noiseless_detectors_are_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for basis in [Basis::Z, Basis::X] {
            let c = build_memory_circuit(3, 2, basis).unwrap();
            for _ in 0..20 {
                let (dets, obs) = sample_shot(&c, &mut rng);
                assert!(dets.iter().all(|&d| !d) && !obs);
            }
        }
    }

    #[test]
    fn exact_distribution_matches_tableau_sampling() {
        let c = apply_baseline_noise(&build_memory_circuit(3, 1, Basis::Z).unwrap(), 0.01).unwrap();
        let exact = exact_outcome_distribution(&c).unwrap();
        assert!((exact.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shots = 4000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut hist = vec![0.0; exact.len()];
        for _ in 0..shots {
            let (d, o) = sample_shot(&c, &mut rng);
            hist[outcome_index(&d, o)] += 1.0 / shots as f64;
        }
        let tv = total_variation(&exact, &hist);
        assert!(tv < 2.0 * expected_sampling_tv(&exact, shots), "tv {tv}");
    }

    #[test]
    fn frame_signatures_agree_with_tableau() {
        let c = build_memory_circuit(3, 2, Basis::X).unwrap();
        let noisy = apply_baseline_noise(&c, 0.001).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sites: Vec<FaultSite> = noisy
            .ops
            .iter()
            .enumerate()
            .filter(|(_, o)| o.is_noise())
            .flat_map(|(i, _)| (0..c.num_qubits()).flat_map(move |q| [1u8, 2, 3].map(|label| FaultSite { op: i, qubit: q, label })))
            .collect();
        for chunk in sites.chunks(LANES) {
            for (f, (dets, obs)) in chunk.iter().zip(propagate_faults(&noisy, chunk)) {
                let (td, to) = run_with_faults(&noisy, &[(f.op, f.qubit, f.label)], &mut rng);
                let fired: Vec<u32> = (0..td.len() as u32).filter(|&i| td[i as usize]).collect();
                assert_eq!((fired, to), (dets, obs), "{f:?}");
            }
        }
    }
}
