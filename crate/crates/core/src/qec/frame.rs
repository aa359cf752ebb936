//! Bit-parallel Pauli-frame simulation: 64 shots (or 64 injected faults) per word.

use crate::rng::StreamRng;

use super::circuit::{Op, SurfaceCodeCircuit};

pub const LANES: usize = 64;

/// X and Z frame components, one word of lanes per qubit.
#[derive(Clone, Debug)]
pub struct PauliFrame {
    pub x: Vec<u64>,
    pub z: Vec<u64>,
}

impl PauliFrame {
    pub fn new(n: usize) -> Self {
        Self { x: vec![0; n], z: vec![0; n] }
    }

    /// XOR a Pauli label (0 = I, 1 = X, 2 = Y, 3 = Z) into `q` on the lanes in `mask`.
    #[inline]
    pub fn apply_label(&mut self, q: usize, label: u8, mask: u64) {
        if label == 1 || label == 2 {
            self.x[q] ^= mask;
        }
        if label == 2 || label == 3 {
            self.z[q] ^= mask;
        }
    }

    #[inline]
    fn h(&mut self, q: usize) {
        std::mem::swap(&mut self.x[q], &mut self.z[q]);
    }

    #[inline]
    fn cx(&mut self, c: usize, t: usize) {
        self.x[t] ^= self.x[c];
        self.z[c] ^= self.z[t];
    }

    #[inline]
    fn reset(&mut self, q: usize) {
        self.x[q] = 0;
        self.z[q] = 0;
    }
}

/// Detector and observable flips relative to the noiseless reference, one word per detector.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSample {
    pub detectors: Vec<u64>,
    pub observable: u64,
}

/// Run the Clifford part of `op` on the frame; measurement flips are appended to `record`.
fn apply_clifford(frame: &mut PauliFrame, op: &Op, record: &mut Vec<u64>) {
    match op {
        Op::ResetZ(qs) | Op::ResetX(qs) => qs.iter().for_each(|&q| frame.reset(q)),
        Op::H(qs) => qs.iter().for_each(|&q| frame.h(q)),
        Op::Cx(pairs) => pairs.iter().for_each(|&(c, t)| frame.cx(c, t)),
        Op::MeasureZ(qs) => record.extend(qs.iter().map(|&q| frame.x[q])),
        Op::MeasureX(qs) => record.extend(qs.iter().map(|&q| frame.z[q])),
        _ => {}
    }
}

fn finish(circuit: &SurfaceCodeCircuit, record: &[u64]) -> FrameSample {
    let parity = |ms: &[usize]| ms.iter().fold(0u64, |acc, &m| acc ^ record[m]);
    FrameSample {
        detectors: circuit.detectors.iter().map(|d| parity(&d.measurements)).collect(),
        observable: parity(&circuit.observable),
    }
}

/// Visit each Bernoulli(p) success over `count` trials; the callback receives the trial index.
fn bernoulli_hits(rng: &mut StreamRng, p: f64, count: usize, mut hit: impl FnMut(usize, &mut StreamRng)) {
    if p <= 0.0 {
        return;
    }
    let mut pos = rng.geometric(p);
    while pos < count as u64 {
        hit(pos as usize, rng);
        pos = pos.saturating_add(1).saturating_add(rng.geometric(p));
    }
}

/// Sample `LANES` shots of the noisy circuit. Baseline noise draws are keyed by
/// `(batch_key, op index)`; `inject` is called at every round start.
pub fn sample_batch(
    circuit: &SurfaceCodeCircuit,
    batch_key: u64,
    mut inject: Option<&mut dyn FnMut(usize, &mut PauliFrame)>,
) -> FrameSample {
    let mut frame = PauliFrame::new(circuit.num_qubits());
    let mut record = Vec::with_capacity(circuit.num_measurements);
    for (i, op) in circuit.ops.iter().enumerate() {
        let rng = || StreamRng::new(&[batch_key, i as u64]);
        match op {
            Op::XError(p, qs) | Op::ZError(p, qs) => {
                let label = if matches!(op, Op::XError(..)) { 1 } else { 3 };
                bernoulli_hits(&mut rng(), *p, qs.len() * LANES, |k, _| {
                    frame.apply_label(qs[k / LANES], label, 1 << (k % LANES));
                });
            }
            Op::Depolarize1(p, qs) => {
                bernoulli_hits(&mut rng(), *p, qs.len() * LANES, |k, r| {
                    let label = 1 + (r.uniform() * 3.0) as u8;
                    frame.apply_label(qs[k / LANES], label.min(3), 1 << (k % LANES));
                });
            }
            Op::Depolarize2(p, pairs) => {
                bernoulli_hits(&mut rng(), *p, pairs.len() * LANES, |k, r| {
                    let which = 1 + ((r.uniform() * 15.0) as u8).min(14);
                    let (a, b) = pairs[k / LANES];
                    let mask = 1 << (k % LANES);
                    frame.apply_label(a, which / 4, mask);
                    frame.apply_label(b, which % 4, mask);
                });
            }
            Op::RoundStart(r) => {
                if let Some(f) = inject.as_mut() {
                    f(*r, &mut frame);
                }
            }
            _ => apply_clifford(&mut frame, op, &mut record),
        }
    }
    finish(circuit, &record)
}

/// A single-qubit Pauli inserted at a noise location (`op` must be a noise op or round start).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FaultSite {
    pub op: usize,
    pub qubit: usize,
    pub label: u8,
}

/// Propagate up to `LANES` single-qubit faults, one per lane; returns detector
/// indices and the observable flip for each fault.
pub fn propagate_faults(circuit: &SurfaceCodeCircuit, faults: &[FaultSite]) -> Vec<(Vec<u32>, bool)> {
    assert!(faults.len() <= LANES);
    let mut frame = PauliFrame::new(circuit.num_qubits());
    let mut record = Vec::with_capacity(circuit.num_measurements);
    let mut next = 0;
    let mut order: Vec<usize> = (0..faults.len()).collect();
    order.sort_by_key(|&l| faults[l].op);
    for (i, op) in circuit.ops.iter().enumerate() {
        while next < order.len() && faults[order[next]].op == i {
            let lane = order[next];
            let f = faults[lane];
            frame.apply_label(f.qubit, f.label, 1 << lane);
            next += 1;
        }
        apply_clifford(&mut frame, op, &mut record);
    }
    let sample = finish(circuit, &record);
    (0..faults.len())
        .map(|lane| {
            let dets = sample
                .detectors
                .iter()
                .enumerate()
                .filter(|(_, w)| (*w >> lane) & 1 == 1)
                .map(|(d, _)| d as u32)
                .collect();
            (dets, (sample.observable >> lane) & 1 == 1)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qec::circuit::{apply_baseline_noise, build_memory_circuit, Basis};

    #[test]
    fn noiseless_has_no_events() {
        for basis in [Basis::Z, Basis::X] {
            let c = build_memory_circuit(3, 3, basis).unwrap();
            for b in 0..16 {
                let s = sample_batch(&c, b, None);
                assert!(s.detectors.iter().all(|&w| w == 0) && s.observable == 0);
            }
        }
    }

    #[test]
    fn single_data_error_fires_adjacent_detectors() {
        let c = build_memory_circuit(3, 3, Basis::Z).unwrap();
        let round_start = c.ops.iter().position(|o| matches!(o, Op::RoundStart(1))).unwrap();
        let faults: Vec<FaultSite> = (0..9).map(|q| FaultSite { op: round_start, qubit: q, label: 1 }).collect();
        for (q, (dets, _)) in propagate_faults(&c, &faults).into_iter().enumerate() {
            let z_neighbours = c
                .layout
                .stabilizers
                .iter()
                .filter(|s| s.kind == crate::layout::StabKind::Z && s.support().any(|d| d == q))
                .count();
            assert_eq!(dets.len(), z_neighbours, "qubit {q}");
            assert!(dets.iter().all(|&d| c.detectors[d as usize].round == 1));
        }
    }

    #[test]
    fn baseline_noise_is_reproducible() {
        let c = apply_baseline_noise(&build_memory_circuit(3, 3, Basis::Z).unwrap(), 0.01).unwrap();
        assert_eq!(sample_batch(&c, 5, None), sample_batch(&c, 5, None));
        assert_ne!(sample_batch(&c, 5, None), sample_batch(&c, 6, None));
    }
}
