//! Detector error model: independent fault mechanisms mapped to detector-graph edges.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::layout::StabKind;

use super::circuit::{Op, SurfaceCodeCircuit};
use super::frame::{propagate_faults, FaultSite, LANES};

/// Edge between two detectors, or a detector and the boundary (`v = None`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DemEdge {
    pub u: usize,
    pub v: Option<usize>,
    pub p: f64,
    pub observable: bool,
}

impl DemEdge {
    pub fn weight(&self) -> f64 {
        ((1.0 - self.p) / self.p).ln()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DetectorModel {
    pub num_detectors: usize,
    pub detector_kind: Vec<StabKind>,
    /// Stabilizer type whose detectors carry the logical observable.
    pub matched: StabKind,
    pub edges: Vec<DemEdge>,
}

impl DetectorModel {
    pub fn edges_of(&self, kind: StabKind) -> impl Iterator<Item = &DemEdge> {
        self.edges.iter().filter(move |e| self.detector_kind[e.u] == kind)
    }
}

/// Combined probability of an odd number of two independent events.
pub fn combine(p1: f64, p2: f64) -> f64 {
    p1 * (1.0 - p2) + p2 * (1.0 - p1)
}

fn xor_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x < y => {
                out.push(*x);
                i += 1;
            }
            (Some(x), None) => {
                out.push(*x);
                i += 1;
            }
            (_, Some(y)) => {
                out.push(*y);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

type Signature = (Vec<u32>, bool);

/// Signatures of single-qubit X and Z faults at every noise location.
fn basis_signatures(circuit: &SurfaceCodeCircuit, sites: &[FaultSite]) -> BTreeMap<FaultSite, Signature> {
    let mut out = BTreeMap::new();
    for chunk in sites.chunks(LANES) {
        for (site, sig) in chunk.iter().zip(propagate_faults(circuit, chunk)) {
            out.insert(*site, sig);
        }
    }
    out
}

/// One independent fault mechanism: a Pauli on one or two qubits with its probability.
struct Mechanism {
    op: usize,
    paulis: Vec<(usize, u8)>,
    p: f64,
}

fn mechanisms(circuit: &SurfaceCodeCircuit, injected: [f64; 3]) -> Vec<Mechanism> {
    let mut out = Vec::new();
    for (i, op) in circuit.ops.iter().enumerate() {
        match op {
            Op::XError(p, qs) => out.extend(qs.iter().map(|&q| Mechanism { op: i, paulis: vec![(q, 1)], p: *p })),
            Op::ZError(p, qs) => out.extend(qs.iter().map(|&q| Mechanism { op: i, paulis: vec![(q, 3)], p: *p })),
            Op::Depolarize1(p, qs) => {
                for &q in qs {
                    out.extend((1..4).map(|l| Mechanism { op: i, paulis: vec![(q, l)], p: p / 3.0 }));
                }
            }
            Op::Depolarize2(p, pairs) => {
                for &(a, b) in pairs {
                    for w in 1..16u8 {
                        let paulis = [(a, w / 4), (b, w % 4)].into_iter().filter(|&(_, l)| l != 0).collect();
                        out.push(Mechanism { op: i, paulis, p: p / 15.0 });
                    }
                }
            }
            Op::RoundStart(_) => {
                for q in 0..circuit.num_qubits() {
                    for (l, &p) in injected.iter().enumerate() {
                        if p > 0.0 {
                            out.push(Mechanism { op: i, paulis: vec![(q, l as u8 + 1)], p });
                        }
                    }
                }
            }
            _ => {}
        }
    }
    out.retain(|m| m.p > 0.0);
    out
}

/// Build the model from the circuit's baseline noise plus independent per-round
/// per-qubit faults with marginal probabilities `injected` for (X, Y, Z).
pub fn build_detector_model(circuit: &SurfaceCodeCircuit, injected: [f64; 3]) -> Result<DetectorModel> {
    let mechs = mechanisms(circuit, injected);
    let mut sites: Vec<FaultSite> = mechs
        .iter()
        .flat_map(|m| m.paulis.iter().flat_map(move |&(q, _)| [1u8, 3].map(|label| FaultSite { op: m.op, qubit: q, label })))
        .collect();
    sites.sort_unstable();
    sites.dedup();
    let basis = basis_signatures(circuit, &sites);
    let signature = |op: usize, q: usize, l: u8| -> Signature {
        let mut acc: Signature = (Vec::new(), false);
        for (bit, label) in [(l == 1 || l == 2, 1u8), (l == 2 || l == 3, 3u8)] {
            if bit {
                let (d, o) = &basis[&FaultSite { op, qubit: q, label }];
                acc = (xor_sorted(&acc.0, d), acc.1 ^ o);
            }
        }
        acc
    };

    let kinds: Vec<StabKind> = circuit.detectors.iter().map(|d| d.kind).collect();
    let matched = circuit.basis.stab_kind();
    let mut edges: BTreeMap<(usize, Option<usize>, bool), f64> = BTreeMap::new();
    let mut add = |dets: &[u32], obs: bool, p: f64| -> Result<()> {
        let key = match dets {
            [u] => (*u as usize, None, obs),
            [u, v] => (*u as usize, Some(*v as usize), obs),
            _ => return Err(Error::NotMatchable(format!("component flips {} detectors", dets.len()))),
        };
        let e = edges.entry(key).or_insert(0.0);
        *e = combine(*e, p);
        Ok(())
    };
    for m in &mechs {
        let comps: Vec<Signature> = m.paulis.iter().map(|&(q, l)| signature(m.op, q, l)).collect();
        let total = comps.iter().fold((Vec::new(), false), |acc: Signature, c| (xor_sorted(&acc.0, &c.0), acc.1 ^ c.1));
        for kind in [StabKind::X, StabKind::Z] {
            let part = |s: &Signature| -> Signature {
                let dets: Vec<u32> = s.0.iter().copied().filter(|&d| kinds[d as usize] == kind).collect();
                (dets, s.1 && kind == matched)
            };
            let whole = part(&total);
            if whole.0.is_empty() {
                if whole.1 {
                    return Err(Error::NotMatchable(format!("undetectable logical fault at op {}", m.op)));
                }
                continue;
            }
            if whole.0.len() <= 2 {
                add(&whole.0, whole.1, m.p)?;
                continue;
            }
            for c in comps.iter().map(part) {
                if c.0.is_empty() {
                    if c.1 {
                        return Err(Error::NotMatchable(format!("undetectable logical component at op {}", m.op)));
                    }
                    continue;
                }
                add(&c.0, c.1, m.p)?;
            }
        }
    }
    let edges = edges.into_iter().map(|((u, v, observable), p)| DemEdge { u, v, p, observable }).collect();
    Ok(DetectorModel { num_detectors: kinds.len(), detector_kind: kinds, matched, edges })
}

/// Probability that each detector fires under the model's independent edges.
pub fn detector_marginals(model: &DetectorModel) -> Vec<f64> {
    let mut p = vec![0.0; model.num_detectors];
    for e in &model.edges {
        p[e.u] = combine(p[e.u], e.p);
        if let Some(v) = e.v {
            p[v] = combine(p[v], e.p);
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qec::circuit::{apply_baseline_noise, build_memory_circuit, Basis};

    #[test]
    fn noiseless_model_is_empty() {
        let c = build_memory_circuit(3, 3, Basis::Z).unwrap();
        assert!(build_detector_model(&c, [0.0; 3]).unwrap().edges.is_empty());
    }

    #[test]
    fn baseline_model_is_matchable() {
        for d in [3, 5] {
            for basis in [Basis::Z, Basis::X] {
                let c = apply_baseline_noise(&build_memory_circuit(d, d, basis).unwrap(), 0.001).unwrap();
                let m = build_detector_model(&c, [0.0003; 3]).unwrap();
                assert!(m.edges.iter().all(|e| e.p > 0.0 && e.p <= 0.5));
                assert!(m.edges.iter().any(|e| e.observable));
                assert!(m.edges.iter().all(|e| !e.observable || m.detector_kind[e.u] == m.matched));
            }
        }
    }

    #[test]
    fn combination_bounds() {
        let ps = [0.01, 0.003, 0.2];
        let merged = ps.iter().fold(0.0, |a, &p| combine(a, p));
        assert!(merged <= ps.iter().sum::<f64>());
        for (i, pi) in ps.iter().enumerate() {
            let others: f64 = ps.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| 1.0 - p).product();
            assert!(merged >= pi * others);
        }
        assert_eq!(xor_sorted(&[1, 3, 5], &[3, 4]), vec![1, 4, 5]);
    }
}
