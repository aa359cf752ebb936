//! Rotated surface-code memory circuits with baseline circuit-level noise.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::layout::{RotatedLayout, StabKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    #[default]
    Z,
    X,
}

impl Basis {
    pub fn stab_kind(self) -> StabKind {
        match self {
            Basis::Z => StabKind::Z,
            Basis::X => StabKind::X,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    ResetZ(Vec<usize>),
    ResetX(Vec<usize>),
    H(Vec<usize>),
    /// `(control, target)` pairs.
    Cx(Vec<(usize, usize)>),
    MeasureZ(Vec<usize>),
    MeasureX(Vec<usize>),
    XError(f64, Vec<usize>),
    ZError(f64, Vec<usize>),
    Depolarize1(f64, Vec<usize>),
    Depolarize2(f64, Vec<(usize, usize)>),
    /// Injection point of inter-round faults on every qubit.
    RoundStart(usize),
}

impl Op {
    pub fn is_noise(&self) -> bool {
        matches!(self, Op::XError(..) | Op::ZError(..) | Op::Depolarize1(..) | Op::Depolarize2(..) | Op::RoundStart(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Detector {
    /// Measurement record indices whose parity is deterministic without noise.
    pub measurements: Vec<usize>,
    pub kind: StabKind,
    pub stabilizer: usize,
    pub round: usize,
}

#[derive(Clone, Debug)]
pub struct SurfaceCodeCircuit {
    pub layout: RotatedLayout,
    pub rounds: usize,
    pub basis: Basis,
    pub p: f64,
    pub ops: Vec<Op>,
    pub num_measurements: usize,
    pub detectors: Vec<Detector>,
    pub observable: Vec<usize>,
}

impl SurfaceCodeCircuit {
    pub fn num_qubits(&self) -> usize {
        self.layout.num_qubits()
    }

    pub fn distance(&self) -> usize {
        self.layout.d
    }

    /// Indices of detectors whose stabilizer type matches the memory basis.
    pub fn matched_detectors(&self) -> Vec<usize> {
        let kind = self.basis.stab_kind();
        (0..self.detectors.len()).filter(|&i| self.detectors[i].kind == kind).collect()
    }
}

/// Noiseless memory experiment.
pub fn build_memory_circuit(d: usize, rounds: usize, basis: Basis) -> Result<SurfaceCodeCircuit> {
    build(d, rounds, basis, 0.0)
}

/// The same experiment rebuilt with baseline noise of strength `p`.
pub fn apply_baseline_noise(circuit: &SurfaceCodeCircuit, p: f64) -> Result<SurfaceCodeCircuit> {
    build(circuit.distance(), circuit.rounds, circuit.basis, p)
}

fn build(d: usize, rounds: usize, basis: Basis, p: f64) -> Result<SurfaceCodeCircuit> {
    if !(0.0..0.5).contains(&p) {
        return invalid(format!("baseline noise p = {p} must lie in [0, 0.5)"));
    }
    if rounds == 0 {
        return invalid("need at least one round");
    }
    let layout = RotatedLayout::new(d)?;
    let nd = layout.num_data();
    let data: Vec<usize> = (0..nd).collect();
    let ancillas: Vec<usize> = (nd..layout.num_qubits()).collect();
    let x_ancillas: Vec<usize> = layout.stabilizers_of(StabKind::X).map(|(s, _)| nd + s).collect();

    let mut ops = Vec::new();
    let push_noise = |ops: &mut Vec<Op>, op: Op| {
        if p > 0.0 {
            ops.push(op);
        }
    };
    match basis {
        Basis::Z => {
            ops.push(Op::ResetZ(data.clone()));
            push_noise(&mut ops, Op::XError(p, data.clone()));
        }
        Basis::X => {
            ops.push(Op::ResetX(data.clone()));
            push_noise(&mut ops, Op::ZError(p, data.clone()));
        }
    }

    // Layer order by corner index: X stabilizers TL, TR, BL, BR; Z stabilizers TL, BL, TR, BR.
    let x_order = [0, 1, 2, 3];
    let z_order = [0, 2, 1, 3];
    let layers: Vec<Vec<(usize, usize)>> = (0..4)
        .map(|step| {
            let mut pairs = Vec::new();
            for (s, stab) in layout.stabilizers.iter().enumerate() {
                let a = nd + s;
                let corner = match stab.kind {
                    StabKind::X => x_order[step],
                    StabKind::Z => z_order[step],
                };
                if let Some(q) = stab.corners[corner] {
                    pairs.push(match stab.kind {
                        StabKind::X => (a, q),
                        StabKind::Z => (q, a),
                    });
                }
            }
            pairs
        })
        .collect();

    let ns = layout.stabilizers.len();
    let mut num_measurements = 0;
    let mut detectors = Vec::new();
    let matched = basis.stab_kind();
    for r in 0..rounds {
        ops.push(Op::ResetZ(ancillas.clone()));
        push_noise(&mut ops, Op::XError(p, ancillas.clone()));
        ops.push(Op::RoundStart(r));
        push_noise(&mut ops, Op::Depolarize1(p, data.clone()));
        ops.push(Op::H(x_ancillas.clone()));
        push_noise(&mut ops, Op::Depolarize1(p, x_ancillas.clone()));
        for layer in &layers {
            ops.push(Op::Cx(layer.clone()));
            push_noise(&mut ops, Op::Depolarize2(p, layer.clone()));
        }
        ops.push(Op::H(x_ancillas.clone()));
        push_noise(&mut ops, Op::Depolarize1(p, x_ancillas.clone()));
        push_noise(&mut ops, Op::XError(p, ancillas.clone()));
        ops.push(Op::MeasureZ(ancillas.clone()));
        let base = num_measurements;
        num_measurements += ns;
        for (s, stab) in layout.stabilizers.iter().enumerate() {
            let m = base + s;
            if r == 0 {
                if stab.kind == matched {
                    detectors.push(Detector { measurements: vec![m], kind: stab.kind, stabilizer: s, round: 0 });
                }
            } else {
                detectors.push(Detector { measurements: vec![m - ns, m], kind: stab.kind, stabilizer: s, round: r });
            }
        }
    }
    let last = num_measurements - ns;
    match basis {
        Basis::Z => {
            push_noise(&mut ops, Op::XError(p, data.clone()));
            ops.push(Op::MeasureZ(data.clone()));
        }
        Basis::X => {
            push_noise(&mut ops, Op::ZError(p, data.clone()));
            ops.push(Op::MeasureX(data.clone()));
        }
    }
    let data_base = num_measurements;
    num_measurements += nd;
    for (s, stab) in layout.stabilizers_of(matched) {
        let mut measurements: Vec<usize> = stab.support().map(|q| data_base + q).collect();
        measurements.push(last + s);
        detectors.push(Detector { measurements, kind: stab.kind, stabilizer: s, round: rounds });
    }
    let line = match basis {
        Basis::Z => layout.logical_z(),
        Basis::X => layout.logical_x(),
    };
    let observable = line.iter().map(|&q| data_base + q).collect();
    Ok(SurfaceCodeCircuit { layout, rounds, basis, p, ops, num_measurements, detectors, observable })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detector_counts() {
        for (d, r) in [(3, 1), (3, 3), (5, 4)] {
            for basis in [Basis::Z, Basis::X] {
                let c = build_memory_circuit(d, r, basis).unwrap();
                let half = (d * d - 1) / 2;
                assert_eq!(c.detectors.len(), half * (r + 1) + half * (r - 1));
                assert_eq!(c.matched_detectors().len(), half * (r + 1));
                assert_eq!(c.num_qubits(), 2 * d * d - 1);
                assert!(!c.ops.iter().any(|o| o.is_noise() && !matches!(o, Op::RoundStart(_))));
            }
        }
        assert!(build_memory_circuit(4, 3, Basis::Z).is_err());
    }

    #[test]
    fn cx_layers_touch_each_qubit_once() {
        let c = build_memory_circuit(7, 1, Basis::Z).unwrap();
        for op in &c.ops {
            if let Op::Cx(pairs) = op {
                let mut seen = vec![false; c.num_qubits()];
                for &(a, b) in pairs {
                    assert!(!seen[a] && !seen[b]);
                    seen[a] = true;
                    seen[b] = true;
                }
            }
        }
    }
}
