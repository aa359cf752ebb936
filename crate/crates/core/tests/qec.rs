use proptest::prelude::*;

use sppkit::qec::{propagate_faults, run_memory, Basis, FaultSite, MemoryConfig, MemoryExperiment, NoiseSource, Op, LANES};
use sppkit::storm::{solve_params, ErrorProfile};

fn experiment(d: usize, basis: Basis) -> MemoryExperiment {
    let source = NoiseSource::Iid { marginals: [1e-3 / 3.0; 3] };
    MemoryExperiment::new(MemoryConfig { d, rounds: d, basis, p: 1e-3, shots: 1, seed: 0, source }).unwrap()
}

/// Detector set and observable flip of every single-qubit Pauli fault at every noise location.
fn single_faults(exp: &MemoryExperiment) -> Vec<(FaultSite, Vec<u32>, bool)> {
    let circuit = &exp.circuit;
    let mut sites = Vec::new();
    for (i, op) in circuit.ops.iter().enumerate() {
        let qubits: Vec<usize> = match op {
            Op::XError(_, q) | Op::ZError(_, q) | Op::Depolarize1(_, q) => q.clone(),
            Op::Depolarize2(_, pairs) => pairs.iter().flat_map(|&(a, b)| [a, b]).collect(),
            Op::RoundStart(_) => (0..circuit.num_qubits()).collect(),
            _ => continue,
        };
        for q in qubits {
            for label in 1..=3 {
                sites.push(FaultSite { op: i, qubit: q, label });
            }
        }
    }
    let mut out = Vec::with_capacity(sites.len());
    for chunk in sites.chunks(LANES) {
        for (site, (dets, flip)) in chunk.iter().zip(propagate_faults(circuit, chunk)) {
            out.push((*site, dets, flip));
        }
    }
    out
}

fn xor(a: &[u32], b: &[u32]) -> Vec<usize> {
    let mut v: Vec<usize> = a.iter().chain(b).map(|&x| x as usize).collect();
    v.sort_unstable();
    let mut out: Vec<usize> = Vec::new();
    for x in v {
        if out.last() == Some(&x) {
            out.pop();
        } else {
            out.push(x);
        }
    }
    out
}

#[test]
fn every_single_fault_is_corrected() {
    for d in [3, 5] {
        for basis in [Basis::Z, Basis::X] {
            let exp = experiment(d, basis);
            let faults = single_faults(&exp);
            assert!(!faults.is_empty());
            for (site, dets, flip) in &faults {
                let fired: Vec<usize> = dets.iter().map(|&x| x as usize).collect();
                let decoded = exp.matcher().decode(&fired);
                assert_eq!(decoded.flip, *flip, "d={d} {basis:?}: fault {site:?} fires {dets:?}");
            }
        }
    }
}

#[test]
fn distance_three_has_an_uncorrectable_pair() {
    let exp = experiment(3, Basis::Z);
    let faults = single_faults(&exp);
    let data: Vec<_> = faults
        .iter()
        .filter(|(s, _, _)| exp.circuit.layout.is_data(s.qubit) && s.label == 1 && matches!(exp.circuit.ops[s.op], Op::RoundStart(0)))
        .collect();
    let fails = data.iter().enumerate().any(|(i, a)| {
        data[i + 1..].iter().any(|b| exp.matcher().decode(&xor(&a.1, &b.1)).flip != (a.2 ^ b.2))
    });
    assert!(fails, "two X errors should defeat a distance-3 code");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn any_two_faults_are_corrected_at_distance_five(i in any::<prop::sample::Index>(), j in any::<prop::sample::Index>()) {
        thread_local! {
            static CASE: (MemoryExperiment, Vec<(FaultSite, Vec<u32>, bool)>) = {
                let exp = experiment(5, Basis::Z);
                let faults = single_faults(&exp);
                (exp, faults)
            };
        }
        CASE.with(|(exp, faults)| {
            let a = &faults[i.index(faults.len())];
            let b = &faults[j.index(faults.len())];
            let decoded = exp.matcher().decode(&xor(&a.1, &b.1));
            prop_assert_eq!(decoded.flip, a.2 ^ b.2, "faults {:?} and {:?}", a.0, b.0);
            Ok(())
        })?;
    }
}

#[test]
fn short_memory_storm_matches_iid() {
    let shots = 200_000;
    let storm = solve_params(1.0, 1e-3, &ErrorProfile::default()).unwrap();
    let run = |source| run_memory(&MemoryConfig { d: 3, rounds: 9, basis: Basis::Z, p: 1e-3, shots, seed: 21, source }).unwrap();
    let s = run(NoiseSource::Storm(storm));
    let m = storm.marginals();
    let i = run(NoiseSource::Iid { marginals: [m[1], m[2], m[3]] });
    let z = (s.p_round - i.p_round) / (s.p_round_stderr.powi(2) + i.p_round_stderr.powi(2)).sqrt();
    assert!(z.abs() < 4.0, "storm {} vs iid {} ({z:.2}σ)", s.p_round, i.p_round);
    assert!((s.injected_fault_rate - i.injected_fault_rate).abs() < 2e-4);
}
