//! Monte Carlo memory experiments: baseline noise plus injected inter-round faults,
//! decoded with the matcher built from the marginalised detector model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qca::{cycle_stream, emission_marginals, Lattice, Pca, QcaParams};
use crate::rng::{key, StreamRng};
use crate::storm::{StormChain, StormParams};

use super::circuit::{apply_baseline_noise, build_memory_circuit, Basis, SurfaceCodeCircuit};
use super::decoder::Matcher;
use super::dem::build_detector_model;
use super::frame::{sample_batch, PauliFrame, LANES};

const TAG_BASELINE: u64 = 0;
const TAG_STORM: u64 = 1;
const TAG_IID: u64 = 2;
const TAG_QCA: u64 = 3;
const TAG_PRIOR: u64 = 4;

/// Source of the Pauli fault composed on every qubit at the start of each round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseSource {
    None,
    /// Independent faults with probabilities for (X, Y, Z).
    Iid { marginals: [f64; 3] },
    /// One storm chain per qubit.
    Storm(StormParams),
    /// QCA bath on the code's own lattice, started all-zeros in every shot.
    /// The decoder prior is estimated from `prior_cycles` bath cycles.
    Qca { params: QcaParams, prior_cycles: usize },
}

impl NoiseSource {
    fn validate(&self) -> Result<()> {
        match self {
            NoiseSource::None => Ok(()),
            NoiseSource::Iid { marginals } => {
                if marginals.iter().any(|&p| !(0.0..=1.0).contains(&p)) || marginals.iter().sum::<f64>() > 1.0 {
                    return invalid(format!("i.i.d. marginals {marginals:?} are not sub-probabilities"));
                }
                Ok(())
            }
            NoiseSource::Storm(p) => p.validate(),
            NoiseSource::Qca { params, .. } => params.validate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryConfig {
    pub d: usize,
    pub rounds: usize,
    pub basis: Basis,
    /// Baseline circuit noise strength.
    pub p: f64,
    pub shots: usize,
    pub seed: u64,
    pub source: NoiseSource,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemoryResult {
    pub d: usize,
    pub rounds: usize,
    pub shots: usize,
    pub failures: u64,
    pub p_shot: f64,
    pub stderr: f64,
    pub p_round: f64,
    pub p_round_stderr: f64,
    /// `p_shot ≥ 1/2`: the per-round rate is pinned at 1/2 and its error is undefined.
    pub saturated: bool,
    pub greedy_shots: u64,
    pub detector_event_fraction: f64,
    pub injected_fault_rate: f64,
    /// Marginals (X, Y, Z) of the injected faults assumed by the decoder.
    pub prior: [f64; 3],
    #[serde(skip)]
    pub detector_counts: Vec<u64>,
}

/// Outcome of one decoded shot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotResult {
    pub detectors: Vec<bool>,
    pub predicted_flip: bool,
    pub logical_flip: bool,
    pub failed: bool,
    pub greedy: bool,
}

/// `p_round = (1 − (1 − 2 p_shot)^{1/N_r}) / 2`, with its delta-method error.
/// Returns `(p_round, stderr, saturated)`.
pub fn p_round(p_shot: f64, stderr: f64, rounds: usize) -> (f64, f64, bool) {
    let n = rounds as f64;
    if p_shot >= 0.5 {
        return (0.5, f64::INFINITY, true);
    }
    let base = 1.0 - 2.0 * p_shot;
    let pr = (1.0 - base.powf(1.0 / n)) / 2.0;
    let deriv = base.powf(1.0 / n - 1.0) / n;
    (pr, deriv * stderr, false)
}

/// Per-batch fault injector; lanes are shots `first_shot + lane`.
enum Injector<'a> {
    None,
    Iid { marginals: [f64; 3], total: f64, stream: u64 },
    Storm(Vec<StormChain>),
    Qca { pca: Pca<'a>, baths: Vec<Vec<u8>>, stream: u64, emissions: Vec<u8> },
}

impl<'a> Injector<'a> {
    fn new(source: &NoiseSource, lattice: Option<&'a Lattice>, qubits: usize, seed: u64, first_shot: u64) -> Result<Self> {
        Ok(match source {
            NoiseSource::None => Injector::None,
            NoiseSource::Iid { marginals } => {
                Injector::Iid { marginals: *marginals, total: marginals.iter().sum(), stream: key(&[seed, TAG_IID]) }
            }
            NoiseSource::Storm(params) => Injector::Storm(
                (0..LANES as u64)
                    .flat_map(|l| (0..qubits as u64).map(move |q| StormChain::new(*params, &[seed, TAG_STORM, first_shot + l, q])))
                    .collect(),
            ),
            NoiseSource::Qca { params, .. } => {
                let lattice = lattice.expect("QCA injection needs a lattice");
                if lattice.len() != qubits {
                    return Err(Error::InvalidArgument(format!(
                        "lattice has {} sites but the circuit has {qubits} qubits",
                        lattice.len()
                    )));
                }
                Injector::Qca {
                    pca: Pca::new(*params, lattice)?,
                    baths: vec![vec![0; qubits]; LANES],
                    stream: key(&[seed, TAG_QCA]),
                    emissions: vec![0; qubits],
                }
            }
        })
    }

    /// Draw this round's faults for lane `lane` (shot `shot`) into `out`.
    fn draw(&mut self, lane: usize, shot: u64, round: usize, out: &mut [u8]) {
        let qubits = out.len();
        match self {
            Injector::None => out.fill(0),
            Injector::Iid { marginals, total, stream } => {
                out.fill(0);
                let mut rng = StreamRng::new(&[*stream, shot, round as u64]);
                let mut pos = rng.geometric(*total);
                while pos < qubits as u64 {
                    let mut u = rng.uniform() * *total;
                    let mut label = 3;
                    for (x, &m) in marginals.iter().enumerate().take(2) {
                        if u < m {
                            label = x as u8 + 1;
                            break;
                        }
                        u -= m;
                    }
                    out[pos as usize] = label;
                    pos = pos.saturating_add(1).saturating_add(rng.geometric(*total));
                }
            }
            Injector::Storm(chains) => {
                for (q, x) in out.iter_mut().enumerate() {
                    *x = chains[lane * qubits + q].step();
                }
            }
            Injector::Qca { pca, baths, stream, emissions } => {
                pca.step(&mut baths[lane], cycle_stream(*stream, shot, round as u64), Some(emissions));
                out.copy_from_slice(emissions);
            }
        }
    }
}

/// Faults injected in one shot, indexed `[round][qubit]`.
pub fn inject_spp_faults(circuit: &SurfaceCodeCircuit, source: &NoiseSource, seed: u64, shot: u64) -> Result<Vec<Vec<u8>>> {
    source.validate()?;
    let qubits = circuit.num_qubits();
    let lattice = qca_lattice(source, circuit)?;
    let lane = (shot % LANES as u64) as usize;
    let mut inj = Injector::new(source, lattice.as_ref(), qubits, seed, shot - lane as u64)?;
    let mut out = vec![vec![0u8; qubits]; circuit.rounds];
    for (r, row) in out.iter_mut().enumerate() {
        inj.draw(lane, shot, r, row);
    }
    Ok(out)
}

fn qca_lattice(source: &NoiseSource, circuit: &SurfaceCodeCircuit) -> Result<Option<Lattice>> {
    match source {
        NoiseSource::Qca { .. } => Ok(Some(Lattice::rotated_surface_code(circuit.distance())?)),
        _ => Ok(None),
    }
}

/// Decoder prior for the injected faults: exact marginals, or an empirical
/// bath average for the QCA.
pub fn source_marginals(source: &NoiseSource, lattice: Option<&Lattice>, seed: u64) -> Result<[f64; 3]> {
    Ok(match source {
        NoiseSource::None => [0.0; 3],
        NoiseSource::Iid { marginals } => *marginals,
        NoiseSource::Storm(p) => {
            let m = p.marginals();
            [m[1], m[2], m[3]]
        }
        NoiseSource::Qca { params, prior_cycles } => {
            let lattice = lattice.ok_or_else(|| Error::InvalidArgument("QCA prior needs a lattice".into()))?;
            emission_marginals(*params, lattice, *prior_cycles, key(&[seed, TAG_PRIOR]))?
        }
    })
}

#[derive(Clone, Debug, Default)]
struct BatchStats {
    failures: u64,
    greedy: u64,
    injected: u64,
    detector_counts: Vec<u64>,
}

/// Everything needed to sample and decode shots of one configuration.
pub struct MemoryExperiment {
    pub config: MemoryConfig,
    pub circuit: SurfaceCodeCircuit,
    pub prior: [f64; 3],
    matcher: Matcher,
    lattice: Option<Lattice>,
}

impl MemoryExperiment {
    pub fn new(config: MemoryConfig) -> Result<Self> {
        if config.shots == 0 {
            return invalid("shot budget must be positive");
        }
        config.source.validate()?;
        let circuit = apply_baseline_noise(&build_memory_circuit(config.d, config.rounds, config.basis)?, config.p)?;
        let lattice = qca_lattice(&config.source, &circuit)?;
        let prior = source_marginals(&config.source, lattice.as_ref(), config.seed)?;
        let model = build_detector_model(&circuit, prior)?;
        let matcher = Matcher::new(&model, circuit.basis.stab_kind());
        Ok(Self { config, circuit, prior, matcher, lattice })
    }

    pub fn matcher(&self) -> &Matcher {
        &self.matcher
    }

    /// Sample and decode the 64 shots of batch `b`; `visit` sees each active lane.
    fn batch(&self, b: usize, mut visit: impl FnMut(usize, &[u64], bool, bool, bool)) -> Result<BatchStats> {
        let c = &self.circuit;
        let qubits = c.num_qubits();
        let first = (b * LANES) as u64;
        let active = (self.config.shots - b * LANES).min(LANES);
        let mut inj = Injector::new(&self.config.source, self.lattice.as_ref(), qubits, self.config.seed, first)?;
        let mut injected = 0u64;
        let mut faults = vec![0u8; qubits];
        let mut hook = |round: usize, frame: &mut PauliFrame| {
            if matches!(inj, Injector::None) {
                return;
            }
            for lane in 0..active {
                inj.draw(lane, first + lane as u64, round, &mut faults);
                for (q, &l) in faults.iter().enumerate() {
                    if l != 0 {
                        frame.apply_label(q, l, 1 << lane);
                        injected += 1;
                    }
                }
            }
        };
        let sample = sample_batch(c, key(&[self.config.seed, TAG_BASELINE, b as u64]), Some(&mut hook));
        let mut stats = BatchStats { injected, detector_counts: vec![0; c.detectors.len()], ..Default::default() };
        let mut fired = Vec::new();
        for lane in 0..active {
            fired.clear();
            for (i, w) in sample.detectors.iter().enumerate() {
                if (w >> lane) & 1 == 1 {
                    fired.push(i);
                    stats.detector_counts[i] += 1;
                }
            }
            let decoded = self.matcher.decode(&fired);
            let flip = (sample.observable >> lane) & 1 == 1;
            let failed = decoded.flip != flip;
            stats.failures += failed as u64;
            stats.greedy += decoded.greedy as u64;
            visit(lane, &sample.detectors, decoded.flip, flip, decoded.greedy);
        }
        Ok(stats)
    }

    /// Shot-level results of the first `count` shots (capped at the configured budget).
    pub fn shots(&self, count: usize) -> Result<Vec<ShotResult>> {
        let count = count.min(self.config.shots);
        let mut out = Vec::with_capacity(count);
        for b in 0..count.div_ceil(LANES) {
            self.batch(b, |lane, dets, predicted, flip, greedy| {
                if b * LANES + lane < count {
                    out.push(ShotResult {
                        detectors: dets.iter().map(|w| (w >> lane) & 1 == 1).collect(),
                        predicted_flip: predicted,
                        logical_flip: flip,
                        failed: predicted != flip,
                        greedy,
                    });
                }
            })?;
        }
        Ok(out)
    }

    pub fn run(&self) -> Result<MemoryResult> {
        let batches = self.config.shots.div_ceil(LANES);
        let parts: Vec<BatchStats> =
            (0..batches).into_par_iter().map(|b| self.batch(b, |_, _, _, _, _| {})).collect::<Result<_>>()?;
        let mut total = BatchStats { detector_counts: vec![0; self.circuit.detectors.len()], ..Default::default() };
        for s in parts {
            total.failures += s.failures;
            total.greedy += s.greedy;
            total.injected += s.injected;
            total.detector_counts.iter_mut().zip(&s.detector_counts).for_each(|(a, b)| *a += b);
        }
        let n = self.config.shots as f64;
        let p_shot = total.failures as f64 / n;
        let stderr = (p_shot * (1.0 - p_shot) / n).sqrt();
        let (pr, pr_err, saturated) = p_round(p_shot, stderr, self.config.rounds);
        let events: u64 = total.detector_counts.iter().sum();
        let qubits = self.circuit.num_qubits() as f64;
        Ok(MemoryResult {
            d: self.config.d,
            rounds: self.config.rounds,
            shots: self.config.shots,
            failures: total.failures,
            p_shot,
            stderr,
            p_round: pr,
            p_round_stderr: pr_err,
            saturated,
            greedy_shots: total.greedy,
            detector_event_fraction: events as f64 / (n * self.circuit.detectors.len().max(1) as f64),
            injected_fault_rate: total.injected as f64 / (n * qubits * self.config.rounds as f64),
            prior: self.prior,
            detector_counts: total.detector_counts,
        })
    }
}

pub fn run_memory(config: &MemoryConfig) -> Result<MemoryResult> {
    MemoryExperiment::new(config.clone())?.run()
}
