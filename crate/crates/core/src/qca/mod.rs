//! QCA bath reduced to a probabilistic cellular automaton (PCA), its
//! statistical-mechanics diagnostics, and a dense quantum oracle for tiny lattices.

mod oracle;

pub use oracle::{
    dense_micro_oracle, dense_micro_oracle_with, exact_pca_distribution, hilbert_schmidt_check, total_variation,
    OracleResult, TrajectoryDistribution,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::layout::RotatedLayout;
use crate::rng::{key, uniform_at};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

/// Bipartite site graph; red sites only neighbour black sites and vice versa.
#[derive(Clone, Debug, Serialize)]
pub struct Lattice {
    pub name: String,
    pub coords: Vec<(i32, i32)>,
    pub red: Vec<bool>,
    pub neighbours: Vec<Vec<usize>>,
}

impl Lattice {
    fn from_edges(name: String, coords: Vec<(i32, i32)>, red: Vec<bool>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbours = vec![Vec::new(); coords.len()];
        for &(u, v) in edges {
            if red[u] == red[v] {
                return invalid(format!("edge ({u}, {v}) joins sites of the same colour"));
            }
            if !neighbours[u].contains(&v) {
                neighbours[u].push(v);
                neighbours[v].push(u);
            }
        }
        neighbours.iter_mut().for_each(|n| n.sort_unstable());
        Ok(Self { name, coords, red, neighbours })
    }

    /// All `2d² − 1` qubits of the rotated surface code; measure qubits are red,
    /// data qubits black, adjacency is the diagonal data–measure coupling graph.
    /// Site indices coincide with [`RotatedLayout`] qubit indices.
    pub fn rotated_surface_code(d: usize) -> Result<Self> {
        let layout = RotatedLayout::new(d)?;
        let n = layout.num_qubits();
        let coords = (0..n).map(|q| layout.coord(q)).collect();
        let red = (0..n).map(|q| !layout.is_data(q)).collect();
        let nd = layout.num_data();
        let edges: Vec<(usize, usize)> = layout
            .stabilizers
            .iter()
            .enumerate()
            .flat_map(|(s, stab)| stab.support().map(move |q| (nd + s, q)))
            .collect();
        Self::from_edges(format!("surface-d{d}"), coords, red, &edges)
    }

    /// `w × h` chequerboard with 4-neighbour adjacency. Periodic wrapping needs
    /// even sides of at least 4 to stay bipartite and simple.
    pub fn rectangular(w: usize, h: usize, boundary: Boundary) -> Result<Self> {
        if w == 0 || h == 0 {
            return invalid("lattice sides must be positive");
        }
        if boundary == Boundary::Periodic && (w % 2 == 1 || h % 2 == 1 || w < 4 || h < 4) {
            return invalid(format!("periodic {w}x{h} lattice needs even sides of at least 4"));
        }
        let idx = |x: usize, y: usize| y * w + x;
        let mut coords = Vec::with_capacity(w * h);
        let mut red = Vec::with_capacity(w * h);
        let mut edges = Vec::new();
        for y in 0..h {
            for x in 0..w {
                coords.push((x as i32, y as i32));
                red.push((x + y) % 2 == 0);
                if x + 1 < w {
                    edges.push((idx(x, y), idx(x + 1, y)));
                } else if boundary == Boundary::Periodic {
                    edges.push((idx(x, y), idx(0, y)));
                }
                if y + 1 < h {
                    edges.push((idx(x, y), idx(x, y + 1)));
                } else if boundary == Boundary::Periodic {
                    edges.push((idx(x, y), idx(x, 0)));
                }
            }
        }
        Self::from_edges(format!("rect-{w}x{h}"), coords, red, &edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        let mut l = Self::rectangular(n, 1, Boundary::Open)?;
        l.name = format!("path-{n}");
        Ok(l)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn reds(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.red[i])
    }

    pub fn blacks(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| !self.red[i])
    }

    pub fn max_degree(&self) -> usize {
        self.neighbours.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of excited neighbours of site `i`.
    pub fn excited_neighbours(&self, bits: &[u8], i: usize) -> usize {
        self.neighbours[i].iter().map(|&j| bits[j] as usize).sum()
    }
}

/// Storm rates `a`, `b`, coupling angle `theta` and emission direction `n_vec`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QcaParams {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub n_vec: [f64; 3],
}

impl QcaParams {
    pub fn new(a: f64, b: f64, theta: f64, n_vec: [f64; 3]) -> Result<Self> {
        let p = Self { a, b, theta, n_vec };
        p.validate()?;
        Ok(p)
    }

    /// Unbiased emission `n_X = n_Y = n_Z = 1/√3`.
    pub fn unbiased(a: f64, b: f64, theta: f64) -> Result<Self> {
        let c = 1.0 / 3f64.sqrt();
        Self::new(a, b, theta, [c, c, c])
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.a) || !(0.0..=1.0).contains(&self.b) {
            return invalid(format!("storm rates must lie in [0, 1]: a={}, b={}", self.a, self.b));
        }
        if !self.theta.is_finite() {
            return invalid("theta must be finite");
        }
        let norm: f64 = self.n_vec.iter().map(|x| x * x).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return invalid(format!("|n|² = {norm} differs from 1"));
        }
        Ok(())
    }

    /// Emission probabilities of (X, Y, Z) from an excited site.
    pub fn emission_weights(&self) -> [f64; 3] {
        self.n_vec.map(|x| x * x)
    }

    /// Flip probability `sin²(kθ)`.
    pub fn flip_probability(&self, k: usize) -> f64 {
        (k as f64 * self.theta).sin().powi(2)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BathState {
    pub bits: Vec<u8>,
}

impl BathState {
    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![0; n] }
    }

    pub fn density(&self) -> f64 {
        self.bits.iter().map(|&b| b as f64).sum::<f64>() / self.bits.len().max(1) as f64
    }
}

const PURPOSE_STORM: u64 = 0;
const PURPOSE_FLIP: u64 = 1;
const PURPOSE_EMIT: u64 = 2;

/// Stream key of one cycle of one trajectory; site draws are addressed inside it.
#[inline]
pub fn cycle_stream(seed: u64, trajectory: u64, cycle: u64) -> u64 {
    key(&[seed, trajectory, cycle])
}

#[inline]
fn draw(stream: u64, site: usize, purpose: u64) -> f64 {
    uniform_at(stream, site as u64 * 4 + purpose)
}

/// PCA update rule with precomputed flip probabilities.
#[derive(Clone, Debug)]
pub struct Pca<'a> {
    lattice: &'a Lattice,
    params: QcaParams,
    flip: Vec<f64>,
    reds: Vec<usize>,
    blacks: Vec<usize>,
    emit_cdf: [f64; 2],
}

impl<'a> Pca<'a> {
    pub fn new(params: QcaParams, lattice: &'a Lattice) -> Result<Self> {
        params.validate()?;
        let flip = (0..=lattice.max_degree()).map(|k| params.flip_probability(k)).collect();
        let w = params.emission_weights();
        Ok(Self {
            lattice,
            params,
            flip,
            reds: lattice.reds().collect(),
            blacks: lattice.blacks().collect(),
            emit_cdf: [w[0], w[0] + w[1]],
        })
    }

    fn half_step(&self, bits: &mut [u8], targets: &[usize], stream: u64) {
        for &i in targets {
            let p = self.flip[self.lattice.excited_neighbours(bits, i)];
            if p > 0.0 && draw(stream, i, PURPOSE_FLIP) < p {
                bits[i] ^= 1;
            }
        }
    }

    /// Storm update, black half-step, red half-step, then Pauli emission
    /// (0 = I, 1 = X, 2 = Y, 3 = Z) conditioned on the new configuration.
    pub fn step(&self, bits: &mut [u8], stream: u64, emissions: Option<&mut [u8]>) {
        let (a, b) = (self.params.a, self.params.b);
        for (i, s) in bits.iter_mut().enumerate() {
            let u = draw(stream, i, PURPOSE_STORM);
            if (*s == 0 && u < a) || (*s == 1 && u < b) {
                *s ^= 1;
            }
        }
        self.half_step(bits, &self.blacks, stream);
        self.half_step(bits, &self.reds, stream);
        if let Some(out) = emissions {
            for (i, (&s, x)) in bits.iter().zip(out.iter_mut()).enumerate() {
                *x = if s == 0 {
                    0
                } else {
                    let u = draw(stream, i, PURPOSE_EMIT);
                    if u < self.emit_cdf[0] {
                        1
                    } else if u < self.emit_cdf[1] {
                        2
                    } else {
                        3
                    }
                };
            }
        }
    }
}

/// One PCA cycle with draws keyed by `(seed, trajectory, cycle, site, purpose)`.
pub fn pca_cycle(
    state: &BathState,
    params: QcaParams,
    lattice: &Lattice,
    seed: u64,
    trajectory: u64,
    cycle: u64,
) -> Result<(BathState, Vec<u8>)> {
    if state.bits.len() != lattice.len() {
        return invalid(format!("bath has {} sites, lattice {}", state.bits.len(), lattice.len()));
    }
    let pca = Pca::new(params, lattice)?;
    let mut next = state.clone();
    let mut emissions = vec![0u8; lattice.len()];
    pca.step(&mut next.bits, cycle_stream(seed, trajectory, cycle), Some(&mut emissions));
    Ok((next, emissions))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig {
    /// Total cycles per trajectory, including burn-in.
    pub cycles: usize,
    pub burn_in: usize,
    pub trajectories: usize,
    pub max_lag: usize,
    pub fit_cutoff: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self { cycles: 100_000, burn_in: 20_000, trajectories: 4, max_lag: 5_000, fit_cutoff: 0.02 }
    }
}

/// Exponential fit of `C(τ)`; `xi` is `None` when the window is too short or not decaying.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub xi: Option<f64>,
    pub r2: Option<f64>,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensitySeries {
    /// Post-burn-in density per cycle, one row per trajectory.
    pub eta: Vec<Vec<f64>>,
    pub mean: f64,
    pub scaled_variance: f64,
    /// `C(τ)` for `τ = 0, 1, …` up to the first lag at or below the cutoff.
    pub autocorrelation: Vec<f64>,
    pub fit: DecayFit,
}

/// Least-squares fit of `ln C(τ)` against `τ` over the leading points with `C > cutoff`.
pub fn fit_decay(autocorrelation: &[f64], cutoff: f64) -> DecayFit {
    let pts: Vec<(f64, f64)> = autocorrelation
        .iter()
        .take_while(|&&c| c > cutoff)
        .enumerate()
        .map(|(t, &c)| (t as f64, c.ln()))
        .collect();
    let m = pts.len();
    if m < 2 {
        return DecayFit { xi: None, r2: None, points: m };
    }
    let mf = m as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / mf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return DecayFit { xi: None, r2: None, points: m };
    }
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    DecayFit { xi: Some(-1.0 / slope), r2: Some(r2), points: m }
}

/// Density series from an all-zeros bath, recorded after burn-in.
pub fn run_series(params: QcaParams, lattice: &Lattice, config: &SeriesConfig, seed: u64) -> Result<DensitySeries> {
    if config.cycles <= config.burn_in {
        return invalid(format!("cycles ({}) must exceed burn-in ({})", config.cycles, config.burn_in));
    }
    if config.trajectories == 0 {
        return invalid("need at least one trajectory");
    }
    let pca = Pca::new(params, lattice)?;
    let n = lattice.len() as f64;
    let eta: Vec<Vec<f64>> = (0..config.trajectories)
        .into_par_iter()
        .map(|traj| {
            let mut bits = vec![0u8; lattice.len()];
            let mut out = Vec::with_capacity(config.cycles - config.burn_in);
            for t in 0..config.cycles {
                pca.step(&mut bits, cycle_stream(seed, traj as u64, t as u64), None);
                if t >= config.burn_in {
                    out.push(bits.iter().map(|&b| b as u32).sum::<u32>() as f64 / n);
                }
            }
            out
        })
        .collect();
    let count = eta.iter().map(Vec::len).sum::<usize>() as f64;
    let mean = eta.iter().flatten().sum::<f64>() / count;
    let var = eta.iter().flatten().map(|e| (e - mean).powi(2)).sum::<f64>() / count;
    let mut autocorrelation = Vec::new();
    if var > 0.0 {
        let len = eta[0].len();
        for tau in 0..=config.max_lag.min(len - 1) {
            let (mut acc, mut pairs) = (0.0, 0usize);
            for series in &eta {
                acc += series.iter().zip(&series[tau..]).map(|(x, y)| (x - mean) * (y - mean)).sum::<f64>();
                pairs += len - tau;
            }
            let c = acc / pairs as f64 / var;
            autocorrelation.push(c);
            if c <= config.fit_cutoff {
                break;
            }
        }
    }
    let fit = fit_decay(&autocorrelation, config.fit_cutoff);
    Ok(DensitySeries { eta, mean, scaled_variance: n * var, autocorrelation, fit })
}

/// Per-site emission frequencies of (X, Y, Z) averaged over sites and cycles,
/// starting from the all-zeros bath.
pub fn emission_marginals(params: QcaParams, lattice: &Lattice, cycles: usize, seed: u64) -> Result<[f64; 3]> {
    let pca = Pca::new(params, lattice)?;
    let mut bits = vec![0u8; lattice.len()];
    let mut em = vec![0u8; lattice.len()];
    let mut counts = [0u64; 4];
    for t in 0..cycles {
        pca.step(&mut bits, cycle_stream(seed, u64::MAX, t as u64), Some(&mut em));
        em.iter().for_each(|&x| counts[x as usize] += 1);
    }
    let total = (cycles * lattice.len()).max(1) as f64;
    Ok([counts[1] as f64 / total, counts[2] as f64 / total, counts[3] as f64 / total])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn lattices_are_bipartite() {
        for l in [
            Lattice::rotated_surface_code(3).unwrap(),
            Lattice::rotated_surface_code(9).unwrap(),
            Lattice::rectangular(4, 6, Boundary::Periodic).unwrap(),
            Lattice::rectangular(2, 2, Boundary::Open).unwrap(),
            Lattice::path(5).unwrap(),
        ] {
            for i in 0..l.len() {
                assert!(l.neighbours[i].iter().all(|&j| l.red[j] != l.red[i]));
            }
        }
        assert_eq!(Lattice::rotated_surface_code(9).unwrap().len(), 161);
        assert!(Lattice::rectangular(3, 4, Boundary::Periodic).is_err());
        let torus = Lattice::rectangular(4, 4, Boundary::Periodic).unwrap();
        assert!(torus.neighbours.iter().all(|n| n.len() == 4));
    }

    #[test]
    fn kernel_values() {
        let p = QcaParams::unbiased(0.0, 0.0, PI / 4.0).unwrap();
        assert!((p.flip_probability(2) - 1.0).abs() < 1e-15);
        let p = QcaParams::unbiased(0.0, 0.0, PI / 8.0).unwrap();
        assert!((p.flip_probability(2) - 0.5).abs() < 1e-15);
        assert!(QcaParams::new(0.1, 0.1, 0.0, [1.0, 0.1, 0.0]).is_err());
    }

    #[test]
    fn inert_dynamics_stay_zero() {
        let l = Lattice::rotated_surface_code(3).unwrap();
        let p = QcaParams::unbiased(0.0, 0.3, 0.0).unwrap();
        let mut s = BathState::zeros(l.len());
        for t in 0..200 {
            let (next, em) = pca_cycle(&s, p, &l, 1, 0, t).unwrap();
            assert!(next.bits.iter().all(|&b| b == 0) && em.iter().all(|&x| x == 0));
            s = next;
        }
    }

    #[test]
    fn single_red_excitation_flips_black_neighbours() {
        let l = Lattice::path(5).unwrap();
        let p = QcaParams::new(0.0, 0.0, PI / 2.0, [1.0, 0.0, 0.0]).unwrap();
        let s = BathState { bits: vec![0, 0, 1, 0, 0] };
        let (next, em) = pca_cycle(&s, p, &l, 3, 0, 0).unwrap();
        // Black sites 1 and 3 flip; each red end then sees one excited neighbour
        // and the centre sees two (sin²(π) = 0).
        assert_eq!(next.bits, vec![1, 1, 1, 1, 1]);
        assert!(em.iter().all(|&x| x == 1));
    }

    #[test]
    fn deterministic_under_seed() {
        let l = Lattice::rotated_surface_code(5).unwrap();
        let p = QcaParams::unbiased(0.01, 0.5, 0.4 * PI).unwrap();
        let cfg = SeriesConfig { cycles: 2000, burn_in: 100, trajectories: 2, max_lag: 50, fit_cutoff: 0.02 };
        let a = run_series(p, &l, &cfg, 17).unwrap();
        let b = run_series(p, &l, &cfg, 17).unwrap();
        assert_eq!(a.eta, b.eta);
        assert!(run_series(p, &l, &SeriesConfig { burn_in: 2000, ..cfg }, 1).is_err());
    }

    #[test]
    fn zero_theta_density_is_storm_stationary() {
        let l = Lattice::path(64).unwrap();
        let p = QcaParams::unbiased(0.1, 0.3, 0.0).unwrap();
        let cfg = SeriesConfig { cycles: 20_000, burn_in: 100, trajectories: 2, max_lag: 100, fit_cutoff: 0.02 };
        let s = run_series(p, &l, &cfg, 5).unwrap();
        // Sites are independent two-state chains; correlation time is short.
        let sigma = (0.25f64 * 0.75 / (64.0 * 39_800.0)).sqrt() * 3.0;
        assert!((s.mean - 0.25).abs() < 4.0 * sigma, "{}", s.mean);
        let xi = s.fit.xi.unwrap();
        assert!((xi - (-1.0 / 0.6f64.ln())).abs() < 0.3, "{xi}");
    }

    #[test]
    fn fit_recovers_exponential() {
        let c: Vec<f64> = (0..100).map(|t| (-(t as f64) / 7.0).exp()).collect();
        let f = fit_decay(&c, 0.02);
        assert!((f.xi.unwrap() - 7.0).abs() < 1e-9 && (f.r2.unwrap() - 1.0).abs() < 1e-12);
        assert!(fit_decay(&[1.0, 0.01], 0.02).xi.is_none());
    }
}
