//! Two-state temporal "storm" noise: a calm/storm latent chain per qubit with
//! state-dependent Pauli emissions.

use serde::{Deserialize, Serialize};

use crate::correlation::{correlation_length, TransferOperator};
use crate::error::{invalid, Result};
use crate::rng::StreamRng;
use crate::spp::SppMps;
use crate::tensor::{RMatrix, RVector};

/// `a`: calm→storm, `b`: storm→calm; `q0`, `q1`: emission distributions over (I, X, Y, Z).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StormParams {
    pub a: f64,
    pub b: f64,
    pub q0: [f64; 4],
    pub q1: [f64; 4],
}

fn check_distribution(q: &[f64; 4], name: &str) -> Result<()> {
    if q.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (q.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return invalid(format!("{name} is not a probability distribution: {q:?}"));
    }
    Ok(())
}

impl StormParams {
    pub fn new(a: f64, b: f64, q0: [f64; 4], q1: [f64; 4]) -> Result<Self> {
        let p = Self { a, b, q0, q1 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.a) || !(0.0..=1.0).contains(&self.b) {
            return invalid(format!("transition probabilities must lie in [0, 1]: a={}, b={}", self.a, self.b));
        }
        if self.a + self.b >= 1.0 {
            return invalid(format!("a + b = {} violates a + b < 1", self.a + self.b));
        }
        if self.a + self.b <= 0.0 {
            return invalid("a + b must be positive for a stationary distribution");
        }
        check_distribution(&self.q0, "q0")?;
        check_distribution(&self.q1, "q1")
    }

    /// `(π₀, π₁) = (b, a)/(a + b)`.
    pub fn stationary(&self) -> [f64; 2] {
        let s = self.a + self.b;
        [self.b / s, self.a / s]
    }

    /// `p̄^{(x)} = (b q0^{(x)} + a q1^{(x)})/(a + b)`.
    pub fn marginals(&self) -> [f64; 4] {
        let [p0, p1] = self.stationary();
        std::array::from_fn(|x| p0 * self.q0[x] + p1 * self.q1[x])
    }

    pub fn analytic_summary(&self) -> Result<StormSummary> {
        self.validate()?;
        let lambda2 = 1.0 - self.a - self.b;
        let lambda_star = lambda2.abs();
        Ok(StormSummary {
            lambda2,
            lambda_star,
            gap: 1.0 - lambda_star,
            correlation_length: correlation_length(lambda_star),
            stationary: self.stationary(),
            marginals: self.marginals(),
        })
    }
}

/// Closed-form spectral data of the storm chain.
#[derive(Clone, Debug, Serialize)]
pub struct StormSummary {
    pub lambda2: f64,
    pub lambda_star: f64,
    pub gap: f64,
    pub correlation_length: Option<f64>,
    pub stationary: [f64; 2],
    pub marginals: [f64; 4],
}

/// Storm model as an edge-emitting HMM: `A_x = T diag(q0^{(x)}, q1^{(x)})`.
#[derive(Clone, Debug)]
pub struct StormHmm {
    pub params: StormParams,
    pub transition: RMatrix,
    pub kernels: Vec<RMatrix>,
    pub stationary: RVector,
}

pub fn storm_hmm(params: StormParams) -> Result<StormHmm> {
    params.validate()?;
    let (a, b) = (params.a, params.b);
    let transition = RMatrix::from_row_slice(2, 2, &[1.0 - a, a, b, 1.0 - b]);
    let kernels = (0..4)
        .map(|x| &transition * RMatrix::from_diagonal(&RVector::from_vec(vec![params.q0[x], params.q1[x]])))
        .collect();
    let [p0, p1] = params.stationary();
    Ok(StormHmm { params, transition, kernels, stationary: RVector::from_vec(vec![p0, p1]) })
}

impl StormHmm {
    pub fn transfer_operator(&self) -> Result<TransferOperator> {
        TransferOperator::new(self.kernels.clone())
    }

    /// Stationary storm process over `steps` rounds as an MPS.
    pub fn to_mps(&self, steps: usize) -> Result<SppMps> {
        SppMps::from_hmm(&self.kernels, &self.stationary, steps)
    }
}

/// Error budget of the calm and storm states and its X/Y/Z split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub q0_error_total: f64,
    pub q1_error_total: f64,
    pub split: [f64; 3],
}

impl Default for ErrorProfile {
    fn default() -> Self {
        Self { q0_error_total: 0.0, q1_error_total: 0.03, split: [1.0 / 3.0; 3] }
    }
}

impl ErrorProfile {
    fn distribution(&self, total: f64) -> [f64; 4] {
        [1.0 - total, total * self.split[0], total * self.split[1], total * self.split[2]]
    }
}

/// Smallest correlation length accepted by [`solve_params`].
pub const XI_FLOOR: f64 = 1.0;

/// Invert `(ξ, marginal error rate)` into storm parameters.
pub fn solve_params(xi_target: f64, marginal_total: f64, profile: &ErrorProfile) -> Result<StormParams> {
    if !xi_target.is_finite() || xi_target < XI_FLOOR {
        return invalid(format!("correlation length {xi_target} is below the floor {XI_FLOOR}"));
    }
    if !(marginal_total > 0.0 && marginal_total < 1.0) {
        return invalid(format!("marginal error rate {marginal_total} must lie in (0, 1)"));
    }
    if profile.q1_error_total <= profile.q0_error_total {
        return invalid("storm error budget must exceed the calm error budget");
    }
    if (profile.split.iter().sum::<f64>() - 1.0).abs() > 1e-12 || profile.split.iter().any(|&s| s < 0.0) {
        return invalid("Pauli split must be a distribution over X, Y, Z");
    }
    let gap = 1.0 - (-1.0 / xi_target).exp();
    let pi1 = (marginal_total - profile.q0_error_total) / (profile.q1_error_total - profile.q0_error_total);
    if !(0.0..=1.0).contains(&pi1) {
        return invalid(format!("storm fraction π₁ = {pi1} lies outside [0, 1]"));
    }
    StormParams::new(
        gap * pi1,
        gap * (1.0 - pi1),
        profile.distribution(profile.q0_error_total),
        profile.distribution(profile.q1_error_total),
    )
}

/// Latent storm chain of one qubit driven by its own counter-based stream.
#[derive(Clone, Debug)]
pub struct StormChain {
    params: StormParams,
    state: u8,
    rng: StreamRng,
}

impl StormChain {
    /// Initial latent state drawn from the stationary distribution.
    pub fn new(params: StormParams, key: &[u64]) -> Self {
        let mut rng = StreamRng::new(key);
        let state = u8::from(rng.uniform() < params.stationary()[1]);
        Self { params, state, rng }
    }

    pub fn state(&self) -> u8 {
        self.state
    }

    /// One round: latent transition, then an emission from the new state.
    pub fn step(&mut self) -> u8 {
        let u = self.rng.uniform();
        self.state = match self.state {
            0 => u8::from(u < self.params.a),
            _ => u8::from(u >= self.params.b),
        };
        let q = if self.state == 0 { &self.params.q0 } else { &self.params.q1 };
        let mut u = self.rng.uniform();
        for (x, &p) in q.iter().enumerate().take(3) {
            if u < p {
                return x as u8;
            }
            u -= p;
        }
        3
    }
}

/// Pauli labels indexed `[round][qubit]`, one independent chain per qubit.
pub fn sample_fault_stream(hmm: &StormHmm, qubits: usize, rounds: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut out = vec![vec![0u8; qubits]; rounds];
    for q in 0..qubits {
        let mut chain = StormChain::new(hmm.params, &[seed, q as u64]);
        for row in out.iter_mut() {
            row[q] = chain.step();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{hmm_check, spectral_summary};

    fn params(a: f64, b: f64) -> StormParams {
        StormParams::new(a, b, [1.0, 0.0, 0.0, 0.0], [0.97, 0.01, 0.01, 0.01]).unwrap()
    }

    #[test]
    fn stationary_and_summary() {
        let p = params(0.1, 0.3);
        assert!((p.stationary()[0] - 0.75).abs() < 1e-15);
        let s = p.analytic_summary().unwrap();
        assert!((s.lambda2 - 0.6).abs() < 1e-15 && (s.gap - 0.4).abs() < 1e-15);
        let hmm = storm_hmm(p).unwrap();
        assert!(hmm_check(&hmm.kernels).is_hmm);
        let num = spectral_summary(&hmm.transfer_operator().unwrap()).unwrap();
        assert!((num.lambda_star - s.lambda_star).abs() < 1e-12);
        let pi_t = hmm.transition.transpose() * &hmm.stationary;
        assert!((pi_t - &hmm.stationary).amax() < 1e-12);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(StormParams::new(0.6, 0.5, [1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]).is_err());
        assert!(StormParams::new(0.1, 0.1, [0.9, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn solve_params_worked_example() {
        let p = solve_params(2.0, 0.001, &ErrorProfile::default()).unwrap();
        let gap = 1.0 - (-0.5f64).exp();
        assert!((p.a - gap / 30.0).abs() < 1e-15);
        assert!((p.b - 29.0 * gap / 30.0).abs() < 1e-15);
        let s = p.analytic_summary().unwrap();
        assert!((s.correlation_length.unwrap() - 2.0).abs() < 1e-12);
        assert!((1.0 - s.marginals[0] - 0.001).abs() < 1e-12);
        assert!(solve_params(0.5, 0.001, &ErrorProfile::default()).is_err());
        assert!(solve_params(2.0, 0.05, &ErrorProfile::default()).is_err());
        let edge = solve_params(2.0, 0.03, &ErrorProfile::default()).unwrap();
        assert_eq!(edge.b, 0.0);
    }

    #[test]
    fn absorbing_calm_never_errs() {
        let p = StormParams::new(0.0, 0.4, [1.0, 0.0, 0.0, 0.0], [0.5, 0.5, 0.0, 0.0]).unwrap();
        let hmm = storm_hmm(p).unwrap();
        assert!((p.analytic_summary().unwrap().lambda2 - 0.6).abs() < 1e-15);
        let stream = sample_fault_stream(&hmm, 3, 1000, 4);
        assert!(stream.iter().flatten().all(|&x| x == 0));
    }

    #[test]
    fn streams_are_reproducible_per_qubit() {
        let hmm = storm_hmm(params(0.05, 0.2)).unwrap();
        let a = sample_fault_stream(&hmm, 4, 200, 9);
        let b = sample_fault_stream(&hmm, 2, 200, 9);
        for r in 0..200 {
            assert_eq!(a[r][..2], b[r][..]);
        }
    }
}
