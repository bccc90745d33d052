//! Domain types and unit conventions.
//!
//! Everything is expressed in units of the reference coupling J0 = 1 with
//! v_g = ħ = 1: energies in J0, times and distances in 1/J0. The single-emitter
//! population decay rate is γ0 = 2·J0.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;

/// Single-emitter population decay rate in units of J0.
pub const GAMMA0: f64 = 2.0;

/// Physical description of a linear chain of qubits on a waveguide.
///
/// `theta` = Ω·L and `omega` are the independent inputs; the spacing `L` is
/// always derived.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub couplings: Vec<f64>,
    /// δ_j = Ω_1 − Ω_j, first entry zero.
    pub detunings: Vec<f64>,
    pub omega: f64,
    pub theta: f64,
}

impl ChainSpec {
    pub fn new(couplings: Vec<f64>, detunings: Vec<f64>, omega: f64, theta: f64) -> Self {
        ChainSpec { couplings, detunings, omega, theta }
    }

    /// `n` identical qubits with J = J0 = 1 and no detuning.
    pub fn identical(n: usize, theta: f64, omega: f64) -> Self {
        ChainSpec { couplings: vec![1.0; n], detunings: vec![0.0; n], omega, theta }
    }

    pub fn n(&self) -> usize {
        self.couplings.len()
    }

    /// Spacing L = θ/Ω in units of 1/J0.
    pub fn spacing(&self) -> f64 {
        self.theta / self.omega
    }

    pub fn is_identical(&self) -> bool {
        let j0 = self.couplings[0];
        self.couplings.iter().all(|&j| (j - j0).abs() <= 1e-14 * j0)
            && self.detunings.iter().all(|&d| d == 0.0)
    }

    /// Positions of the qubits, centred on the middle of the chain.
    pub fn positions(&self) -> Vec<f64> {
        let l = self.spacing();
        let c = (self.n() as f64 - 1.0) / 2.0;
        (0..self.n()).map(|j| (j as f64 - c) * l).collect()
    }

    /// The same chain seen in a mirror: qubit j ↦ N−j+1.
    ///
    /// Detunings are re-referenced to the new first qubit, so Δk of the
    /// mirrored chain is Δk + δ_N of the original.
    pub fn reversed(&self) -> ChainSpec {
        let mut couplings = self.couplings.clone();
        couplings.reverse();
        let shift = *self.detunings.last().unwrap();
        let detunings: Vec<f64> = self.detunings.iter().rev().map(|d| d - shift).collect();
        // Ω_1' = Ω_N = Ω_1 − δ_N at the same spacing L.
        let omega = self.omega - shift;
        ChainSpec { couplings, detunings, omega, theta: omega * self.spacing() }
    }

    /// Markovian treatment requires O(1) detunings and a finite phase.
    pub fn markovian_valid(&self) -> bool {
        self.theta.is_finite() && self.detunings.iter().all(|d| d.abs() <= 10.0)
    }

    /// Largest coupling, in J0 units.
    pub fn max_coupling(&self) -> f64 {
        self.couplings.iter().cloned().fold(0.0, f64::max)
    }
}

/// Check a spec and normalize it to J0 = min J_j = 1.
pub fn validate(spec: &ChainSpec) -> Result<ChainSpec> {
    let n = spec.couplings.len();
    if n == 0 {
        return Err(Error::EmptyChain);
    }
    if spec.detunings.len() != n {
        return Err(Error::LengthMismatch { what: "detunings", got: spec.detunings.len(), expected: n });
    }
    for (i, &j) in spec.couplings.iter().enumerate() {
        if !(j > 0.0) || !j.is_finite() {
            return Err(Error::NonPositiveCoupling { index: i + 1, value: j });
        }
    }
    if !(spec.omega > 0.0) || !spec.omega.is_finite() {
        return Err(Error::NonPositiveOmega(spec.omega));
    }
    if !spec.theta.is_finite() {
        return Err(Error::NonFiniteTheta(spec.theta));
    }
    if spec.detunings[0] != 0.0 {
        return Err(Error::ReferenceDetuning(spec.detunings[0]));
    }
    let j0 = spec.couplings.iter().cloned().fold(f64::INFINITY, f64::min);
    if j0 == 1.0 {
        return Ok(spec.clone());
    }
    Ok(ChainSpec {
        couplings: spec.couplings.iter().map(|j| j / j0).collect(),
        detunings: spec.detunings.iter().map(|d| d / j0).collect(),
        omega: spec.omega / j0,
        theta: spec.theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
}

/// A scattering mode labelled by its (possibly complex) detuning Δk = E_k − Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModePoint {
    pub delta_k: C64,
    pub direction: Direction,
}

impl ModePoint {
    pub fn left(delta_k: impl Into<C64>) -> Self {
        ModePoint { delta_k: delta_k.into(), direction: Direction::Left }
    }
    pub fn right(delta_k: impl Into<C64>) -> Self {
        ModePoint { delta_k: delta_k.into(), direction: Direction::Right }
    }
}

/// Markovian: inter-qubit phase fixed to θ. ExactPhase: phase (Δk+Ω)L.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Markovian,
    ExactPhase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitState {
    pub amplitudes: Vec<C64>,
    pub time: f64,
}

impl QubitState {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Spatial samples of the emitted field at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub right: Vec<C64>,
    pub left: Vec<C64>,
}

impl FieldSample {
    /// 𝒫(x,t) = |ψ_R|² + |ψ_L|²; the rapidly oscillating cross term is dropped.
    pub fn density(&self) -> Vec<f64> {
        self.right.iter().zip(&self.left).map(|(r, l)| r.norm_sqr() + l.norm_sqr()).collect()
    }
}

/// Time series of single-excitation observables.
///
/// `pe` is the population of the observed qubit (by default the initially
/// excited one), `ps` the summed population of all other qubits, `pw` the
/// probability radiated outside the chain and `pb` the probability carried by
/// the field between the outermost qubits.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
    pub observed: usize,
    pub pe: Vec<f64>,
    pub ps: Vec<f64>,
    pub pw: Vec<f64>,
    pub pb: Vec<f64>,
    pub field: Vec<FieldSample>,
}

impl EvolutionResult {
    pub fn from_populations(times: Vec<f64>, populations: Vec<Vec<f64>>, observed: usize) -> Self {
        let pe = populations.iter().map(|p| p[observed]).collect();
        let ps = populations
            .iter()
            .map(|p| p.iter().enumerate().filter(|(j, _)| *j != observed).map(|(_, v)| v).sum())
            .collect();
        let n = times.len();
        EvolutionResult {
            times,
            populations,
            observed,
            pe,
            ps,
            pw: vec![0.0; n],
            pb: vec![0.0; n],
            field: Vec::new(),
        }
    }

    /// P_e + P_s + P_w + P_b at each sample.
    pub fn total(&self) -> Vec<f64> {
        (0..self.times.len()).map(|i| self.pe[i] + self.ps[i] + self.pw[i] + self.pb[i]).collect()
    }

    /// Largest deviation of the total probability from one.
    pub fn conservation_error(&self) -> f64 {
        self.total().iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Heaviside step with Θ(0) = 1/2.
pub fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Uniform grid of `n` points on [a, b].
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn identical_chain_spacing() {
        let s = validate(&ChainSpec::identical(3, PI / 2.0, 100.0)).unwrap();
        assert!((s.spacing() - PI / 200.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_specs() {
        let s = ChainSpec::new(vec![1.0, -1.0, 1.0], vec![0.0; 3], 100.0, 1.0);
        assert!(matches!(validate(&s), Err(Error::NonPositiveCoupling { index: 2, .. })));
        let s = ChainSpec::new(vec![1.0; 3], vec![0.0; 2], 100.0, 1.0);
        assert!(matches!(validate(&s), Err(Error::LengthMismatch { .. })));
        let s = ChainSpec::new(vec![1.0; 3], vec![0.0; 3], 0.0, 1.0);
        assert!(matches!(validate(&s), Err(Error::NonPositiveOmega(_))));
    }

    #[test]
    fn normalizes_to_smallest_coupling() {
        let s = ChainSpec::new(vec![2.0, 4.0], vec![0.0, 0.6], 200.0, 1.0);
        let v = validate(&s).unwrap();
        assert_eq!(v.couplings, vec![1.0, 2.0]);
        assert_eq!(v.detunings, vec![0.0, 0.3]);
        assert_eq!(v.omega, 100.0);
        assert_eq!(validate(&v).unwrap(), v);
    }

    #[test]
    fn heaviside_half_at_zero() {
        assert_eq!(heaviside(0.0), 0.5);
        assert_eq!(heaviside(-1e-300), 0.0);
    }

    #[test]
    fn positions_are_centred() {
        let s = ChainSpec::identical(3, 1.0, 1.0);
        assert_eq!(s.positions(), vec![-1.0, 0.0, 1.0]);
    }

    proptest::proptest! {
        #[test]
        fn validate_is_idempotent(
            js in proptest::collection::vec(0.1f64..10.0, 1..6),
            omega in 1.0f64..1e3,
            theta in -20.0f64..20.0,
        ) {
            let n = js.len();
            let mut det = vec![0.0; n];
            for (i, d) in det.iter_mut().enumerate().skip(1) { *d = 0.1 * i as f64; }
            let s = ChainSpec::new(js, det, omega, theta);
            let v = validate(&s).unwrap();
            proptest::prop_assert_eq!(validate(&v).unwrap(), v.clone());
            let jmin = v.couplings.iter().cloned().fold(f64::INFINITY, f64::min);
            proptest::prop_assert!((jmin - 1.0).abs() < 1e-15);
        }
    }
}
