//! Single-photon pulses: spectra, qubit excitation, scattered light and
//! pulse-parameter optimization.
//!
//! A pulse launched at x = −x0 towards the chain has ⟨E_k|S(0)⟩ ∝
//! f̃(Δ − χ)e^{iΔx0}, so every observable is a transform
//! `A(s) = ∫ dΔ/√(2π) F(Δ) f̃(Δ) e^{−iΔs}` of a scattering amplitude F.
//! In the Markovian limit the chain is point-like at x = 0 and s = t − x0
//! (shifted by ∓x for fields); with exact phases the geometry is kept.

use crate::dynamics::{markovian_field, panel_breaks, InitialState};
use crate::error::{Error, Result};
use crate::expint::e1_scaled;
use crate::faddeeva::faddeeva_overlap;
use crate::model::{validate, ChainSpec, FieldSample, ModePoint, Regime};
use crate::optimize::{self, Optimum};
use crate::par;
use crate::poly::Poly;
use crate::quad;
use crate::ratfun::{ExpSum, RationalFn, CANCEL_TOL};
use crate::scattering::{markovian_rational, solve_chain, ScatteringSolution};
use crate::spectrum::bic_index;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Gaussian spectra are integrated over χ ± GAUSS_WINDOW·σ.
const GAUSS_WINDOW: f64 = 12.0;
/// Upper cut of exact-phase integrals for exponential pulses; the 1/Δ² tail
/// beyond it is added in closed form.
const EXP_CUT: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseKind {
    Gaussian,
    DecayingExp,
    RisingExp,
}

impl PulseKind {
    pub fn label(self) -> &'static str {
        match self {
            PulseKind::Gaussian => "gaussian",
            PulseKind::DecayingExp => "decaying-exp",
            PulseKind::RisingExp => "rising-exp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Envelope family, width (σ for the Gaussian, ξ for exponentials), carrier
/// detuning χ = k0 − Ω, launch distance x0 and the side it comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub kind: PulseKind,
    pub width: f64,
    pub chi: f64,
    pub x0: f64,
    pub side: Side,
}

/// Anything that can play the role of f̃(Δ) with a launch offset.
pub trait SpectralAmplitude {
    /// f̃(Δ − χ), normalized to ∫|f̃|² dΔ = 1.
    fn spectrum(&self, dk: f64) -> C64;
    fn offset(&self) -> f64;

    /// ⟨k|S(0)⟩ = f̃ e^{iΔx0}.
    fn amplitude(&self, dk: f64) -> C64 {
        self.spectrum(dk) * C64::from_polar(1.0, dk * self.offset())
    }
}

impl Pulse {
    pub fn new(kind: PulseKind, width: f64, x0: f64) -> Self {
        Pulse { kind, width, chi: 0.0, x0, side: Side::Left }
    }

    pub fn gaussian(sigma: f64, x0: f64) -> Self {
        Pulse::new(PulseKind::Gaussian, sigma, x0)
    }

    pub fn decaying_exp(xi: f64, x0: f64) -> Self {
        Pulse::new(PulseKind::DecayingExp, xi, x0)
    }

    pub fn rising_exp(xi: f64, x0: f64) -> Self {
        Pulse::new(PulseKind::RisingExp, xi, x0)
    }

    pub fn detuned(mut self, chi: f64) -> Self {
        self.chi = chi;
        self
    }

    pub fn from_right(mut self) -> Self {
        self.side = Side::Right;
        self
    }

    pub fn with_width(mut self, width: f64) -> Self {
        self.width = width;
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidArgument(format!("pulse width must be positive, got {}", self.width)));
        }
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return Err(Error::InvalidArgument(format!("launch offset x0 must be positive, got {}", self.x0)));
        }
        if !self.chi.is_finite() {
            return Err(Error::InvalidArgument("carrier detuning is not finite".into()));
        }
        Ok(())
    }

    /// Pole of an exponential envelope: χ − iξ (decaying) or χ + iξ (rising).
    fn pole(&self) -> Option<C64> {
        match self.kind {
            PulseKind::Gaussian => None,
            PulseKind::DecayingExp => Some(C64::new(self.chi, -self.width)),
            PulseKind::RisingExp => Some(C64::new(self.chi, self.width)),
        }
    }

    /// Exponential envelopes as K/(Δ − q).
    fn rational(&self) -> Option<RationalFn> {
        let q = self.pole()?;
        let k = (2.0 * self.width).sqrt() / (2.0 * PI).sqrt();
        let c = match self.kind {
            PulseKind::DecayingExp => I * k,
            _ => -I * k,
        };
        Some(RationalFn::from_factored(Poly::constant(c), ONE, vec![(q, 1)]))
    }

    /// Envelope seen by a point at s = t − x0: `∫ dΔ/√(2π) f̃ e^{−iΔs}`.
    pub fn profile(&self, s: f64) -> C64 {
        let w = self.width;
        let carrier = C64::from_polar(1.0, -self.chi * s);
        let env = match self.kind {
            PulseKind::Gaussian => (w * 2f64.sqrt() / PI.sqrt()).sqrt() * (-w * w * s * s).exp(),
            PulseKind::DecayingExp if s >= 0.0 => (2.0 * w).sqrt() * (-w * s).exp(),
            PulseKind::RisingExp if s <= 0.0 => (2.0 * w).sqrt() * (w * s).exp(),
            _ => 0.0,
        };
        carrier * env
    }
}

impl SpectralAmplitude for Pulse {
    fn spectrum(&self, dk: f64) -> C64 {
        let d = dk - self.chi;
        let w = self.width;
        match self.kind {
            PulseKind::Gaussian => C64::new((-d * d / (4.0 * w * w)).exp() / (w * (2.0 * PI).sqrt()).sqrt(), 0.0),
            PulseKind::DecayingExp => (2.0 * w).sqrt() / ((2.0 * PI).sqrt() * C64::new(w, -d)),
            PulseKind::RisingExp => (2.0 * w).sqrt() / ((2.0 * PI).sqrt() * C64::new(w, d)),
        }
    }

    fn offset(&self) -> f64 {
        self.x0
    }
}

/// ∫|f̃|² dΔ over the whole line, mapped onto (−π/2, π/2) by Δ = c + w tan u.
pub fn spectral_norm(f: &dyn SpectralAmplitude, centre: f64, scale: f64) -> Result<f64> {
    let g = |u: f64| {
        let c = u.cos();
        if c <= 0.0 {
            return ZERO;
        }
        let d = centre + scale * u.tan();
        C64::new(f.spectrum(d).norm_sqr() * scale / (c * c), 0.0)
    };
    let h = 0.5 * PI;
    Ok(quad::gauss_kronrod_adaptive(g, -h, h, 1e-14, 1e-13)?.re)
}

/// Partial fractions `c + Σ a_l/(Δ − p_l)` of a rational amplitude with
/// simple poles; `None` when a pole is repeated.
#[derive(Debug, Clone)]
struct Fractions {
    constant: C64,
    terms: Vec<(C64, C64)>,
}

fn fractions(f: &RationalFn) -> Result<Option<Fractions>> {
    let (constant, g) = f.split_constant()?;
    let mut terms = Vec::new();
    for upper in [false, true] {
        for r in g.residues_in(upper)? {
            if r.order() > 1 {
                return Ok(None);
            }
            terms.push((r.coeffs[0], r.pole));
        }
    }
    Ok(Some(Fractions { constant, terms }))
}

/// `∫ dΔ e^{−(Δ−χ)²/4σ²} e^{−iΔs}/(Δ − p)` for a pole off the real axis.
fn gauss_pole(p: C64, sigma: f64, chi: f64, s: f64) -> C64 {
    let carrier = C64::from_polar(1.0, -chi * s);
    let q = p - chi;
    if q.im < 0.0 {
        carrier * faddeeva_overlap(q, sigma, s)
    } else {
        // mirror a pole above the axis through complex conjugation
        carrier * faddeeva_overlap(q.conj(), sigma, -s).conj()
    }
}

/// Markovian response `s ↦ ∫ dΔ/√(2π) F(Δ) f̃(Δ) e^{−iΔs}` of one amplitude.
enum Response {
    Gauss { fr: Fractions, pulse: Pulse },
    GaussQuad { f: RationalFn, pulse: Pulse },
    Exp { after: ExpSum, before: ExpSum },
}

impl Response {
    fn new(f: &RationalFn, pulse: &Pulse) -> Result<Self> {
        match pulse.rational() {
            None => Ok(match fractions(f)? {
                Some(fr) => Response::Gauss { fr, pulse: *pulse },
                None => Response::GaussQuad { f: f.clone(), pulse: *pulse },
            }),
            Some(env) => {
                let h = f.mul(&env);
                let root = (2.0 * PI).sqrt();
                Ok(Response::Exp {
                    after: h.inverse_transform()?.scale(C64::new(root, 0.0)),
                    before: h.inverse_transform_before()?.scale(C64::new(root, 0.0)),
                })
            }
        }
    }

    fn eval(&self, s: f64) -> Result<C64> {
        match self {
            Response::Gauss { fr, pulse } => {
                let sigma = pulse.width;
                let norm = 1.0 / ((2.0 * PI).sqrt() * (sigma * (2.0 * PI).sqrt()).sqrt());
                let mut acc = fr.constant * pulse.profile(s);
                for &(a, p) in &fr.terms {
                    acc += a * norm * gauss_pole(p, sigma, pulse.chi, s);
                }
                Ok(acc)
            }
            Response::GaussQuad { f, pulse } => {
                let lo = pulse.chi - GAUSS_WINDOW * pulse.width;
                let hi = pulse.chi + GAUSS_WINDOW * pulse.width;
                let g = |d: f64| f.eval(C64::new(d, 0.0)) * pulse.spectrum(d) * C64::from_polar(1.0, -d * s);
                Ok(quad::gauss_kronrod_adaptive(g, lo, hi, 1e-13, 1e-11)? / (2.0 * PI).sqrt())
            }
            Response::Exp { after, before } => Ok(if s >= 0.0 { after.eval(s) } else { before.eval(s) }),
        }
    }
}

/// Markovian amplitudes {t_out, r_1, e_m} for left incidence, with exact
/// pole/zero cancellation at θ = nπ where the dark poles sit on the axis.
struct ChainRationals {
    t_out: RationalFn,
    r1: RationalFn,
    e: Vec<RationalFn>,
}

fn chain_rationals(spec: &ChainSpec) -> Result<ChainRationals> {
    if spec.is_identical() && bic_index(spec.theta).is_ok() {
        // only the bright state couples: a single pole at −iNJ; the constants
        // are read off the pointwise solution at Δ = 1
        let p = C64::new(0.0, -(spec.n() as f64) * spec.couplings[0]);
        let sol = solve_chain(spec, ModePoint::left(ONE), Regime::Markovian)?;
        let d = ONE - p;
        let simple = |c: C64| RationalFn::from_factored(Poly::constant(c), ONE, vec![(p, 1)]);
        let t = sol.transmission() * d;
        return Ok(ChainRationals {
            t_out: RationalFn::from_factored(Poly::linear(ZERO, t), ONE, vec![(p, 1)]),
            r1: simple(sol.reflection() * d),
            e: sol.e.iter().map(|&e| simple(e * d)).collect(),
        });
    }
    let m = markovian_rational(spec)?;
    Ok(ChainRationals {
        t_out: m.t_out.reduce(CANCEL_TOL),
        r1: m.r1.reduce(CANCEL_TOL),
        e: m.e.iter().map(|f| f.reduce(CANCEL_TOL)).collect(),
    })
}

/// Chain and pulse as seen from the left: right-incident pulses are handled
/// in the mirror image.
fn oriented(spec: &ChainSpec, pulse: &Pulse) -> Result<(ChainSpec, Pulse)> {
    pulse.check()?;
    let spec = validate(spec)?;
    Ok(match pulse.side {
        Side::Left => (spec, *pulse),
        Side::Right => {
            let shift = *spec.detunings.last().unwrap();
            let m = validate(&spec.reversed())?;
            (m, Pulse { side: Side::Left, chi: pulse.chi + shift, ..*pulse })
        }
    })
}

fn unmirror<T>(mut v: Vec<T>, side: Side) -> Vec<T> {
    if side == Side::Right {
        v.reverse();
    }
    v
}

/// Qubit amplitudes α_m(t), indexed [qubit][time].
pub fn excitation_amplitudes(spec: &ChainSpec, pulse: &Pulse, t_grid: &[f64], regime: Regime) -> Result<Vec<Vec<C64>>> {
    let (spec, p) = oriented(spec, pulse)?;
    let out = match regime {
        Regime::Markovian => {
            let r = chain_rationals(&spec)?;
            let resp: Vec<Response> = r.e.iter().map(|f| Response::new(f, &p)).collect::<Result<_>>()?;
            resp.iter()
                .map(|re| t_grid.iter().map(|&t| re.eval(t - p.x0)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?
        }
        Regime::ExactPhase => exact_qubit_amplitudes(&spec, &p, t_grid)?,
    };
    Ok(unmirror(out, pulse.side))
}

/// P_m(t) = |α_m(t)|² for qubit m (0-based).
pub fn excitation_probability(spec: &ChainSpec, pulse: &Pulse, m: usize, t_grid: &[f64], regime: Regime) -> Result<Vec<f64>> {
    let n = spec.couplings.len();
    if m >= n {
        return Err(Error::InvalidArgument(format!("qubit index {m} out of range for N = {n}")));
    }
    let amps = excitation_amplitudes(spec, pulse, t_grid, regime)?;
    Ok(amps[m].iter().map(|a| a.norm_sqr()).collect())
}

fn integration_range(spec: &ChainSpec, p: &Pulse) -> (f64, f64) {
    match p.kind {
        PulseKind::Gaussian => ((p.chi - GAUSS_WINDOW * p.width).max(-spec.omega), p.chi + GAUSS_WINDOW * p.width),
        _ => (-spec.omega, EXP_CUT.max(p.chi + 100.0 * p.width)),
    }
}

/// Vector quadrature of `coef_c(Δ) f̃(Δ) e^{−iΔs}/√(2π)` over the physical
/// band k ≥ 0 (Gaussian spectra are cut where they vanish). `outputs` lists
/// (channel, s) pairs; `coefs` fills the channel coefficients of one mode.
fn exact_transform<F>(spec: &ChainSpec, p: &Pulse, channels: usize, outputs: &[(usize, f64)], coefs: F) -> Result<Vec<C64>>
where
    F: Fn(&ScatteringSolution, &mut [C64]) + Sync,
{
    let (lo, hi) = integration_range(spec, p);
    let s_max = outputs.iter().map(|o| o.1.abs()).fold(1.0, f64::max);
    let breaks = panel_breaks(spec, lo, hi, s_max);
    // independent chunks of outputs run in parallel
    let chunk = 64;
    let pieces: Vec<&[(usize, f64)]> = outputs.chunks(chunk).collect();
    let parts = par::map(&pieces, |outs| -> Result<Vec<C64>> {
        let mut c = vec![ZERO; channels];
        let f = |d: f64, out: &mut [C64]| {
            match solve_chain(spec, ModePoint::left(d), Regime::ExactPhase) {
                Ok(sol) => coefs(&sol, &mut c),
                Err(_) => c.iter_mut().for_each(|v| *v = ZERO),
            }
            let w = p.spectrum(d) / (2.0 * PI).sqrt();
            for (o, &(ci, s)) in out.iter_mut().zip(outs.iter()) {
                *o = c[ci] * w * C64::from_polar(1.0, -d * s);
            }
        };
        let (v, _) = quad::gauss_kronrod_breaks(f, outs.len(), &breaks, 1e-11, 1e-9, quad::MAX_INTERVALS)?;
        Ok(v)
    });
    let mut out = Vec::with_capacity(outputs.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// `∫_W^∞ e^{−iΔs}/Δ² dΔ = E_2(isW)/W`.
fn inverse_square_tail(s: f64, w: f64) -> C64 {
    if s == 0.0 {
        return C64::new(1.0 / w, 0.0);
    }
    let z = C64::new(0.0, s * w);
    (-z).exp() * (ONE - z * e1_scaled(z)) / w
}

fn exact_qubit_amplitudes(spec: &ChainSpec, p: &Pulse, t_grid: &[f64]) -> Result<Vec<Vec<C64>>> {
    let n = spec.n();
    let pos = spec.positions();
    // incoming phase referenced at the first qubit: s = t − x0 − x_1
    let outputs: Vec<(usize, f64)> =
        (0..n).flat_map(|m| t_grid.iter().map(move |&t| (m, t))).map(|(m, t)| (m, t - p.x0 - pos[0])).collect();
    let vals = exact_transform(spec, p, n, &outputs, |sol, c| c.copy_from_slice(&sol.e))?;
    let mut out: Vec<Vec<C64>> = vals.chunks(t_grid.len()).map(|c| c.to_vec()).collect();
    if p.kind != PulseKind::Gaussian {
        // e_m f̃ → √J_m e^{ik(x_m − x_1)} K / Δ² beyond the cut
        let (_, hi) = integration_range(spec, p);
        let k = (2.0 * p.width).sqrt() / (2.0 * PI).sqrt() * if p.kind == PulseKind::DecayingExp { I } else { -I };
        for m in 0..n {
            let d = pos[m] - pos[0];
            let c = spec.couplings[m].sqrt() * k * C64::from_polar(1.0, spec.omega * d) / (2.0 * PI).sqrt();
            for (i, &t) in t_grid.iter().enumerate() {
                out[m][i] += c * inverse_square_tail(t - p.x0 - pos[0] - d, hi);
            }
        }
    }
    Ok(out)
}

/// Output spectra |t f̃|² and |r f̃|² on a detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteredSpectra {
    pub dk: Vec<f64>,
    pub transmitted: Vec<f64>,
    pub reflected: Vec<f64>,
}

/// Long-time spectra of the transmitted and reflected light: each mode of
/// the input is multiplied by the stationary amplitude at that mode.
pub fn scattered_spectra(spec: &ChainSpec, pulse: &Pulse, dk_grid: &[f64], regime: Regime) -> Result<ScatteredSpectra> {
    pulse.check()?;
    let spec = validate(spec)?;
    let mut transmitted = Vec::with_capacity(dk_grid.len());
    let mut reflected = Vec::with_capacity(dk_grid.len());
    for &d in dk_grid {
        let mode = match pulse.side {
            Side::Left => ModePoint::left(d),
            Side::Right => ModePoint::right(d),
        };
        let f = pulse.spectrum(d).norm_sqr();
        match solve_chain(&spec, mode, regime) {
            Ok(sol) => {
                transmitted.push(sol.transmission().norm_sqr() * f);
                reflected.push(sol.reflection().norm_sqr() * f);
            }
            // exactly on a bare resonance the mode is fully reflected
            Err(Error::OnQubitResonancePole(..)) => {
                transmitted.push(0.0);
                reflected.push(f);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ScatteredSpectra { dk: dk_grid.to_vec(), transmitted, reflected })
}

/// Right- and left-moving field amplitudes at time t.
///
/// Markovian: the chain is point-like at x = 0, as in the spontaneous-emission
/// fields. Exact phases: qubits at their centred positions, Gaussian pulses
/// only (exponential spectra decay too slowly for a pointwise field).
pub fn field_densities(spec: &ChainSpec, pulse: &Pulse, t: f64, x_grid: &[f64], regime: Regime) -> Result<FieldSample> {
    let (spec, p) = oriented(spec, pulse)?;
    let xs: Vec<f64> = match pulse.side {
        Side::Left => x_grid.to_vec(),
        Side::Right => x_grid.iter().map(|x| -x).collect(),
    };
    let (right, left) = match regime {
        Regime::Markovian => markovian_pulse_field(&spec, &p, t, &xs)?,
        Regime::ExactPhase => exact_pulse_field(&spec, &p, t, &xs)?,
    };
    let (right, left) = match pulse.side {
        Side::Left => (right, left),
        Side::Right => (left, right),
    };
    Ok(FieldSample { t, x: x_grid.to_vec(), right, left })
}

fn markovian_pulse_field(spec: &ChainSpec, p: &Pulse, t: f64, xs: &[f64]) -> Result<(Vec<C64>, Vec<C64>)> {
    let r = chain_rationals(spec)?;
    let tr = Response::new(&r.t_out, p)?;
    let re = Response::new(&r.r1, p)?;
    let tau = t - p.x0;
    let mut right = Vec::with_capacity(xs.len());
    let mut left = Vec::with_capacity(xs.len());
    for &x in xs {
        if x < 0.0 {
            right.push(p.profile(tau - x));
            left.push(re.eval(tau + x)?);
        } else {
            right.push(tr.eval(tau - x)?);
            left.push(ZERO);
        }
    }
    Ok((right, left))
}

fn exact_pulse_field(spec: &ChainSpec, p: &Pulse, t: f64, xs: &[f64]) -> Result<(Vec<C64>, Vec<C64>)> {
    if p.kind != PulseKind::Gaussian {
        return Err(Error::InvalidArgument("exact-phase field densities need a Gaussian pulse".into()));
    }
    let n = spec.n();
    let pos = spec.positions();
    let l = spec.spacing();
    // region j lies left of qubit j (j = N: right of the chain); amplitudes of
    // region j are referenced at x_j, and at x_N + L for the last one
    let reference = |j: usize| if j < n { pos[j] } else { pos[n - 1] + l };
    let region = |x: f64| pos.iter().filter(|&&q| q < x).count();
    let s0 = t - p.x0 - pos[0];
    let mut outputs = Vec::with_capacity(2 * xs.len());
    for &x in xs {
        let j = region(x);
        let u = x - reference(j);
        outputs.push((j, s0 - u));
        outputs.push((n + 1 + j, s0 + u));
    }
    let vals = exact_transform(spec, p, 2 * (n + 1), &outputs, |sol, c| {
        c[..=n].copy_from_slice(&sol.t);
        c[n + 1..].copy_from_slice(&sol.r);
    })?;
    Ok((vals.iter().step_by(2).cloned().collect(), vals.iter().skip(1).step_by(2).cloned().collect()))
}

/// Per-qubit excitation and its sum at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalExcitation {
    pub t: f64,
    pub per_qubit: Vec<f64>,
    pub total: f64,
}

/// α_m for a rising exponential up to its peak (t ≤ x0): only the envelope
/// pole q = χ + iξ contributes, α_m = √(2ξ) e_m(q) e^{−iq(t−x0)}. Evaluated
/// pointwise at the complex mode, so it scales to long chains.
fn rising_amplitudes(spec: &ChainSpec, p: &Pulse, tau: f64) -> Result<Vec<C64>> {
    let q = C64::new(p.chi, p.width);
    let sol = solve_chain(spec, ModePoint::left(q), Regime::Markovian)?;
    let f = (2.0 * p.width).sqrt() * (-I * q * tau).exp();
    Ok(sol.e.iter().map(|&e| f * e).collect())
}

/// P_tot(t) = Σ_m P_m(t). Markovian rising exponentials before their peak use
/// the single-pole shortcut.
pub fn total_excitation(spec: &ChainSpec, pulse: &Pulse, t: f64, regime: Regime) -> Result<TotalExcitation> {
    let per_qubit: Vec<f64> = if regime == Regime::Markovian && pulse.kind == PulseKind::RisingExp && t <= pulse.x0 {
        let (s, p) = oriented(spec, pulse)?;
        let a = rising_amplitudes(&s, &p, t - p.x0)?;
        unmirror(a.iter().map(|a| a.norm_sqr()).collect(), pulse.side)
    } else {
        excitation_amplitudes(spec, pulse, &[t], regime)?.iter().map(|a| a[0].norm_sqr()).collect()
    };
    let total = per_qubit.iter().sum();
    Ok(TotalExcitation { t, per_qubit, total })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// P_m of one qubit (0-based).
    Qubit(usize),
    Total,
}

/// Search box: the width range and, unless pinned analytically, the range of
/// the delay t − x0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBox {
    pub width: (f64, f64),
    pub delay: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseOptimum {
    pub width: f64,
    pub delay: f64,
    pub value: f64,
}

/// Markovian objective as a function of (width, delay) for one family.
struct Evaluator {
    spec: ChainSpec,
    pulse: Pulse,
    objective: Objective,
    e: Vec<RationalFn>,
    fr: Vec<Option<Fractions>>,
}

impl Evaluator {
    fn new(spec: &ChainSpec, pulse: &Pulse, objective: Objective) -> Result<Self> {
        let (spec, pulse) = oriented(spec, pulse)?;
        let n = spec.n();
        let objective = match (objective, pulse.side) {
            (Objective::Qubit(m), _) if m >= n => {
                return Err(Error::InvalidArgument(format!("qubit index {m} out of range for N = {n}")))
            }
            (Objective::Qubit(m), Side::Right) => Objective::Qubit(n - 1 - m),
            (o, _) => o,
        };
        let (e, fr) = if pulse.kind == PulseKind::RisingExp {
            (Vec::new(), Vec::new())
        } else {
            let e = chain_rationals(&spec)?.e;
            let fr = e.iter().map(fractions).collect::<Result<Vec<_>>>()?;
            (e, fr)
        };
        Ok(Evaluator { spec, pulse, objective, e, fr })
    }

    fn qubits(&self) -> Vec<usize> {
        match self.objective {
            Objective::Qubit(m) => vec![m],
            Objective::Total => (0..self.spec.n()).collect(),
        }
    }

    fn value(&self, width: f64, delay: f64) -> Result<f64> {
        let p = self.pulse.with_width(width);
        if p.kind == PulseKind::RisingExp {
            let a = rising_amplitudes(&self.spec, &p, 0.0)?;
            return Ok(self.qubits().iter().map(|&m| a[m].norm_sqr()).sum());
        }
        let mut acc = 0.0;
        for m in self.qubits() {
            let r = match (&self.fr[m], p.kind) {
                (Some(fr), PulseKind::Gaussian) => Response::Gauss { fr: fr.clone(), pulse: p },
                _ => Response::new(&self.e[m], &p)?,
            };
            acc += r.eval(delay)?.norm_sqr();
        }
        Ok(acc)
    }
}

/// Best value over the delay box; a boundary optimum is accepted here, only
/// the outer width search must be interior.
fn best_delay(ev: &Evaluator, width: f64, (lo, hi): (f64, f64)) -> Result<Optimum> {
    match optimize::maximize(|d| ev.value(width, d), lo, hi, optimize::REL_TOL) {
        Ok(o) => Ok(o),
        Err(Error::NoInteriorMaximum { .. }) => {
            let a = ev.value(width, lo)?;
            let b = ev.value(width, hi)?;
            Ok(if a >= b { Optimum { x: lo, value: a } } else { Optimum { x: hi, value: b } })
        }
        Err(e) => Err(e),
    }
}

/// Maximize P_m or P_tot over the pulse width (and the delay t − x0, except
/// for rising exponentials, which peak at t = x0 for every width).
/// Markovian chains; the template fixes family, carrier and side.
pub fn optimize_pulse(spec: &ChainSpec, template: &Pulse, objective: Objective, bounds: &ParamBox) -> Result<PulseOptimum> {
    let (wlo, whi) = bounds.width;
    if !(wlo > 0.0 && whi > wlo) {
        return Err(Error::InvalidArgument(format!("invalid width range [{wlo}, {whi}]")));
    }
    let ev = Evaluator::new(spec, template, objective)?;
    if template.kind == PulseKind::RisingExp {
        let o = optimize::maximize(|w| ev.value(w, 0.0), wlo, whi, optimize::REL_TOL)?;
        return Ok(PulseOptimum { width: o.x, delay: 0.0, value: o.value });
    }
    let delay = bounds
        .delay
        .ok_or_else(|| Error::InvalidArgument("a delay range is required for this pulse family".into()))?;
    let o = optimize::maximize(|w| best_delay(&ev, w, delay).map(|d| d.value), wlo, whi, optimize::REL_TOL)?;
    let d = best_delay(&ev, o.x, delay)?;
    Ok(PulseOptimum { width: o.x, delay: d.x, value: d.value })
}

/// Peak over the delay of a fixed pulse.
pub fn peak_excitation(spec: &ChainSpec, pulse: &Pulse, objective: Objective, delay: (f64, f64)) -> Result<PulseOptimum> {
    let ev = Evaluator::new(spec, pulse, objective)?;
    if pulse.kind == PulseKind::RisingExp {
        let v = ev.value(pulse.width, 0.0)?;
        return Ok(PulseOptimum { width: pulse.width, delay: 0.0, value: v });
    }
    let d = best_delay(&ev, pulse.width, delay)?;
    Ok(PulseOptimum { width: pulse.width, delay: d.x, value: d.value })
}

/// Density 𝒫(x,t) = |ψ_R|² + |ψ_L|² of the photon emitted by a coherent
/// single excitation of a Markovian chain: its shape is set by the poles.
pub fn emitted_pulse_shape(spec: &ChainSpec, init: &InitialState, t: f64, x_grid: &[f64]) -> Result<Vec<f64>> {
    Ok(markovian_field(spec, init, t, x_grid)?.density())
}

/// Least-squares exponent b of P_m ≈ a e^{−b m} over the qubits with P_m > 0.
pub fn exponential_fit(values: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> =
        values.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, &v)| (i as f64, v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    Some(((my - slope * mx).exp(), -slope))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faddeeva::erfc;
    use crate::model::linspace;
    use proptest::prelude::*;
    use std::f64::consts::{E, FRAC_PI_2};

    fn single() -> ChainSpec {
        ChainSpec::identical(1, 0.0, 100.0)
    }

    fn three(theta: f64) -> ChainSpec {
        ChainSpec::identical(3, theta, 100.0)
    }

    fn p_at(spec: &ChainSpec, pulse: &Pulse, m: usize, t: f64) -> f64 {
        excitation_probability(spec, pulse, m, &[t], Regime::Markovian).unwrap()[0]
    }

    #[test]
    fn envelopes_are_normalized() {
        for p in [Pulse::gaussian(0.7, 5.0).detuned(0.3), Pulse::decaying_exp(1.3, 5.0), Pulse::rising_exp(0.4, 5.0).detuned(-1.0)] {
            let n = spectral_norm(&p, p.chi, p.width).unwrap();
            assert!((n - 1.0).abs() < 1e-10, "{:?}: {n}", p.kind);
            // the time profile carries the same norm
            let prof = quad::gauss_kronrod_adaptive(|s| C64::new(p.profile(s).norm_sqr(), 0.0), -60.0 / p.width, 60.0 / p.width, 1e-13, 1e-12).unwrap();
            assert!((prof.re - 1.0).abs() < 1e-9, "{:?}: {}", p.kind, prof.re);
        }
    }

    #[test]
    fn bright_rationals_match_pointwise_solution() {
        for theta in [PI, 2.0 * PI] {
            let spec = validate(&three(theta)).unwrap();
            let r = chain_rationals(&spec).unwrap();
            for d in [-2.0, 0.3, 1.7] {
                let sol = solve_chain(&spec, ModePoint::left(d), Regime::Markovian).unwrap();
                let z = C64::new(d, 0.0);
                for m in 0..3 {
                    assert!((r.e[m].eval(z) - sol.e[m]).norm() < 1e-13);
                }
                assert!((r.t_out.eval(z) - sol.transmission()).norm() < 1e-13);
                assert!((r.r1.eval(z) - sol.reflection()).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn single_qubit_decaying_exponential() {
        let spec = single();
        let p = Pulse::decaying_exp(1.0, 10.0);
        for tau in [0.2f64, 1.0, 2.5] {
            let want = 2.0 * tau * tau * (-2.0 * tau).exp();
            assert!((p_at(&spec, &p, 0, 10.0 + tau) - want).abs() < 1e-12);
        }
        let o = peak_excitation(&spec, &p, Objective::Qubit(0), (0.0, 5.0)).unwrap();
        assert!((o.value - 2.0 / (E * E)).abs() < 1e-10);
        assert!((o.delay - 1.0).abs() < 1e-5);
        assert!(p_at(&spec, &p, 0, 9.0) == 0.0);
    }

    #[test]
    fn single_qubit_rising_exponential_peaks_at_one_half() {
        let spec = single();
        let o = optimize_pulse(&spec, &Pulse::rising_exp(1.0, 10.0), Objective::Qubit(0), &ParamBox { width: (0.1, 5.0), delay: None }).unwrap();
        assert!((o.value - 0.5).abs() < 1e-10);
        assert!((o.width - 1.0).abs() < 1e-5);
        // the pinned peak equals the residue evaluation at t = x0
        let p = Pulse::rising_exp(o.width, 10.0);
        assert!((p_at(&spec, &p, 0, 10.0) - o.value).abs() < 1e-10);
        assert!(p_at(&spec, &p, 0, 10.3) < o.value && p_at(&spec, &p, 0, 9.7) < o.value);
    }

    fn gaussian_closed_form(sigma: f64, tau: f64) -> f64 {
        let e = erfc(C64::new((1.0 - 2.0 * sigma * sigma * tau) / (2.0 * sigma), 0.0)).re;
        (2.0 * PI).sqrt() / (4.0 * sigma) * (1.0 / (2.0 * sigma * sigma) - 2.0 * tau).exp() * e * e
    }

    #[test]
    fn single_qubit_gaussian_closed_form_and_quadrature() {
        let spec = single();
        for sigma in [0.5, 1.0, 1.46] {
            let p = Pulse::gaussian(sigma, 10.0);
            let taus = linspace(-2.0, 4.0, 13);
            let ts: Vec<f64> = taus.iter().map(|t| t + 10.0).collect();
            let got = excitation_probability(&spec, &p, 0, &ts, Regime::Markovian).unwrap();
            for (i, &tau) in taus.iter().enumerate() {
                let want = gaussian_closed_form(sigma, tau);
                // brute-force line integral of the same amplitude
                let q = quad::integrate_window(
                    |d| p.spectrum(d) * C64::from_polar(1.0, -d * tau) / (C64::new(d, 1.0) * (2.0 * PI).sqrt()),
                    GAUSS_WINDOW * sigma,
                    64,
                    1e-14,
                )
                .unwrap()
                .norm_sqr();
                assert!((got[i] - want).abs() < 1e-12, "σ={sigma} τ={tau}: {} vs {want}", got[i]);
                assert!((q - want).abs() < 1e-8, "σ={sigma} τ={tau}: quadrature {q} vs {want}");
            }
        }
    }

    #[test]
    fn single_qubit_gaussian_optimum() {
        let o = optimize_pulse(&single(), &Pulse::gaussian(1.0, 10.0), Objective::Qubit(0), &ParamBox { width: (0.3, 4.0), delay: Some((-1.0, 3.0)) }).unwrap();
        assert!((o.value - 0.40).abs() < 0.004, "{o:?}");
        assert!((o.width - 1.46).abs() < 0.0146, "{o:?}");
        assert!((o.delay - 0.5).abs() < 0.005, "{o:?}");
    }

    #[test]
    fn three_qubit_gaussian_peaks() {
        let p = Pulse::gaussian(1.0, 10.0);
        let o = peak_excitation(&three(FRAC_PI_2), &p, Objective::Qubit(0), (-1.0, 3.0)).unwrap();
        assert!((o.value / 0.6266 - 1.0).abs() < 0.005, "{o:?}");
        assert!((o.delay / 0.713 - 1.0).abs() < 0.02, "{o:?}");
        let o = peak_excitation(&three(PI), &p, Objective::Qubit(0), (-1.0, 3.0)).unwrap();
        assert!((o.value / 0.075 - 1.0).abs() < 0.01, "{o:?}");
        assert!((o.delay / 0.289 - 1.0).abs() < 0.02, "{o:?}");
    }

    #[test]
    fn three_qubit_optimized_pulses() {
        let spec = three(FRAC_PI_2);
        let g = optimize_pulse(&spec, &Pulse::gaussian(1.0, 10.0), Objective::Qubit(0), &ParamBox { width: (0.3, 4.0), delay: Some((-1.0, 3.0)) }).unwrap();
        assert!((g.value / 0.6356 - 1.0).abs() < 0.005, "{g:?}");
        assert!((g.width / 1.175 - 1.0).abs() < 0.02, "{g:?}");
        let d = optimize_pulse(&spec, &Pulse::decaying_exp(1.0, 10.0), Objective::Qubit(0), &ParamBox { width: (0.1, 4.0), delay: Some((0.0, 6.0)) }).unwrap();
        assert!((d.value / 0.454 - 1.0).abs() < 0.01, "{d:?}");
        assert!((d.width - 0.73).abs() < 0.01, "{d:?}");
        let r = optimize_pulse(&spec, &Pulse::rising_exp(1.0, 10.0), Objective::Qubit(0), &ParamBox { width: (0.1, 4.0), delay: None }).unwrap();
        assert!((r.value / 0.6808 - 1.0).abs() < 0.005, "{r:?}");
        assert!((r.width - 0.97).abs() < 0.01, "{r:?}");
    }

    #[test]
    fn bright_chain_minimum() {
        let o = peak_excitation(&three(PI), &Pulse::decaying_exp(3.0, 10.0), Objective::Qubit(0), (0.0, 3.0)).unwrap();
        assert!((o.value - 2.0 / (3.0 * E * E)).abs() < 1e-9, "{o:?}");
        assert!((o.delay - 1.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn right_incidence_mirrors_left() {
        let spec = ChainSpec::new(vec![1.0, 1.3, 1.1], vec![0.0, 0.2, -0.1], 100.0, 0.7);
        let p = Pulse::gaussian(0.8, 10.0).detuned(0.2);
        let ts = linspace(8.0, 14.0, 7);
        let right = excitation_amplitudes(&spec, &p.from_right(), &ts, Regime::Markovian).unwrap();
        let mirror = excitation_amplitudes(&spec.reversed(), &Pulse { chi: 0.2 - 0.1, ..p }, &ts, Regime::Markovian).unwrap();
        for m in 0..3 {
            for i in 0..ts.len() {
                assert!((right[m][i].norm_sqr() - mirror[2 - m][i].norm_sqr()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn spectra_carry_the_whole_pulse() {
        let spec = ChainSpec::identical(2, 0.9, 100.0);
        let p = Pulse::gaussian(0.6, 10.0).detuned(0.4);
        let grid = linspace(p.chi - 8.0, p.chi + 8.0, 4001);
        let s = scattered_spectra(&spec, &p, &grid, Regime::Markovian).unwrap();
        let h = grid[1] - grid[0];
        let sum: Vec<f64> = s.transmitted.iter().zip(&s.reflected).map(|(a, b)| a + b).collect();
        assert!((quad::simpson_uniform(&sum, h) - 1.0).abs() < 1e-10);
        // far detuned narrow pulse passes
        let far = Pulse::gaussian(0.05, 10.0).detuned(400.0);
        let s = scattered_spectra(&spec, &far, &[400.0], Regime::Markovian).unwrap();
        assert!(s.reflected[0] / far.spectrum(400.0).norm_sqr() < 1e-4);
    }

    #[test]
    fn fano_point_reflects_nothing() {
        let theta = 0.6;
        let spec = ChainSpec::identical(2, theta, 100.0);
        let dk = -theta.tan();
        let s = scattered_spectra(&spec, &Pulse::gaussian(1.0, 10.0), &[dk], Regime::Markovian).unwrap();
        assert!(s.reflected[0] < 1e-28, "{}", s.reflected[0]);
    }

    #[test]
    fn spectral_modulation_matches_time_domain() {
        // transmitted field long after the interaction, Fourier transformed
        let spec = ChainSpec::identical(2, 1.1, 100.0);
        let p = Pulse::gaussian(0.3, 10.0);
        let t = 60.0;
        let xs = linspace(0.0, 100.0, 4001);
        let f = field_densities(&spec, &p, t, &xs, Regime::Markovian).unwrap();
        let h = xs[1] - xs[0];
        for d in [-0.6, -0.2, 0.0, 0.35, 0.7] {
            let re: Vec<f64> = f.right.iter().zip(&xs).map(|(a, &x)| (a * C64::from_polar(1.0, -d * x)).re).collect();
            let im: Vec<f64> = f.right.iter().zip(&xs).map(|(a, &x)| (a * C64::from_polar(1.0, -d * x)).im).collect();
            let ft = C64::new(quad::simpson_uniform(&re, h), quad::simpson_uniform(&im, h)) / (2.0 * PI).sqrt();
            let s = scattered_spectra(&spec, &p, &[d], Regime::Markovian).unwrap();
            assert!((ft.norm_sqr() - s.transmitted[0]).abs() < 1e-6, "Δ={d}: {} vs {}", ft.norm_sqr(), s.transmitted[0]);
        }
    }

    #[test]
    fn emitted_shape_of_one_qubit_is_exponential() {
        let spec = single();
        let init = InitialState::excited(1, 0);
        let xs = linspace(-4.0, 4.0, 33);
        let d = emitted_pulse_shape(&spec, &init, 5.0, &xs).unwrap();
        for (x, v) in xs.iter().zip(&d) {
            let want = (-2.0 * (5.0 - x.abs())).exp();
            assert!((v - want).abs() < 1e-12, "x={x}: {v} vs {want}");
        }
    }

    #[test]
    fn rising_shortcut_matches_residues() {
        let spec = three(1.1);
        let p = Pulse::rising_exp(0.8, 10.0).detuned(0.3);
        for t in [8.5, 9.6, 10.0] {
            let a = total_excitation(&spec, &p, t, Regime::Markovian).unwrap();
            let b: f64 = (0..3).map(|m| p_at(&spec, &p, m, t)).sum();
            assert!((a.total - b).abs() < 1e-12, "t={t}: {} vs {b}", a.total);
        }
    }

    #[test]
    fn exact_phase_approaches_markovian_for_short_spacing() {
        let spec = ChainSpec::identical(3, FRAC_PI_2, 1000.0);
        let ts = linspace(9.0, 13.0, 9);
        for p in [Pulse::gaussian(1.0, 10.0), Pulse::decaying_exp(0.8, 10.0)] {
            let m = excitation_amplitudes(&spec, &p, &ts, Regime::Markovian).unwrap();
            let e = excitation_amplitudes(&spec, &p, &ts, Regime::ExactPhase).unwrap();
            for q in 0..3 {
                for i in 0..ts.len() {
                    let d = (m[q][i].norm_sqr() - e[q][i].norm_sqr()).abs();
                    assert!(d < 1e-2, "{:?} q={q} t={}: {d}", p.kind, ts[i]);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn one_qubit_cannot_exceed_one_half(kind in 0usize..3, w in 0.2f64..4.0, chi in -2.0f64..2.0, tau in -1.0f64..4.0) {
            let kind = [PulseKind::Gaussian, PulseKind::DecayingExp, PulseKind::RisingExp][kind];
            let p = Pulse::new(kind, w, 10.0).detuned(chi);
            prop_assert!(p_at(&single(), &p, 0, 10.0 + tau) <= 0.5 + 1e-9);
        }

        #[test]
        fn launch_offset_only_shifts_time(kind in 0usize..3, w in 0.3f64..3.0, shift in 0.5f64..20.0, tau in -1.0f64..3.0) {
            let kind = [PulseKind::Gaussian, PulseKind::DecayingExp, PulseKind::RisingExp][kind];
            let spec = three(1.3);
            let a = Pulse::new(kind, w, 10.0);
            let b = Pulse { x0: 10.0 + shift, ..a };
            for m in 0..3 {
                let pa = p_at(&spec, &a, m, 10.0 + tau);
                let pb = p_at(&spec, &b, m, 10.0 + shift + tau);
                prop_assert!((pa - pb).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn three_qubit_chain_beats_the_single_qubit_bound() {
        let o = peak_excitation(&three(FRAC_PI_2), &Pulse::gaussian(1.0, 10.0), Objective::Qubit(0), (-1.0, 3.0)).unwrap();
        assert!(o.value >= 0.6);
    }
}
