//! Time evolution of single-excitation initial states.
//!
//! Markovian chains: qubit amplitudes from the coupling-matrix modes
//! Σ_l β_l e^{−Γ_l t/2} ξ_l, emitted field from residues of the scattering
//! amplitudes. At θ = nπ the dark subspace is carried separately.
//!
//! Non-Markovian chains: every observable is a Fourier integral
//! `Φ(s) = Σ_dir ∫ dΔ/2π A(Δ) Σ_c conj(e_c(Δ)) α_c(0) e^{−iΔs}`
//! over exact-phase eigenstates. Inside region j the right-moving field
//! depends on x and t only through s = t − (x − x_j) and the left-moving one
//! through s = t + (x − x_j), so each region needs one function of s per
//! direction.

use crate::error::{Error, Result};
use crate::expint::e1_scaled;
use crate::model::{heaviside, validate, ChainSpec, EvolutionResult, FieldSample, ModePoint, Regime};
use crate::par;
use crate::quad;
use crate::ratfun::{ExpSum, RationalFn, CANCEL_TOL};
use crate::scattering::{markovian_rational, markovian_rational_right, solve_chain};
use crate::spectrum::{bic_index, coupling_matrix_rates, dark_basis, nonmarkovian_poles, NonMarkovianSearch};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Qubit amplitudes α_j(0) of a photon-free initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub amplitudes: Vec<C64>,
}

impl InitialState {
    /// Requires unit norm (within 1e−10).
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if amplitudes.is_empty() || !((norm - 1.0).abs() <= 1e-10) {
            return Err(Error::InvalidArgument(format!("initial state must have unit norm, got {norm}")));
        }
        Ok(InitialState { amplitudes })
    }

    /// Rescales to unit norm.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidArgument("initial state has zero norm".into()));
        }
        Ok(InitialState { amplitudes: amplitudes.iter().map(|a| a / norm).collect() })
    }

    /// Qubit `m` (0-based) of `n` excited.
    pub fn excited(n: usize, m: usize) -> Self {
        let mut a = vec![ZERO; n];
        a[m] = C64::new(1.0, 0.0);
        InitialState { amplitudes: a }
    }

    /// Qubit with the largest initial population (first on ties).
    pub fn observed(&self) -> usize {
        let mut best = 0;
        for (j, a) in self.amplitudes.iter().enumerate() {
            if a.norm_sqr() > self.amplitudes[best].norm_sqr() + 1e-15 {
                best = j;
            }
        }
        best
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.amplitudes.len() != n {
            return Err(Error::LengthMismatch { what: "initial amplitudes", got: self.amplitudes.len(), expected: n });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- Markovian

/// Residue-route amplitudes of a Markovian evolution as exponential sums in
/// time: qubits α_m(t), and the outgoing fields ψ_R(τ), ψ_L(τ) at the chain
/// edges (τ = t − |x| outside the chain).
#[derive(Debug, Clone)]
pub struct MarkovianAmplitudes {
    pub qubits: Vec<ExpSum>,
    pub right: ExpSum,
    pub left: ExpSum,
}

impl MarkovianAmplitudes {
    /// Emitted probability ∫_0^t (|ψ_R|² + |ψ_L|²) dτ, in closed form.
    pub fn radiated(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.right.norm_sqr_integral(t) + self.left.norm_sqr_integral(t)
    }
}

fn transform(f: &RationalFn) -> Result<ExpSum> {
    f.reduce(CANCEL_TOL).inverse_transform()
}

/// Residue evaluation of `Σ_dir ∫ dΔ/2π A ḡ e^{−iΔt}` for the qubits and
/// both exterior fields.
pub fn residue_amplitudes(spec: &ChainSpec, init: &InitialState) -> Result<MarkovianAmplitudes> {
    let spec = validate(spec)?;
    let n = spec.n();
    init.check(n)?;
    let left = markovian_rational(&spec)?;
    let right = markovian_rational_right(&spec)?;
    let back = C64::from_polar(1.0, -spec.theta);
    let mut qubits = vec![ExpSum::default(); n];
    let mut psi_r = ExpSum::default();
    let mut psi_l = ExpSum::default();
    for (mr, is_left) in [(&left, true), (&right, false)] {
        let cbar: Vec<C64> = init.amplitudes.iter().map(|c| c.conj()).collect();
        let g = RationalFn::combine(&mr.e, &cbar)?.conj();
        for m in 0..n {
            qubits[m] = std::mem::take(&mut qubits[m]).add(&transform(&mr.e[m].mul(&g))?);
        }
        // exterior amplitudes re-referenced to the outer qubits
        let (to_right, to_left) = if is_left { (mr.t_out.scale(back), mr.r1.clone()) } else { (mr.r1.clone(), mr.t_out.scale(back)) };
        psi_r = psi_r.add(&transform(&to_right.mul(&g))?);
        psi_l = psi_l.add(&transform(&to_left.mul(&g))?);
    }
    Ok(MarkovianAmplitudes { qubits, right: psi_r, left: psi_l })
}

/// Markovian evolution. Qubits follow the coupling-matrix modes (the residue
/// route is used when the matrix is defective); P_w is the closed-form
/// integral of the residue-route fields. At θ = nπ for identical qubits this
/// defers to [`evolve_bic`].
pub fn evolve_markovian(spec: &ChainSpec, init: &InitialState, t_grid: &[f64]) -> Result<EvolutionResult> {
    let spec = validate(spec)?;
    let n = spec.n();
    init.check(n)?;
    if spec.is_identical() {
        if let Ok(k) = bic_index(spec.theta) {
            return evolve_bic(&spec, init, k, t_grid);
        }
    }
    let amps = residue_amplitudes(&spec, init)?;
    let modes = coupling_matrix_rates(&spec);
    let pops: Vec<Vec<f64>> = match modes.expand(&init.amplitudes) {
        Ok(beta) => t_grid.iter().map(|&t| modes.amplitudes(&beta, t).iter().map(|a| a.norm_sqr()).collect()).collect(),
        Err(_) => t_grid.iter().map(|&t| amps.qubits.iter().map(|q| q.eval(t).norm_sqr()).collect()).collect(),
    };
    let mut res = EvolutionResult::from_populations(t_grid.to_vec(), pops, init.observed());
    res.pw = t_grid.iter().map(|&t| amps.radiated(t)).collect();
    Ok(res)
}

/// Field snapshot of a Markovian evolution: the chain sits at x = 0, and
/// 𝒫(x,t) = |ψ(t − |x|)|² Θ(t − |x|) on either side.
pub fn markovian_field(spec: &ChainSpec, init: &InitialState, t: f64, x_grid: &[f64]) -> Result<FieldSample> {
    let spec = validate(spec)?;
    init.check(spec.n())?;
    let out = |psi: &dyn Fn(f64) -> C64, x: f64| {
        let tau = t - x.abs();
        if tau < 0.0 {
            ZERO
        } else {
            psi(tau) * heaviside(tau).sqrt()
        }
    };
    let (psi_r, psi_l): (Box<dyn Fn(f64) -> C64>, Box<dyn Fn(f64) -> C64>) = match bic_index(spec.theta) {
        Ok(k) if spec.is_identical() => {
            let (r, l) = bic_edge_fields(&spec, init, k)?;
            (Box::new(r), Box::new(l))
        }
        _ => {
            let a = residue_amplitudes(&spec, init)?;
            let (r, l) = (a.right, a.left);
            (Box::new(move |s| r.eval(s)), Box::new(move |s| l.eval(s)))
        }
    };
    let mut right = Vec::with_capacity(x_grid.len());
    let mut left = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        if x >= 0.0 {
            right.push(out(&*psi_r, x));
            left.push(ZERO);
        } else {
            right.push(ZERO);
            left.push(out(&*psi_l, x));
        }
    }
    Ok(FieldSample { t, x: x_grid.to_vec(), right, left })
}

fn bic_split(spec: &ChainSpec, init: &InitialState, k: i64) -> Result<(Vec<C64>, C64, Vec<C64>)> {
    let basis = dark_basis(spec, k)?;
    let a0 = nalgebra::DVector::from_column_slice(&init.amplitudes);
    let beta = basis.bright.dotc(&a0);
    let dark: Vec<C64> = (0..spec.n()).map(|j| init.amplitudes[j] - beta * basis.bright[j]).collect();
    Ok((dark, beta, basis.bright.iter().cloned().collect()))
}

/// Exterior fields at θ = nπ: only the bright amplitude radiates, at rate Nγ0.
fn bic_edge_fields(spec: &ChainSpec, init: &InitialState, k: i64) -> Result<(impl Fn(f64) -> C64, impl Fn(f64) -> C64)> {
    let (_, beta, _) = bic_split(spec, init, k)?;
    let n = spec.n() as f64;
    let sign = if (k * (spec.n() as i64 - 1)).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let amp = -I * beta * n.sqrt();
    Ok((move |s: f64| amp * (-n * s).exp(), move |s: f64| amp * sign * (-n * s).exp()))
}

/// Evolution at θ = nπ for identical qubits: the dark component is
/// stationary, the bright component B_m ∝ (−1)^{nm} decays at Nγ0.
pub fn evolve_bic(spec: &ChainSpec, init: &InitialState, n_pi: i64, t_grid: &[f64]) -> Result<EvolutionResult> {
    let spec = validate(spec)?;
    init.check(spec.n())?;
    if !spec.is_identical() {
        return Err(Error::NotIdentical);
    }
    let (dark, beta, bright) = bic_split(&spec, init, n_pi)?;
    let nq = spec.n() as f64;
    let pops = t_grid
        .iter()
        .map(|&t| {
            let b = beta * (-nq * t).exp();
            dark.iter().zip(&bright).map(|(d, v)| (d + b * v).norm_sqr()).collect()
        })
        .collect();
    let mut res = EvolutionResult::from_populations(t_grid.to_vec(), pops, init.observed());
    res.pw = t_grid.iter().map(|&t| beta.norm_sqr() * (1.0 - (-2.0 * nq * t.max(0.0)).exp())).collect();
    Ok(res)
}

/// Closed-form state of two identical qubits prepared in (|e1⟩+|e2⟩)/√2
/// (Markovian): qubits decay at Γ1/2 = J0(1 + e^{iθ}), and the emitted field
/// is a pair of truncated exponentials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricPairState {
    pub t: f64,
    pub gamma1: C64,
    pub omega: f64,
    pub spacing: f64,
}

impl SymmetricPairState {
    /// Amplitude of each of |e1⟩, |e2⟩ in the frame rotating at Ω.
    pub fn qubit_amplitude(&self) -> C64 {
        (-0.5 * self.gamma1 * self.t).exp() / 2f64.sqrt()
    }

    fn envelope(&self, s: f64) -> C64 {
        -I * self.gamma1 / (2.0 * 2f64.sqrt()) * (-(0.5 * self.gamma1 + I * self.omega) * s).exp()
    }

    /// Right-moving field at 0 < x < t (zero elsewhere).
    pub fn right_amplitude(&self, x: f64) -> C64 {
        if x < 0.0 || x > self.t {
            return ZERO;
        }
        self.envelope(self.t - x + 0.5 * self.spacing)
    }

    /// Left-moving field at −t < x < 0 (zero elsewhere).
    pub fn left_amplitude(&self, x: f64) -> C64 {
        if x > 0.0 || x < -self.t {
            return ZERO;
        }
        self.envelope(self.t + x + 0.5 * self.spacing)
    }

    /// Total photon probability of the two field integrals.
    pub fn field_norm_sqr(&self) -> f64 {
        let g = self.gamma1.re;
        let pref = self.gamma1.norm_sqr() / 8.0;
        2.0 * pref * (-g * 0.5 * self.spacing).exp() * (1.0 - (-g * self.t).exp()) / g
    }
}

pub fn two_qubit_symmetric_state(spec: &ChainSpec, t: f64) -> Result<SymmetricPairState> {
    let spec = validate(spec)?;
    if spec.n() != 2 || !spec.is_identical() {
        return Err(Error::NotIdentical);
    }
    let gamma1 = 2.0 * (1.0 + C64::from_polar(1.0, spec.theta));
    Ok(SymmetricPairState { t, gamma1, omega: spec.omega, spacing: spec.spacing() })
}

// ------------------------------------------------------------ non-Markovian

/// Lower limit of the k integrals in the exact-phase regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerLimit {
    /// k ≥ 0, i.e. Δk ≥ −Ω.
    Physical,
    /// Δk over the whole real line, as in the Markovian treatment.
    FullLine,
}

/// Which observables a non-Markovian run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observables {
    Qubits,
    /// Qubits plus P_w, P_b and field snapshots.
    Full,
}

#[derive(Debug, Clone)]
pub struct QuadratureOptions {
    pub lower: LowerLimit,
    pub observables: Observables,
    /// Upper end of the numerically integrated remainder; beyond it only
    /// the analytic asymptotic part contributes.
    pub w_tail: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Grid spacing cap; `None` → min(1/(4Ω), L/64).
    pub h_max: Option<f64>,
    /// Times at which field snapshots are recorded (snapped to the grid).
    pub field_times: Vec<f64>,
    /// Samples of s per quadrature job.
    pub chunk: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            lower: LowerLimit::Physical,
            observables: Observables::Full,
            w_tail: 1000.0,
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            h_max: None,
            field_times: Vec::new(),
            chunk: 64,
        }
    }
}

/// Width of the Lorentzian regularization of the asymptotic model.
const REG: f64 = 1.0;

#[derive(Debug, Clone, Copy)]
enum Channel {
    Qubit(usize),
    /// Right mover in region r (0-based, r = 0..=N).
    Right(usize),
    /// Left mover in region r.
    Left(usize),
}

/// coef · e^{iΔd} / ((Δ − p1)(Δ − p2)), p1 in the lower and p2 in the upper
/// half plane; the first factor is absent for field channels.
#[derive(Debug, Clone, Copy)]
struct Term {
    coef: C64,
    d: f64,
    p1: Option<C64>,
    p2: C64,
}

struct Kernel {
    spec: ChainSpec,
    c: Vec<C64>,
    lower: LowerLimit,
    models: Vec<Vec<Term>>,
    channels: Vec<Channel>,
}

impl Kernel {
    fn new(spec: &ChainSpec, init: &InitialState, lower: LowerLimit, channels: Vec<Channel>) -> Self {
        let n = spec.n();
        let l = spec.spacing();
        let x = spec.positions();
        let reference = |r: usize| if r < n { x[r] } else { x[n - 1] + l };
        let q = |m: usize| C64::new(-spec.detunings[m], -REG);
        let omega = spec.omega;
        let mut models = Vec::with_capacity(channels.len());
        for &ch in &channels {
            let mut terms = Vec::new();
            for (cidx, &cc) in init.amplitudes.iter().enumerate() {
                if cc == ZERO {
                    continue;
                }
                let wc = cc * spec.couplings[cidx].sqrt();
                let p2 = q(cidx).conj();
                // far from resonance the chain is transparent:
                // e_m ≈ √J_m e^{ik·(path from the source to x_m)}/(Δ + δ_m)
                let mut push = |d: f64, p1: Option<C64>, w: C64| {
                    terms.push(Term { coef: w * C64::from_polar(1.0, omega * d), d, p1, p2 });
                };
                match ch {
                    Channel::Qubit(m) => {
                        let w = wc * spec.couplings[m].sqrt();
                        push(x[m] - x[cidx], Some(q(m)), w);
                        push(x[cidx] - x[m], Some(q(m)), w);
                    }
                    Channel::Right(r) => push(reference(r) - x[cidx], None, wc),
                    Channel::Left(r) => push(x[cidx] - reference(r), None, wc),
                }
            }
            models.push(terms);
        }
        Kernel { spec: spec.clone(), c: init.amplitudes.clone(), lower, models, channels }
    }

    /// Exact integrand minus its asymptotic model, per channel, summed over
    /// both incidence directions.
    fn remainder(&self, dk: f64, out: &mut [C64]) {
        let mut dk = dk;
        let sols = loop {
            let l = solve_chain(&self.spec, ModePoint::left(dk), Regime::ExactPhase);
            let r = solve_chain(&self.spec, ModePoint::right(dk), Regime::ExactPhase);
            match (l, r) {
                (Ok(l), Ok(r)) => break [l, r],
                // removable singularity exactly on a bare resonance
                _ => dk += 1e-9 * dk.abs().max(1.0),
            }
        };
        for o in out.iter_mut() {
            *o = ZERO;
        }
        for s in &sols {
            let g: C64 = s.e.iter().zip(&self.c).map(|(e, c)| e.conj() * c).sum();
            for (o, ch) in out.iter_mut().zip(&self.channels) {
                let a = match *ch {
                    Channel::Qubit(m) => s.e[m],
                    Channel::Right(r) => s.t[r],
                    Channel::Left(r) => s.r[r],
                };
                *o += a * g;
            }
        }
        let z = C64::new(dk, 0.0);
        for (o, terms) in out.iter_mut().zip(&self.models) {
            for t in terms {
                let mut v = t.coef * C64::from_polar(1.0, dk * t.d) / (z - t.p2);
                if let Some(p1) = t.p1 {
                    v /= z - p1;
                }
                *o -= v;
            }
        }
    }

    /// ∫ dΔ/2π of the model times e^{−iΔs} over the integration range.
    fn model_transform(&self, ci: usize, s: f64) -> C64 {
        let omega = self.spec.omega;
        let physical = self.lower == LowerLimit::Physical;
        let mut acc = ZERO;
        for t in &self.models[ci] {
            let u = s - t.d;
            let v = match t.p1 {
                None => full_upper(t.p2, u) - if physical { cut(t.p2, u, omega) } else { ZERO },
                Some(p1) => {
                    let full = (full_lower(p1, u) - full_upper(t.p2, u)) / (p1 - t.p2);
                    let cut = if !physical {
                        ZERO
                    } else if (u * omega).abs() < 1e-9 {
                        ((omega + p1).ln() - (omega + t.p2).ln()) / (2.0 * PI * (p1 - t.p2))
                    } else {
                        (cut(p1, u, omega) - cut(t.p2, u, omega)) / (p1 - t.p2)
                    };
                    full - cut
                }
            };
            acc += t.coef * v;
        }
        acc
    }
}

/// ∫_ℝ dΔ/2π e^{−iΔu}/(Δ − q), Im q < 0.
fn full_lower(q: C64, u: f64) -> C64 {
    if u < 0.0 {
        return ZERO;
    }
    -I * (-I * q * u).exp() * heaviside(u)
}

/// ∫_ℝ dΔ/2π e^{−iΔu}/(Δ − q), Im q > 0.
fn full_upper(q: C64, u: f64) -> C64 {
    if u > 0.0 {
        return ZERO;
    }
    I * (-I * q * u).exp() * heaviside(-u)
}

/// ∫_{−∞}^{−Ω} dΔ/2π e^{−iΔu}/(Δ − q) = −e^{−iqu} E1(−iu(Ω+q))/2π.
fn cut(q: C64, u: f64, omega: f64) -> C64 {
    // logarithmic at u = 0; callers sample off the fronts
    let u = if u == 0.0 { 1e-300 } else { u };
    let z = -I * u * (omega + q);
    -C64::from_polar(1.0, u * omega) * e1_scaled(z) / (2.0 * PI)
}

struct Job {
    channels: Vec<usize>,
    s0: f64,
    ds: f64,
    count: usize,
}

fn run_job(kernel: &Kernel, job: &Job, breaks: &[f64], opts: &QuadratureOptions) -> Result<Vec<C64>> {
    let nc = job.channels.len();
    let ns = job.count;
    let dim = nc * ns;
    let mut rem = vec![ZERO; kernel.channels.len()];
    let f = |dk: f64, out: &mut [C64]| {
        kernel.remainder(dk, &mut rem);
        let step = C64::from_polar(1.0, -dk * job.ds);
        let mut ph = C64::from_polar(1.0 / (2.0 * PI), -dk * job.s0);
        for si in 0..ns {
            for (k, &ci) in job.channels.iter().enumerate() {
                out[k * ns + si] = rem[ci] * ph;
            }
            ph *= step;
        }
    };
    let (vals, _) = quad::gauss_kronrod_breaks(f, dim, breaks, opts.abs_tol, opts.rel_tol, quad::MAX_INTERVALS)?;
    let mut out = vals;
    for (k, &ci) in job.channels.iter().enumerate() {
        for si in 0..ns {
            out[k * ns + si] += kernel.model_transform(ci, job.s0 + si as f64 * job.ds);
        }
    }
    Ok(out)
}

/// Initial panel edges: uniform panels fine enough for e^{−iΔs}, plus
/// geometric refinement towards the narrow resonances of the chain.
pub(crate) fn panel_breaks(spec: &ChainSpec, lo: f64, hi: f64, s_max: f64) -> Vec<f64> {
    let w0 = (PI / s_max.max(1.0)).min(0.5);
    let count = ((hi - lo) / w0).ceil() as usize;
    let mut b: Vec<f64> = (0..=count).map(|i| lo + (hi - lo) * i as f64 / count as f64).collect();
    let search = NonMarkovianSearch { keep: usize::MAX, ..Default::default() };
    if let Ok(poles) = nonmarkovian_poles(spec, search) {
        for p in poles.flat() {
            let w = p.im.abs();
            let mut off = w;
            while off < w0 {
                for x in [p.re - off, p.re + off] {
                    if x > lo && x < hi {
                        b.push(x);
                    }
                }
                off *= 2.0;
            }
            if p.re > lo && p.re < hi {
                b.push(p.re);
            }
        }
    }
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, c| (*a - *c).abs() < 1e-14);
    b
}

/// Grid spacing h with L an integer multiple of h.
pub fn grid_spacing(spec: &ChainSpec, h_max: Option<f64>) -> f64 {
    let l = spec.spacing();
    let cap = h_max.unwrap_or_else(|| (0.25 / spec.omega).min(l / 64.0));
    if l <= 0.0 {
        return cap;
    }
    l / (l / cap).ceil()
}

/// Exact-phase evolution by quadrature over scattering eigenstates.
///
/// Times are snapped to the spatial grid spacing h (L/h integer), which keeps
/// every propagation front on a cell edge; fields are sampled at cell centres
/// and integrated by the midpoint rule. P_w counts the outgoing field outside
/// the outer qubits up to the light cone plus one spacing; P_b the field
/// between the outer qubits.
pub fn evolve_nonmarkovian(spec: &ChainSpec, init: &InitialState, t_grid: &[f64], opts: &QuadratureOptions) -> Result<EvolutionResult> {
    let spec = validate(spec)?;
    let n = spec.n();
    init.check(n)?;
    if t_grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument("times must be finite and non-negative".into()));
    }
    let l = spec.spacing();
    let h = grid_spacing(&spec, opts.h_max);
    let m_l = (l / h).round() as i64;
    let snap = |t: f64| (t / h).round() * h;
    let times: Vec<f64> = t_grid.iter().map(|&t| snap(t)).collect();
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let full = opts.observables == Observables::Full;

    let mut channels: Vec<Channel> = (0..n).map(Channel::Qubit).collect();
    if full {
        channels.extend((1..=n).map(Channel::Right));
        channels.extend((0..n).map(Channel::Left));
    }
    let kernel = Kernel::new(&spec, init, opts.lower, channels);
    let lo = match opts.lower {
        LowerLimit::Physical => -spec.omega,
        LowerLimit::FullLine => -opts.w_tail,
    };
    let breaks = panel_breaks(&spec, lo, opts.w_tail, t_max + 2.0 * l);

    // field cells [−L + i h, −L + (i+1) h], i < cells
    let cells = if full { ((t_max + 2.0 * l) / h).round() as usize } else { 0 };
    let chunk = opts.chunk.max(1);
    let mut jobs = Vec::new();
    // qubit amplitudes at each requested time, one job per time sample block
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    for block in sorted.chunks(chunk) {
        for &t in block {
            jobs.push((Job { channels: (0..n).collect(), s0: t, ds: 0.0, count: 1 }, t));
        }
    }
    let field_channels: Vec<usize> = (n..kernel.channels.len()).collect();
    let mut start = 0;
    while start < cells {
        let count = chunk.min(cells - start);
        let s0 = -l + (start as f64 + 0.5) * h;
        jobs.push((Job { channels: field_channels.clone(), s0, ds: h, count }, f64::NAN));
        start += count;
    }
    // qubit jobs with a single sample each are merged per block to share nodes
    let jobs = merge_qubit_jobs(jobs, n, chunk);
    let results: Vec<Result<Vec<C64>>> = par::map(&jobs, |(job, _)| run_job(&kernel, job, &breaks, opts));

    let mut amp_at: Vec<(f64, Vec<C64>)> = Vec::new();
    let mut phi: Vec<Vec<C64>> = vec![Vec::with_capacity(cells); field_channels.len()];
    for ((job, _), res) in jobs.iter().zip(results) {
        let v = res?;
        if job.channels.len() == n && job.channels[0] == 0 && job.ds.is_nan() {
            unreachable!()
        }
        if job.channels.first() == Some(&0) {
            // qubit job: samples s0 + i·ds
            for si in 0..job.count {
                let t = job.s0 + si as f64 * job.ds;
                amp_at.push((t, (0..n).map(|m| v[m * job.count + si]).collect()));
            }
        } else {
            for k in 0..job.channels.len() {
                phi[k].extend_from_slice(&v[k * job.count..(k + 1) * job.count]);
            }
        }
    }
    let lookup = |t: f64| -> &Vec<C64> {
        &amp_at.iter().min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs())).unwrap().1
    };
    let pops: Vec<Vec<f64>> = times.iter().map(|&t| lookup(t).iter().map(|a| a.norm_sqr()).collect()).collect();
    let mut res = EvolutionResult::from_populations(times.clone(), pops, init.observed());
    if !full {
        return Ok(res);
    }

    // channel k: Right(r) is k = r − 1, Left(r) is k = n + r
    let dens = |k: usize, a: i64, b: i64| -> f64 {
        let a = a.max(0) as usize;
        let b = (b.max(0) as usize).min(phi[k].len());
        phi[k][a.min(b)..b].iter().map(|v| v.norm_sqr()).sum::<f64>() * h
    };
    for (i, &t) in times.iter().enumerate() {
        let it = (t / h).round() as i64;
        // edge index of s is (s + L)/h
        let mut pw = dens(n - 1, m_l, it + 2 * m_l) + dens(n, 0, it + m_l);
        let mut pb = 0.0;
        for r in 1..n {
            pb += dens(r - 1, it + m_l, it + 2 * m_l) + dens(n + r, it, it + m_l);
        }
        if n == 1 {
            pb = 0.0;
        }
        if !pw.is_finite() {
            pw = f64::NAN;
        }
        res.pw[i] = pw;
        res.pb[i] = pb;
    }

    let x = spec.positions();
    let reference = |r: usize| if r < n { x[r] } else { x[n - 1] + l };
    for &tf in &opts.field_times {
        let tf = snap(tf);
        if tf > t_max + 1e-12 {
            return Err(Error::InvalidArgument(format!("field time {tf} exceeds the evolution horizon {t_max}")));
        }
        let x0 = x[0] - tf - l;
        let count = ((x[n - 1] - x[0] + 2.0 * (tf + l)) / h).round() as usize;
        let mut xs = Vec::with_capacity(count);
        let mut right = Vec::with_capacity(count);
        let mut left = Vec::with_capacity(count);
        let sample = |k: usize, s: f64| -> C64 {
            let idx = ((s + l) / h - 0.5).round();
            if idx < 0.0 || idx as usize >= phi[k].len() {
                ZERO
            } else {
                phi[k][idx as usize]
            }
        };
        for i in 0..count {
            let xi = x0 + (i as f64 + 0.5) * h;
            let r = x.iter().filter(|&&q| q < xi).count();
            let rr = if r == 0 { ZERO } else { sample(r - 1, tf - (xi - reference(r))) };
            let ll = if r == n { ZERO } else { sample(n + r, tf + (xi - reference(r))) };
            xs.push(xi);
            right.push(rr);
            left.push(ll);
        }
        res.field.push(FieldSample { t: tf, x: xs, right, left });
    }
    Ok(res)
}

/// Collapse the per-time qubit jobs into jobs over uniform runs of samples.
fn merge_qubit_jobs(jobs: Vec<(Job, f64)>, n: usize, chunk: usize) -> Vec<(Job, f64)> {
    let (qubit, rest): (Vec<_>, Vec<_>) = jobs.into_iter().partition(|(j, _)| j.ds == 0.0 && j.channels.len() == n && j.channels[0] == 0 && j.count == 1);
    let ts: Vec<f64> = qubit.iter().map(|(j, _)| j.s0).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < ts.len() {
        // extend while spacing is uniform
        let mut j = i + 1;
        let ds = if j < ts.len() { ts[j] - ts[i] } else { 0.0 };
        while j < ts.len() && j - i < chunk && ((ts[j] - ts[j - 1]) - ds).abs() < 1e-9 * ds.abs().max(1e-12) {
            j += 1;
        }
        out.push((Job { channels: (0..n).collect(), s0: ts[i], ds: if j - i > 1 { ds } else { 1.0 }, count: j - i }, f64::NAN));
        i = j;
    }
    out.extend(rest);
    out
}

/// Position of the largest jump in slope of the emitted density in the right
/// exterior (chain centred at 0). One-sided differences over `w` cells
/// suppress smooth curvature by ~w relative to a true kink. Cells within
/// `guard` of the outer qubit and of the direct light front x = t are
/// skipped.
pub fn emission_kink(spec: &ChainSpec, sample: &FieldSample, w: usize, guard: f64) -> Option<f64> {
    let x_edge = spec.positions().last().copied()?;
    let d = sample.density();
    let w = w.max(1);
    let mut best: Option<(f64, f64)> = None;
    for i in w..d.len().saturating_sub(w) {
        let x = sample.x[i];
        if x <= x_edge + guard || x >= sample.t - guard {
            continue;
        }
        let jump = ((d[i + w] - d[i]) - (d[i] - d[i - w])).abs();
        if best.is_none_or(|(_, b)| jump > b) {
            best = Some((x, jump));
        }
    }
    best.map(|(x, _)| x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::linspace;

    fn middle(n: usize) -> InitialState {
        InitialState::excited(n, n / 2)
    }

    #[test]
    fn single_qubit_decay() {
        let spec = ChainSpec::identical(1, 0.3, 100.0);
        let ts = linspace(0.0, 3.0, 31);
        let r = evolve_markovian(&spec, &middle(1), &ts).unwrap();
        for (i, &t) in ts.iter().enumerate() {
            assert!((r.pe[i] - (-2.0 * t).exp()).abs() < 1e-13);
            assert!((r.pw[i] - (1.0 - (-2.0 * t).exp())).abs() < 1e-12);
        }
        let f = markovian_field(&spec, &middle(1), 2.0, &[-1.5, -0.5, 0.5, 1.0, 2.5]).unwrap();
        let d = f.density();
        for (x, v) in f.x.iter().zip(d) {
            let want = if x.abs() < 2.0 { (-2.0 * (2.0 - x.abs())).exp() } else { 0.0 };
            assert!((v - want).abs() < 1e-12, "x={x}: {v} vs {want}");
        }
    }

    #[test]
    fn three_qubit_half_pi_closed_forms() {
        let spec = ChainSpec::identical(3, PI / 2.0, 100.0);
        let ts = linspace(0.0, 10.0, 101);
        let r = evolve_markovian(&spec, &middle(3), &ts).unwrap();
        let s7 = 7f64.sqrt();
        for (i, &t) in ts.iter().enumerate() {
            let pe = (3.0 * (s7 * t).cos() - s7 * (s7 * t).sin() + 4.0) * (-t).exp() / 7.0;
            let ps = 4.0 / 7.0 * (-t).exp() * (s7 * t / 2.0).sin().powi(2);
            assert!((r.pe[i] - pe).abs() < 1e-10);
            assert!((r.populations[i][0] - ps).abs() < 1e-10);
            assert!((r.populations[i][2] - ps).abs() < 1e-10);
        }
        assert!(r.conservation_error() < 1e-10);
        // density just outside the chain equals P_e at the retarded time
        let f = markovian_field(&spec, &middle(3), 6.0, &[0.7, 2.2, -3.9]).unwrap();
        for (x, v) in f.x.iter().zip(f.density()) {
            let t = 6.0 - x.abs();
            let pe = (3.0 * (s7 * t).cos() - s7 * (s7 * t).sin() + 4.0) * (-t).exp() / 7.0;
            assert!((v - pe).abs() < 1e-10);
        }
    }

    #[test]
    fn three_qubit_pi_limits() {
        let spec = ChainSpec::identical(3, PI, 100.0);
        let r = evolve_markovian(&spec, &middle(3), &[0.0, 0.3, 50.0]).unwrap();
        let t: f64 = 0.3;
        assert!((r.pe[1] - ((-3.0 * t).exp() + 2.0).powi(2) / 9.0).abs() < 1e-12);
        assert!((r.populations[1][0] - ((-3.0 * t).exp() - 1.0).powi(2) / 9.0).abs() < 1e-12);
        assert!((r.pe[2] - 4.0 / 9.0).abs() < 1e-9);
        assert!((r.populations[2][0] - 1.0 / 9.0).abs() < 1e-9);
        assert!((r.pw[2] - 1.0 / 3.0).abs() < 1e-9);
        assert!(r.conservation_error() < 1e-12);
        let f = markovian_field(&spec, &middle(3), 1.0, &[0.25, -0.6]).unwrap();
        for (x, v) in f.x.iter().zip(f.density()) {
            assert!((v - (-6.0 * (1.0 - x.abs())).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn residue_and_coupling_routes_agree() {
        let spec = ChainSpec::new(vec![1.0, 1.4, 1.25, 1.1], vec![0.0, 0.2, -0.3, 0.1], 80.0, 1.1);
        let init = InitialState::normalized(vec![C64::new(0.3, 0.1), C64::new(-0.5, 0.0), C64::new(0.2, 0.6), C64::new(0.1, -0.2)]).unwrap();
        let amps = residue_amplitudes(&spec, &init).unwrap();
        let modes = coupling_matrix_rates(&spec);
        let beta = modes.expand(&init.amplitudes).unwrap();
        for &t in &[0.0, 0.4, 1.3, 3.0] {
            let a = modes.amplitudes(&beta, t);
            for m in 0..4 {
                let tol = if t == 0.0 { 1e-9 } else { 1e-11 };
                assert!((amps.qubits[m].eval(t) - a[m]).norm() < tol, "t={t} m={m} {} vs {}", amps.qubits[m].eval(t), a[m]);
            }
            if t > 0.0 {
                // edge fields are the coherent sum of the qubit dipoles
                let er: C64 = (0..4).map(|j| -I * spec.couplings[j].sqrt() * C64::from_polar(1.0, -spec.theta * j as f64) * a[j]).sum();
                let el: C64 = (0..4).map(|j| -I * spec.couplings[j].sqrt() * C64::from_polar(1.0, -spec.theta * (3 - j) as f64) * a[j]).sum();
                assert!((amps.right.eval(t).norm() - er.norm()).abs() < 1e-11);
                assert!((amps.left.eval(t).norm() - el.norm()).abs() < 1e-11);
            }
        }
        let r = evolve_markovian(&spec, &init, &linspace(0.0, 8.0, 17)).unwrap();
        assert!(r.conservation_error() < 1e-10);
    }

    #[test]
    fn bic_dark_overlap_is_constant() {
        let spec = ChainSpec::identical(3, PI, 100.0);
        let basis = dark_basis(&spec, 1).unwrap();
        let d2 = basis.dark.iter().find(|v| v[1].norm() > 0.1).unwrap();
        let r = evolve_bic(&spec, &middle(3), 1, &[0.0, 1.0, 20.0]).unwrap();
        assert!((r.pe[2] - 4.0 / 9.0).abs() < 1e-12);
        // |⟨D2|e_0⟩| = 2/√6
        assert!((d2[1].norm() - 2.0 / 6f64.sqrt()).abs() < 1e-12);
        assert!(matches!(evolve_bic(&ChainSpec::identical(3, 3.0, 100.0), &middle(3), 1, &[0.0]), Err(Error::NotAtBicPoint(_))));
    }

    #[test]
    fn bic_limit_through_residues() {
        // residue-route overlap with D2 approaches 2/√6 as θ → π
        let spec_pi = ChainSpec::identical(3, PI, 100.0);
        let basis = dark_basis(&spec_pi, 1).unwrap();
        let d2 = basis.dark.iter().find(|v| v[1].norm() > 0.1).unwrap().clone();
        let target = 2.0 / 6f64.sqrt();
        let mut prev = f64::INFINITY;
        for &delta in &[1e-1, 1e-2, 1e-3, 1e-4] {
            let spec = ChainSpec::identical(3, PI - delta, 100.0);
            let amps = residue_amplitudes(&spec, &middle(3)).unwrap();
            let mut worst: f64 = 0.0;
            for &t in &linspace(0.0, 5.0, 51) {
                let a: Vec<C64> = amps.qubits.iter().map(|q| q.eval(t)).collect();
                let ov: C64 = (0..3).map(|j| d2[j].conj() * a[j]).sum();
                worst = worst.max((ov.norm() - target).abs());
            }
            assert!(worst < prev, "delta={delta}: {worst}");
            prev = worst;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn two_qubit_dark_pair() {
        let spec = ChainSpec::identical(2, PI, 100.0);
        let s = InitialState::normalized(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        let r = evolve_markovian(&spec, &s, &[0.0, 2.0, 10.0]).unwrap();
        for p in &r.populations {
            assert!((p[0] - 0.5).abs() < 1e-14 && (p[1] - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_pair_closed_form() {
        let spec = ChainSpec::identical(2, 0.4 * PI, 1000.0);
        let s0 = two_qubit_symmetric_state(&spec, 0.0).unwrap();
        assert!((s0.qubit_amplitude() - C64::new(0.5f64.sqrt(), 0.0)).norm() < 1e-15);
        assert_eq!(s0.right_amplitude(0.3), ZERO);
        let init = InitialState::normalized(vec![C64::new(1.0, 0.0); 2]).unwrap();
        let r = evolve_markovian(&spec, &init, &[1.3]).unwrap();
        let s = two_qubit_symmetric_state(&spec, 1.3).unwrap();
        assert!((r.pe[0] - s.qubit_amplitude().norm_sqr()).abs() < 1e-12);
        // field norm agrees with the emitted probability up to the O(Γ L) offset
        assert!((s.field_norm_sqr() - r.pw[0]).abs() < 1e-2);
    }

    #[test]
    fn parity_eigenstates_keep_their_parity() {
        let spec = ChainSpec::identical(5, 0.37 * PI, 100.0);
        let odd = InitialState::normalized(vec![C64::new(1.0, 0.0), C64::new(0.5, 0.0), ZERO, C64::new(-0.5, 0.0), C64::new(-1.0, 0.0)]).unwrap();
        let amps = residue_amplitudes(&spec, &odd).unwrap();
        for &t in &[0.5, 2.0] {
            let a: Vec<C64> = amps.qubits.iter().map(|q| q.eval(t)).collect();
            for j in 0..5 {
                assert!((a[j] + a[4 - j]).norm() < 1e-12);
            }
        }
    }

    fn qubits_only(lower: LowerLimit) -> QuadratureOptions {
        QuadratureOptions { lower, observables: Observables::Qubits, ..Default::default() }
    }

    #[test]
    fn full_line_single_qubit_is_exponential() {
        let spec = ChainSpec::identical(1, 0.3, 100.0);
        let r = evolve_nonmarkovian(&spec, &middle(1), &linspace(0.0, 1.0, 11), &qubits_only(LowerLimit::FullLine)).unwrap();
        for (t, p) in r.times.iter().zip(&r.pe) {
            assert!((p - (-2.0 * t).exp()).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn physical_cutoff_truncates_initial_norm() {
        // ∫_{−Ω}^{∞} dΔ/π 1/(Δ²+1) = 1 − atan(1/Ω)/π
        for omega in [50.0, 100.0] {
            let spec = ChainSpec::identical(1, 0.3, omega);
            let r = evolve_nonmarkovian(&spec, &middle(1), &[0.0], &qubits_only(LowerLimit::Physical)).unwrap();
            let want = (1.0 - (1.0 / omega).atan() / PI).powi(2);
            assert!((r.pe[0] - want).abs() < 1e-9, "Ω={omega}: {} vs {want}", r.pe[0]);
        }
    }

    #[test]
    fn side_qubits_wait_for_the_light() {
        let spec = ChainSpec::identical(3, 4.01 * PI, 100.0);
        let l = spec.spacing();
        let ts = linspace(0.0, 0.9 * l, 10);
        let r = evolve_nonmarkovian(&spec, &middle(3), &ts, &qubits_only(LowerLimit::FullLine)).unwrap();
        for p in &r.ps {
            assert!(*p < 1e-8, "{p}");
        }
    }

    #[test]
    fn remainder_decays_like_inverse_square() {
        // the subtracted model captures the 1/Δ and 1/Δ² tails
        let spec = ChainSpec::new(vec![1.0, 1.3, 1.1], vec![0.0, 0.2, -0.1], 100.0, 4.01 * PI);
        let init = InitialState::normalized(vec![C64::new(0.2, 0.1), C64::new(1.0, 0.0), C64::new(-0.3, 0.4)]).unwrap();
        let mut ch: Vec<Channel> = (0..3).map(Channel::Qubit).collect();
        ch.extend((1..=3).map(Channel::Right));
        ch.extend((0..3).map(Channel::Left));
        let k = Kernel::new(&spec, &init, LowerLimit::FullLine, ch);
        let mut out = vec![ZERO; 9];
        for dk in [-900.0, -300.0, 250.0, 800.0, 3000.0] {
            k.remainder(dk, &mut out);
            for (c, v) in out.iter().enumerate() {
                assert!(v.norm() * dk * dk < 50.0, "Δ={dk} channel {c}: {}", v.norm());
            }
        }
    }

    #[test]
    fn model_transform_matches_quadrature() {
        // ∫ dΔ/2π e^{−iΔu}/((Δ−p1)(Δ−p2)) on [−Ω, ∞) against brute force
        let p1 = C64::new(-0.3, -1.0);
        let p2 = C64::new(0.1, 1.0);
        let omega = 20.0;
        for u in [-0.7, 0.4, 1.3] {
            let closed = (full_lower(p1, u) - full_upper(p2, u)) / (p1 - p2) - (cut(p1, u, omega) - cut(p2, u, omega)) / (p1 - p2);
            let f = |x: f64, o: &mut [C64]| {
                // Δ = −Ω + x/(1−x) maps [0,1) onto [−Ω, ∞)
                let d = -omega + x / (1.0 - x);
                let jac = 1.0 / (1.0 - x).powi(2);
                o[0] = C64::from_polar(1.0, -d * u) / ((d - p1) * (d - p2)) * jac / (2.0 * PI);
            };
            let breaks: Vec<f64> = (0..=4000).map(|i| i as f64 / 4000.0 * 0.9999).collect();
            let (v, _) = quad::gauss_kronrod_breaks(f, 1, &breaks, 1e-13, 1e-11, quad::MAX_INTERVALS).unwrap();
            // tail beyond the last break is O(1/Δ_max)
            assert!((v[0] - closed).norm() < 1e-5, "u={u}: {} vs {closed}", v[0]);
        }
    }
}
