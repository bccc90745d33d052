//! Scattering eigenstates {t_j, r_j, e_j} of a chain by transfer matrices.
//!
//! Conventions: in region j (between qubits j−1 and j, j = 1..N+1) the field
//! is `t_j e^{ik(x−x_j)} + r_j e^{−ik(x−x_j)}`, with the fictitious
//! x_{N+1} = x_N + L. A left-incident state has t_1 = 1 and r_{N+1} = 0. The
//! cell matrix is
//!
//! ```text
//! T_j = [[1 + iJ/d, iJ/d], [−iJ/d, 1 − iJ/d]] · diag(e^{−iφ}, e^{iφ}),   d = Δk + δ_j
//! ```
//!
//! with φ = θ (Markovian) or φ = (Δk + Ω)L (exact phase).

use crate::error::{Error, Result};
use crate::model::{ChainSpec, Direction, ModePoint, Regime};
use crate::poly::{cluster, Poly, CLUSTER_TOL};
use crate::ratfun::RationalFn;
use num_complex::Complex64 as C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m: [[C64; 2]; 2],
}

impl TransferMatrix {
    pub fn identity() -> Self {
        TransferMatrix { m: [[ONE, ZERO], [ZERO, ONE]] }
    }

    pub fn det(&self) -> C64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn mul(&self, o: &TransferMatrix) -> TransferMatrix {
        let a = &self.m;
        let b = &o.m;
        TransferMatrix {
            m: [
                [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
                [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
            ],
        }
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [self.m[0][0] * v[0] + self.m[0][1] * v[1], self.m[1][0] * v[0] + self.m[1][1] * v[1]]
    }
}

/// e^{iφ} for the inter-qubit propagation phase.
pub fn phase_factor(spec: &ChainSpec, dk: C64, regime: Regime) -> C64 {
    match regime {
        Regime::Markovian => C64::from_polar(1.0, spec.theta),
        Regime::ExactPhase => (I * (dk + spec.omega) * spec.spacing()).exp(),
    }
}

fn cell(j: f64, d: C64, eiphi: C64) -> TransferMatrix {
    let g = I * j / d;
    let emi = 1.0 / eiphi;
    TransferMatrix { m: [[(ONE + g) * emi, g * eiphi], [-g * emi, (ONE - g) * eiphi]] }
}

/// Transfer matrix of cell `j` (0-based).
pub fn unit_cell(spec: &ChainSpec, j: usize, mode: ModePoint, regime: Regime) -> Result<TransferMatrix> {
    let d = mode.delta_k + spec.detunings[j];
    if d == ZERO {
        return Err(Error::OnQubitResonancePole(mode.delta_k.re, j + 1));
    }
    Ok(cell(spec.couplings[j], d, phase_factor(spec, mode.delta_k, regime)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringSolution {
    /// t_1 .. t_{N+1}
    pub t: Vec<C64>,
    /// r_1 .. r_{N+1}
    pub r: Vec<C64>,
    /// e_1 .. e_N
    pub e: Vec<C64>,
    pub mode: ModePoint,
    pub regime: Regime,
}

impl ScatteringSolution {
    pub fn n(&self) -> usize {
        self.e.len()
    }

    /// Transmission amplitude past the chain (left incidence) or the
    /// reflection back into the right lead (right incidence).
    pub fn transmission(&self) -> C64 {
        match self.mode.direction {
            Direction::Left => self.t[self.n()],
            Direction::Right => self.r[0],
        }
    }

    pub fn reflection(&self) -> C64 {
        match self.mode.direction {
            Direction::Left => self.r[0],
            Direction::Right => self.t[self.n()],
        }
    }
}

/// Left-incident solve on raw (couplings, detunings) with a given e^{iφ}.
fn solve_left(couplings: &[f64], detunings: &[f64], dk: C64, eiphi: C64) -> Result<(Vec<C64>, Vec<C64>, Vec<C64>)> {
    let n = couplings.len();
    // w^{(j)} = T_j ⋯ T_N (1, 0)ᵀ, stored with a running log-scale
    let mut w = vec![[ZERO; 2]; n + 1];
    let mut s = vec![0.0; n + 1];
    w[n] = [ONE, ZERO];
    for j in (0..n).rev() {
        let d = dk + detunings[j];
        if d == ZERO {
            return Err(Error::OnQubitResonancePole(dk.re, j + 1));
        }
        let v = cell(couplings[j], d, eiphi).apply(w[j + 1]);
        let m = v[0].norm().max(v[1].norm());
        if m == 0.0 || !m.is_finite() {
            return Err(Error::SingularTransferProduct(dk.re));
        }
        w[j] = [v[0] / m, v[1] / m];
        s[j] = s[j + 1] + m.ln();
    }
    let w11 = w[0][0];
    if w11 == ZERO {
        return Err(Error::SingularTransferProduct(dk.re));
    }
    let mut t = vec![ZERO; n + 1];
    let mut r = vec![ZERO; n + 1];
    for j in 0..=n {
        let f = (s[j] - s[0]).exp() / w11;
        t[j] = w[j][0] * f;
        r[j] = w[j][1] * f;
    }
    t[0] = ONE;
    let emi = 1.0 / eiphi;
    let e = (0..n)
        .map(|j| {
            // continuity: t_j + r_j equals the field just right of qubit j
            let field = t[j + 1] * emi + r[j + 1] * eiphi;
            couplings[j].sqrt() * field / (dk + detunings[j])
        })
        .collect();
    Ok((t, r, e))
}

/// Full set of amplitudes for one scattering mode.
pub fn solve_chain(spec: &ChainSpec, mode: ModePoint, regime: Regime) -> Result<ScatteringSolution> {
    let eiphi = phase_factor(spec, mode.delta_k, regime);
    match mode.direction {
        Direction::Left => {
            let (t, r, e) = solve_left(&spec.couplings, &spec.detunings, mode.delta_k, eiphi)?;
            Ok(ScatteringSolution { t, r, e, mode, regime })
        }
        Direction::Right => {
            let left = ScatteringSolution {
                t: Vec::new(),
                r: Vec::new(),
                e: Vec::new(),
                mode: ModePoint::left(mode.delta_k),
                regime,
            };
            mirror(spec, &left)
        }
    }
}

/// Solution for the opposite incidence direction, built through the parity
/// map j ↦ N−j+1, x ↦ −x (left and right movers exchanged).
pub fn mirror(spec: &ChainSpec, sol: &ScatteringSolution) -> Result<ScatteringSolution> {
    let n = spec.n();
    let dk = sol.mode.delta_k;
    let eiphi = phase_factor(spec, dk, sol.regime);
    let (couplings, detunings): (Vec<f64>, Vec<f64>) = match sol.mode.direction {
        // a right-incident state is a left-incident state of the mirrored chain
        Direction::Left => (spec.couplings.iter().rev().cloned().collect(), spec.detunings.iter().rev().cloned().collect()),
        Direction::Right => (spec.couplings.clone(), spec.detunings.clone()),
    };
    let (tm, rm, em) = solve_left(&couplings, &detunings, dk, eiphi)?;
    let new_dir = match sol.mode.direction {
        Direction::Left => Direction::Right,
        Direction::Right => Direction::Left,
    };
    if new_dir == Direction::Left {
        return Ok(ScatteringSolution {
            t: tm,
            r: rm,
            e: em,
            mode: ModePoint { delta_k: dk, direction: Direction::Left },
            regime: sol.regime,
        });
    }
    // region j of the original is region N+2−j of the mirror, whose amplitudes
    // are referenced one cell to the left
    let mut t = vec![ZERO; n + 1];
    let mut r = vec![ZERO; n + 1];
    for j in 0..=n {
        let jm = n - j;
        t[j] = rm[jm] * eiphi;
        r[j] = tm[jm] / eiphi;
    }
    let e = (0..n).map(|j| em[n - 1 - j]).collect();
    Ok(ScatteringSolution { t, r, e, mode: ModePoint { delta_k: dk, direction: Direction::Right }, regime: sol.regime })
}

/// P11 = (Π_j d_j)·T11, the entire characteristic function whose zeros are
/// the poles of every scattering amplitude; returned with its Δk-derivative.
pub fn characteristic_with_derivative(spec: &ChainSpec, dk: C64, regime: Regime) -> (C64, C64) {
    let l = spec.spacing();
    let eiphi = phase_factor(spec, dk, regime);
    let emi = 1.0 / eiphi;
    // d/dΔ e^{±iφ}
    let (demi, deiphi) = match regime {
        Regime::Markovian => (ZERO, ZERO),
        Regime::ExactPhase => (-I * l * emi, I * l * eiphi),
    };
    let mut v = [ONE, ZERO];
    let mut dv = [ZERO, ZERO];
    for j in (0..spec.n()).rev() {
        let jj = spec.couplings[j];
        let d = dk + spec.detunings[j];
        let ij = I * jj;
        // C = [[(d+iJ)e^{−iφ}, iJ e^{iφ}], [−iJ e^{−iφ}, (d−iJ) e^{iφ}]]
        let c = [[(d + ij) * emi, ij * eiphi], [-ij * emi, (d - ij) * eiphi]];
        let dc = [[emi + (d + ij) * demi, ij * deiphi], [-ij * demi, eiphi + (d - ij) * deiphi]];
        let nv = [c[0][0] * v[0] + c[0][1] * v[1], c[1][0] * v[0] + c[1][1] * v[1]];
        let ndv = [
            dc[0][0] * v[0] + dc[0][1] * v[1] + c[0][0] * dv[0] + c[0][1] * dv[1],
            dc[1][0] * v[0] + dc[1][1] * v[1] + c[1][0] * dv[0] + c[1][1] * dv[1],
        ];
        v = nv;
        dv = ndv;
    }
    (v[0], dv[0])
}

/// Markovian scattering amplitudes as rational functions of Δk sharing the
/// denominator P11 (degree N).
#[derive(Debug, Clone)]
pub struct MarkovianRational {
    pub den: Poly,
    pub poles: Vec<(C64, usize)>,
    /// t_{N+1}
    pub t_out: RationalFn,
    pub r1: RationalFn,
    /// e_1..e_N
    pub e: Vec<RationalFn>,
}

fn pmat_mul(a: &[[Poly; 2]; 2], b: &[[Poly; 2]; 2]) -> [[Poly; 2]; 2] {
    let e = |i: usize, j: usize| &(&a[i][0] * &b[0][j]) + &(&a[i][1] * &b[1][j]);
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

fn markovian_polys(couplings: &[f64], detunings: &[f64], theta: f64) -> (Poly, Poly, Poly, Vec<Poly>) {
    let n = couplings.len();
    let eiphi = C64::from_polar(1.0, theta);
    let emi = eiphi.conj();
    // suffix products Q^{(j)} = C_j ⋯ C_N
    let mut q: Vec<[[Poly; 2]; 2]> = vec![[[Poly::one(), Poly::zero()], [Poly::zero(), Poly::one()]]; n + 1];
    for j in (0..n).rev() {
        let ij = I * couplings[j];
        let dj = detunings[j];
        let c = [
            [Poly::linear((dj + ij) * emi, emi), Poly::constant(ij * eiphi)],
            [Poly::constant(-ij * emi), Poly::linear((dj - ij) * eiphi, eiphi)],
        ];
        q[j] = pmat_mul(&c, &q[j + 1]);
    }
    let p11 = q[0][0][0].clone();
    let p21 = q[0][1][0].clone();
    let mut prefix = Poly::one();
    let mut e = Vec::with_capacity(n);
    for j in 0..n {
        let field = &q[j + 1][0][0].scale(emi) + &q[j + 1][1][0].scale(eiphi);
        e.push((&field * &prefix).scale(C64::new(couplings[j].sqrt(), 0.0)));
        prefix = &prefix * &Poly::linear(C64::new(detunings[j], 0.0), ONE);
    }
    // prefix is now Π d_j, the numerator of t_{N+1}
    (p11, p21, prefix, e)
}

/// Poles of the chain: roots of P11. Companion-matrix roots are refined
/// simultaneously by Aberth iteration on the pointwise product, which keeps
/// nearly coincident (near-dark) poles apart.
pub fn chain_poles(spec: &ChainSpec, den: &Poly) -> Result<Vec<(C64, usize)>> {
    let raw = den.roots()?;
    let refined = aberth(|z| characteristic_with_derivative(spec, z, Regime::Markovian), raw);
    Ok(cluster(&refined, CLUSTER_TOL))
}

/// Simultaneous Aberth–Ehrlich refinement of all zeros of an analytic
/// function with exactly `z.len()` zeros near the starting points.
pub fn aberth<F: Fn(C64) -> (C64, C64)>(f: F, mut z: Vec<C64>) -> Vec<C64> {
    let n = z.len();
    for _ in 0..100 {
        let mut biggest: f64 = 0.0;
        for k in 0..n {
            let (v, d) = f(z[k]);
            if v == ZERO {
                continue;
            }
            let w = v / d;
            let mut s = ZERO;
            for j in 0..n {
                if j != k {
                    let diff = z[k] - z[j];
                    if diff != ZERO {
                        s += 1.0 / diff;
                    }
                }
            }
            let corr = w / (ONE - w * s);
            if !(corr.re.is_finite() && corr.im.is_finite()) {
                continue;
            }
            z[k] -= corr;
            biggest = biggest.max(corr.norm() / z[k].norm().max(1.0));
        }
        if biggest < 1e-15 {
            break;
        }
    }
    z
}

/// Newton refinement on the pointwise characteristic function; rejects steps
/// that do not reduce its modulus.
pub fn polish(spec: &ChainSpec, mut z: C64, regime: Regime) -> C64 {
    let (mut f, _) = characteristic_with_derivative(spec, z, regime);
    for _ in 0..20 {
        let (v, d) = characteristic_with_derivative(spec, z, regime);
        if d == ZERO || v == ZERO {
            break;
        }
        let step = v / d;
        let cand = z - step;
        let (fc, _) = characteristic_with_derivative(spec, cand, regime);
        if fc.norm() < f.norm() {
            z = cand;
            f = fc;
            if step.norm() <= 1e-16 * z.norm().max(1.0) {
                break;
            }
        } else {
            break;
        }
    }
    z
}

fn assemble(couplings: &[f64], detunings: &[f64], theta: f64, poles: Vec<(C64, usize)>, den: Poly) -> MarkovianRational {
    let (_, p21, prod_d, e) = markovian_polys(couplings, detunings, theta);
    let lead = den.leading();
    let rf = |num: Poly| RationalFn::from_factored(num, lead, poles.clone());
    MarkovianRational {
        t_out: rf(prod_d),
        r1: rf(p21),
        e: e.into_iter().map(rf).collect(),
        den,
        poles,
    }
}

/// Rational-function form of the left-incident Markovian amplitudes.
pub fn markovian_rational(spec: &ChainSpec) -> Result<MarkovianRational> {
    let (p11, _, _, _) = markovian_polys(&spec.couplings, &spec.detunings, spec.theta);
    let poles = chain_poles(spec, &p11)?;
    Ok(assemble(&spec.couplings, &spec.detunings, spec.theta, poles, p11))
}

/// Right-incident Markovian amplitudes, in the original qubit labelling.
/// `t_out` is the amplitude leaving to the left, `r1` the one reflected back
/// to the right (both referenced at the nearest outer qubit).
pub fn markovian_rational_right(spec: &ChainSpec) -> Result<MarkovianRational> {
    let c: Vec<f64> = spec.couplings.iter().rev().cloned().collect();
    let d: Vec<f64> = spec.detunings.iter().rev().cloned().collect();
    let (p11, _, _, _) = markovian_polys(&c, &d, spec.theta);
    let mirrored = ChainSpec { couplings: c.clone(), detunings: d.clone(), omega: spec.omega, theta: spec.theta };
    let poles = chain_poles(&mirrored, &p11)?;
    let mut m = assemble(&c, &d, spec.theta, poles, p11);
    m.e.reverse();
    Ok(m)
}
