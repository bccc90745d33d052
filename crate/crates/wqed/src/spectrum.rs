//! Collective decay rates (poles), dark/bright subspaces at θ = nπ, Fano
//! minima and the coupling-matrix route to the Markovian spectrum.

use crate::error::{Error, Result};
use crate::linalg::{self, EigenCluster};
use crate::model::{ChainSpec, Regime};
use crate::optimize;
use crate::poly::{cluster, Poly};
use crate::scattering::{self, characteristic_with_derivative, markovian_rational};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoleClass {
    Symmetric,
    Antisymmetric,
    Unclassified,
    NonMarkovian,
}

impl PoleClass {
    pub fn label(self) -> &'static str {
        match self {
            PoleClass::Symmetric => "symmetric",
            PoleClass::Antisymmetric => "antisymmetric",
            PoleClass::Unclassified => "unclassified",
            PoleClass::NonMarkovian => "non-markovian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    pub p: C64,
    pub multiplicity: usize,
    pub class: PoleClass,
}

impl Pole {
    /// Γ = 2ip.
    pub fn rate(&self) -> C64 {
        2.0 * I * self.p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet {
    pub poles: Vec<Pole>,
    pub theta: f64,
    pub omega: f64,
}

impl PoleSet {
    pub fn rates(&self) -> Vec<C64> {
        self.poles.iter().map(Pole::rate).collect()
    }

    /// Pole count with multiplicity.
    pub fn count(&self) -> usize {
        self.poles.iter().map(|p| p.multiplicity).sum()
    }

    /// Poles with Im p above `tol` (none are expected).
    pub fn lhp_violations(&self, tol: f64) -> Vec<C64> {
        self.poles.iter().filter(|p| p.p.im > tol).map(|p| p.p).collect()
    }

    /// Flattened pole list, each repeated by multiplicity.
    pub fn flat(&self) -> Vec<C64> {
        self.poles.iter().flat_map(|p| std::iter::repeat_n(p.p, p.multiplicity)).collect()
    }
}

/// Mirror operator: (P̂v)_j = v_{N+1−j}.
pub fn parity(v: &DVector<C64>) -> DVector<C64> {
    let n = v.len();
    DVector::from_fn(n, |i, _| v[n - 1 - i])
}

/// Parity label of a vector: +1 / −1 if ‖P̂v ∓ v‖ < tol, else None.
pub fn parity_of(v: &DVector<C64>, tol: f64) -> Option<i8> {
    let pv = parity(v);
    let nv = v.norm();
    if (&pv - v).norm() < tol * nv {
        Some(1)
    } else if (&pv + v).norm() < tol * nv {
        Some(-1)
    } else {
        None
    }
}

/// The collective coupling matrix, generalized to non-identical chains:
/// 𝐉_jk = √(J_j J_k) e^{iθ|j−k|} − iδ_j δ_jk, so that α̇ = −𝐉α in the
/// Markovian limit.
pub fn coupling_matrix(spec: &ChainSpec) -> DMatrix<C64> {
    let n = spec.n();
    DMatrix::from_fn(n, n, |j, k| {
        let g = (spec.couplings[j] * spec.couplings[k]).sqrt() * C64::from_polar(1.0, spec.theta * j.abs_diff(k) as f64);
        if j == k {
            g - I * spec.detunings[j]
        } else {
            g
        }
    })
}

/// One decay mode of the coupling matrix.
#[derive(Debug, Clone)]
pub struct Mode {
    /// Γ = 2λ
    pub rate: C64,
    pub vector: DVector<C64>,
    pub parity: Option<i8>,
}

impl Mode {
    /// Pole p = −iΓ/2.
    pub fn pole(&self) -> C64 {
        -0.5 * I * self.rate
    }
}

/// Decay modes plus the instrumentation record of the parity conjecture:
/// every eigenvector should be a parity eigenvector.
#[derive(Debug, Clone)]
pub struct CouplingModes {
    pub modes: Vec<Mode>,
    /// Indices of modes that are not parity eigenvectors (logged, not fatal).
    pub parity_failures: Vec<usize>,
    pub poles: PoleSet,
}

impl CouplingModes {
    /// Expansion coefficients β with α(0) = Σ_l β_l ξ_l.
    pub fn expand(&self, alpha0: &[C64]) -> Result<Vec<C64>> {
        let n = alpha0.len();
        if self.modes.len() != n {
            return Err(Error::InvalidArgument(format!("coupling matrix is defective: {} of {} eigenvectors", self.modes.len(), n)));
        }
        let xi = DMatrix::from_fn(n, n, |i, l| self.modes[l].vector[i]);
        let b = DVector::from_column_slice(alpha0);
        Ok(linalg::solve(&xi, &b)?.iter().cloned().collect())
    }

    /// α(t) = Σ_l β_l e^{−Γ_l t/2} ξ_l.
    pub fn amplitudes(&self, beta: &[C64], t: f64) -> Vec<C64> {
        let n = beta.len();
        let mut a = vec![C64::new(0.0, 0.0); n];
        for (m, b) in self.modes.iter().zip(beta) {
            let f = b * (-0.5 * m.rate * t).exp();
            for (ai, xi) in a.iter_mut().zip(m.vector.iter()) {
                *ai += f * xi;
            }
        }
        a
    }
}

/// Parity-adapted orthonormal basis of a degenerate eigenspace.
fn parity_adapt(vs: &[DVector<C64>]) -> Vec<DVector<C64>> {
    let mut cands = Vec::new();
    for v in vs {
        let pv = parity(v);
        cands.push((v + &pv) * C64::new(0.5, 0.0));
    }
    for v in vs {
        let pv = parity(v);
        cands.push((v - &pv) * C64::new(0.5, 0.0));
    }
    let mut out = linalg::orthonormalize(&cands, 1e-8);
    out.truncate(vs.len());
    out
}

/// Collective decay modes from the eigen-decomposition of the coupling
/// matrix; Γ_l = 2λ_l.
pub fn coupling_matrix_rates(spec: &ChainSpec) -> CouplingModes {
    let j = coupling_matrix(spec);
    let clusters: Vec<EigenCluster> = linalg::eigen_clusters(&j);
    let mut modes = Vec::new();
    let mut poles = Vec::new();
    for c in clusters {
        let vectors = if c.vectors.len() > 1 { parity_adapt(&c.vectors) } else { c.vectors };
        let mut labels = Vec::new();
        for v in vectors {
            let par = parity_of(&v, 1e-8);
            labels.push(par);
            modes.push(Mode { rate: 2.0 * c.value, vector: v, parity: par });
        }
        let class = class_of(&labels);
        let mult = labels.len().max(1);
        poles.push(Pole { p: -I * c.value, multiplicity: mult, class });
    }
    let parity_failures = modes.iter().enumerate().filter(|(_, m)| m.parity.is_none()).map(|(i, _)| i).collect();
    CouplingModes { modes, parity_failures, poles: PoleSet { poles, theta: spec.theta, omega: spec.omega } }
}

fn class_of(labels: &[Option<i8>]) -> PoleClass {
    match labels.first() {
        Some(Some(s)) if labels.iter().all(|l| *l == Some(*s)) => {
            if *s > 0 {
                PoleClass::Symmetric
            } else {
                PoleClass::Antisymmetric
            }
        }
        _ => PoleClass::Unclassified,
    }
}

/// Markovian poles: the N roots of the common denominator P11 of the
/// scattering amplitudes. For mirror-symmetric chains each pole is labelled
/// by the parity of the matching coupling-matrix mode.
pub fn markovian_poles(spec: &ChainSpec) -> Result<PoleSet> {
    let mr = markovian_rational(spec)?;
    let symmetric = spec.couplings.iter().zip(spec.couplings.iter().rev()).all(|(a, b)| a == b)
        && spec.detunings.iter().zip(spec.detunings.iter().rev()).all(|(a, b)| a == b);
    let modes = if symmetric { Some(coupling_matrix_rates(spec)) } else { None };
    let poles = mr
        .poles
        .iter()
        .map(|&(p, m)| {
            let class = match &modes {
                Some(cm) => {
                    let scale = p.norm().max(1.0);
                    let labels: Vec<Option<i8>> = cm
                        .modes
                        .iter()
                        .filter(|md| (md.pole() - p).norm() <= 1e-6 * scale)
                        .map(|md| md.parity)
                        .collect();
                    class_of(&labels)
                }
                None => PoleClass::Unclassified,
            };
            Pole { p, multiplicity: m, class }
        })
        .collect();
    Ok(PoleSet { poles, theta: spec.theta, omega: spec.omega })
}

/// The full transcendental characteristic function, normalized as a
/// polynomial in E = e^{i(Δk+Ω)L}: e^{iNφ}·P11(Δk). For three identical
/// qubits this is the familiar
/// `2iE²(Δk+i) + E⁴(1+iΔk) + i(Δk+i)³` up to a constant factor.
pub fn characteristic_value(spec: &ChainSpec, delta_k: C64) -> C64 {
    let (f, _) = characteristic_with_derivative(spec, delta_k, Regime::ExactPhase);
    let phi = (delta_k + spec.omega) * spec.spacing();
    f * (I * phi * spec.n() as f64).exp()
}

/// Search parameters for [`nonmarkovian_poles`].
#[derive(Debug, Clone, Copy)]
pub struct NonMarkovianSearch {
    /// Radius of the search disk in Δk, centred at 0. `None` → 2N + 4.
    pub radius: Option<f64>,
    /// Taylor truncation order; `None` → adaptive.
    pub truncation: Option<usize>,
    /// Number of lowest-Re(Γ) poles returned.
    pub keep: usize,
}

impl Default for NonMarkovianSearch {
    fn default() -> Self {
        NonMarkovianSearch { radius: None, truncation: None, keep: 3 }
    }
}

/// P11 as Σ_m c_m(Δk) E^m, E = e^{iφ}; index m + N.
fn exp_poly_p11(spec: &ChainSpec) -> Vec<Poly> {
    let n = spec.n();
    let width = 2 * n + 1;
    let mut v0 = vec![Poly::zero(); width];
    let mut v1 = vec![Poly::zero(); width];
    v0[n] = Poly::one();
    for j in (0..n).rev() {
        let ij = I * spec.couplings[j];
        let d = Poly::linear(C64::new(spec.detunings[j], 0.0), C64::new(1.0, 0.0));
        let dp = &d + &Poly::constant(ij);
        let dm = &d - &Poly::constant(ij);
        let mut n0 = vec![Poly::zero(); width];
        let mut n1 = vec![Poly::zero(); width];
        for m in 0..width {
            if !v0[m].is_zero() {
                // E^{−1} terms shift m down, E terms shift up
                n0[m - 1] = &n0[m - 1] + &(&dp * &v0[m]);
                n1[m - 1] = &n1[m - 1] + &v0[m].scale(-ij);
            }
            if !v1[m].is_zero() {
                n0[m + 1] = &n0[m + 1] + &v1[m].scale(ij);
                n1[m + 1] = &n1[m + 1] + &(&dm * &v1[m]);
            }
        }
        v0 = n0;
        v1 = n1;
    }
    v0
}

/// Taylor coefficients (in z = Δk/R) of P11 truncated at order `order`.
fn taylor_p11(spec: &ChainSpec, radius: f64, order: usize) -> Poly {
    let n = spec.n() as i64;
    let l = spec.spacing();
    let terms = exp_poly_p11(spec);
    let mut acc = vec![C64::new(0.0, 0.0); order + 1];
    for (idx, c) in terms.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let m = idx as i64 - n;
        let pref = C64::from_polar(1.0, m as f64 * spec.theta);
        // e^{imLΔ} = Σ_k (imLR)^k/k! z^k
        let a = I * (m as f64 * l * radius);
        let mut series = Vec::with_capacity(order + 1);
        let mut s = pref;
        for k in 0..=order {
            series.push(s);
            s = s * a / (k + 1) as f64;
        }
        // c_m(Rz)
        let mut rk = 1.0;
        let cz: Vec<C64> = c
            .coeffs()
            .iter()
            .map(|&v| {
                let out = v * rk;
                rk *= radius;
                out
            })
            .collect();
        for (i, ci) in cz.iter().enumerate() {
            for k in 0..=order.saturating_sub(i) {
                acc[i + k] += ci * series[k];
            }
        }
    }
    Poly::new(acc)
}

/// Smallest M with x^M/M! < 1e−14.
fn truncation_order(x: f64) -> usize {
    let mut term = 1.0;
    let mut m = 0usize;
    while term >= 1e-14 || (m as f64) < x {
        m += 1;
        term *= x / m as f64;
        if m > 2000 {
            break;
        }
    }
    m
}

/// Number of zeros of the exact-phase characteristic function inside the
/// circle |Δk − c| = ρ, by the argument principle with adaptive sampling.
pub fn winding_count(spec: &ChainSpec, c: C64, rho: f64) -> Result<i64> {
    let f = |z: C64| characteristic_with_derivative(spec, z, Regime::ExactPhase).0;
    let mut n = 256usize;
    loop {
        let vals: Vec<C64> = (0..n).map(|k| f(c + C64::from_polar(rho, 2.0 * PI * k as f64 / n as f64))).collect();
        if vals.iter().any(|v| v.norm() == 0.0 || !v.re.is_finite()) {
            return Err(Error::TruncationInsufficient(format!("characteristic function vanishes on the circle at {c}, radius {rho}")));
        }
        let mut total = 0.0;
        let mut max_step: f64 = 0.0;
        for k in 0..n {
            let d = (vals[(k + 1) % n] / vals[k]).arg();
            max_step = max_step.max(d.abs());
            total += d;
        }
        if max_step < 0.5 {
            return Ok((total / (2.0 * PI)).round() as i64);
        }
        if n >= 1 << 18 {
            return Err(Error::TruncationInsufficient(format!("argument principle did not resolve on circle at {c}, radius {rho}")));
        }
        n *= 2;
    }
}

/// Non-Markovian poles from the Taylor-truncated characteristic equation,
/// each refined by Newton steps on the full function and certified by an
/// argument-principle count. Returned sorted by Re(Γ), lowest first.
pub fn nonmarkovian_poles(spec: &ChainSpec, search: NonMarkovianSearch) -> Result<PoleSet> {
    let n = spec.n();
    let radius = search.radius.unwrap_or(2.0 * n as f64 + 4.0);
    if radius >= 0.5 * spec.omega {
        return Err(Error::ValidityViolated(radius));
    }
    let l = spec.spacing();
    let order = search.truncation.unwrap_or_else(|| truncation_order(radius * l * n as f64).max(n + 4));
    let poly = taylor_p11(spec, radius, order);
    let raw = poly.roots()?;
    let inside: Vec<C64> = raw.into_iter().map(|z| z * radius).filter(|z| z.norm() < radius).collect();
    // refine on the full function
    let mut refined: Vec<C64> = Vec::with_capacity(inside.len());
    for z in inside {
        let p = scattering::polish(spec, z, Regime::ExactPhase);
        if !(p.re.is_finite() && p.im.is_finite()) || (p - z).norm() > 1e-3 * radius {
            return Err(Error::TruncationInsufficient(format!("Newton refinement moved {z} to {p}; raise the truncation order (M = {order})")));
        }
        if p.norm() < radius {
            refined.push(p);
        }
    }
    let clusters = cluster(&refined, 1e-6);
    // certify each cluster on a circle that excludes its neighbours
    let mut poles = Vec::with_capacity(clusters.len());
    for (i, &(p, m)) in clusters.iter().enumerate() {
        let sep = clusters
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i)
            .map(|(_, (q, _))| (q - p).norm())
            .fold(f64::INFINITY, f64::min);
        let rho = (0.3 * sep).min(1e-2 * p.norm().max(1.0)).min(0.5 * (radius - p.norm())).max(1e-9);
        let count = winding_count(spec, p, rho)?;
        if count != m as i64 {
            return Err(Error::TruncationInsufficient(format!("pole {p}: multiplicity {m} but winding count {count}")));
        }
        poles.push(Pole { p, multiplicity: m, class: PoleClass::NonMarkovian });
    }
    let total = winding_count(spec, C64::new(0.0, 0.0), radius)?;
    let found: usize = poles.iter().map(|p| p.multiplicity).sum();
    if total != found as i64 {
        return Err(Error::TruncationInsufficient(format!("{found} poles found but the disk of radius {radius} holds {total}")));
    }
    // Re Γ = −2 Im p
    poles.sort_by(|a, b| b.p.im.total_cmp(&a.p.im));
    poles.truncate(search.keep);
    if let Some(bad) = poles.iter().find(|p| p.p.norm() > 0.5 * spec.omega) {
        return Err(Error::ValidityViolated(bad.p.norm()));
    }
    Ok(PoleSet { poles, theta: spec.theta, omega: spec.omega })
}

/// Dark (bound) and bright qubit states at θ = nπ.
#[derive(Debug, Clone)]
pub struct DarkBasis {
    pub dark: Vec<DVector<C64>>,
    pub bright: DVector<C64>,
    /// Parity of each dark vector (+1 symmetric, −1 anti-symmetric).
    pub dark_parity: Vec<i8>,
    pub bright_parity: i8,
}

/// Integer n with θ = nπ, or `NotAtBicPoint`.
pub fn bic_index(theta: f64) -> Result<i64> {
    let n = (theta / PI).round();
    if (theta - n * PI).abs() > 1e-9 * theta.abs().max(1.0) {
        return Err(Error::NotAtBicPoint(theta));
    }
    Ok(n as i64)
}

/// Dark basis for identical qubits at θ = nπ: the bright state is
/// B_m ∝ (−1)^{nm}, and the N−1 dark states span its orthogonal complement
/// (Σ_m (−1)^{nm} e_m = 0), chosen to be parity eigenvectors.
pub fn dark_basis(spec: &ChainSpec, n: i64) -> Result<DarkBasis> {
    if !spec.is_identical() {
        return Err(Error::NotIdentical);
    }
    let k = bic_index(spec.theta)?;
    if k != n {
        return Err(Error::NotAtBicPoint(spec.theta));
    }
    let nq = spec.n();
    let sign = |m: usize| if (n * m as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let b = DVector::from_fn(nq, |m, _| C64::new(sign(m) / (nq as f64).sqrt(), 0.0));
    // symmetric candidates first, then anti-symmetric, each projected off B
    let mut cands = vec![b.clone()];
    for m in 0..nq.div_ceil(2) {
        let mut v = DVector::<C64>::zeros(nq);
        v[m] += C64::new(1.0, 0.0);
        v[nq - 1 - m] += C64::new(1.0, 0.0);
        cands.push(v);
    }
    for m in 0..nq / 2 {
        let mut v = DVector::<C64>::zeros(nq);
        v[m] = C64::new(1.0, 0.0);
        v[nq - 1 - m] = C64::new(-1.0, 0.0);
        cands.push(v);
    }
    let basis = linalg::orthonormalize(&cands, 1e-10);
    let dark: Vec<DVector<C64>> = basis.into_iter().skip(1).collect();
    debug_assert_eq!(dark.len(), nq - 1);
    let dark_parity = dark.iter().map(|v| parity_of(v, 1e-10).unwrap_or(0)).collect();
    let bright_parity = parity_of(&b, 1e-10).unwrap_or(0);
    Ok(DarkBasis { dark, bright: b, dark_parity, bright_parity })
}

/// A point of minimal reflection on the real Δk axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanoPoint {
    pub delta_k: f64,
    /// |r_1|² at that point.
    pub reflection: f64,
    /// True if r_1 vanishes exactly there.
    pub transparent: bool,
}

/// Zero-reflection frequencies: real roots of the numerator of r_1 (left
/// incidence, Markovian). When none exist the local minima of |r_1|² are
/// located numerically and flagged non-transparent.
pub fn fano_minima(spec: &ChainSpec) -> Result<Vec<FanoPoint>> {
    let mr = markovian_rational(spec)?;
    let r1 = mr.r1.clone();
    let refl = |x: f64| r1.eval(C64::new(x, 0.0)).norm_sqr();
    let mut out = Vec::new();
    if r1.num.degree() > 0 {
        for z in r1.num.roots()? {
            if z.im.abs() <= 1e-8 * z.norm().max(1.0) {
                // Newton on the real line
                let mut x = z.re;
                for _ in 0..5 {
                    let (v, d) = r1.num.eval_d(C64::new(x, 0.0));
                    if d.norm() == 0.0 {
                        break;
                    }
                    let step = (v / d).re;
                    x -= step;
                    if step.abs() < 1e-16 * x.abs().max(1.0) {
                        break;
                    }
                }
                out.push(FanoPoint { delta_k: x, reflection: refl(x), transparent: true });
            }
        }
    }
    if out.is_empty() {
        let scale = spec.detunings.iter().fold(spec.max_coupling() * spec.n() as f64, |a, d| a.max(d.abs()));
        let w = 10.0 * scale.max(1.0);
        let m = 8001;
        let xs = crate::model::linspace(-w, w, m);
        let ys: Vec<f64> = xs.iter().map(|&x| refl(x)).collect();
        for i in 1..m - 1 {
            if ys[i] < ys[i - 1] && ys[i] <= ys[i + 1] {
                let o = optimize::minimize_bracket(|x| Ok(refl(x)), xs[i - 1], xs[i + 1], 1e-10)?;
                out.push(FanoPoint { delta_k: o.x, reflection: o.value, transparent: false });
            }
        }
    }
    out.sort_by(|a, b| a.delta_k.total_cmp(&b.delta_k));
    Ok(out)
}
