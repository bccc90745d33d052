//! Rational functions of Δk and residue-based inverse transforms.
//!
//! The inverse transform used throughout is
//! `∫ dΔ/2π f(Δ) e^{−iΔt} = −i Σ_{Im p<0} Res[f e^{−iΔt}, p]` for t > 0,
//! valid whenever f is proper.

use crate::error::{Error, Result};
use crate::poly::{Poly, CLUSTER_TOL};
use num_complex::Complex64 as C64;

/// Relative size of |num(p)| below which a pole p is considered cancelled.
pub const CANCEL_TOL: f64 = 1e-11;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// `num / den`, with the denominator also kept in factored form.
#[derive(Debug, Clone)]
pub struct RationalFn {
    pub num: Poly,
    lead: C64,
    poles: Vec<(C64, usize)>,
}

impl RationalFn {
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        let poles = den.roots_clustered()?;
        Ok(RationalFn { num, lead: den.leading(), poles })
    }

    /// Build from a numerator and a denominator given as `lead · Π (Δ − p)^m`.
    pub fn from_factored(num: Poly, lead: C64, poles: Vec<(C64, usize)>) -> Self {
        RationalFn { num, lead, poles }
    }

    pub fn den(&self) -> Poly {
        let roots: Vec<C64> =
            self.poles.iter().flat_map(|&(p, m)| std::iter::repeat_n(p, m)).collect();
        Poly::from_roots(&roots, self.lead)
    }

    pub fn poles(&self) -> &[(C64, usize)] {
        &self.poles
    }

    pub fn den_degree(&self) -> usize {
        self.poles.iter().map(|p| p.1).sum()
    }

    pub fn eval(&self, z: C64) -> C64 {
        let d = self.poles.iter().fold(self.lead, |acc, &(p, m)| acc * (z - p).powi(m as i32));
        self.num.eval(z) / d
    }

    /// f̄(z) = conj(f(conj z)); poles are mirrored across the real axis.
    pub fn conj(&self) -> RationalFn {
        RationalFn {
            num: self.num.conj(),
            lead: self.lead.conj(),
            poles: self.poles.iter().map(|&(p, m)| (p.conj(), m)).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> RationalFn {
        RationalFn { num: self.num.scale(s), lead: self.lead, poles: self.poles.clone() }
    }

    /// Product; poles from both factors are merged only when they lie on the
    /// same side of the real axis, so a pole and its mirror image never fuse.
    pub fn mul(&self, o: &RationalFn) -> RationalFn {
        let mut poles = self.poles.clone();
        for &(q, mq) in &o.poles {
            let hit = poles.iter_mut().find(|(p, _)| {
                p.im.signum() == q.im.signum()
                    && (*p - q).norm() <= CLUSTER_TOL * p.norm().max(q.norm()).max(1.0)
            });
            match hit {
                Some((_, m)) => *m += mq,
                None => poles.push((q, mq)),
            }
        }
        RationalFn { num: &self.num * &o.num, lead: self.lead * o.lead, poles }
    }

    /// Σ w_i f_i for functions sharing one factored denominator.
    pub fn combine(fs: &[RationalFn], w: &[C64]) -> Result<RationalFn> {
        let first = fs.first().ok_or_else(|| Error::InvalidArgument("empty combination".into()))?;
        let mut num = Poly::zero();
        for (f, &wi) in fs.iter().zip(w) {
            if f.poles != first.poles || f.lead != first.lead {
                return Err(Error::InvalidArgument("combination requires a common denominator".into()));
            }
            num = &num + &f.num.scale(wi);
        }
        Ok(RationalFn { num, lead: first.lead, poles: first.poles.clone() })
    }

    /// Cancel numerator zeros that coincide with poles.
    pub fn reduce(&self, tol: f64) -> RationalFn {
        let mut num = self.num.clone();
        let mut poles = Vec::new();
        for &(p, m) in &self.poles {
            let mut left = m;
            while left > 0 && !num.is_zero() && num.degree() > 0 {
                let v = num.eval(p);
                if v.norm() <= tol * num.abs_scale(p) {
                    num = num.deflate(p).0;
                    left -= 1;
                } else {
                    break;
                }
            }
            if left > 0 {
                poles.push((p, left));
            }
        }
        RationalFn { num, lead: self.lead, poles }
    }

    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() < self.den_degree()
    }

    /// Residues of f(Δ)e^{−iΔt} at every lower-half-plane pole.
    pub fn residues(&self) -> Result<Vec<ResidueTerm>> {
        self.residues_in(false)
    }

    /// Residues of f(Δ)e^{−iΔt} at the poles of one half plane.
    pub fn residues_in(&self, upper: bool) -> Result<Vec<ResidueTerm>> {
        if !self.is_proper() {
            return Err(Error::ImproperRational { num: self.num.degree(), den: self.den_degree() });
        }
        let mut out = Vec::new();
        for (l, &(p, m)) in self.poles.iter().enumerate() {
            let tol = 1e-14 * p.norm().max(1.0);
            if p.im.abs() <= tol {
                // a real pole carrying weight makes the transform ill-defined
                let w = self.num.eval(p).norm();
                if w > CANCEL_TOL * self.num.abs_scale(p) {
                    return Err(Error::RealAxisPole { re: p.re, im: p.im });
                }
                continue;
            }
            if (p.im > 0.0) != upper {
                continue;
            }
            // g = num / (lead Π_{i≠l} (Δ − p_i)^{m_i}), expanded about p
            let mut q = vec![ZERO; m];
            q[0] = self.lead;
            for (i, &(pi, mi)) in self.poles.iter().enumerate() {
                if i == l {
                    continue;
                }
                for _ in 0..mi {
                    // multiply by (p − p_i) + (Δ − p)
                    let a = p - pi;
                    for k in (0..m).rev() {
                        q[k] = q[k] * a + if k > 0 { q[k - 1] } else { ZERO };
                    }
                }
            }
            let nt = self.num.taylor_at(p, m);
            let mut g = vec![ZERO; m];
            for k in 0..m {
                let mut acc = nt[k];
                for j in 1..=k {
                    acc -= q[j] * g[k - j];
                }
                g[k] = acc / q[0];
            }
            // Res = e^{−ipt} Σ_k g_{m−1−k} (−i)^k t^k / k!
            let mut coeffs = vec![ZERO; m];
            let mut fact = 1.0;
            let mut mi = C64::new(1.0, 0.0);
            for k in 0..m {
                if k > 0 {
                    fact *= k as f64;
                    mi *= C64::new(0.0, -1.0);
                }
                coeffs[k] = g[m - 1 - k] * mi / fact;
            }
            out.push(ResidueTerm { pole: p, coeffs });
        }
        Ok(out)
    }

    /// `t ↦ ∫ dΔ/2π f(Δ) e^{−iΔt}` for t ≥ 0 as an exponential sum.
    pub fn inverse_transform(&self) -> Result<ExpSum> {
        let terms = self.residues()?;
        Ok(ExpSum { terms }.scale(C64::new(0.0, -1.0)))
    }

    /// The same transform for t ≤ 0, closed through the upper half plane.
    pub fn inverse_transform_before(&self) -> Result<ExpSum> {
        let terms = self.residues_in(true)?;
        Ok(ExpSum { terms }.scale(C64::new(0.0, 1.0)))
    }

    /// Split into c + proper part, for num and den of equal degree.
    pub fn split_constant(&self) -> Result<(C64, RationalFn)> {
        if self.is_proper() {
            return Ok((ZERO, self.clone()));
        }
        if self.num.degree() > self.den_degree() {
            return Err(Error::ImproperRational { num: self.num.degree(), den: self.den_degree() });
        }
        let c = self.num.leading() / self.lead;
        let diff = &self.num + &self.den().scale(-c);
        // the leading coefficient cancels by construction; drop the rounding residue
        let d = self.den_degree();
        let num = Poly::new(diff.coeffs()[..d.min(diff.coeffs().len())].to_vec());
        Ok((c, RationalFn { num, lead: self.lead, poles: self.poles.clone() }))
    }
}

/// Σ_k c_k t^k e^{−ipt}.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidueTerm {
    pub pole: C64,
    pub coeffs: Vec<C64>,
}

impl ResidueTerm {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, t: f64) -> C64 {
        let poly = self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * t + c);
        poly * (C64::new(0.0, -1.0) * self.pole * t).exp()
    }
}

/// A finite sum of (polynomial × exponential) terms in t.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpSum {
    pub terms: Vec<ResidueTerm>,
}

impl ExpSum {
    pub fn eval(&self, t: f64) -> C64 {
        self.terms.iter().map(|r| r.eval(t)).sum()
    }

    pub fn scale(mut self, s: C64) -> ExpSum {
        for t in &mut self.terms {
            for c in &mut t.coeffs {
                *c *= s;
            }
        }
        self
    }

    pub fn add(mut self, o: &ExpSum) -> ExpSum {
        for t in &o.terms {
            match self.terms.iter_mut().find(|s| s.pole == t.pole) {
                Some(s) => {
                    if s.coeffs.len() < t.coeffs.len() {
                        s.coeffs.resize(t.coeffs.len(), ZERO);
                    }
                    for (a, b) in s.coeffs.iter_mut().zip(&t.coeffs) {
                        *a += b;
                    }
                }
                None => self.terms.push(t.clone()),
            }
        }
        self
    }

    /// `∫_0^T |Σ|² dt` in closed form.
    pub fn norm_sqr_integral(&self, t_end: f64) -> f64 {
        let mut acc = 0.0;
        for a in &self.terms {
            for b in &self.terms {
                // e^{−ip_a t} conj(e^{−ip_b t}) = e^{−s t}, s = i(p_a − conj p_b)
                let s = C64::new(0.0, 1.0) * (a.pole - b.pole.conj());
                for (i, ca) in a.coeffs.iter().enumerate() {
                    for (j, cb) in b.coeffs.iter().enumerate() {
                        acc += (ca * cb.conj() * power_exp_integral(i + j, s, t_end)).re;
                    }
                }
            }
        }
        acc
    }
}

/// ∫_0^T t^n e^{−st} dt.
pub fn power_exp_integral(n: usize, s: C64, t_end: f64) -> C64 {
    let x = s * t_end;
    if x.norm() < 0.5 {
        // T^{n+1} Σ_k (−x)^k / (k! (n+k+1))
        let mut sum = ZERO;
        let mut term = C64::new(1.0, 0.0);
        for k in 0..60 {
            if k > 0 {
                term *= -x / k as f64;
            }
            let add = term / (n + k + 1) as f64;
            sum += add;
            if add.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        return sum * t_end.powi(n as i32 + 1);
    }
    // I_n = (n I_{n−1} − T^n e^{−sT}) / s
    let e = (-x).exp();
    let mut i = (C64::new(1.0, 0.0) - e) / s;
    let mut tp = 1.0;
    for k in 1..=n {
        tp *= t_end;
        i = (i * k as f64 - e * tp) / s;
    }
    i
}
