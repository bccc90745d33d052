//! Dense complex polynomials in Δk and their roots.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Relative radius within which roots are merged into one multiple root.
pub const CLUSTER_TOL: f64 = 1e-7;

/// Polynomial with complex coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<C64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == C64::new(0.0, 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(C64::new(0.0, 0.0));
        }
        Poly { coeffs }
    }

    pub fn from_real(c: &[f64]) -> Self {
        Poly::new(c.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn constant(c: C64) -> Self {
        Poly::new(vec![c])
    }

    pub fn zero() -> Self {
        Poly::constant(C64::new(0.0, 0.0))
    }

    pub fn one() -> Self {
        Poly::constant(C64::new(1.0, 0.0))
    }

    /// a + b·Δ
    pub fn linear(a: C64, b: C64) -> Self {
        Poly::new(vec![a, b])
    }

    /// lead · Π (Δ − r)
    pub fn from_roots(roots: &[C64], lead: C64) -> Self {
        let mut c = vec![lead];
        for &r in roots {
            let mut next = vec![C64::new(0.0, 0.0); c.len() + 1];
            for (i, &ci) in c.iter().enumerate() {
                next[i + 1] += ci;
                next[i] -= ci * r;
            }
            c = next;
        }
        Poly::new(c)
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == C64::new(0.0, 0.0)
    }

    pub fn leading(&self) -> C64 {
        *self.coeffs.last().unwrap()
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and first derivative.
    pub fn eval_d(&self, z: C64) -> (C64, C64) {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::zero();
        }
        Poly::new(self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect())
    }

    /// Coefficients of the Taylor expansion about `z`, up to `order` terms.
    pub fn taylor_at(&self, z: C64, order: usize) -> Vec<C64> {
        // repeated synthetic division
        let mut work = self.coeffs.clone();
        let mut out = Vec::with_capacity(order);
        for _ in 0..order {
            if work.is_empty() {
                out.push(C64::new(0.0, 0.0));
                continue;
            }
            let n = work.len();
            let mut q = vec![C64::new(0.0, 0.0); n.saturating_sub(1)];
            let mut acc = C64::new(0.0, 0.0);
            for i in (0..n).rev() {
                acc = acc * z + work[i];
                if i > 0 {
                    q[i - 1] = acc;
                }
            }
            out.push(acc);
            work = q;
        }
        out
    }

    pub fn scale(&self, s: C64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Coefficient-wise conjugate: p̄(z) = conj(p(conj z)).
    pub fn conj(&self) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c.conj()).collect())
    }

    /// Quotient and remainder of division by (Δ − r).
    pub fn deflate(&self, r: C64) -> (Poly, C64) {
        let n = self.coeffs.len();
        if n == 1 {
            return (Poly::zero(), self.coeffs[0]);
        }
        let mut q = vec![C64::new(0.0, 0.0); n - 1];
        let mut acc = self.coeffs[n - 1];
        for i in (0..n - 1).rev() {
            q[i] = acc;
            acc = acc * r + self.coeffs[i];
        }
        (Poly::new(q), acc)
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Scale of |p(z)| rounding noise: Σ |c_k| |z|^k.
    pub fn abs_scale(&self, z: C64) -> f64 {
        let a = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * a + c.norm())
    }

    /// All roots with multiplicity, companion-matrix eigenvalues polished by
    /// Newton steps on `self`.
    pub fn roots(&self) -> Result<Vec<C64>> {
        if self.is_zero() {
            return Err(Error::DegenerateInput);
        }
        let n = self.degree();
        if n == 0 {
            return Ok(Vec::new());
        }
        let lead = self.leading();
        let a: Vec<C64> = self.coeffs.iter().map(|&c| c / lead).collect();
        let raw: Vec<C64> = match n {
            1 => vec![-a[0]],
            2 => {
                let disc = (a[1] * a[1] - a[0] * 4.0).sqrt();
                let q = if (a[1].conj() * disc).re >= 0.0 { -(a[1] + disc) / 2.0 } else { -(a[1] - disc) / 2.0 };
                if q == C64::new(0.0, 0.0) {
                    vec![q, q]
                } else {
                    vec![q, a[0] / q]
                }
            }
            _ => {
                let mut m = DMatrix::<C64>::zeros(n, n);
                for i in 1..n {
                    m[(i, i - 1)] = C64::new(1.0, 0.0);
                }
                for i in 0..n {
                    m[(i, n - 1)] = -a[i];
                }
                let schur = nalgebra::linalg::Schur::new(m);
                let (_, t) = schur.unpack();
                (0..n).map(|i| t[(i, i)]).collect()
            }
        };
        Ok(raw.into_iter().map(|r| newton_polish(self, r)).collect())
    }

    /// Distinct roots with multiplicities (relative clustering radius
    /// [`CLUSTER_TOL`]); each cluster is represented by its centroid.
    pub fn roots_clustered(&self) -> Result<Vec<(C64, usize)>> {
        Ok(cluster(&self.roots()?, CLUSTER_TOL))
    }
}

/// Newton refinement that only accepts steps which decrease |p|.
pub fn newton_polish(p: &Poly, mut z: C64) -> C64 {
    let (mut f, _) = p.eval_d(z);
    for _ in 0..8 {
        let (v, d) = p.eval_d(z);
        if d.norm() == 0.0 || v.norm() == 0.0 {
            break;
        }
        let cand = z - v / d;
        let fc = p.eval(cand);
        if fc.norm() < f.norm() {
            z = cand;
            f = fc;
        } else {
            break;
        }
    }
    z
}

/// Group points within `tol·max(1, |z|)` of each other.
pub fn cluster(roots: &[C64], tol: f64) -> Vec<(C64, usize)> {
    let mut groups: Vec<Vec<C64>> = Vec::new();
    for &r in roots {
        let hit = groups.iter_mut().find(|g| {
            let c = centroid(g);
            (c - r).norm() <= tol * c.norm().max(r.norm()).max(1.0)
        });
        match hit {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    groups.iter().map(|g| (centroid(g), g.len())).collect()
}

fn centroid(g: &[C64]) -> C64 {
    g.iter().sum::<C64>() / g.len() as f64
}

impl std::ops::Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let n = self.coeffs.len().max(o.coeffs.len());
        let z = C64::new(0.0, 0.0);
        Poly::new(
            (0..n)
                .map(|i| *self.coeffs.get(i).unwrap_or(&z) + *o.coeffs.get(i).unwrap_or(&z))
                .collect(),
        )
    }
}

impl std::ops::Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        self + &o.scale(C64::new(-1.0, 0.0))
    }
}

impl std::ops::Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        let mut c = vec![C64::new(0.0, 0.0); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in o.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::new(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn quadratic_plus_i_minus_i() {
        let p = Poly::from_real(&[1.0, 0.0, 1.0]);
        let r = sorted(p.roots().unwrap());
        assert!((r[0] - c(0.0, -1.0)).norm() < 1e-15);
        assert!((r[1] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn double_root_multiplicity() {
        let p = Poly::from_roots(&[c(1.0, 1.0), c(1.0, 1.0), c(-2.0, 0.0)], c(1.0, 0.0));
        let mut cl = p.roots_clustered().unwrap();
        cl.sort_by_key(|a| a.1);
        assert_eq!(cl.len(), 2);
        assert_eq!(cl[0].1, 1);
        assert!((cl[0].0 - c(-2.0, 0.0)).norm() < 1e-12);
        assert_eq!(cl[1].1, 2);
        assert!((cl[1].0 - c(1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_polynomial_rejected() {
        assert_eq!(Poly::zero().roots(), Err(Error::DegenerateInput));
    }

    #[test]
    fn taylor_shift_matches_derivatives() {
        let p = Poly::new(vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 1.0), c(2.0, 0.0)]);
        let z = c(0.3, -0.7);
        let t = p.taylor_at(z, 5);
        assert!((t[0] - p.eval(z)).norm() < 1e-14);
        assert!((t[1] - p.derivative().eval(z)).norm() < 1e-13);
        assert!((t[2] - p.derivative().derivative().eval(z) / 2.0).norm() < 1e-13);
        assert!((t[3] - c(2.0, 0.0)).norm() < 1e-14);
        assert_eq!(t[4], c(0.0, 0.0));
    }

    #[test]
    fn deflate_exact_root() {
        let p = Poly::from_roots(&[c(0.5, -1.0), c(2.0, 0.0)], c(3.0, 0.0));
        let (q, rem) = p.deflate(c(0.5, -1.0));
        assert!(rem.norm() < 1e-14);
        assert!((q.eval(c(0.0, 0.0)) - c(-6.0, 0.0)).norm() < 1e-14);
    }

    proptest! {
        #[test]
        fn roots_round_trip(
            re in proptest::collection::vec(-3.0f64..3.0, 1..12),
            im in proptest::collection::vec(-3.0f64..3.0, 12),
        ) {
            // keep roots well separated on a jittered lattice
            let roots: Vec<C64> = re.iter().enumerate()
                .map(|(k, &x)| c(x * 0.1 + (k % 4) as f64 * 1.5 - 2.0, im[k] * 0.1 + (k / 4) as f64 * 1.5 - 2.0))
                .collect();
            let p = Poly::from_roots(&roots, c(1.3, -0.4));
            let found = p.roots().unwrap();
            prop_assert_eq!(found.len(), roots.len());
            for r in &roots {
                let d = found.iter().map(|f| (f - r).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(d < 1e-10, "root {} missed by {}", r, d);
            }
        }
    }
}
