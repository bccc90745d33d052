//! Independent reference: delay-differential equations for the qubit
//! amplitudes, obtained by tracing the field out in real space,
//!
//!   dα_j/dt = −Σ_k 𝐉_jk α_k(t − τ_jk) Θ(t − τ_jk),   τ_jk = |x_j − x_k|,
//!
//! with 𝐉 the coupling matrix (phases e^{iΩτ_jk}). Integrated by classical
//! RK4 on a step that divides L, so every delay is a whole number of steps;
//! delayed stage values come from cubic Hermite interpolation of the stored
//! history. Shares nothing with the scattering code.

use crate::error::{Error, Result};
use crate::model::{validate, ChainSpec, EvolutionResult};
use crate::spectrum::coupling_matrix;
use num_complex::Complex64 as C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdeConfig {
    /// Step cap; `None` → min(1e−3, L/100).
    pub dt_max: Option<f64>,
    /// Drop all delays (keep the phases): the Markovian limit.
    pub zero_delay: bool,
    /// Allowed drift of Σ|α_j|² + field in flight + emitted flux.
    pub balance_tol: f64,
}

impl Default for DdeConfig {
    fn default() -> Self {
        DdeConfig { dt_max: None, zero_delay: false, balance_tol: 1e-5 }
    }
}

struct History {
    n: usize,
    a: Vec<C64>,
    da: Vec<C64>,
    dt: f64,
}

impl History {
    fn push(&mut self, a: &[C64], da: &[C64]) {
        self.a.extend_from_slice(a);
        self.da.extend_from_slice(da);
    }

    fn steps(&self) -> usize {
        self.a.len() / self.n
    }

    /// α_k at step `i` plus fraction `c` ∈ [0, 1]; zero before step 0.
    /// `left` selects the left limit at a step boundary, where a delayed
    /// term switches on.
    fn at(&self, k: usize, i: i64, c: f64, left: bool) -> C64 {
        if i < 0 || (i == 0 && c == 0.0 && left) {
            return ZERO;
        }
        let i = i as usize;
        let n = self.n;
        if c == 0.0 || i + 1 >= self.steps() {
            return self.a[i * n + k];
        }
        let (y0, y1) = (self.a[i * n + k], self.a[(i + 1) * n + k]);
        let (d0, d1) = (self.da[i * n + k] * self.dt, self.da[(i + 1) * n + k] * self.dt);
        let c2 = c * c;
        let c3 = c2 * c;
        y0 * (2.0 * c3 - 3.0 * c2 + 1.0) + d0 * (c3 - 2.0 * c2 + c) + y1 * (-2.0 * c3 + 3.0 * c2) + d1 * (c3 - c2)
    }
}

/// Step used for a given spec: L/ceil(L/dt_max).
pub fn dde_step(spec: &ChainSpec, opts: &DdeConfig) -> f64 {
    let l = spec.spacing();
    let cap = opts.dt_max.unwrap_or_else(|| 1e-3f64.min(l / 100.0));
    if opts.zero_delay || l <= 0.0 {
        return cap;
    }
    l / (l / cap).ceil()
}

/// Integrates the delay equations and samples the populations on `t_grid`.
/// P_w is 1 − Σ_j P_j (the oracle tracks no field); P_b is zero.
pub fn dde_evolve(spec: &ChainSpec, alpha0: &[C64], t_grid: &[f64], opts: &DdeConfig) -> Result<EvolutionResult> {
    let spec = validate(spec)?;
    let n = spec.n();
    if alpha0.len() != n {
        return Err(Error::LengthMismatch { what: "initial amplitudes", got: alpha0.len(), expected: n });
    }
    if t_grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument("times must be finite and non-negative".into()));
    }
    let dt = dde_step(&spec, opts);
    let jm = coupling_matrix(&spec);
    let per_l = if opts.zero_delay { 0 } else { (spec.spacing() / dt).round() as i64 };
    let delay = |j: usize, k: usize| per_l * j.abs_diff(k) as i64;
    let t_end = t_grid.iter().cloned().fold(0.0, f64::max);
    let steps = (t_end / dt).ceil() as usize + 1;

    // right-hand side at step i + c, using the current-step stage for the
    // undelayed terms and the history for delayed ones
    let rhs = |h: &History, i: i64, c: f64, left: bool, own: &[C64], out: &mut [C64]| {
        for j in 0..n {
            let mut acc = ZERO;
            for k in 0..n {
                let d = delay(j, k);
                let v = if d == 0 { own[k] } else { h.at(k, i - d, c, left) };
                acc += jm[(j, k)] * v;
            }
            out[j] = -acc;
        }
    };
    // amplitude leaving the chain at its right (left) edge at step i + c
    let sqrt_j: Vec<f64> = spec.couplings.iter().map(|j| j.sqrt()).collect();
    let edge = |h: &History, i: i64, c: f64, right: bool, left: bool| -> f64 {
        let mut out = ZERO;
        for k in 0..n {
            let hops = if right { n - 1 - k } else { k };
            let ph = C64::from_polar(sqrt_j[k], spec.theta * hops as f64);
            out += ph * h.at(k, i - per_l * hops as i64, c, left);
        }
        out.norm_sqr()
    };
    // probability in flight between the outer qubits at step i
    let interior = |h: &History, i: i64| -> f64 {
        if per_l == 0 {
            return 0.0;
        }
        let m_l = per_l as usize;
        let mut vals = vec![0.0; m_l + 1];
        let mut total = 0.0;
        for gap in 0..n - 1 {
            for (m, v) in vals.iter_mut().enumerate() {
                let phase = spec.omega * m as f64 * dt;
                let mut r = ZERO;
                for k in 0..=gap {
                    let hops = (gap - k) as i64;
                    r += C64::from_polar(sqrt_j[k], phase + spec.theta * hops as f64) * h.at(k, i - m as i64 - hops * per_l, 0.0, false);
                }
                let mut l = ZERO;
                for k in gap + 1..n {
                    let hops = (k - gap) as i64;
                    l += C64::from_polar(sqrt_j[k], spec.theta * hops as f64 - phase) * h.at(k, i - hops * per_l + m as i64, 0.0, false);
                }
                *v = r.norm_sqr() + l.norm_sqr();
            }
            total += simpson(&vals, dt);
        }
        total
    };

    let mut hist = History { n, a: Vec::with_capacity(n * (steps + 1)), da: Vec::with_capacity(n * (steps + 1)), dt };
    let mut a = alpha0.to_vec();
    let mut da = vec![ZERO; n];
    rhs(&hist, 0, 0.0, false, &a, &mut da);
    hist.push(&a, &da);
    let (mut k1, mut k2, mut k3, mut k4) = (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
    let mut tmp = vec![ZERO; n];
    let init_norm: f64 = a.iter().map(|v| v.norm_sqr()).sum();
    let mut emitted = 0.0;
    let check_every = per_l.max(1) as usize;
    for i in 0..steps as i64 {
        k1.copy_from_slice(&da);
        for j in 0..n {
            tmp[j] = a[j] + 0.5 * dt * k1[j];
        }
        rhs(&hist, i, 0.5, false, &tmp, &mut k2);
        for j in 0..n {
            tmp[j] = a[j] + 0.5 * dt * k2[j];
        }
        rhs(&hist, i, 0.5, false, &tmp, &mut k3);
        for j in 0..n {
            tmp[j] = a[j] + dt * k3[j];
        }
        rhs(&hist, i + 1, 0.0, true, &tmp, &mut k4);
        for j in 0..n {
            a[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        rhs(&hist, i + 1, 0.0, false, &a, &mut da);
        hist.push(&a, &da);
        // Simpson on the step for the outgoing flux
        for right in [true, false] {
            emitted += dt / 6.0 * (edge(&hist, i, 0.0, right, false) + 4.0 * edge(&hist, i, 0.5, right, false) + edge(&hist, i + 1, 0.0, right, true));
        }
        // at multiples of L every emission front sits on a qubit, so the
        // interior Simpson sums never straddle a jump
        if (i as usize + 1).is_multiple_of(check_every) {
            let norm: f64 = a.iter().map(|v| v.norm_sqr()).sum();
            let drift = (norm + interior(&hist, i + 1) + emitted - init_norm).abs();
            if !(drift <= opts.balance_tol) {
                return Err(Error::StepTooLarge(dt));
            }
        }
    }

    let pops: Vec<Vec<f64>> = t_grid
        .iter()
        .map(|&t| {
            let x = t / dt;
            let i = x.floor();
            let c = x - i;
            (0..n).map(|k| hist.at(k, i as i64, c, false).norm_sqr()).collect()
        })
        .collect();
    let peak = alpha0.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let observed = (0..n).find(|&j| alpha0[j].norm_sqr() >= peak - 1e-15).unwrap_or(0);
    let mut res = EvolutionResult::from_populations(t_grid.to_vec(), pops, observed);
    res.pw = res.populations.iter().map(|p| init_norm - p.iter().sum::<f64>()).collect();
    Ok(res)
}

/// Composite Simpson rule on equally spaced samples (3/8 rule on the last
/// three panels when the panel count is odd).
fn simpson(f: &[f64], h: f64) -> f64 {
    let m = f.len().saturating_sub(1);
    match m {
        0 => 0.0,
        1 => 0.5 * h * (f[0] + f[1]),
        2 => h / 3.0 * (f[0] + 4.0 * f[1] + f[2]),
        _ => {
            let (even, tail) = if m.is_multiple_of(2) { (m, 0.0) } else {
                let k = m - 3;
                (k, 3.0 * h / 8.0 * (f[k] + 3.0 * f[k + 1] + 3.0 * f[k + 2] + f[k + 3]))
            };
            let mut s = f[0] + f[even];
            for i in 1..even {
                s += if i % 2 == 1 { 4.0 * f[i] } else { 2.0 * f[i] };
            }
            s * h / 3.0 + tail
        }
    }
}

/// Largest deviation between the zero-delay integration and the
/// coupling-matrix eigenmode reconstruction over `t_grid`.
pub fn markovian_reduction_check(spec: &ChainSpec, alpha0: &[C64], t_grid: &[f64]) -> Result<f64> {
    let spec = validate(spec)?;
    let opts = DdeConfig { dt_max: Some(1e-3), zero_delay: true, ..Default::default() };
    let dde = dde_evolve(&spec, alpha0, t_grid, &opts)?;
    let modes = crate::spectrum::coupling_matrix_rates(&spec);
    let beta = modes.expand(alpha0)?;
    let mut worst: f64 = 0.0;
    for (i, &t) in t_grid.iter().enumerate() {
        let a = modes.amplitudes(&beta, t);
        for (j, v) in a.iter().enumerate() {
            worst = worst.max((v.norm_sqr() - dde.populations[i][j]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::linspace;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    #[test]
    fn single_qubit_is_exponential() {
        let spec = ChainSpec::identical(1, 1.0, 100.0);
        let r = dde_evolve(&spec, &[C64::new(1.0, 0.0)], &[0.0, 0.5, 2.0], &DdeConfig { dt_max: Some(1e-3), ..Default::default() }).unwrap();
        for (t, p) in r.times.iter().zip(&r.pe) {
            assert!((p - (-2.0 * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_delay_matches_coupling_modes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in 1..=6 {
            let theta = rng.gen_range(0.1..6.0);
            let spec = ChainSpec::identical(n, theta, 100.0);
            let raw: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let norm = raw.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let a0: Vec<C64> = raw.iter().map(|v| v / norm).collect();
            let dev = markovian_reduction_check(&spec, &a0, &linspace(0.0, 3.0, 31)).unwrap();
            assert!(dev < 1e-8, "N={n}: {dev}");
        }
    }

    #[test]
    fn delay_holds_side_qubits_dark_until_light_arrives() {
        let spec = ChainSpec::identical(3, 40.2 * PI, 100.0);
        let l = spec.spacing();
        let r = dde_evolve(&spec, &[ZERO, C64::new(1.0, 0.0), ZERO], &[0.5 * l, 0.99 * l, 1.5 * l], &DdeConfig::default()).unwrap();
        assert_eq!(r.populations[0][0], 0.0);
        assert_eq!(r.populations[1][2], 0.0);
        assert!(r.populations[2][0] > 0.0);
        // the middle qubit decays at γ0 until the echo returns at 2L
        assert!((r.pe[1] - (-2.0 * 0.99 * l).exp()).abs() < 1e-10);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let spec = ChainSpec::identical(3, 0.5, 100.0);
        let opts = DdeConfig { dt_max: Some(2.0), zero_delay: true, ..Default::default() };
        assert!(matches!(dde_evolve(&spec, &[C64::new(1.0, 0.0), ZERO, ZERO], &[10.0], &opts), Err(Error::StepTooLarge(_))));
    }
}
