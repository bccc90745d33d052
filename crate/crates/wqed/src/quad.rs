//! Adaptive Gauss–Kronrod (G10/K21) quadrature for complex, possibly
//! vector-valued integrands.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];
// Gauss weights for XGK[1], XGK[3], ..., XGK[9]
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Default cap on the number of subintervals.
pub const MAX_INTERVALS: usize = 200_000;

struct Panel {
    a: f64,
    b: f64,
    value: Vec<C64>,
    err: Vec<f64>,
    priority: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.priority == o.priority
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.priority.partial_cmp(&o.priority).unwrap_or(Ordering::Equal)
    }
}

fn kronrod<F: FnMut(f64, &mut [C64])>(f: &mut F, a: f64, b: f64, dim: usize, buf: &mut [C64]) -> (Vec<C64>, Vec<f64>) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![C64::new(0.0, 0.0); dim];
    let mut g = vec![C64::new(0.0, 0.0); dim];
    f(c, buf);
    for i in 0..dim {
        k[i] += buf[i] * WGK[10];
    }
    for j in 0..10 {
        let dx = h * XGK[j];
        for &x in &[c - dx, c + dx] {
            f(x, buf);
            for i in 0..dim {
                k[i] += buf[i] * WGK[j];
                if j % 2 == 1 {
                    g[i] += buf[i] * WG[j / 2];
                }
            }
        }
    }
    let err = (0..dim).map(|i| ((k[i] - g[i]) * h).norm()).collect();
    (k.into_iter().map(|v| v * h).collect(), err)
}

/// Integrate a vector-valued integrand on [a, b]. `f(x, out)` fills `out`.
///
/// Refinement stops when every component satisfies
/// `err_i ≤ max(abs_tol, rel_tol·|I_i|)`.
pub fn gauss_kronrod_vec<F: FnMut(f64, &mut [C64])>(
    f: F,
    dim: usize,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<(Vec<C64>, Vec<f64>)> {
    gauss_kronrod_breaks(f, dim, &[a, b], abs_tol, rel_tol, max_intervals)
}

/// As [`gauss_kronrod_vec`], starting from the panels delimited by `breaks`
/// (sorted, at least two points).
pub fn gauss_kronrod_breaks<F: FnMut(f64, &mut [C64])>(
    mut f: F,
    dim: usize,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<(Vec<C64>, Vec<f64>)> {
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    let mut total = vec![C64::new(0.0, 0.0); dim];
    let mut err = vec![0.0; dim];
    let mut first = Vec::new();
    for w in breaks.windows(2) {
        let (v, e) = kronrod(&mut f, w[0], w[1], dim, &mut buf);
        for i in 0..dim {
            total[i] += v[i];
            err[i] += e[i];
        }
        first.push((w[0], w[1], v, e));
    }
    let pri = |e: &[f64], tot: &[C64]| -> f64 {
        e.iter().zip(tot).map(|(e, t)| e / abs_tol.max(rel_tol * t.norm())).fold(0.0, f64::max)
    };
    let mut heap = BinaryHeap::new();
    for (a, b, v, e) in first {
        heap.push(Panel { a, b, priority: pri(&e, &total), value: v, err: e });
    }
    let converged = |err: &[f64], tot: &[C64]| {
        err.iter().zip(tot).all(|(e, t)| *e <= abs_tol.max(rel_tol * t.norm()))
    };
    while !converged(&err, &total) {
        if heap.len() >= max_intervals {
            let worst = err.iter().cloned().fold(0.0, f64::max);
            return Err(Error::QuadratureNotConverged { err: worst, tol: abs_tol });
        }
        let p = heap.pop().unwrap();
        let m = 0.5 * (p.a + p.b);
        if !(m > p.a && m < p.b) {
            // interval cannot be split any further
            let worst = err.iter().cloned().fold(0.0, f64::max);
            return Err(Error::QuadratureNotConverged { err: worst, tol: abs_tol });
        }
        let (v1, e1) = kronrod(&mut f, p.a, m, dim, &mut buf);
        let (v2, e2) = kronrod(&mut f, m, p.b, dim, &mut buf);
        for i in 0..dim {
            total[i] += v1[i] + v2[i] - p.value[i];
            err[i] += e1[i] + e2[i] - p.err[i];
            if err[i] < 0.0 {
                err[i] = 0.0;
            }
        }
        heap.push(Panel { a: p.a, b: m, priority: pri(&e1, &total), value: v1, err: e1 });
        heap.push(Panel { a: m, b: p.b, priority: pri(&e2, &total), value: v2, err: e2 });
    }
    // re-sum to shed accumulated update error
    let mut sum = vec![C64::new(0.0, 0.0); dim];
    let mut esum = vec![0.0; dim];
    for p in heap.iter() {
        for i in 0..dim {
            sum[i] += p.value[i];
            esum[i] += p.err[i];
        }
    }
    Ok((sum, esum))
}

/// Scalar adaptive Gauss–Kronrod on [a, b].
pub fn gauss_kronrod_adaptive<F: FnMut(f64) -> C64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<C64> {
    let (v, _) = gauss_kronrod_vec(|x, out| out[0] = f(x), 1, a, b, abs_tol, rel_tol, MAX_INTERVALS)?;
    Ok(v[0])
}

/// ∫ over [−x_max, x_max] starting from `panels` equal panels; used as an
/// independent brute-force reference for line integrals.
pub fn integrate_window<F: FnMut(f64) -> C64>(mut f: F, x_max: f64, panels: usize, tol: f64) -> Result<C64> {
    let breaks: Vec<f64> = (0..=panels).map(|i| -x_max + 2.0 * x_max * i as f64 / panels as f64).collect();
    let (v, _) = gauss_kronrod_breaks(|x, o| o[0] = f(x), 1, &breaks, tol, tol, MAX_INTERVALS)?;
    Ok(v[0])
}

/// Composite Simpson rule on a uniform grid (odd number of points); falls back
/// to a trailing trapezoid panel for even counts.
pub fn simpson_uniform(y: &[f64], h: f64) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * h * (y[0] + y[1]);
    }
    let m = if n % 2 == 1 { n } else { n - 1 };
    let mut s = y[0] + y[m - 1];
    for (i, v) in y.iter().enumerate().take(m - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    let mut total = s * h / 3.0;
    if m < n {
        total += 0.5 * h * (y[n - 2] + y[n - 1]);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_exact_for_polynomials() {
        let v = gauss_kronrod_adaptive(|x| C64::new(x.powi(20), 0.0), -1.0, 1.0, 1e-15, 1e-15).unwrap();
        assert!((v.re - 2.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn oscillatory_lorentzian() {
        // ∫ e^{−ixt}/(x²+1) dx = π e^{−|t|}
        for &t in &[1.0, 5.0] {
            let v = integrate_window(|x| C64::new(0.0, -x * t).exp() / (x * x + 1.0), 1e5, 2000, 1e-12).unwrap();
            assert!((v - C64::new(std::f64::consts::PI * (-t).exp(), 0.0)).norm() < 1e-8, "t={t} {v}");
        }
    }

    #[test]
    fn vector_components_share_nodes() {
        let (v, _) = gauss_kronrod_vec(
            |x, o| {
                o[0] = C64::new(x.sin(), 0.0);
                o[1] = C64::new(0.0, x.exp());
            },
            2,
            0.0,
            2.0,
            1e-14,
            1e-14,
            1000,
        )
        .unwrap();
        assert!((v[0].re - (1.0 - 2f64.cos())).abs() < 1e-14);
        assert!((v[1].im - (2f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let r = gauss_kronrod_vec(|x, o| o[0] = C64::new((1.0 / x.abs().max(1e-300)).sin(), 0.0), 1, -1.0, 1.0, 1e-15, 1e-15, 10);
        assert!(matches!(r, Err(Error::QuadratureNotConverged { .. })));
    }

    #[test]
    fn simpson_cubic_exact() {
        let h = 0.1;
        let y: Vec<f64> = (0..11).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((simpson_uniform(&y, h) - 0.25).abs() < 1e-14);
    }
}
