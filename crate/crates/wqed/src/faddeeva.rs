//! Faddeeva function w(z) = e^{−z²} erfc(−iz) and the Gaussian–Lorentzian
//! overlap integral built on it.
//!
//! w is evaluated with Weideman's rational expansion in the upper half plane
//! and continued to the lower half plane by w(z) = 2e^{−z²} − w(−z).

use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::sync::OnceLock;

const NTERMS: usize = 40;

struct Weideman {
    l: f64,
    a: [f64; NTERMS],
}

fn table() -> &'static Weideman {
    static T: OnceLock<Weideman> = OnceLock::new();
    T.get_or_init(|| {
        let n = NTERMS;
        let m = 2 * n;
        let l = (n as f64 / 2f64.sqrt()).sqrt();
        let f = |k: i64| {
            let th = k as f64 * PI / m as f64;
            let t = l * (th / 2.0).tan();
            (-t * t).exp() * (l * l + t * t)
        };
        let mut a = [0.0; NTERMS];
        for (idx, an) in a.iter_mut().enumerate() {
            let nn = (idx + 1) as f64;
            let mut s = f(0);
            for k in 1..m as i64 {
                s += 2.0 * f(k) * (PI * nn * k as f64 / m as f64).cos();
            }
            *an = s / (2 * m) as f64;
        }
        Weideman { l, a }
    })
}

fn w_upper(z: C64) -> C64 {
    let tb = table();
    let i = C64::new(0.0, 1.0);
    let lmz = C64::new(tb.l, 0.0) - i * z;
    let zz = (C64::new(tb.l, 0.0) + i * z) / lmz;
    let mut p = C64::new(0.0, 0.0);
    for &an in tb.a.iter().rev() {
        p = p * zz + an;
    }
    p * 2.0 / (lmz * lmz) + 1.0 / (PI.sqrt() * lmz)
}

/// Faddeeva function w(z).
pub fn w(z: C64) -> C64 {
    if z.im >= 0.0 {
        w_upper(z)
    } else {
        2.0 * (-z * z).exp() - w_upper(-z)
    }
}

/// Complementary error function via w: erfc(z) = e^{−z²} w(iz).
pub fn erfc(z: C64) -> C64 {
    (-z * z).exp() * w(C64::new(-z.im, z.re))
}

/// `∫ dΔ e^{−Δ²/4σ²} e^{−iΔτ} / (Δ − p)` for a pole strictly below the real
/// axis.
pub fn faddeeva_overlap(pole: C64, sigma: f64, tau: f64) -> C64 {
    assert!(sigma > 0.0, "sigma must be positive");
    let a = pole / (2.0 * sigma);
    let b = sigma * tau;
    let z = a + C64::new(0.0, b);
    // e^{−b²} w(−z), arranged so that no factor overflows
    let core = if -z.im >= 0.0 {
        (-b * b).exp() * w_upper(-z)
    } else {
        2.0 * (-a * a - C64::new(0.0, 2.0 * b) * a).exp() - (-b * b).exp() * w_upper(z)
    };
    C64::new(0.0, -PI) * core
}
