//! Exponential integral E1 of complex argument, in the scaled form
//! e^{z}·E1(z) which stays O(1/|z|) along the imaginary axis.

use num_complex::Complex64 as C64;

const EULER: f64 = 0.577_215_664_901_532_9;

/// e^{z} E1(z) on the principal branch (cut along the negative real axis).
pub fn e1_scaled(z: C64) -> C64 {
    if z.norm() <= 2.0 {
        series(z) * z.exp()
    } else {
        continued_fraction(z)
    }
}

fn series(z: C64) -> C64 {
    // E1 = −γ − ln z − Σ_{k≥1} (−z)^k / (k·k!)
    let mut sum = C64::new(0.0, 0.0);
    let mut term = C64::new(1.0, 0.0);
    for k in 1..200 {
        term *= -z / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.norm() < 1e-17 * sum.norm().max(1e-300) {
            break;
        }
    }
    -EULER - z.ln() - sum
}

fn continued_fraction(z: C64) -> C64 {
    // e^z E1(z) = 1/(z+1− 1/(z+3− 4/(z+5− …))), evaluated by modified Lentz
    let tiny = 1e-300;
    let one = C64::new(1.0, 0.0);
    let mut b = z + 1.0;
    let mut c = one / tiny;
    let mut d = one / b;
    let mut h = d;
    for i in 1..100_000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = one / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - one).norm() < 1e-16 {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_values() {
        // 30-digit mpmath values of e^z E1(z)
        let cases = [
            (C64::new(0.5, 0.0), C64::new(0.922_910_632_483_730_5, 0.0)),
            (C64::new(1.0, 1.0), C64::new(0.410_592_543_469_122_5, -0.262_728_682_711_301_73)),
            (C64::new(0.0, -3.0), C64::new(0.079_221_521_164_364_04, 0.291_957_710_692_078_76)),
            (C64::new(0.0, 3.0), C64::new(0.079_221_521_164_364_04, -0.291_957_710_692_078_76)),
            (C64::new(0.1, -40.0), C64::new(0.000_684_941_329_599_866_5, 0.024_965_723_078_839_538)),
            (C64::new(-0.2, 40.0), C64::new(0.000_498_104_633_165_197_3, -0.024_974_563_412_057_824)),
            (C64::new(2.5, -0.5), C64::new(0.295_810_168_340_822_5, 0.046_933_392_911_492_615)),
            (C64::new(0.001, -0.5), C64::new(0.673_362_820_456_624_9, 0.859_386_725_232_634_9)),
            (C64::new(0.7, 150.0), C64::new(0.000_075_531_847_346_298_05, -0.006_665_514_709_172_942)),
            (C64::new(0.01, -1e4), C64::new(1.009_999_939_397_002_1e-8, 0.000_099_999_997_979_900_25)),
        ];
        for (z, want) in cases {
            let got = e1_scaled(z);
            assert!((got - want).norm() < 1e-13 * want.norm(), "{z}: {got} vs {want}");
        }
    }
}
