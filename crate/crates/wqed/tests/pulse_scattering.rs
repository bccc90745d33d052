use std::f64::consts::FRAC_PI_2;
use wqed::model::{linspace, ChainSpec, Regime};
use wqed::pulses::*;

fn chain(n: usize) -> ChainSpec {
    ChainSpec::identical(n, FRAC_PI_2, 100.0)
}

#[test]
fn thirty_qubits_absorb_an_optimized_gaussian() {
    let o = optimize_pulse(&chain(30), &Pulse::gaussian(1.0, 10.0), Objective::Total, &ParamBox { width: (0.5, 20.0), delay: Some((-1.0, 3.0)) }).unwrap();
    assert!((o.value / 0.9445 - 1.0).abs() < 0.005, "{o:?}");
}

#[test]
fn first_qubit_saturates_with_chain_length() {
    let mut last = None;
    for n in [10, 15, 20] {
        let o = optimize_pulse(&chain(n), &Pulse::gaussian(1.0, 10.0), Objective::Qubit(0), &ParamBox { width: (0.3, 5.0), delay: Some((-1.0, 3.0)) }).unwrap();
        assert!((o.value - 0.60).abs() < 0.015, "N={n}: {o:?}");
        if let Some(prev) = last {
            assert!((o.value - prev as f64).abs() < 5e-3);
        }
        last = Some(o.value);
    }
}

#[test]
fn rising_exponential_absorption_grows_with_n() {
    let mut prev = 0.0;
    for n in (10..=100).step_by(10) {
        let o = optimize_pulse(&chain(n), &Pulse::rising_exp(1.0, 10.0), Objective::Total, &ParamBox { width: (0.1, 200.0), delay: None }).unwrap();
        assert!(o.value > prev, "N={n}: {} after {prev}", o.value);
        prev = o.value;
    }
}

#[test]
fn five_hundred_qubits_absorb_almost_everything() {
    let spec = chain(500);
    let o = optimize_pulse(&spec, &Pulse::rising_exp(1.0, 10.0), Objective::Total, &ParamBox { width: (0.1, 1000.0), delay: None }).unwrap();
    assert!((o.value - 0.99996).abs() < 1e-4, "{o:?}");
    // the excitation profile along the chain falls off monotonically
    let p = total_excitation(&spec, &Pulse::rising_exp(o.width, 10.0), 10.0, Regime::Markovian).unwrap();
    assert!((p.total - o.value).abs() < 1e-12);
    assert!(p.per_qubit.windows(2).all(|w| w[1] < w[0]));
    let (_, rate) = exponential_fit(&p.per_qubit).unwrap();
    assert!(rate > 0.0);
}

fn echo_setup() -> (ChainSpec, Pulse) {
    // L = 10/J0 at Ω = 100J0: the photon round trip between neighbours is 20/J0
    (ChainSpec::identical(3, 1000.0, 100.0), Pulse::gaussian(1.0, 15.0))
}

#[test]
fn trapped_light_leaks_out_as_echoes() {
    let (spec, p) = echo_setup();
    let xs = linspace(-115.0, -35.0, 801);
    let f = field_densities(&spec, &p, 100.0, &xs, Regime::ExactPhase).unwrap();
    let rho: Vec<f64> = f.left.iter().map(|a| a.norm_sqr()).collect();
    let dx = xs[1] - xs[0];
    // the dominant lag of the reflected train's autocorrelation
    let mut best = (0.0, 0.0);
    for lag in 50..400 {
        let c: f64 = (0..rho.len() - lag).map(|i| rho[i] * rho[i + lag]).sum();
        if c > best.1 {
            best = (lag as f64 * dx, c);
        }
    }
    // each pass through a qubit adds an O(1/J0) re-emission delay to the 2L round trip
    assert!((best.0 / (2.0 * spec.spacing()) - 1.0).abs() < 0.1, "echo spacing {}", best.0);

    // the first reflection is that of the first qubit alone
    let one = ChainSpec::identical(1, 0.0, 100.0);
    let x_first = spec.positions()[0];
    let head: Vec<f64> = linspace(-112.0, -98.0, 57);
    let shifted: Vec<f64> = head.iter().map(|x| x - x_first).collect();
    let a = field_densities(&spec, &p, 100.0, &head, Regime::ExactPhase).unwrap();
    let b = field_densities(&one, &Pulse { x0: p.x0 + x_first, ..p }, 100.0, &shifted, Regime::ExactPhase).unwrap();
    for i in 0..head.len() {
        assert!((a.left[i].norm_sqr() - b.left[i].norm_sqr()).abs() < 1e-8, "x={}", head[i]);
    }
}

#[test]
fn local_excitation_stays_below_one_half() {
    let (spec, p) = echo_setup();
    let ts = linspace(0.0, 100.0, 201);
    let a = excitation_amplitudes(&spec, &p, &ts, Regime::ExactPhase).unwrap();
    for (m, am) in a.iter().enumerate() {
        let max = am.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        assert!(max <= 0.5 + 1e-6, "qubit {m}: {max}");
    }
}

#[test]
fn nothing_moves_ahead_of_the_pulse() {
    let (spec, p) = echo_setup();
    let xs = linspace(-5.0, 40.0, 91);
    let f = field_densities(&spec, &p, 2.0, &xs, Regime::ExactPhase).unwrap();
    let worst = f.density().into_iter().fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
    let a = excitation_amplitudes(&spec, &p, &[2.0], Regime::ExactPhase).unwrap();
    assert!(a[1][0].norm_sqr() < 1e-6 && a[2][0].norm_sqr() < 1e-6);
}
