//! Scenario drivers: each turns a RunConfig into CSV tables and a gnuplot
//! script, returning human-readable report lines.

use rayon::prelude::*;
use std::f64::consts::PI;
use std::path::PathBuf;

use wqed::dynamics::{evolve_markovian, evolve_nonmarkovian, markovian_field, residue_amplitudes, Observables};
use wqed::model::{ChainSpec, EvolutionResult, FieldSample, ModePoint, GAMMA0};
use wqed::oracle::{dde_evolve, markovian_reduction_check, DdeConfig};
use wqed::pulses::{excitation_amplitudes, field_densities, optimize_pulse, peak_excitation, Pulse};
use wqed::scattering::solve_chain;
use wqed::spectrum::{characteristic_value, dark_basis, fano_minima, markovian_poles, nonmarkovian_poles, NonMarkovianSearch, PoleClass, PoleSet};
use wqed::{Regime, C64};

use crate::config::{Axis, Grid, ReferenceName, RunConfig};
use crate::output::{file_name, num, Plot, Sink, Table};
use crate::sweep::{self, Rows};
use crate::CliError;

pub fn run(scenario: &str, cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    if let Some(s) = &cfg.scenario {
        // subcommands accept any config, but a named scenario must agree
        let alias = matches!((scenario, s.as_str()), ("poles", "pole-map") | ("spontaneous", "bic") | ("decay-sweep", "poles"));
        if s != scenario && scenario != "validate" && !alias {
            return Err(CliError::config(format!("config is for scenario `{s}`, not `{scenario}`")));
        }
    }
    let sink = Sink {
        dir: PathBuf::from(cfg.output.dir.clone().unwrap_or_else(|| "out".into())),
        stem: cfg.stem(scenario),
        scenario: scenario.to_string(),
        hash: cfg.hash(),
    };
    match scenario {
        "validate" => validate(cfg),
        "poles" => poles(cfg, &sink),
        "pole-map" => pole_map(cfg, &sink),
        "decay-sweep" => decay_sweep(cfg, &sink),
        "spontaneous" => spontaneous(cfg, &sink),
        "scatter" => scatter(cfg, &sink),
        "optimize" => optimize(cfg, &sink),
        "oracle" => oracle(cfg, &sink),
        "fano" => fano(cfg, &sink),
        "bic" => bic(cfg, &sink),
        other => Err(CliError::config(format!("unknown scenario `{other}`"))),
    }
}

fn wrote(p: &std::path::Path) -> String {
    format!("wrote {}", p.display())
}

fn time_grid(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let g = cfg.time.as_ref().ok_or_else(|| CliError::config("this scenario needs a [time] grid"))?;
    Ok(g.values())
}

fn sweep_values(cfg: &RunConfig, allowed: &[Axis]) -> Result<Option<(Axis, Vec<f64>)>, CliError> {
    match &cfg.sweep {
        None => Ok(None),
        Some(s) if allowed.contains(&s.axis) => Ok(Some((s.axis, s.values()?))),
        Some(s) => Err(CliError::config(format!("sweep axis `{}` is not supported here", s.axis.label()))),
    }
}

fn as_count(v: f64) -> Result<usize, CliError> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(CliError::config(format!("N must be a positive integer, got {v}")))
    }
}

/// One configuration point of a per-point scenario.
struct Point {
    label: String,
    spec: ChainSpec,
    width: Option<f64>,
}

fn points(cfg: &RunConfig, allowed: &[Axis]) -> Result<Vec<Point>, CliError> {
    let Some((axis, values)) = sweep_values(cfg, allowed)? else {
        return Ok(vec![Point { label: String::new(), spec: cfg.spec()?, width: None }]);
    };
    if values.is_empty() {
        return Err(CliError::new("PartialSweep", "empty sweep grid", 4));
    }
    values
        .iter()
        .map(|&v| {
            let label = format!("{}{}_", axis.label(), num(v));
            Ok(match axis {
                Axis::ThetaPi => Point { label, spec: cfg.spec_with(cfg.chain.n, v * PI)?, width: None },
                Axis::N => Point { label, spec: cfg.spec_with(as_count(v)?, cfg.theta())?, width: None },
                Axis::Width => Point { label, spec: cfg.spec()?, width: Some(v) },
            })
        })
        .collect()
}

fn class_label(c: PoleClass) -> &'static str {
    match c {
        PoleClass::Symmetric => "symmetric",
        PoleClass::Antisymmetric => "antisymmetric",
        PoleClass::Unclassified => "unclassified",
        PoleClass::NonMarkovian => "nonmarkovian",
    }
}

fn search(cfg: &RunConfig) -> NonMarkovianSearch {
    let mut s = NonMarkovianSearch::default();
    if let Some(k) = cfg.poles.keep {
        s.keep = k;
    }
    s.radius = cfg.poles.radius;
    s
}

fn pole_rows(theta: f64, set: &PoleSet, class: Option<PoleClass>) -> Vec<Vec<String>> {
    set.poles
        .iter()
        .map(|p| vec![num(theta), num(p.p.re), num(p.p.im), class_label(class.unwrap_or(p.class)).into(), p.multiplicity.to_string()])
        .collect()
}

// ------------------------------------------------------------------ validate

fn validate(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let spec = cfg.spec()?;
    let init = cfg.initial_state(&spec)?;
    let mut out = vec![
        format!("config ok (sha256 {})", cfg.hash()),
        format!("N = {}, theta = {} ({}π), omega = {}, L = {}", spec.n(), num(spec.theta), num(spec.theta / PI), num(spec.omega), num(spec.spacing())),
        format!("couplings (normalized to min J = 1): {:?}", spec.couplings),
        format!("detunings: {:?}", spec.detunings),
        format!("markovian limit valid: {}", spec.markovian_valid()),
        format!("initial amplitudes: {:?}", init.amplitudes.iter().map(|a| (a.re, a.im)).collect::<Vec<_>>()),
    ];
    if !cfg.criteria.is_empty() {
        out.push(format!("acceptance criteria: {:?}", cfg.criteria));
    }
    Ok(out)
}

// --------------------------------------------------------------------- poles

fn poles(cfg: &RunConfig, sink: &Sink) -> Result<Vec<String>, CliError> {
    if cfg.scenario.as_deref() == Some("pole-map") {
        return pole_map(cfg, sink);
    }
    let thetas = match sweep_values(cfg, &[Axis::ThetaPi])? {
        Some((_, v)) => v.iter().map(|t| t * PI).collect(),
        None => vec![cfg.theta()],
    };
    let blocks: Vec<Result<Vec<Vec<String>>, CliError>> = thetas
        .par_iter()
        .map(|&theta| {
            let spec = cfg.spec_with(cfg.chain.n, theta)?;
            let mut rows = Vec::new();
            if cfg.poles.markovian {
                rows.extend(pole_rows(theta, &markovian_poles(&spec)?, None));
            }
            if cfg.poles.exact {
                rows.extend(pole_rows(theta, &nonmarkovian_poles(&spec, search(cfg))?, Some(PoleClass::NonMarkovian)));
            }
            Ok(rows)
        })
        .collect();
    let mut t = Table::new("poles", &["theta", "pole_re", "pole_im", "class", "multiplicity"]);
    t.note(format!("N = {}, omega = {}; decay rate Gamma = 2i p, so Re Gamma/gamma0 = -pole_im and Im Gamma/gamma0 = pole_re", cfg.chain.n, num(cfg.chain.omega)));
    for b in blocks {
        for r in b? {
            t.push(r);
        }
    }
    let csv = t.write(sink, "poles")?;
    let f = file_name(&csv);
    let plot = Plot::new(cfg.title.as_deref().unwrap_or("collective decay rates"))
        .line("set xlabel 'theta / pi'")
        .line("set ylabel 'Re Gamma / gamma_0'")
        .line(format!(
            "plot '{f}' using ($1/pi):(strcol(4) ne 'nonmarkovian' ? -$3 : NaN) with points pt 7 ps 0.3 title 'Markovian', \\\n     '{f}' using ($1/pi):(strcol(4) eq 'nonmarkovian' ? -$3 : NaN) with points pt 6 ps 0.3 title 'exact phase'"
        ))
        .write(sink, "poles")?;
    Ok(vec![wrote(&csv), wrote(&plot), format!("{} poles at {} theta values", t.rows.len(), thetas.len())])
}

fn pole_map(cfg: &RunConfig, sink: &Sink) -> Result<Vec<String>, CliError> {
    let spec = cfg.spec()?;
    let [r0, r1, i0, i1] = cfg.poles.window.unwrap_or([-6.0, 6.0, -8.0, 1.0]);
    let m = cfg.poles.window_points.unwrap_or(201);
    let res = Grid { start: r0, stop: r1, points: m }.values();
    let ims = Grid { start: i0, stop: i1, points: m }.values();
    let rows: Vec<Vec<String>> = ims
        .par_iter()
        .flat_map_iter(|&y| res.iter().map(move |&x| (x, y)).collect::<Vec<_>>())
        .map(|(x, y)| vec![num(x), num(y), num(characteristic_value(&spec, C64::new(x, y)).norm().log10())])
        .collect();
    let mut grid = Table::new("pole_map", &["pole_re", "pole_im", "log10_abs"]);
    grid.note(format!("log10 of the modulus of the exact-phase characteristic function; theta = {}, omega = {}", num(spec.theta), num(spec.omega)));
    grid.rows = rows;
    let g = grid.write(sink, "map")?;
    let set = nonmarkovian_poles(&spec, NonMarkovianSearch { keep: usize::MAX, ..search(cfg) })?;
    let mut t = Table::new("poles", &["theta", "pole_re", "pole_im", "class", "multiplicity"]);
    for r in pole_rows(spec.theta, &set, None) {
        t.push(r);
    }
    let p = t.write(sink, "poles")?;
    let plot = Plot::new(cfg.title.as_deref().unwrap_or("characteristic function"))
        .line("set xlabel 'Re p / J_0'")
        .line("set ylabel 'Im p / J_0'")
        .line(format!("plot '{}' using 1:2:3 with image notitle, '{}' using 2:3 with points pt 2 lc rgb 'blue' title 'poles'", file_name(&g), file_name(&p)))
        .write(sink, "map")?;
    Ok(vec![wrote(&g), wrote(&p), wrote(&plot), format!("{} poles in the search disk", set.count())])
}

fn sorted_rates(set: &PoleSet) -> Vec<C64> {
    let mut g: Vec<C64> = set.flat().iter().map(|p| 2.0 * C64::i() * p / GAMMA0).collect();
    g.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    g
}

fn decay_sweep(cfg: &RunConfig, sink: &Sink) -> Result<Vec<String>, CliError> {
    let (axis, values) = sweep_values(cfg, &[Axis::ThetaPi, Axis::N])?.ok_or_else(|| CliError::config("decay-sweep needs a [sweep] over theta-pi or n"))?;
    let notes = vec!["observables rate<k>_re/_im are Gamma_k/gamma0 sorted by decay rate; nm_ marks exact-phase poles".to_string()];
    let res = sweep::run(sink, axis, &values, &notes, |v| {
        let spec = match axis {
            Axis::N => cfg.spec_with(as_count(v)?, cfg.theta())?,
            _ => cfg.spec_with(cfg.chain.n, v * PI)?,
        };
        let mut rows: Rows = Vec::new();
        if cfg.poles.markovian {
            for (k, g) in sorted_rates(&markovian_poles(&spec)?).iter().enumerate() {
                rows.push((format!("rate{}_re", k + 1), g.re));
                rows.push((format!("rate{}_im", k + 1), g.im));
            }
        }
        if cfg.poles.exact {
            for (k, g) in sorted_rates(&nonmarkovian_poles(&spec, search(cfg))?).iter().enumerate() {
                rows.push((format!("nm_rate{}_re", k + 1), g.re));
                rows.push((format!("nm_rate{}_im", k + 1), g.im));
            }
        }
        Ok(rows)
    })?;
    let plot = sweep_plot(cfg, sink, &res.table, "rate1_re rate2_re rate3_re")?;
    Ok(vec![wrote(&res.table), wrote(&plot), format!("{} points computed, {} resumed", res.computed, res.resumed)])
}

fn sweep_plot(cfg: &RunConfig, sink: &Sink, table: &std::path::Path, observables: &str) -> Result<PathBuf, CliError> {
    let f = file_name(table);
    let axis = cfg.sweep.as_ref().map_or("n", |s| s.axis.label());
    Plot::new(cfg.title.as_deref().unwrap_or("sweep"))
        .line(format!("set xlabel '{axis}'"))
        .line(format!("plot for [obs in \"{observables}\"] '{f}' using 1:(strcol(3) eq obs ? $2 : NaN) with linespoints title obs"))
        .write(sink, "sweep")
}

// ---------------------------------------------------------------- evolution

fn evolution_table(r: &EvolutionResult, notes: &[String]) -> Table {
    let mut t = Table::new("evolution", &["t", "pe", "ps", "pw", "pb"]);
    for n in notes {
        t.note(n.clone());
    }
    for i in 0..r.times.len() {
        t.push(vec![num(r.times[i]), num(r.pe[i]), num(r.ps[i]), num(r.pw[i]), num(r.pb[i])]);
    }
    t
}

fn field_table(samples: &[FieldSample]) -> Table {
    let mut t = Table::new("field", &["x", "t", "density_r", "density_l"]);
    for s in samples {
        for i in 0..s.x.len() {
            t.push(vec![num(s.x[i]), num(s.t), num(s.right[i].norm_sqr()), num(s.left[i].norm_sqr())]);
        }
    }
    t
}

fn spontaneous(cfg: &RunConfig, sink: &Sink) -> Result<Vec<String>, CliError> {
    if cfg.scenario.as_deref() == Some("bic") {
        return bic(cfg, sink);
    }
    let ts = time_grid(cfg)?;
    let pts = points(cfg, &[Axis::ThetaPi, Axis::N])?;
    let mut report = Vec::new();
    let mut evo_files = Vec::new();
    let mut field_files = Vec::new();
    for pt in &pts {
        let init = cfg.initial_for(&pt.spec)?;
        let (r, fields, note) = match cfg.dynamics.regime() {
            Regime::Markovian => {
                let r = evolve_markovian(&pt.spec, &init, &ts)?;
                let mut fields = Vec::new();
                if let Some(sp) = &cfg.space {
                    for &t in &sp.times {
                        fields.push(markovian_field(&pt.spec, &init, t, &sp.grid())?);
                    }
                }
                (r, fields, "Markovian residue evolution".to_string())
            }
            Regime::ExactPhase => {
                let mut opts = cfg.dynamics.quadrature(&cfg.tolerance);
                opts.observables = Observables::Full;
                if let Some(sp) = &cfg.space {
                    opts.field_times = sp.times.clone();
                }
                let r = evolve_nonmarkovian(&pt.spec, &init, &ts, &opts)?;
                let f = r.field.clone();
                (r, f, format!("exact-phase quadrature, lower limit {:?}; times snapped to the field grid", opts.lower))
            }
        };
        let notes = vec![
            format!("theta = {}, omega = {}, N = {}, observed qubit {}", num(pt.spec.theta), num(pt.spec.omega), pt.spec.n(), r.observed),
            note,
            format!("max |P_e + P_s + P_w + P_b - 1| = {}", num(r.conservation_error())),
        ];
        let e = evolution_table(&r, &notes).write(sink, &format!("{}evolution", pt.label))?;
        report.push(wrote(&e));
        report.push(format!("{}conservation error {}", pt.label, num(r.conservation_error())));
        evo_files.push(file_name(&e));
        if !fields.is_empty() {
            let mut ft = field_table(&fields);
            ft.note(format!("density_r = |psi_R|^2, density_l = |psi_L|^2; theta = {}, N = {}", num(pt.spec.theta), pt.spec.n()));
            let f = ft.write(sink, &format!("{}field", pt.label))?;
            report.push(wrote(&f));
            field_files.push(file_name(&f));
        }
    }
    let mut plot = Plot::new(cfg.title.as_deref().unwrap_or("spontaneous emission")).line("set xlabel 't J_0'").line("set ylabel 'probability'");
    plot = plot.line(format!(
        "plot for [f in \"{}\"] f using 1:2 with lines title f.' P_e', for [f in \"{}\"] f using 1:3 with lines dt 2 title f.' P_s'",
        evo_files.join(" "),
        evo_files.join(" ")
    ));
    if !field_files.is_empty() {
        plot = plot
            .line("pause -1 'next: emitted density'")
            .line("set xlabel 'x J_0'")
            .line("set ylabel 'P(x,t) / J_0'")
            .line(format!("plot for [f in \"{}\"] f using 1:($3+$4) with lines title f", field_files.join(" ")));
    }
    report.push(wrote(&plot.write(sink, "evolution")?));
    Ok(report)
}

// ------------------------------------------------------------------- pulses

fn pulse_of(cfg: &RunConfig) -> Result<Pulse, CliError> {
    cfg.pulse.as_ref().ok_or_else(|| CliError::config("this scenario needs a [pulse] section"))?.pulse()
}

fn scatter(cfg: &RunConfig, sink: &Sink) -> Result<Vec<String>, CliError> {
    let ts = time_grid(cfg)?;
    let base = pulse_of(cfg)?;
    let regime = cfg.dynamics.regime();
    let mut report = Vec::new();
    let mut files = Vec::new();
    let mut max_n = 0;
    for pt in points(cfg, &[Axis::ThetaPi, Axis::N, Axis::Width])? {
        let pulse = pt.width.map_or(base, |w| base.with_width(w));
        let amps = excitation_amplitudes(&pt.spec, &pulse, &ts, regime)?;
        max_n = max_n.max(pt.spec.n());
        let mut t = Table::new("excitation", &["t", "qubit", "population"]);
        t.note(format!(
            "{} pulse, width {}, carrier detuning {}, x0 = {}; theta = {}, N = {}; qubits numbered from 1 (left)",
            pulse.kind.label(),
            num(pulse.width),
            num(pulse.chi),
            num(pulse.x0),
            num(pt.spec.theta),
            pt.spec.n()
        ));
        for (i, &tt) in ts.iter().enumerate() {
            for (m, a) in amps.iter().enumerate() {
                t.push(vec![num(tt), (m + 1).to_string(), num(a[i].norm_sqr())]);
            }
        }
        let e = t.write(sink, &format!("{}excitation", pt.label))?;
        report.push(wrote(&e));
        files.push(file_name(&e));
        for (m, a) in amps.iter().enumerate().take(3) {
            let (i, p) = a.iter().map(|z| z.norm_sqr()).enumerate().fold((0, f64::MIN), |b, (i, p)| if p > b.1 { (i, p) } else { b });
            report.push(format!("{}qubit {} peak {} at t = {}", pt.label, m + 1, num(p), num(ts[i])));
        }
        if let Some(sp) = &cfg.space {
            let xs = sp.grid();
            let fields = sp.times.iter().map(|&tt| field_densities(&pt.spec, &pulse, tt, &xs, regime)).collect::<Result<Vec<_>, _>>()?;
            let f = field_table(&fields).write(sink, &format!("{}field", pt.label))?;
            report.push(wrote(&f));
        }
    }
    let plot = Plot::new(cfg.title.as_deref().unwrap_or("pulse scattering"))
        .line("set xlabel 't J_0'")
        .line("set ylabel 'P_m'")
        .line(format!(
            "plot for [f in \"{}\"] for [q=1:{}] f using 1:(int($2)==q ? $3 : NaN) with lines title sprintf('%s qubit %d', f, q)",
            files.join(" "),
            max_n.min(3)
        ))
        .write(sink, "excitation")?;
    report.push(wrote(&plot));
    Ok(report)
}

fn optimize(cfg: &RunConfig, sink: &Sink) -> Result<Vec<String>, CliError> {
    let section = cfg.pulse.as_ref().ok_or_else(|| CliError::config("optimize needs a [pulse] section"))?;
    let base = section.pulse()?;
    let (axis, values) = sweep_values(cfg, &[Axis::ThetaPi, Axis::N, Axis::Width])?.unwrap_or((Axis::N, vec![cfg.chain.n as f64]));
    let objective = section.objective();
    let notes = vec![format!(
        "{} pulse, objective {:?}; observables: value (peak probability), width, delay (t - x0 at the peak)",
        base.kind.label(),
        objective
    )];
    let res = sweep::run(sink, axis, &values, &notes, |v| {
        let (spec, width) = match axis {
            Axis::N => (cfg.spec_with(as_count(v)?, cfg.theta())?, None),
            Axis::ThetaPi => (cfg.spec_with(cfg.chain.n, v * PI)?, None),
            Axis::Width => (cfg.spec()?, Some(v)),
        };
        let o = match width {
            Some(w) => peak_excitation(&spec, &base.with_width(w), objective, section.delay_window())?,
            None if section.optimize_width => optimize_pulse(&spec, &base, objective, &section.bounds())?,
            None => peak_excitation(&spec, &base, objective, section.delay_window())?,
        };
        Ok(vec![("value".into(), o.value), ("width".into(), o.width), ("delay".into(), o.delay)])
    })?;
    let table = std::fs::read_to_string(&res.table)?;
    let mut report = vec![wrote(&res.table)];
    for line in table.lines().filter(|l| !l.starts_with('#')).skip(1).filter(|l| l.contains(",value,")) {
        let cols: Vec<&str> = line.split(',').collect();
        report.push(format!("{} = {}: optimum {}", axis.label(), cols[0], cols[1]));
    }
    report.push(wrote(&sweep_plot(cfg, sink, &res.table, "value width")?));
    report.push(format!("{} points computed, {} resumed", res.computed, res.resumed));
    Ok(report)
}

// -------------------------------------------------------------------- oracle

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn oracle(cfg: &RunConfig, sink: &Sink) -> Result<Vec<String>, CliError> {
    let ts = time_grid(cfg)?;
    let mut report = Vec::new();
    let mut files = Vec::new();
    for pt in points(cfg, &[Axis::ThetaPi, Axis::N])? {
        let init = cfg.initial_for(&pt.spec)?;
        let reference = match cfg.oracle.reference {
            ReferenceName::Markovian => evolve_markovian(&pt.spec, &init, &ts)?,
            ReferenceName::Quadrature => {
                let mut opts = cfg.dynamics.quadrature(&cfg.tolerance);
                opts.observables = Observables::Qubits;
                evolve_nonmarkovian(&pt.spec, &init, &ts, &opts)?
            }
        };
        let dde_cfg = DdeConfig { dt_max: cfg.oracle.dt_max, zero_delay: cfg.oracle.zero_delay, ..Default::default() };
        let dde = dde_evolve(&pt.spec, &init.amplitudes, &reference.times, &dde_cfg)?;
        let tag = format!("theta = {}, omega = {}, N = {}", num(pt.spec.theta), num(pt.spec.omega), pt.spec.n());
        let a = evolution_table(&dde, &[tag.clone(), format!("delay-equation oracle (zero_delay = {}); pw = 1 - sum of populations, pb = 0", cfg.oracle.zero_delay)])
            .write(sink, &format!("{}oracle_evolution", pt.label))?;
        let b = evolution_table(&reference, &[tag, format!("reference route: {:?}", cfg.oracle.reference)]).write(sink, &format!("{}reference_evolution", pt.label))?;
        report.push(wrote(&a));
        report.push(wrote(&b));
        files.push((file_name(&a), file_name(&b)));
        report.push(format!("{}max |dP_e| = {}, max |dP_s| = {}", pt.label, num(max_dev(&dde.pe, &reference.pe)), num(max_dev(&dde.ps, &reference.ps))));
        if cfg.oracle.zero_delay {
            report.push(format!("{}zero-delay vs coupling-matrix modes: {}", pt.label, num(markovian_reduction_check(&pt.spec, &init.amplitudes, &reference.times)?)));
        }
    }
    let series: Vec<String> = files.iter().map(|(a, b)| format!("'{a}' using 1:2 with lines title 'oracle', '{b}' using 1:2 with lines dt 2 title 'reference'")).collect();
    let plot = Plot::new(cfg.title.as_deref().unwrap_or("oracle check"))
        .line("set xlabel 't J_0'")
        .line("set ylabel 'P_e'")
        .line(format!("plot {}", series.join(", ")))
        .write(sink, "oracle")?;
    report.push(wrote(&plot));
    Ok(report)
}

// ---------------------------------------------------------------------- fano

fn fano(cfg: &RunConfig, sink: &Sink) -> Result<Vec<String>, CliError> {
    if let Some((axis, values)) = sweep_values(cfg, &[Axis::ThetaPi])? {
        let notes = vec!["observables min<k>_dk and min<k>_reflection: reflection minima of a left-incident photon".to_string()];
        let res = sweep::run(sink, axis, &values, &notes, |v| {
            let spec = cfg.spec_with(cfg.chain.n, v * PI)?;
            let mut rows = Vec::new();
            for (k, f) in fano_minima(&spec)?.iter().enumerate() {
                rows.push((format!("min{}_dk", k + 1), f.delta_k));
                rows.push((format!("min{}_reflection", k + 1), f.reflection));
            }
            Ok(rows)
        })?;
        return Ok(vec![wrote(&res.table), wrote(&sweep_plot(cfg, sink, &res.table, "min1_dk min1_reflection")?)]);
    }
    let spec = cfg.spec()?;
    let mut t = Table::new("fano", &["delta_k", "reflection", "transparent"]);
    t.note(format!("theta = {}, couplings {:?}, detunings {:?}", num(spec.theta), spec.couplings, spec.detunings));
    let minima = fano_minima(&spec)?;
    let mut report = Vec::new();
    for f in &minima {
        t.push(vec![num(f.delta_k), num(f.reflection), f.transparent.to_string()]);
        report.push(format!("reflection minimum {} at delta_k = {} ({})", num(f.reflection), num(f.delta_k), if f.transparent { "transparent" } else { "not transparent" }));
    }
    let m = t.write(sink, "fano")?;
    let grid = cfg.lineshape.clone().unwrap_or(Grid { start: -5.0, stop: 5.0, points: 1001 }).values();
    let mut ls = Table::new("lineshape", &["delta_k", "transmission", "reflection"]);
    for &dk in &grid {
        let (tr, re) = match solve_chain(&spec, ModePoint::left(dk), Regime::Markovian) {
            Ok(s) => (s.transmission().norm_sqr(), s.reflection().norm_sqr()),
            Err(_) => (f64::NAN, f64::NAN),
        };
        ls.push(vec![num(dk), num(tr), num(re)]);
    }
    let l = ls.write(sink, "lineshape")?;
    let plot = Plot::new(cfg.title.as_deref().unwrap_or("Fano line shape"))
        .line("set xlabel 'Delta k / J_0'")
        .line(format!("plot '{0}' using 1:2 with lines, '{0}' using 1:3 with lines, '{1}' using 1:2 with points pt 7 title 'minima'", file_name(&l), file_name(&m)))
        .write(sink, "lineshape")?;
    report.extend([wrote(&m), wrote(&l), wrote(&plot)]);
    Ok(report)
}

// ----------------------------------------------------------------------- bic

fn bic(cfg: &RunConfig, sink: &Sink) -> Result<Vec<String>, CliError> {
    let section = cfg.bic.as_ref().ok_or_else(|| CliError::config("bic needs a [bic] section"))?;
    let ts = time_grid(cfg)?;
    let n_pi = section.n_pi;
    let at_bic = cfg.spec_with(cfg.chain.n, n_pi as f64 * PI)?;
    let basis = dark_basis(&at_bic, n_pi)?;
    let mut t = Table::new("overlap", &["t", "delta", "overlap"]);
    t.note(format!("norm of the projection onto the dark subspace at theta = {n_pi} pi, for theta = {n_pi} pi - delta"));
    let mut report = Vec::new();
    for &delta in &section.deltas {
        let spec = cfg.spec_with(cfg.chain.n, n_pi as f64 * PI - delta)?;
        let init = cfg.initial_for(&spec)?;
        let amps = residue_amplitudes(&spec, &init)?;
        let mut last = 0.0;
        for &tt in &ts {
            let a: Vec<C64> = amps.qubits.iter().map(|q| q.eval(tt)).collect();
            let ov: f64 = basis.dark.iter().map(|d| (0..a.len()).map(|j| d[j].conj() * a[j]).sum::<C64>().norm_sqr()).sum::<f64>().sqrt();
            t.push(vec![num(tt), num(delta), num(ov)]);
            last = ov;
        }
        report.push(format!("delta = {}: overlap at t = {} is {}", num(delta), num(*ts.last().unwrap_or(&0.0)), num(last)));
    }
    let o = t.write(sink, "overlap")?;
    let deltas: Vec<String> = section.deltas.iter().map(|d| num(*d)).collect();
    let plot = Plot::new(cfg.title.as_deref().unwrap_or("dark-state overlap"))
        .line("set xlabel 't J_0'")
        .line("set ylabel '|<D|psi(t)>|'")
        .line(format!("plot for [d in \"{}\"] '{}' using 1:(strcol(2) eq d ? $3 : NaN) with lines title 'delta = '.d", deltas.join(" "), file_name(&o)))
        .write(sink, "overlap")?;
    report.extend([wrote(&o), wrote(&plot)]);
    Ok(report)
}
