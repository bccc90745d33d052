//! Run configuration: a TOML file with one flat section per module.
//!
//! Every table rejects unknown keys. Physical inputs are θ and Ω; the
//! spacing L = θ/Ω is always derived.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::Path;
use wqed::dynamics::{InitialState, LowerLimit, QuadratureOptions};
use wqed::model::{linspace, validate, ChainSpec};
use wqed::pulses::{Objective, ParamBox, Pulse, PulseKind};
use wqed::{Regime, C64};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub title: Option<String>,
    /// Acceptance criteria a preset exercises.
    #[serde(default)]
    pub criteria: Vec<u32>,
    pub chain: ChainSection,
    #[serde(default)]
    pub initial: InitialSection,
    pub time: Option<Grid>,
    pub space: Option<SpaceSection>,
    pub sweep: Option<SweepSection>,
    pub pulse: Option<PulseSection>,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    #[serde(default)]
    pub poles: PolesSection,
    pub bic: Option<BicSection>,
    /// Δk grid of the transmission/reflection line shape.
    pub lineshape: Option<Grid>,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub tolerance: ToleranceSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub n: usize,
    /// θ in units of π.
    pub theta_pi: Option<f64>,
    /// θ in radians.
    pub theta: Option<f64>,
    pub omega: f64,
    pub couplings: Option<Vec<f64>>,
    pub detunings: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// 0-based index of the excited qubit; default is the middle one.
    pub excited: Option<usize>,
    /// Equal-phase superposition of all qubits.
    #[serde(default)]
    pub uniform: bool,
    pub amplitudes_re: Option<Vec<f64>>,
    pub amplitudes_im: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => linspace(self.start, self.stop, n),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    #[serde(default)]
    pub start: f64,
    #[serde(default)]
    pub stop: f64,
    /// Exact-phase spontaneous runs use the quadrature's own grid instead.
    #[serde(default)]
    pub points: usize,
    /// Snapshot times of the field.
    #[serde(default)]
    pub times: Vec<f64>,
}

impl SpaceSection {
    pub fn grid(&self) -> Vec<f64> {
        Grid { start: self.start, stop: self.stop, points: self.points }.values()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    ThetaPi,
    N,
    Width,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::ThetaPi => "theta_pi",
            Axis::N => "n",
            Axis::Width => "width",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Axis,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
}

impl SweepSection {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => Ok(v.clone()),
            (None, Some(start), Some(stop), Some(points)) => Ok(Grid { start, stop, points }.values()),
            _ => Err(CliError::config("sweep needs either `values` or all of `start`, `stop`, `points`")),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PulseKindName {
    Gaussian,
    DecayingExp,
    RisingExp,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SideName {
    Left,
    Right,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub kind: PulseKindName,
    pub width: f64,
    #[serde(default)]
    pub chi: f64,
    #[serde(default = "default_x0")]
    pub x0: f64,
    #[serde(default = "default_side")]
    pub side: SideName,
    /// Window of t − x0 searched for the peak.
    pub delay: Option<[f64; 2]>,
    /// Width range searched by the optimizer.
    pub width_range: Option<[f64; 2]>,
    /// 0-based qubit whose excitation is the objective; absent → total.
    pub qubit: Option<usize>,
    /// `optimize`: search the width too (otherwise only the delay).
    #[serde(default = "yes")]
    pub optimize_width: bool,
}

fn default_x0() -> f64 {
    10.0
}

fn default_side() -> SideName {
    SideName::Left
}

fn yes() -> bool {
    true
}

impl PulseSection {
    pub fn pulse(&self) -> Result<Pulse, CliError> {
        let kind = match self.kind {
            PulseKindName::Gaussian => PulseKind::Gaussian,
            PulseKindName::DecayingExp => PulseKind::DecayingExp,
            PulseKindName::RisingExp => PulseKind::RisingExp,
        };
        let mut p = Pulse::new(kind, self.width, self.x0).detuned(self.chi);
        if self.side == SideName::Right {
            p = p.from_right();
        }
        p.check()?;
        Ok(p)
    }

    pub fn objective(&self) -> Objective {
        self.qubit.map_or(Objective::Total, Objective::Qubit)
    }

    pub fn delay_window(&self) -> (f64, f64) {
        let d = self.delay.unwrap_or([-1.0, 3.0]);
        (d[0], d[1])
    }

    pub fn bounds(&self) -> ParamBox {
        let w = self.width_range.unwrap_or([0.1, 5.0]);
        let delay = match self.kind {
            PulseKindName::RisingExp => None,
            _ => Some(self.delay_window()),
        };
        ParamBox { width: (w[0], w[1]), delay }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeName {
    #[default]
    Markovian,
    Exact,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LowerName {
    #[default]
    Physical,
    FullLine,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    #[serde(default)]
    pub regime: RegimeName,
    #[serde(default)]
    pub lower: LowerName,
    pub h_max: Option<f64>,
    pub w_tail: Option<f64>,
}

impl DynamicsSection {
    pub fn regime(&self) -> Regime {
        match self.regime {
            RegimeName::Markovian => Regime::Markovian,
            RegimeName::Exact => Regime::ExactPhase,
        }
    }

    pub fn quadrature(&self, tol: &ToleranceSection) -> QuadratureOptions {
        let mut q = QuadratureOptions {
            lower: match self.lower {
                LowerName::Physical => LowerLimit::Physical,
                LowerName::FullLine => LowerLimit::FullLine,
            },
            h_max: self.h_max,
            ..Default::default()
        };
        if let Some(w) = self.w_tail {
            q.w_tail = w;
        }
        if let Some(r) = tol.rel {
            q.rel_tol = r;
        }
        if let Some(a) = tol.abs {
            q.abs_tol = a;
        }
        q
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PolesSection {
    #[serde(default = "yes")]
    pub markovian: bool,
    #[serde(default)]
    pub exact: bool,
    /// Non-Markovian poles kept per θ.
    pub keep: Option<usize>,
    pub radius: Option<f64>,
    /// Window of the log-modulus map, as [re_min, re_max, im_min, im_max].
    pub window: Option<[f64; 4]>,
    pub window_points: Option<usize>,
}

impl Default for PolesSection {
    fn default() -> Self {
        PolesSection { markovian: true, exact: false, keep: None, radius: None, window: None, window_points: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BicSection {
    /// Offsets δ = nπ − θ.
    pub deltas: Vec<f64>,
    /// n of the BIC point θ = nπ.
    #[serde(default = "one")]
    pub n_pi: i64,
}

fn one() -> i64 {
    1
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceName {
    #[default]
    Quadrature,
    Markovian,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default)]
    pub reference: ReferenceName,
    pub dt_max: Option<f64>,
    #[serde(default)]
    pub zero_delay: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    pub rel: Option<f64>,
    pub abs: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    /// File-name prefix; defaults to the scenario name.
    pub stem: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn check(&self) -> Result<(), CliError> {
        if self.chain.theta.is_some() == self.chain.theta_pi.is_some() {
            return Err(CliError::config("chain needs exactly one of `theta` and `theta_pi`"));
        }
        self.spec()?;
        self.initial_state(&self.spec()?)?;
        if let Some(s) = &self.sweep {
            s.values()?;
        }
        if let Some(p) = &self.pulse {
            p.pulse()?;
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        self.chain.theta.unwrap_or_else(|| self.chain.theta_pi.unwrap_or(0.0) * PI)
    }

    /// The chain as configured, passed through `model::validate`.
    pub fn spec(&self) -> Result<ChainSpec, CliError> {
        self.spec_with(self.chain.n, self.theta())
    }

    /// The chain with N and θ replaced (for sweeps). Explicit coupling and
    /// detuning lists only apply at the configured N.
    pub fn spec_with(&self, n: usize, theta: f64) -> Result<ChainSpec, CliError> {
        let c = &self.chain;
        let same_n = n == c.n;
        let couplings = c.couplings.clone().filter(|_| same_n).unwrap_or_else(|| vec![1.0; n]);
        let detunings = c.detunings.clone().filter(|_| same_n).unwrap_or_else(|| vec![0.0; n]);
        Ok(validate(&ChainSpec::new(couplings, detunings, c.omega, theta))?)
    }

    pub fn initial_state(&self, spec: &ChainSpec) -> Result<InitialState, CliError> {
        let n = spec.n();
        let i = &self.initial;
        let explicit = i.amplitudes_re.is_some() || i.amplitudes_im.is_some();
        if [i.excited.is_some(), i.uniform, explicit].iter().filter(|&&b| b).count() > 1 {
            return Err(CliError::config("initial: choose one of `excited`, `uniform`, `amplitudes_re/_im`"));
        }
        if i.uniform {
            return Ok(InitialState::normalized(vec![C64::new(1.0, 0.0); n])?);
        }
        if explicit {
            let re = i.amplitudes_re.clone().unwrap_or_else(|| vec![0.0; n]);
            let im = i.amplitudes_im.clone().unwrap_or_else(|| vec![0.0; n]);
            if re.len() != n || im.len() != n {
                return Err(CliError::config(format!("initial amplitudes need {n} entries")));
            }
            return Ok(InitialState::normalized(re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect())?);
        }
        let m = i.excited.unwrap_or(n / 2);
        if m >= n {
            return Err(CliError::config(format!("initial.excited = {m} out of range for N = {n}")));
        }
        Ok(InitialState::excited(n, m))
    }

    /// Same config with N and θ replaced, the initial state re-centred when
    /// it was left at its default.
    pub fn initial_for(&self, spec: &ChainSpec) -> Result<InitialState, CliError> {
        if spec.n() != self.chain.n && self.initial.amplitudes_re.is_none() && self.initial.amplitudes_im.is_none() {
            let mut c = self.clone();
            c.initial.excited = c.initial.excited.filter(|&m| m < spec.n());
            return c.initial_state(spec);
        }
        self.initial_state(spec)
    }

    pub fn stem(&self, scenario: &str) -> String {
        self.output.stem.clone().unwrap_or_else(|| scenario.to_string())
    }

    /// SHA-256 of the canonical serialization, excluding settings that do
    /// not change the numbers (output location, thread count).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        c.run = RunSection::default();
        let text = toml::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[chain]\nn = 3\ntheta_pi = 0.5\nomega = 100.0\n";

    #[test]
    fn minimal_config_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        let spec = c.spec().unwrap();
        assert_eq!(spec.n(), 3);
        assert!((spec.spacing() - 0.5 * PI / 100.0).abs() < 1e-15);
        assert_eq!(c.initial_state(&spec).unwrap(), InitialState::excited(3, 1));
        assert_eq!(c.dynamics.regime(), Regime::Markovian);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse(&format!("{MINIMAL}spacing = 0.1\n")).is_err());
        assert!(RunConfig::parse("[chain]\nn = 3\ntheta_pi = 0.5\nomega = 100.0\nL = 0.01\n").is_err());
        assert!(RunConfig::parse(&format!("{MINIMAL}[pulse]\nkind = \"gaussian\"\nwidth = 1.0\nsigma = 2.0\n")).is_err());
    }

    #[test]
    fn physical_fields_go_through_validation() {
        assert!(RunConfig::parse("[chain]\nn = 2\ntheta_pi = 0.5\nomega = -1.0\n").is_err());
        assert!(RunConfig::parse("[chain]\nn = 2\ntheta_pi = 0.5\nomega = 10.0\ncouplings = [1.0, -2.0]\n").is_err());
        assert!(RunConfig::parse("[chain]\nn = 2\ntheta_pi = 0.5\ntheta = 1.0\nomega = 10.0\n").is_err());
        assert!(RunConfig::parse(&format!("{MINIMAL}[initial]\nexcited = 3\n")).is_err());
    }

    #[test]
    fn hash_ignores_output_and_jobs() {
        let a = RunConfig::parse(MINIMAL).unwrap();
        let b = RunConfig::parse(&format!("{MINIMAL}[output]\ndir = \"elsewhere\"\n[run]\njobs = 3\n")).unwrap();
        let c = RunConfig::parse("[chain]\nn = 3\ntheta_pi = 0.51\nomega = 100.0\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn sweep_grid_forms() {
        let s = SweepSection { axis: Axis::N, values: None, start: Some(1.0), stop: Some(5.0), points: Some(5) };
        assert_eq!(s.values().unwrap(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let s = SweepSection { axis: Axis::N, values: Some(vec![]), start: None, stop: None, points: None };
        assert!(s.values().unwrap().is_empty());
        let s = SweepSection { axis: Axis::N, values: Some(vec![1.0]), start: Some(1.0), stop: None, points: None };
        assert!(s.values().is_err());
    }
}
