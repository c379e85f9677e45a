//! Converter behaviour on top of the linear fault solution: positive-sequence
//! current limiting and negative-sequence control modes.
//!
//! Limiting is a fixed-point iteration. Each converter's demand is the
//! current its EMF would drive through its positive-sequence impedance at
//! the present terminal voltage. A converter whose current exceeds its limit
//! becomes a current source, placed according to its [`LimitStrategy`]. A
//! limited converter whose demand falls back within the limit returns to
//! voltage-source behaviour, at most [`MAX_RELEASES`] times.
//!
//! Reactive quantities are measured against the voltage the terminal would
//! have without the converter's own injection, which stays well defined
//! when that injection dominates the terminal voltage.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{solve, NetworkSolution, PositiveSource, ShuntBranch, SourceSet};
use crate::phasor::Phasor;
use crate::system::{Impedance, SystemModel, Terminal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    GridForming,
    GridFollowing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NegSeqMode {
    /// Negative-sequence current suppressed.
    C1,
    /// Negative-sequence current prioritised; the converter keeps its
    /// finite negative-sequence impedance.
    C2,
}

impl NegSeqMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NegSeqMode::C1 => "C1",
            NegSeqMode::C2 => "C2",
        }
    }
}

impl std::fmt::Display for NegSeqMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NegSeqMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "C1" => Ok(NegSeqMode::C1),
            "C2" => Ok(NegSeqMode::C2),
            other => Err(Error::InvalidConfig(format!("unknown control mode {other:?}"))),
        }
    }
}

/// Fault behaviour of one converter. Currents and admittances are in p.u.
/// on the converter's own rating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterPolicy {
    pub role: Role,
    pub i_limit_pos: f64,
    pub neg_seq_mode: NegSeqMode,
    /// Negative-sequence conductance left over under C1.
    #[serde(default)]
    pub residual_neg_admittance: f64,
    #[serde(default)]
    pub limiting: LimitStrategy,
}

/// How a current-limited converter places its current.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitStrategy {
    /// Full limit, lagging the terminal voltage by 90°.
    Reactive,
    /// Demand saturated with its reactive part kept first.
    #[default]
    ReactivePriority,
    /// Demand scaled down to the limit.
    Proportional,
}

pub const DEFAULT_CURRENT_LIMIT_PU: f64 = 1.1;

impl ConverterPolicy {
    pub fn grid_following() -> Self {
        Self {
            role: Role::GridFollowing,
            i_limit_pos: DEFAULT_CURRENT_LIMIT_PU,
            neg_seq_mode: NegSeqMode::C1,
            residual_neg_admittance: 0.0,
            limiting: LimitStrategy::ReactivePriority,
        }
    }

    pub fn grid_forming(mode: NegSeqMode) -> Self {
        Self {
            role: Role::GridForming,
            neg_seq_mode: mode,
            limiting: LimitStrategy::Proportional,
            ..Self::grid_following()
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.i_limit_pos.is_finite() && self.i_limit_pos > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "{name}.i_limit_pos must be positive, got {}",
                self.i_limit_pos
            )));
        }
        if !(self.residual_neg_admittance.is_finite() && self.residual_neg_admittance >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "{name}.residual_neg_admittance must be non-negative, got {}",
                self.residual_neg_admittance
            )));
        }
        Ok(())
    }
}

/// Negative-sequence branch of a converter in own-rating p.u.: `Open` or
/// the residual conductance under C1, the configured `z2` under C2.
pub fn negative_sequence_equivalent(policy: &ConverterPolicy, z2_own: Impedance) -> ShuntBranch {
    match policy.neg_seq_mode {
        NegSeqMode::C1 if policy.residual_neg_admittance == 0.0 => ShuntBranch::Open,
        NegSeqMode::C1 => ShuntBranch::Admittance(Complex64::new(policy.residual_neg_admittance, 0.0)),
        NegSeqMode::C2 => ShuntBranch::from_impedance(z2_own),
    }
}

/// Policies of the three converter terminals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Policies {
    pub cluster1: ConverterPolicy,
    pub cluster2: ConverterPolicy,
    pub ommc: ConverterPolicy,
}

impl Default for Policies {
    fn default() -> Self {
        Self {
            cluster1: ConverterPolicy::grid_following(),
            cluster2: ConverterPolicy::grid_following(),
            ommc: ConverterPolicy::grid_forming(NegSeqMode::C1),
        }
    }
}

impl Policies {
    pub fn get(&self, t: Terminal) -> &ConverterPolicy {
        match t {
            Terminal::Cluster1 => &self.cluster1,
            Terminal::Cluster2 => &self.cluster2,
            Terminal::Ommc => &self.ommc,
        }
    }

    pub fn get_mut(&mut self, t: Terminal) -> &mut ConverterPolicy {
        match t {
            Terminal::Cluster1 => &mut self.cluster1,
            Terminal::Cluster2 => &mut self.cluster2,
            Terminal::Ommc => &mut self.ommc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Terminal::ALL.iter().try_for_each(|t| self.get(*t).validate(t.name()))
    }

    /// True when every terminal suppresses negative sequence completely.
    pub fn suppress_everywhere(&self) -> bool {
        Terminal::ALL.iter().all(|t| {
            let p = self.get(*t);
            p.neg_seq_mode == NegSeqMode::C1 && p.residual_neg_admittance == 0.0
        })
    }

    /// Source representation before any limiting: every converter a
    /// voltage source, negative-sequence branches from the policies.
    pub fn linear_sources(&self, model: &SystemModel) -> SourceSet {
        let negative = Terminal::ALL.map(|t| {
            let own = model.own_rating_factor(t);
            // Own-rating admittance to study base.
            let z2_own = model.source(t).z.z2.scale(1.0 / own);
            match negative_sequence_equivalent(self.get(t), z2_own) {
                ShuntBranch::Open => ShuntBranch::Open,
                ShuntBranch::Admittance(y) => ShuntBranch::Admittance(y / own),
            }
        });
        SourceSet::linear(model, negative)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IterationSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for IterationSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 50,
        }
    }
}

impl IterationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidConfig(format!(
                "solver needs a positive tolerance and at least one iteration, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConverterMode {
    VoltageSource,
    CurrentLimited,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitedSolution {
    pub solution: NetworkSolution,
    pub modes: [ConverterMode; 3],
    pub iteration_count: usize,
    pub converged: bool,
    /// Positive-sequence current of each converter when it switched to
    /// current limiting (study base).
    pub trigger_currents: [Option<Phasor>; 3],
}

impl LimitedSolution {
    /// Positive-sequence current magnitude of a converter on its own rating.
    pub fn own_current(&self, model: &SystemModel, t: Terminal) -> f64 {
        self.solution.converter(t).current.positive.norm() * model.own_rating_factor(t)
    }
}

fn modes_of(sources: &SourceSet) -> [ConverterMode; 3] {
    sources.terminals.map(|b| match b.positive {
        PositiveSource::VoltageSource => ConverterMode::VoltageSource,
        PositiveSource::CurrentLimited { .. } => ConverterMode::CurrentLimited,
    })
}

/// Times a converter may leave current limiting during one solution.
pub const MAX_RELEASES: usize = 2;

/// Current the converter's EMF would drive at terminal voltage `v`.
fn source_demand(model: &SystemModel, t: Terminal, v: Phasor) -> Phasor {
    let src = model.source(t);
    (src.emf - v) * src.z.z1.admittance()
}

fn unit(z: Phasor) -> Phasor {
    z / z.norm()
}

/// Limited converters of one mode set, with the network reduced to the
/// exact affine map from their injections to their terminal voltages.
struct Reduced {
    terminals: Vec<Terminal>,
    limits: Vec<f64>,
    strategies: Vec<LimitStrategy>,
    fallback_frames: Vec<Phasor>,
    emf: Vec<Phasor>,
    y1: Vec<Phasor>,
    x_ref: Vec<Phasor>,
    v_ref: Vec<Phasor>,
    /// `m[(i, j)]`: voltage change at limited converter i per unit injection at j.
    m: DMatrix<Phasor>,
}

impl Reduced {
    fn build(
        model: &SystemModel,
        sol: &NetworkSolution,
        policies: &Policies,
        prefault: &[Phasor; 3],
    ) -> Result<Self> {
        let terminals: Vec<Terminal> = Terminal::ALL
            .into_iter()
            .filter(|t| matches!(sol.sources.get(*t).positive, PositiveSource::CurrentLimited { .. }))
            .collect();
        let n = terminals.len();
        let injection = |s: &SourceSet, t: Terminal| match s.get(t).positive {
            PositiveSource::CurrentLimited { injection } => injection,
            PositiveSource::VoltageSource => unreachable!("terminal not current-limited"),
        };
        let v_ref: Vec<Phasor> = terminals.iter().map(|t| sol.converter(*t).voltage.positive).collect();
        let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for (j, tj) in terminals.iter().enumerate() {
            let mut s = sol.sources;
            s.get_mut(*tj).positive = PositiveSource::CurrentLimited {
                injection: injection(&sol.sources, *tj) + 1.0,
            };
            let probe = solve(model, &s, &sol.fault)?;
            for (i, ti) in terminals.iter().enumerate() {
                m[(i, j)] = probe.converter(*ti).voltage.positive - v_ref[i];
            }
        }
        Ok(Self {
            limits: terminals
                .iter()
                .map(|t| policies.get(*t).i_limit_pos / model.own_rating_factor(*t))
                .collect(),
            strategies: terminals.iter().map(|t| policies.get(*t).limiting).collect(),
            fallback_frames: terminals.iter().map(|t| unit(prefault[t.index()])).collect(),
            emf: terminals.iter().map(|t| model.source(*t).emf).collect(),
            y1: terminals.iter().map(|t| model.source(*t).z.z1.admittance()).collect(),
            x_ref: terminals.iter().map(|t| injection(&sol.sources, *t)).collect(),
            v_ref,
            m,
            terminals,
        })
    }

    /// Saturated demand of every limited converter at injections `x`.
    fn targets(&self, x: &[Phasor]) -> Vec<Phasor> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let v = self.v_ref[i] + (0..n).map(|j| self.m[(i, j)] * (x[j] - self.x_ref[j])).sum::<Phasor>();
                let demand = (self.emf[i] - v) * self.y1[i];
                let limit = self.limits[i];
                let frame = || {
                    let v0 = v - self.m[(i, i)] * x[i];
                    if v0.norm() > 1e-6 {
                        unit(v0)
                    } else {
                        self.fallback_frames[i]
                    }
                };
                match self.strategies[i] {
                    LimitStrategy::Reactive => Complex64::new(0.0, -limit) * frame(),
                    LimitStrategy::ReactivePriority => reactive_priority_limit(demand, frame(), limit),
                    LimitStrategy::Proportional if demand.norm() > limit => limit * unit(demand),
                    LimitStrategy::Proportional => demand,
                }
            })
            .collect()
    }

    fn residual(&self, x: &[Phasor]) -> Vec<Phasor> {
        self.targets(x).iter().zip(x).map(|(t, x)| t - x).collect()
    }

    /// Damped Newton iteration on `targets(x) = x`.
    fn fixed_point(&self, x0: Vec<Phasor>, tolerance: f64) -> Option<Vec<Phasor>> {
        const STEPS: usize = 100;
        let n = x0.len();
        let flat = |z: &[Phasor]| DVector::from_iterator(2 * n, z.iter().flat_map(|c| [c.re, c.im]));
        let unflat = |v: &DVector<f64>| (0..n).map(|i| Complex64::new(v[2 * i], v[2 * i + 1])).collect::<Vec<_>>();
        let norm = |z: &[Phasor]| z.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut x = x0;
        let mut r = self.residual(&x);
        for _ in 0..STEPS {
            if norm(&r) < tolerance * 1e-3 {
                return Some(x);
            }
            let xv = flat(&x);
            let rv = flat(&r);
            let mut jac = DMatrix::zeros(2 * n, 2 * n);
            for k in 0..2 * n {
                let h = 1e-7 * (1.0 + xv[k].abs());
                let mut xp = xv.clone();
                xp[k] += h;
                let col = (flat(&self.residual(&unflat(&xp))) - &rv) / h;
                jac.set_column(k, &col);
            }
            let step = jac.lu().solve(&(-&rv))?;
            let mut scale = 1.0;
            loop {
                let trial = unflat(&(&xv + scale * &step));
                let rt = self.residual(&trial);
                if norm(&rt) < norm(&r) || scale < 1e-6 {
                    x = trial;
                    r = rt;
                    break;
                }
                scale *= 0.5;
            }
        }
        (norm(&r) < tolerance).then_some(x)
    }
}

/// Applies converter limiting to `linear`, a solution computed with the
/// policies' source representation. Converters already current-limited in
/// `linear.sources` keep that state, so a converged result fed back in
/// returns unchanged after one iteration.
///
/// Each iteration settles the converter modes from the present solution.
/// With the modes unchanged, the limited converters' injections are solved
/// as a small nonlinear system on the exact reduced network and the full
/// network is re-solved once.
pub fn apply_policies(
    model: &SystemModel,
    linear: NetworkSolution,
    policies: &Policies,
    settings: &IterationSettings,
) -> Result<LimitedSolution> {
    settings.validate()?;
    policies.validate()?;
    let prefault = crate::network::prefault_terminal_voltages(model, &policies.linear_sources(model))?;
    let mut sol = linear;
    let mut triggers: [Option<Phasor>; 3] = [None; 3];
    let mut releases = [0usize; 3];
    let mut iteration = 1;

    loop {
        let mut next = sol.sources;
        let mut switched = false;
        for t in Terminal::ALL {
            let limit = policies.get(t).i_limit_pos / model.own_rating_factor(t);
            let flow = sol.converter(t);
            match sol.sources.get(t).positive {
                PositiveSource::VoltageSource if flow.current.positive.norm() > limit => {
                    triggers[t.index()] = Some(flow.current.positive);
                    next.get_mut(t).positive = PositiveSource::CurrentLimited {
                        injection: limit * unit(flow.current.positive),
                    };
                    switched = true;
                }
                PositiveSource::CurrentLimited { .. }
                    if releases[t.index()] < MAX_RELEASES
                        && source_demand(model, t, flow.voltage.positive).norm() <= limit =>
                {
                    releases[t.index()] += 1;
                    next.get_mut(t).positive = PositiveSource::VoltageSource;
                    switched = true;
                }
                _ => {}
            }
        }

        if !switched {
            let reduced = Reduced::build(model, &sol, policies, &prefault)?;
            let delta = reduced.residual(&reduced.x_ref).iter().map(|c| c.norm()).fold(0.0, f64::max);
            if delta < settings.tolerance {
                return Ok(LimitedSolution {
                    modes: modes_of(&sol.sources),
                    solution: sol,
                    iteration_count: iteration,
                    converged: true,
                    trigger_currents: triggers,
                });
            }
            let x = reduced
                .fixed_point(reduced.x_ref.clone(), settings.tolerance)
                .unwrap_or_else(|| reduced.targets(&reduced.x_ref));
            for (t, injection) in reduced.terminals.iter().zip(x) {
                next.get_mut(*t).positive = PositiveSource::CurrentLimited { injection };
            }
        }
        if iteration >= settings.max_iterations {
            return Ok(LimitedSolution {
                modes: modes_of(&sol.sources),
                solution: sol,
                iteration_count: iteration,
                converged: false,
                trigger_currents: triggers,
            });
        }
        sol = solve(model, &next, &sol.fault)?;
        iteration += 1;
    }
}

/// Limits `demand` to `limit` giving priority to its reactive part, the
/// component lagging the voltage `frame` (unit phasor) by 90°.
pub fn reactive_priority_limit(demand: Phasor, frame: Phasor, limit: f64) -> Phasor {
    let local = demand / frame;
    // Reactive export is negative imaginary in the voltage frame.
    let q = local.im.clamp(-limit, limit);
    let room = (limit * limit - q * q).max(0.0).sqrt();
    let d = local.re.clamp(-room, room);
    Complex64::new(d, q) * frame
}
