//! Sequence networks of the collector system and their solution for shunt
//! faults on or next to collector cable 1.
//!
//! Each sequence network is a radial tree rooted at the fault point. The
//! P1-side branch holds cluster 1; the P2-side branch holds the offshore
//! converter and, through cable 2, cluster 2. Reducing the tree gives the
//! equivalents used by [`interconnect`]; back-substituting the fault-point
//! voltages distributes the fault current over every branch.

mod fault;
mod interconnect;
pub mod phase_domain;
mod tree;

use num_complex::Complex64;
use serde::Serialize;

pub use fault::{FaultLocation, FaultPoint, FaultSite, FaultSpec, FaultType};
pub use interconnect::{interconnect, ActiveEquivalent, FaultPointSolution, PassiveEquivalent};
pub use tree::{Element, Flows, Probe};

use crate::error::{Error, Result};
use crate::phasor::{PerUnitBase, Phasor, Quantity, SequenceSet, ThreePhaseSet};
use crate::system::{Impedance, SequenceImpedances, SystemModel, Terminal};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Positive-sequence behaviour of a converter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PositiveSource {
    /// EMF behind the converter's positive-sequence impedance.
    VoltageSource,
    /// Ideal current source (study-base p.u.).
    CurrentLimited { injection: Phasor },
}

/// Shunt branch from a converter terminal to ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ShuntBranch {
    Open,
    Admittance(Complex64),
}

impl ShuntBranch {
    pub fn from_impedance(z: Impedance) -> Self {
        match z {
            Impedance::Open => ShuntBranch::Open,
            Impedance::Closed(z) => ShuntBranch::Admittance(1.0 / z),
        }
    }

    pub fn admittance(&self) -> Complex64 {
        match self {
            ShuntBranch::Open => ZERO,
            ShuntBranch::Admittance(y) => *y,
        }
    }

    pub fn is_open(&self) -> bool {
        matches!(self, ShuntBranch::Open)
    }
}

/// Per-sequence representation of one converter terminal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConverterBranches {
    pub positive: PositiveSource,
    pub negative: ShuntBranch,
    pub zero: ShuntBranch,
}

/// Source representation of all three converter terminals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceSet {
    pub terminals: [ConverterBranches; 3],
}

impl SourceSet {
    /// All converters as voltage sources, with the given negative-sequence
    /// branches and zero-sequence branches from the model.
    pub fn linear(model: &SystemModel, negative: [ShuntBranch; 3]) -> Self {
        Self {
            terminals: Terminal::ALL.map(|t| ConverterBranches {
                positive: PositiveSource::VoltageSource,
                negative: negative[t.index()],
                zero: ShuntBranch::from_impedance(model.source(t).z.z0),
            }),
        }
    }

    /// Linear sources with every converter keeping its own negative-sequence
    /// impedance.
    pub fn passive_negative(model: &SystemModel) -> Self {
        Self::linear(model, Terminal::ALL.map(|t| ShuntBranch::from_impedance(model.source(t).z.z2)))
    }

    pub fn get(&self, t: Terminal) -> &ConverterBranches {
        &self.terminals[t.index()]
    }

    pub fn get_mut(&mut self, t: Terminal) -> &mut ConverterBranches {
        &mut self.terminals[t.index()]
    }

    /// Norton pair of the positive-sequence source at `t`.
    pub fn positive_norton(&self, model: &SystemModel, t: Terminal) -> (Complex64, Complex64) {
        match self.get(t).positive {
            PositiveSource::VoltageSource => {
                let src = model.source(t);
                let y = match src.z.z1 {
                    Impedance::Closed(z) => 1.0 / z,
                    Impedance::Open => ZERO,
                };
                (y, src.emf * y)
            }
            PositiveSource::CurrentLimited { injection } => (ZERO, injection),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sequence {
    Positive,
    Negative,
    Zero,
}

fn pick(z: &SequenceImpedances, seq: Sequence) -> Impedance {
    match seq {
        Sequence::Positive => z.z1,
        Sequence::Negative => z.z2,
        Sequence::Zero => z.z0,
    }
}

/// One sequence network as seen from the fault point.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceNetwork {
    pub sequence: Sequence,
    /// Branches attached to the fault node.
    pub branches: Vec<Element>,
}

impl SequenceNetwork {
    pub fn norton(&self) -> (Complex64, Complex64) {
        self.branches.iter().fold((ZERO, ZERO), |(ya, ja), b| {
            let (y, j) = b.norton();
            (ya + y, ja + j)
        })
    }

    /// True when no branch provides a path or a source.
    pub fn is_open(&self) -> bool {
        self.norton() == (ZERO, ZERO)
    }

    /// Converter paths that reach the fault point.
    pub fn connected_sources(&self) -> usize {
        self.branches.iter().map(Element::connected_sources).sum()
    }

    /// Series impedance between the fault point and a converter terminal.
    pub fn path_impedance(&self, t: Terminal) -> Option<Impedance> {
        self.branches.iter().find_map(|b| b.path_impedance(t))
    }

    pub fn flow(&self, v_fault: Complex64) -> Flows {
        let mut out = Flows::default();
        let currents: Vec<_> = self.branches.iter().map(|b| b.flow(v_fault, &mut out)).collect();
        out.root_currents = currents;
        out
    }
}

/// The three reduced sequence networks for one fault location.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceNetworks {
    pub site: FaultSite,
    pub sources: SourceSet,
    pub positive: SequenceNetwork,
    pub negative: SequenceNetwork,
    pub zero: SequenceNetwork,
}

/// Builds the per-sequence networks seen from the fault point.
pub fn build_sequence_networks(
    model: &SystemModel,
    sources: &SourceSet,
    fault: &FaultSpec,
) -> Result<SequenceNetworks> {
    let site = fault.site()?;
    let build = |seq: Sequence| {
        let leaf = |t: Terminal| {
            let (y, j) = match seq {
                Sequence::Positive => sources.positive_norton(model, t),
                Sequence::Negative => (sources.get(t).negative.admittance(), ZERO),
                Sequence::Zero => (sources.get(t).zero.admittance(), ZERO),
            };
            Element::Leaf { terminal: t, y, j }
        };
        let converter = |t: Terminal| Element::series(pick(model.transformer(t), seq), leaf(t));
        let cable1 = pick(&model.cable1, seq);
        let p1_side = || converter(Terminal::Cluster1);
        let p2_side = || {
            Element::Junction(vec![
                Element::series(pick(&model.cable2, seq), converter(Terminal::Cluster2)),
                converter(Terminal::Ommc),
            ])
        };
        let branches = match site {
            FaultSite::Internal(d) => vec![
                Element::probed(cable1.scale(d), Probe::SegmentP1, p1_side()),
                Element::probed(cable1.scale(1.0 - d), Probe::SegmentP2, p2_side()),
            ],
            FaultSite::ExternalP1Bus => vec![p1_side(), Element::probed(cable1, Probe::WholeCable, p2_side())],
            FaultSite::ExternalP2Bus => vec![
                Element::probed(cable1, Probe::WholeCable, p1_side()),
                Element::series(pick(&model.cable2, seq), converter(Terminal::Cluster2)),
                converter(Terminal::Ommc),
            ],
        };
        SequenceNetwork { sequence: seq, branches }
    };
    Ok(SequenceNetworks {
        site,
        sources: *sources,
        positive: build(Sequence::Positive),
        negative: build(Sequence::Negative),
        zero: build(Sequence::Zero),
    })
}

/// Currents and voltages at one converter terminal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TerminalFlow {
    /// Current pushed into the network (study-base p.u.).
    pub current: SequenceSet,
    /// Terminal voltage.
    pub voltage: SequenceSet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSolution {
    pub fault: FaultSpec,
    pub sources: SourceSet,
    /// Current flowing from the network into the fault, per sequence.
    pub fault_current: SequenceSet,
    pub fault_voltage: SequenceSet,
    /// Largest faulted-phase current magnitude.
    pub i_fault_magnitude: f64,
    /// Terminal currents at P1 and P2, both measured into the protected cable.
    pub p1: ThreePhaseSet,
    pub p2: ThreePhaseSet,
    /// P1 and P2 currents as solved in the sequence domain.
    pub p1_sequence: SequenceSet,
    pub p2_sequence: SequenceSet,
    pub converters: [TerminalFlow; 3],
}

impl NetworkSolution {
    pub fn converter(&self, t: Terminal) -> &TerminalFlow {
        &self.converters[t.index()]
    }
}

fn reduce_active(net: &SequenceNetwork) -> ActiveEquivalent {
    let (y, j) = net.norton();
    ActiveEquivalent::from_norton(y, j)
}

fn reduce_passive(net: &SequenceNetwork) -> Result<PassiveEquivalent> {
    let (y, j) = net.norton();
    if j != ZERO {
        return Err(Error::SingularNetwork(format!(
            "{:?}-sequence network carries a source",
            net.sequence
        )));
    }
    Ok(PassiveEquivalent::from_norton(y))
}

/// Solves the fault on the given networks. Fault resistances are converted
/// from ohms with `base`.
pub fn solve_fault(networks: &SequenceNetworks, fault: &FaultSpec, base: &PerUnitBase) -> Result<NetworkSolution> {
    let _ = fault.site()?;
    let r_phase = base.to_per_unit(Quantity::ImpedanceOhm(fault.r_phase_ohm))?;
    let r_ground = base.to_per_unit(Quantity::ImpedanceOhm(fault.r_ground_ohm))?;
    let fp = interconnect(
        fault.fault_type,
        reduce_active(&networks.positive),
        reduce_passive(&networks.negative)?,
        reduce_passive(&networks.zero)?,
        r_phase,
        r_ground,
    )?;

    let f1 = networks.positive.flow(fp.voltages.positive);
    let f2 = networks.negative.flow(fp.voltages.negative);
    let f0 = networks.zero.flow(fp.voltages.zero);

    let probe = |p: Probe| -> Result<SequenceSet> {
        let get = |f: &Flows| {
            f.probe(p)
                .ok_or_else(|| Error::SingularNetwork(format!("probe {p:?} missing")))
        };
        Ok(SequenceSet::new(get(&f0)?, get(&f1)?, get(&f2)?))
    };
    let (p1, p2) = match networks.site {
        FaultSite::Internal(_) => (probe(Probe::SegmentP1)?, probe(Probe::SegmentP2)?),
        FaultSite::ExternalP1Bus => {
            let i = probe(Probe::WholeCable)?;
            (-i, i)
        }
        FaultSite::ExternalP2Bus => {
            let i = probe(Probe::WholeCable)?;
            (i, -i)
        }
    };

    let converters = Terminal::ALL.map(|t| {
        let k = t.index();
        TerminalFlow {
            current: SequenceSet::new(f0.leaf_current[k], f1.leaf_current[k], f2.leaf_current[k]),
            voltage: SequenceSet::new(f0.leaf_voltage[k], f1.leaf_voltage[k], f2.leaf_voltage[k]),
        }
    });

    Ok(NetworkSolution {
        fault: *fault,
        sources: networks.sources,
        fault_current: fp.currents,
        fault_voltage: fp.voltages,
        i_fault_magnitude: fp.currents.to_phases().max_magnitude(),
        p1: p1.to_phases(),
        p2: p2.to_phases(),
        p1_sequence: p1,
        p2_sequence: p2,
        converters,
    })
}

/// Builds the networks for `sources` and solves the fault in one step.
pub fn solve(model: &SystemModel, sources: &SourceSet, fault: &FaultSpec) -> Result<NetworkSolution> {
    let networks = build_sequence_networks(model, sources, fault)?;
    solve_fault(&networks, fault, &model.base)
}

/// Pre-fault positive-sequence voltage at each converter terminal.
pub fn prefault_terminal_voltages(model: &SystemModel, sources: &SourceSet) -> Result<[Phasor; 3]> {
    // Any location works: with no fault current the fault node sits at its
    // open-circuit voltage.
    let fault = FaultSpec {
        fault_type: FaultType::ABC,
        location: FaultLocation::Distance(0.5),
        r_phase_ohm: 0.0,
        r_ground_ohm: 0.0,
    };
    let networks = build_sequence_networks(model, sources, &fault)?;
    let (y, j) = networks.positive.norton();
    let v = if y != ZERO { j / y } else { ZERO };
    Ok(networks.positive.flow(v).leaf_voltage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::TestSystemConfig;

    fn model() -> SystemModel {
        TestSystemConfig::default()
            .to_model(PerUnitBase::new(450.0, 230.0).unwrap())
            .unwrap()
    }

    fn suppressing(model: &SystemModel) -> SourceSet {
        SourceSet::linear(model, [ShuntBranch::Open; 3])
    }

    #[test]
    fn three_parallel_negative_paths_when_closed() {
        let m = model();
        let f = FaultSpec::at(FaultPoint::F3, FaultType::AG, 0.0, 0.0);
        let n = build_sequence_networks(&m, &SourceSet::passive_negative(&m), &f).unwrap();
        assert_eq!(n.negative.connected_sources(), 3);
        assert!(!n.negative.is_open());
    }

    #[test]
    fn suppression_everywhere_opens_negative_network() {
        let m = model();
        let f = FaultSpec::at(FaultPoint::F3, FaultType::AG, 0.0, 0.0);
        let n = build_sequence_networks(&m, &suppressing(&m), &f).unwrap();
        assert!(n.negative.is_open());
        assert_eq!(n.negative.connected_sources(), 0);
        assert!(!n.positive.is_open());
        assert!(!n.zero.is_open());
    }

    #[test]
    fn cable_allocation_swaps_between_ends() {
        let m = model();
        let srcs = SourceSet::passive_negative(&m);
        let at = |d: f64| {
            let f = FaultSpec {
                fault_type: FaultType::ABC,
                location: FaultLocation::Distance(d),
                r_phase_ohm: 0.0,
                r_ground_ohm: 0.0,
            };
            build_sequence_networks(&m, &srcs, &f).unwrap()
        };
        let (n0, n1) = (at(0.0), at(1.0));
        let z = |n: &SequenceNetworks, t| match n.positive.path_impedance(t).unwrap() {
            Impedance::Closed(z) => z,
            Impedance::Open => panic!(),
        };
        let zc = match m.cable1.z1 {
            Impedance::Closed(z) => z,
            Impedance::Open => panic!(),
        };
        let zt1 = match m.transformer(Terminal::Cluster1).z1 {
            Impedance::Closed(z) => z,
            Impedance::Open => panic!(),
        };
        let zto = match m.transformer(Terminal::Ommc).z1 {
            Impedance::Closed(z) => z,
            Impedance::Open => panic!(),
        };
        assert!((z(&n0, Terminal::Cluster1) - zt1).norm() < 1e-15);
        assert!((z(&n1, Terminal::Cluster1) - (zt1 + zc)).norm() < 1e-15);
        assert!((z(&n0, Terminal::Ommc) - (zto + zc)).norm() < 1e-15);
        assert!((z(&n1, Terminal::Ommc) - zto).norm() < 1e-15);
    }

    #[test]
    fn kcl_at_fault_point() {
        let m = model();
        let srcs = SourceSet::passive_negative(&m);
        for ft in FaultType::ALL {
            for p in FaultPoint::ALL {
                let f = FaultSpec::at(p, ft, 2.5, 10.0);
                let n = build_sequence_networks(&m, &srcs, &f).unwrap();
                let s = solve_fault(&n, &f, &m.base).unwrap();
                for (net, v, i) in [
                    (&n.positive, s.fault_voltage.positive, s.fault_current.positive),
                    (&n.negative, s.fault_voltage.negative, s.fault_current.negative),
                    (&n.zero, s.fault_voltage.zero, s.fault_current.zero),
                ] {
                    let total: Complex64 = net.flow(v).root_currents.iter().sum();
                    assert!((total - i).norm() < 1e-9, "{p} {ft}");
                }
                if p.is_internal() {
                    let sum = (s.p1 + s.p2).to_sequence();
                    assert!((sum - s.fault_current).to_phases().max_magnitude() < 1e-9);
                } else {
                    assert!((s.p1 + s.p2).max_magnitude() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn suppressed_negative_sequence_blocks_ag_and_ab() {
        let m = model();
        for ft in [FaultType::AG, FaultType::AB] {
            let f = FaultSpec::at(FaultPoint::F2, ft, 0.0, 0.0);
            let s = solve(&m, &suppressing(&m), &f).unwrap();
            assert_eq!(s.i_fault_magnitude, 0.0);
        }
    }

    #[test]
    fn ag_current_non_increasing_in_ground_resistance() {
        let m = model();
        let srcs = SourceSet::passive_negative(&m);
        let mut last = f64::INFINITY;
        for k in 0..60 {
            let rg = k as f64 * 2.0;
            let f = FaultSpec::at(FaultPoint::F4, FaultType::AG, 0.0, rg);
            let s = solve(&m, &srcs, &f).unwrap();
            assert!(s.i_fault_magnitude <= last + 1e-12);
            last = s.i_fault_magnitude;
        }
    }

    #[test]
    fn ungrounded_transformers_block_zero_sequence() {
        let mut cfg = TestSystemConfig::default();
        cfg.transformer_c1.hv_grounded = false;
        cfg.transformer_c2.lv_grounded = false;
        cfg.transformer_ommc.hv_grounded = false;
        let m = cfg.to_model(PerUnitBase::new(450.0, 230.0).unwrap()).unwrap();
        let srcs = SourceSet::passive_negative(&m);
        for p in FaultPoint::ALL {
            let f = FaultSpec::at(p, FaultType::AG, 0.0, 0.0);
            let s = solve(&m, &srcs, &f).unwrap();
            assert_eq!(s.fault_current.zero, ZERO);
            assert_eq!(s.i_fault_magnitude, 0.0);
        }
    }

    #[test]
    fn prefault_voltages_are_near_nominal() {
        let m = model();
        let v = prefault_terminal_voltages(&m, &SourceSet::passive_negative(&m)).unwrap();
        for vt in v {
            assert!((vt.norm() - 1.0).abs() < 0.2);
        }
    }
}
