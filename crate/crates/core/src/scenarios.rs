//! Study matrix, scenario pipeline and checks of the expected protection
//! behaviour.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ibr::{apply_policies, ConverterMode, IterationSettings, NegSeqMode, Policies};
use crate::network::{build_sequence_networks, solve, FaultPoint, FaultSpec, FaultType};
use crate::phasor::{PerUnitBase, SequenceSet};
use crate::relays::{evaluate_sequences, ElementId, RelaySettings, TripDecision};
use crate::system::{SystemModel, Terminal, TestSystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResistanceLevel {
    R1,
    R2,
    R3,
    R4,
}

impl ResistanceLevel {
    pub const ALL: [ResistanceLevel; 4] = [
        ResistanceLevel::R1,
        ResistanceLevel::R2,
        ResistanceLevel::R3,
        ResistanceLevel::R4,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        ["R1", "R2", "R3", "R4"][self.index()]
    }

    /// `(r_phase, r_ground)` in ohms for a fault type.
    pub fn resistances(self, fault_type: FaultType) -> (f64, f64) {
        const RG: [f64; 4] = [0.0, 10.0, 25.0, 50.0];
        const RPH: [f64; 4] = [0.0, 2.5, 5.0, 10.0];
        let k = self.index();
        match fault_type {
            FaultType::AG => (0.0, RG[k]),
            FaultType::AB | FaultType::ABC => (RPH[k], 0.0),
            FaultType::ABG => (RPH[k], RG[k]),
        }
    }
}

impl fmt::Display for ResistanceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResistanceLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ResistanceLevel::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown resistance level {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioMatrix {
    pub locations: Vec<FaultPoint>,
    pub fault_types: Vec<FaultType>,
    pub levels: Vec<ResistanceLevel>,
    /// Negative-sequence control of the offshore converter.
    pub controls: Vec<NegSeqMode>,
}

impl Default for ScenarioMatrix {
    fn default() -> Self {
        Self {
            locations: FaultPoint::ALL.to_vec(),
            fault_types: FaultType::ALL.to_vec(),
            levels: ResistanceLevel::ALL.to_vec(),
            controls: vec![NegSeqMode::C1, NegSeqMode::C2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Scenario {
    pub location: FaultPoint,
    pub fault_type: FaultType,
    pub level: ResistanceLevel,
    pub control: NegSeqMode,
}

impl Scenario {
    pub fn id(&self) -> String {
        format!("{}-{}-{}-{}", self.location, self.fault_type, self.level, self.control)
    }

    pub fn fault(&self) -> FaultSpec {
        let (rph, rg) = self.level.resistances(self.fault_type);
        FaultSpec::at(self.location, self.fault_type, rph, rg)
    }

    pub fn is_internal(&self) -> bool {
        self.location.is_internal()
    }
}

/// Cartesian product ordered by location, type, resistance, control.
pub fn enumerate_scenarios(matrix: &ScenarioMatrix) -> Vec<Scenario> {
    let mut out = Vec::new();
    for &location in &matrix.locations {
        for &fault_type in &matrix.fault_types {
            for &level in &matrix.levels {
                for &control in &matrix.controls {
                    out.push(Scenario {
                        location,
                        fault_type,
                        level,
                        control,
                    });
                }
            }
        }
    }
    out
}

/// Everything needed to run the study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub base: PerUnitBase,
    pub system: TestSystemConfig,
    pub policies: Policies,
    pub relay: RelaySettings,
    pub solver: IterationSettings,
    pub matrix: ScenarioMatrix,
}

pub const DEFAULT_BASE_MVA: f64 = 450.0;

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            base: PerUnitBase {
                s_mva: DEFAULT_BASE_MVA,
                v_kv: 230.0,
            },
            system: TestSystemConfig::default(),
            policies: Policies::default(),
            relay: RelaySettings::default(),
            solver: IterationSettings::default(),
            matrix: ScenarioMatrix::default(),
        }
    }
}

/// A validated study ready to run.
#[derive(Debug, Clone)]
pub struct Study {
    pub config: StudyConfig,
    pub model: SystemModel,
}

impl Study {
    pub fn new(config: StudyConfig) -> Result<Self> {
        config.policies.validate()?;
        config.relay.validate()?;
        config.solver.validate()?;
        let model = config.system.to_model(config.base)?;
        Ok(Self { config, model })
    }

    pub fn policies_for(&self, control: NegSeqMode) -> Policies {
        let mut p = self.config.policies;
        p.ommc.neg_seq_mode = control;
        p
    }

    pub fn scenarios(&self) -> Vec<Scenario> {
        enumerate_scenarios(&self.config.matrix)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub decisions: [TripDecision; 5],
    pub converged: bool,
    pub iteration_count: usize,
    pub modes: [ConverterMode; 3],
    pub i_fault_magnitude: f64,
    pub fault_current: SequenceSet,
    /// Positive-sequence converter currents, own-rating p.u.
    pub converter_i1: [f64; 3],
    pub converter_limit: [f64; 3],
    /// Positive-sequence terminal voltage magnitudes.
    pub converter_v1: [f64; 3],
    /// No terminal carries any negative-sequence path.
    pub suppress_everywhere: bool,
    /// The zero-sequence network offers no path at the fault.
    pub zero_path_open: bool,
}

impl ScenarioResult {
    pub fn decision(&self, e: ElementId) -> &TripDecision {
        &self.decisions[e.index()]
    }

    pub fn trips(&self, e: ElementId) -> bool {
        self.decision(e).trip
    }
}

pub fn run_scenario(study: &Study, scenario: &Scenario) -> Result<ScenarioResult> {
    let model = &study.model;
    let policies = study.policies_for(scenario.control);
    let fault = scenario.fault();
    let sources = policies.linear_sources(model);
    let networks = build_sequence_networks(model, &sources, &fault)?;
    let linear = solve(model, &sources, &fault)?;
    let limited = apply_policies(model, linear, &policies, &study.config.solver)?;
    let sol = &limited.solution;
    Ok(ScenarioResult {
        scenario: *scenario,
        decisions: evaluate_sequences(&sol.p1_sequence, &sol.p2_sequence, &study.config.relay),
        converged: limited.converged,
        iteration_count: limited.iteration_count,
        modes: limited.modes,
        i_fault_magnitude: sol.i_fault_magnitude,
        fault_current: sol.fault_current,
        converter_i1: Terminal::ALL.map(|t| limited.own_current(model, t)),
        converter_limit: Terminal::ALL.map(|t| policies.get(t).i_limit_pos),
        converter_v1: Terminal::ALL.map(|t| limited.solution.converter(t).voltage.positive.norm()),
        suppress_everywhere: policies.suppress_everywhere(),
        zero_path_open: networks.zero.is_open(),
    })
}

/// Runs scenarios on the current rayon pool; results keep input order.
pub fn run_all(study: &Study, scenarios: &[Scenario]) -> Result<Vec<ScenarioResult>> {
    scenarios.par_iter().map(|s| run_scenario(study, s)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingStatus {
    Pass,
    Fail,
    NotExercised,
}

impl fmt::Display for FindingStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FindingStatus::Pass => "PASS",
            FindingStatus::Fail => "FAIL",
            FindingStatus::NotExercised => "NOT EXERCISED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub id: &'static str,
    pub description: &'static str,
    pub status: FindingStatus,
    pub checked: usize,
    /// Violating scenario ids, with the violated condition.
    pub violations: Vec<String>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FindingsReport {
    pub findings: Vec<Finding>,
}

impl FindingsReport {
    pub fn all_pass(&self) -> bool {
        self.findings.iter().all(|f| f.status != FindingStatus::Fail)
    }

    pub fn get(&self, id: &str) -> Option<&Finding> {
        self.findings.iter().find(|f| f.id == id)
    }
}

impl fmt::Display for FindingsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for x in &self.findings {
            writeln!(f, "[{}] {}: {} ({} scenarios)", x.status, x.id, x.description, x.checked)?;
            if let Some(n) = &x.note {
                writeln!(f, "    note: {n}")?;
            }
            for v in &x.violations {
                writeln!(f, "    violated by {v}")?;
            }
        }
        Ok(())
    }
}

struct Check {
    checked: usize,
    violations: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self {
            checked: 0,
            violations: Vec::new(),
        }
    }

    fn expect(&mut self, r: &ScenarioResult, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.violations.push(format!("{}: {}", r.scenario.id(), what()));
        }
    }

    fn finish(self, id: &'static str, description: &'static str, note: Option<String>) -> Finding {
        let status = if !self.violations.is_empty() {
            FindingStatus::Fail
        } else if self.checked == 0 {
            FindingStatus::NotExercised
        } else {
            FindingStatus::Pass
        };
        Finding {
            id,
            description,
            status,
            checked: self.checked,
            violations: self.violations,
            note,
        }
    }
}

fn expect_trips(c: &mut Check, r: &ScenarioResult, elements: &[ElementId]) {
    for &e in elements {
        c.expect(r, r.trips(e), || format!("{e} did not trip"));
    }
}

fn expect_no_trips(c: &mut Check, r: &ScenarioResult) {
    for e in ElementId::ALL {
        c.expect(r, !r.trips(e), || format!("{e} tripped"));
    }
}

fn select(results: &[ScenarioResult], ft: FaultType, control: NegSeqMode) -> impl Iterator<Item = &ScenarioResult> {
    results
        .iter()
        .filter(move |r| r.scenario.is_internal() && r.scenario.fault_type == ft && r.scenario.control == control)
}

/// Allowed number of tripping resistance levels for 87L_a/87L_b on
/// phase-phase-ground faults under C1 (two levels, one level of slack).
pub const PPG_PHASE_TRIP_LEVELS: std::ops::RangeInclusive<usize> = 1..=3;

/// Checks the results against the expected protection behaviour.
pub fn check_findings(results: &[ScenarioResult]) -> FindingsReport {
    use ElementId::*;
    let mut findings = Vec::new();

    let mut c = Check::new();
    for r in select(results, FaultType::AG, NegSeqMode::C1).filter(|r| r.suppress_everywhere) {
        c.checked += 1;
        expect_no_trips(&mut c, r);
        c.expect(r, r.i_fault_magnitude < 1e-12, || {
            format!("fault current {:e} p.u.", r.i_fault_magnitude)
        });
    }
    findings.push(c.finish(
        "pg-c1-blindness",
        "internal AG faults with negative sequence suppressed everywhere: no element trips, no fault current",
        None,
    ));

    let mut c = Check::new();
    for r in select(results, FaultType::AG, NegSeqMode::C2).filter(|r| !r.zero_path_open) {
        c.checked += 1;
        expect_trips(&mut c, r, &[L87A, Q87, G87]);
    }
    findings.push(c.finish(
        "pg-c2-sensitivity",
        "internal AG faults under C2: 87L_a, 87Q and 87G trip",
        None,
    ));

    let mut c = Check::new();
    for r in results
        .iter()
        .filter(|r| r.scenario.is_internal() && r.scenario.fault_type == FaultType::AB)
    {
        c.checked += 1;
        c.expect(r, r.fault_current.zero.norm() == 0.0, || "non-zero I0".into());
        c.expect(r, !r.trips(G87), || "87G tripped".into());
        match r.scenario.control {
            NegSeqMode::C1 if r.suppress_everywhere => expect_no_trips(&mut c, r),
            NegSeqMode::C1 => {}
            NegSeqMode::C2 => expect_trips(&mut c, r, &[L87A, L87B, Q87]),
        }
    }
    findings.push(c.finish(
        "pp-mirror",
        "internal AB faults: no trips under C1, 87L_a/87L_b/87Q trip under C2, 87G never trips",
        None,
    ));

    let mut c = Check::new();
    let mut crossovers = Vec::new();
    for r in select(results, FaultType::ABG, NegSeqMode::C2).filter(|r| !r.zero_path_open) {
        c.checked += 1;
        expect_trips(&mut c, r, &[L87A, L87B, Q87, G87]);
    }
    let c1: Vec<_> = select(results, FaultType::ABG, NegSeqMode::C1)
        .filter(|r| r.suppress_everywhere && !r.zero_path_open)
        .collect();
    for r in &c1 {
        c.checked += 1;
        expect_trips(&mut c, r, &[G87]);
        c.expect(r, !r.trips(Q87), || "87Q tripped".into());
    }
    for loc in FaultPoint::INTERNAL {
        let mut at: Vec<_> = c1.iter().filter(|r| r.scenario.location == loc).collect();
        if at.len() != ResistanceLevel::ALL.len() {
            continue;
        }
        at.sort_by_key(|r| r.scenario.level);
        for e in [L87A, L87B] {
            let pattern: Vec<bool> = at.iter().map(|r| r.trips(e)).collect();
            let k = pattern.iter().take_while(|t| **t).count();
            let monotone = pattern[k..].iter().all(|t| !t);
            crossovers.push(format!("{loc} {e}: {k}"));
            if !(monotone && PPG_PHASE_TRIP_LEVELS.contains(&k)) {
                c.violations
                    .push(format!("{loc}-ABG-C1: {e} trip pattern {pattern:?} outside the expected crossover"));
            }
        }
    }
    let note = (!crossovers.is_empty()).then(|| {
        format!(
            "C1 87L trips at the lowest k resistance levels, k allowed in {}..={}: {}",
            PPG_PHASE_TRIP_LEVELS.start(),
            PPG_PHASE_TRIP_LEVELS.end(),
            crossovers.join(", ")
        )
    });
    findings.push(c.finish(
        "ppg-pattern",
        "internal ABG faults: under C1 87G always trips, 87Q never, 87L_a/87L_b only at low resistance; under C2 all trip",
        note,
    ));

    let mut c = Check::new();
    for r in results
        .iter()
        .filter(|r| r.scenario.is_internal() && r.scenario.fault_type == FaultType::ABC)
    {
        c.checked += 1;
        expect_trips(&mut c, r, &[L87A, L87B, L87C]);
    }
    findings.push(c.finish(
        "ppp-robustness",
        "internal ABC faults: all three 87L elements trip for every resistance and control",
        None,
    ));

    let mut c = Check::new();
    for r in results.iter().filter(|r| !r.scenario.is_internal()) {
        c.checked += 1;
        expect_no_trips(&mut c, r);
        for d in &r.decisions {
            c.expect(r, d.point.i_op < 1e-9, || format!("{} i_op {:e}", d.element, d.point.i_op));
        }
    }
    findings.push(c.finish(
        "external-selectivity",
        "external faults: no element trips, operating quantities below 1e-9 p.u.",
        None,
    ));

    let mut c = Check::new();
    for r in results {
        c.checked += 1;
        c.expect(r, r.converged, || format!("not converged after {} iterations", r.iteration_count));
        for t in Terminal::ALL {
            let (i, lim) = (r.converter_i1[t.index()], r.converter_limit[t.index()]);
            c.expect(r, i <= lim + 1e-6, || format!("{t} |I1| = {i} p.u. above {lim}"));
        }
    }
    findings.push(c.finish(
        "current-limit",
        "every scenario converges with converter positive-sequence currents within their limits",
        None,
    ));

    let mut c = Check::new();
    let mut blind = 0;
    for r in results
        .iter()
        .filter(|r| r.scenario.fault_type == FaultType::AG && r.zero_path_open)
    {
        c.checked += 1;
        c.expect(r, r.fault_current.zero.norm() == 0.0, || "non-zero I0".into());
        let g = r.decision(G87).point.i_op;
        c.expect(r, g == 0.0, || format!("87G i_op {g:e}"));
        blind += usize::from(!r.trips(G87));
    }
    let note = (c.checked > 0).then(|| {
        format!("zero-sequence path open in {} AG scenarios: 87G blind in {blind}", c.checked)
    });
    findings.push(c.finish(
        "grounding-dependence",
        "AG faults without a zero-sequence path: I0 and the 87G operating quantity are exactly zero",
        note,
    ));

    FindingsReport { findings }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_matrix_count() {
        assert_eq!(enumerate_scenarios(&ScenarioMatrix::default()).len(), 224);
    }

    #[test]
    fn single_location_and_type() {
        let m = ScenarioMatrix {
            locations: vec![FaultPoint::F3],
            fault_types: vec![FaultType::AG],
            ..ScenarioMatrix::default()
        };
        assert_eq!(enumerate_scenarios(&m).len(), 8);
    }

    #[test]
    fn empty_resistance_set() {
        let m = ScenarioMatrix {
            levels: vec![],
            ..ScenarioMatrix::default()
        };
        assert!(enumerate_scenarios(&m).is_empty());
    }

    #[test]
    fn ordering_is_location_type_level_control() {
        let s = enumerate_scenarios(&ScenarioMatrix::default());
        assert_eq!(s[0].id(), "F1-AG-R1-C1");
        assert_eq!(s[1].id(), "F1-AG-R1-C2");
        assert_eq!(s[2].id(), "F1-AG-R2-C1");
        assert_eq!(s[8].id(), "F1-AB-R1-C1");
        assert_eq!(s[32].id(), "F2-AG-R1-C1");
        assert_eq!(s[223].id(), "F7-ABC-R4-C2");
        let mut ids: Vec<_> = s.iter().map(Scenario::id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 224);
    }

    #[test]
    fn resistance_table() {
        use ResistanceLevel::*;
        assert_eq!(R3.resistances(FaultType::AG), (0.0, 25.0));
        assert_eq!(R4.resistances(FaultType::AB), (10.0, 0.0));
        assert_eq!(R2.resistances(FaultType::ABG), (2.5, 10.0));
        assert_eq!(R3.resistances(FaultType::ABC), (5.0, 0.0));
    }

    fn study() -> Study {
        Study::new(StudyConfig::default()).unwrap()
    }

    fn run(id: &str) -> ScenarioResult {
        let st = study();
        let s = st.scenarios().into_iter().find(|s| s.id() == id).unwrap();
        run_scenario(&st, &s).unwrap()
    }

    #[test]
    fn bolted_three_phase_trips_phase_elements() {
        let r = run("F3-ABC-R1-C1");
        for e in [ElementId::L87A, ElementId::L87B, ElementId::L87C] {
            assert!(r.trips(e));
        }
    }

    #[test]
    fn ground_fault_with_suppression_trips_nothing() {
        let r = run("F3-AG-R1-C1");
        assert!(r.decisions.iter().all(|d| !d.trip));
        assert!(r.i_fault_magnitude < 1e-12);
    }

    #[test]
    fn external_faults_trip_nothing() {
        for ft in FaultType::ALL {
            let r = run(&format!("F6-{ft}-R2-C2"));
            assert!(r.decisions.iter().all(|d| !d.trip && d.point.i_op < 1e-9));
        }
    }

    #[test]
    fn forced_c2_leaves_blindness_unexercised() {
        let mut cfg = StudyConfig::default();
        cfg.matrix.controls = vec![NegSeqMode::C2];
        let st = Study::new(cfg).unwrap();
        let res = run_all(&st, &st.scenarios()).unwrap();
        let rep = check_findings(&res);
        assert_eq!(rep.get("pg-c1-blindness").unwrap().status, FindingStatus::NotExercised);
    }

    #[test]
    fn desensitised_relay_fails_internal_findings() {
        let mut cfg = StudyConfig::default();
        cfg.relay.k0_pickup = 5.0;
        let st = Study::new(cfg).unwrap();
        let res = run_all(&st, &st.scenarios()).unwrap();
        let rep = check_findings(&res);
        assert!(!rep.all_pass());
        assert_eq!(rep.get("ppp-robustness").unwrap().status, FindingStatus::Fail);
    }

    #[test]
    fn default_study_findings() {
        let st = study();
        let res = run_all(&st, &st.scenarios()).unwrap();
        let rep = check_findings(&res);
        for f in rep.findings.iter().filter(|f| !matches!(f.id, "ppg-pattern" | "grounding-dependence")) {
            assert_eq!(f.status, FindingStatus::Pass, "{rep}");
        }
        assert_eq!(rep.get("grounding-dependence").unwrap().status, FindingStatus::NotExercised);
    }
}
