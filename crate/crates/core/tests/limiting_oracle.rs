//! Converged limited solutions checked against the phase-domain solver and
//! against the limiting laws evaluated from scratch.

use diffstudy_core::ibr::{apply_policies, ConverterMode, LimitStrategy, LimitedSolution, Policies};
use diffstudy_core::network::phase_domain::brute_force_phase_solve;
use diffstudy_core::network::{prefault_terminal_voltages, solve, FaultSpec, FaultType, PositiveSource, SourceSet};
use diffstudy_core::phasor::{Phasor, PhasorExt};
use diffstudy_core::scenarios::{Study, StudyConfig};
use diffstudy_core::system::{SystemModel, Terminal};
use num_complex::Complex64;

fn study(config: StudyConfig) -> Study {
    Study::new(config).unwrap()
}

fn limited(study: &Study, policies: &Policies, fault: &FaultSpec) -> LimitedSolution {
    let linear = solve(&study.model, &policies.linear_sources(&study.model), fault).unwrap();
    apply_policies(&study.model, linear, policies, &study.config.solver).unwrap()
}

fn limit_of(model: &SystemModel, policies: &Policies, t: Terminal) -> f64 {
    policies.get(t).i_limit_pos / model.own_rating_factor(t)
}

fn injection(sources: &SourceSet, t: Terminal) -> Option<Phasor> {
    match sources.get(t).positive {
        PositiveSource::CurrentLimited { injection } => Some(injection),
        PositiveSource::VoltageSource => None,
    }
}

fn expected_law(strategy: LimitStrategy, demand: Phasor, frame: Phasor, limit: f64) -> Phasor {
    let u = frame / frame.norm();
    match strategy {
        LimitStrategy::Reactive => Phasor::from_polar_deg(limit, u.arg().to_degrees() - 90.0),
        LimitStrategy::ReactivePriority => {
            // Decompose on the frame: `p` in phase, `q` in quadrature.
            let p = (demand * u.conj()).re;
            let q = (demand * u.conj()).im;
            let q_out = if q.abs() > limit { limit * q.signum() } else { q };
            let cap = (limit * limit - q_out * q_out).max(0.0).sqrt();
            let p_out = if p.abs() > cap { cap * p.signum() } else { p };
            Complex64::new(p_out, q_out) * u
        }
        LimitStrategy::Proportional => {
            if demand.norm() > limit {
                demand * (limit / demand.norm())
            } else {
                demand
            }
        }
    }
}

/// Checks every limited converter against its law using phase-domain solves only.
fn check_solution(model: &SystemModel, policies: &Policies, fault: &FaultSpec, res: &LimitedSolution, tol: f64) {
    assert!(res.converged, "{fault:?} did not converge");
    let phase = brute_force_phase_solve(model, &res.solution.sources, fault).unwrap_or_else(|e| panic!("{fault:?} {:?}: {e}", res.modes));
    let prefault = prefault_terminal_voltages(model, &policies.linear_sources(model)).unwrap();
    for t in Terminal::ALL {
        let a = res.solution.converter(t).current.positive;
        let b = phase.converter(t).current.positive;
        assert!((a - b).norm() < 1e-9, "{fault:?} {t:?}: {a} vs {b}");
        let limit = limit_of(model, policies, t);
        let Some(x) = injection(&res.solution.sources, t) else {
            assert!(b.norm() <= limit * (1.0 + 1e-9), "{fault:?} {t:?} above limit as voltage source");
            continue;
        };
        let src = model.source(t);
        let v = phase.converter(t).voltage.positive;
        let demand = (src.emf - v) * src.z.z1.admittance();
        let mut without = res.solution.sources;
        without.get_mut(t).positive = PositiveSource::CurrentLimited {
            injection: Complex64::new(0.0, 0.0),
        };
        let v0 = brute_force_phase_solve(model, &without, fault).unwrap_or_else(|e| panic!("{fault:?} {t:?} {:?}: {e}", res.modes)).converter(t).voltage.positive;
        // With nothing else driving the terminal, the prefault voltage orients the current.
        let frame = if v0.norm() > 1e-6 { v0 } else { prefault[t.index()] };
        let want = expected_law(policies.get(t).limiting, demand, frame, limit);
        assert!((x - want).norm() < tol, "{fault:?} {t:?}: injection {x} but law gives {want}");
        assert!(x.norm() <= limit * (1.0 + 1e-9));
    }
}

fn sample_faults() -> Vec<FaultSpec> {
    use diffstudy_core::network::FaultPoint;
    let mut out = Vec::new();
    for p in FaultPoint::ALL {
        for ft in FaultType::ALL {
            for (rph, rg) in [(0.0, 0.0), (2.0, 10.0), (15.0, 60.0)] {
                out.push(FaultSpec::at(p, ft, rph, rg));
            }
        }
    }
    out
}

#[test]
fn default_policies_obey_their_laws() {
    let s = study(StudyConfig::default());
    for control in s.config.matrix.controls.clone() {
        let policies = s.policies_for(control);
        for fault in sample_faults() {
            let res = limited(&s, &policies, &fault);
            check_solution(&s.model, &policies, &fault, &res, 1e-7);
        }
    }
}

#[test]
fn proportional_policies_obey_their_laws() {
    let s = study(StudyConfig::default());
    let mut policies = s.policies_for(diffstudy_core::ibr::NegSeqMode::C2);
    for t in Terminal::ALL {
        policies.get_mut(t).limiting = LimitStrategy::Proportional;
    }
    for fault in sample_faults() {
        let res = limited(&s, &policies, &fault);
        check_solution(&s.model, &policies, &fault, &res, 1e-7);
    }
}

/// Residual of the saturated-demand map for two proportional converters
/// held at the limit with injection angles `th`.
fn sweep_residual(model: &SystemModel, base: &SourceSet, fault: &FaultSpec, ts: [Terminal; 2], limits: [f64; 2], th: [f64; 2]) -> f64 {
    let mut s = *base;
    for k in 0..2 {
        s.get_mut(ts[k]).positive = PositiveSource::CurrentLimited {
            injection: Complex64::from_polar(limits[k], th[k]),
        };
    }
    let sol = solve(model, &s, fault).unwrap();
    (0..2)
        .map(|k| {
            let src = model.source(ts[k]);
            let demand = (src.emf - sol.converter(ts[k]).voltage.positive) * src.z.z1.admittance();
            let angle = (demand.arg() - th[k] + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
            angle.abs() + (demand.norm() < limits[k]) as u8 as f64
        })
        .fold(0.0, f64::max)
}

#[test]
fn two_saturated_converters_match_an_angle_sweep() {
    use std::f64::consts::TAU;
    let s = study(StudyConfig::default());
    let mut policies = s.policies_for(diffstudy_core::ibr::NegSeqMode::C2);
    for t in Terminal::ALL {
        policies.get_mut(t).limiting = LimitStrategy::Proportional;
    }
    let (fault, res) = sample_faults()
        .into_iter()
        .map(|f| {
            let r = limited(&s, &policies, &f);
            (f, r)
        })
        .find(|(_, r)| r.converged && r.modes.iter().filter(|m| **m == ConverterMode::CurrentLimited).count() == 2)
        .expect("a case with two limited converters");
    let ts: Vec<Terminal> = Terminal::ALL
        .into_iter()
        .filter(|t| res.modes[t.index()] == ConverterMode::CurrentLimited)
        .collect();
    let ts = [ts[0], ts[1]];
    let limits = ts.map(|t| limit_of(&s.model, &policies, t));
    let got = ts.map(|t| injection(&res.solution.sources, t).unwrap().arg());

    // Coarse grid, then zoom around every local minimum below a loose bound.
    let n = 90;
    let step = TAU / n as f64;
    let grid: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| sweep_residual(&s.model, &res.solution.sources, &fault, ts, limits, [i as f64 * step, j as f64 * step])).collect())
        .collect();
    let mut roots = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let r = grid[i][j];
            let is_min = (-1i32..=1).all(|di| {
                (-1i32..=1).all(|dj| r <= grid[(i as i32 + di).rem_euclid(n as i32) as usize][(j as i32 + dj).rem_euclid(n as i32) as usize])
            });
            if !is_min || r > 0.5 {
                continue;
            }
            let mut c = [i as f64 * step, j as f64 * step];
            let mut h = step;
            let mut best = r;
            while h > 1e-10 {
                let mut moved = false;
                for di in -2..=2 {
                    for dj in -2..=2 {
                        let p = [c[0] + di as f64 * h / 2.0, c[1] + dj as f64 * h / 2.0];
                        let v = sweep_residual(&s.model, &res.solution.sources, &fault, ts, limits, p);
                        if v < best {
                            best = v;
                            c = p;
                            moved = true;
                        }
                    }
                }
                if !moved {
                    h /= 2.0;
                }
            }
            if best < 1e-7 {
                roots.push(c);
            }
        }
    }
    assert!(!roots.is_empty(), "sweep found no fixed point");
    let wrap = |a: f64| (a + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
    let matched = roots
        .iter()
        .any(|c| (0..2).all(|k| (limits[k] * wrap(c[k] - got[k])).abs() < 1e-6));
    assert!(matched, "{fault:?}: solver angles {got:?} not among sweep roots {roots:?}");
}
