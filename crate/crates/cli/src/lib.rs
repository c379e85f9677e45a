//! Command-line front end for the differential protection study.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use diffstudy_core::relays::ElementId;
use diffstudy_core::scenarios::{check_findings, run_all, FindingsReport, ScenarioResult, Study};

pub use output::Format;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Study(#[from] diffstudy_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Options shared by every command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub config: Option<PathBuf>,
    pub only: Option<String>,
    pub format: Format,
    pub out: PathBuf,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            config: None,
            only: None,
            format: Format::Csv,
            out: PathBuf::from("results"),
            jobs: 0,
        }
    }
}

pub fn prepare(rc: &RunConfig) -> Result<Study, CliError> {
    let mut cfg = config::load(rc.config.as_deref())?;
    if let Some(only) = &rc.only {
        config::apply_only(&mut cfg, only)?;
    }
    config::build_study(cfg)
}

/// Runs the configured matrix on a pool of `jobs` threads.
pub fn evaluate(study: &Study, jobs: usize) -> Result<Vec<ScenarioResult>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("--jobs {jobs}: {e}")))?;
    let scenarios = study.scenarios();
    Ok(pool.install(|| run_all(study, &scenarios))?)
}

pub fn non_converged(results: &[ScenarioResult]) -> Vec<String> {
    results
        .iter()
        .filter(|r| !r.converged)
        .map(|r| format!("{} did not converge after {} iterations", r.scenario.id(), r.iteration_count))
        .collect()
}

fn results_path(dir: &Path, format: Format) -> PathBuf {
    dir.join(format!("results.{}", format.extension()))
}

/// Output of `run`: written files and scenarios flagged as non-converged.
#[derive(Debug)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn cmd_run(rc: &RunConfig) -> Result<RunOutcome, CliError> {
    let study = prepare(rc)?;
    let results = evaluate(&study, rc.jobs)?;
    std::fs::create_dir_all(&rc.out)?;
    let table = results_path(&rc.out, rc.format);
    output::write_results(std::fs::File::create(&table)?, &output::records(&results), rc.format)?;
    let mut files = vec![table];
    for e in ElementId::ALL {
        let plane = output::plane(&results, e, &study.config.relay);
        files.extend(output::write_plane(&rc.out, &plane, rc.format)?);
    }
    Ok(RunOutcome {
        files,
        warnings: non_converged(&results),
    })
}

pub fn cmd_verify(rc: &RunConfig) -> Result<(FindingsReport, Vec<String>), CliError> {
    let study = prepare(rc)?;
    let results = evaluate(&study, rc.jobs)?;
    Ok((check_findings(&results), non_converged(&results)))
}

pub fn cmd_plane(rc: &RunConfig, element: ElementId) -> Result<RunOutcome, CliError> {
    let study = prepare(rc)?;
    let results = evaluate(&study, rc.jobs)?;
    std::fs::create_dir_all(&rc.out)?;
    let plane = output::plane(&results, element, &study.config.relay);
    Ok(RunOutcome {
        files: output::write_plane(&rc.out, &plane, rc.format)?,
        warnings: non_converged(&results),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use diffstudy_core::scenarios::FindingStatus;

    fn rc(dir: &Path, format: Format, only: Option<&str>) -> RunConfig {
        RunConfig {
            only: only.map(str::to_string),
            format,
            out: dir.to_path_buf(),
            ..RunConfig::default()
        }
    }

    fn with_config(rc: RunConfig, dir: &Path, text: &str) -> RunConfig {
        let path = dir.join("study.toml");
        std::fs::write(&path, text).unwrap();
        RunConfig { config: Some(path), ..rc }
    }

    #[test]
    fn only_filter_writes_long_table() {
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_run(&rc(dir.path(), Format::Csv, Some("F3,AG"))).unwrap();
        assert!(out.warnings.is_empty());
        let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "scenario_id,location,fault_type,r_phase_ohm,r_ground_ohm,control,element,i_rst_pu,i_op_pu,trip,converged"
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 8 * ElementId::ALL.len());
        let ids: std::collections::BTreeSet<_> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
        assert_eq!(ids.len(), 8);
        assert!(rows[0].starts_with("F3-AG-R1-C1,F3,AG,0,0,C1,87L_a,"));
    }

    #[test]
    fn json_matches_csv() {
        let dir = tempfile::tempdir().unwrap();
        cmd_run(&rc(dir.path(), Format::Csv, Some("F2,ABG"))).unwrap();
        cmd_run(&rc(dir.path(), Format::Json, Some("F2,ABG"))).unwrap();
        let json: Vec<serde_json::Value> =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("results.json")).unwrap()).unwrap();
        let csv_text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
        let headers = rdr.headers().unwrap().clone();
        let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), json.len());
        for (row, rec) in rows.iter().zip(&json) {
            for (h, field) in headers.iter().zip(row.iter()) {
                let v = &rec[h];
                let as_text = match v {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Number(n) => output::sig9(n.as_f64().unwrap()),
                    other => other.to_string(),
                };
                assert_eq!(as_text, field, "{h}");
            }
        }
    }

    #[test]
    fn plane_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_plane(&rc(dir.path(), Format::Csv, Some("F4,ABG")), ElementId::G87).unwrap();
        assert_eq!(out.files.len(), 2);
        let points = std::fs::read_to_string(dir.path().join("plane_87G.csv")).unwrap();
        assert_eq!(points.lines().next().unwrap(), "i_rst_pu,i_op_pu,scenario_id,zone");
        assert_eq!(points.lines().count(), 9);
        assert!(points.lines().skip(1).all(|l| l.ends_with(",internal")));
        let boundary = std::fs::read_to_string(dir.path().join("boundary_87G.csv")).unwrap();
        assert_eq!(boundary.lines().count(), 1 + output::BOUNDARY_POINTS);
        assert_eq!(boundary.lines().nth(1).unwrap(), "0,0.3");
    }

    #[test]
    fn ppg_c1_plane_regions() {
        let study = prepare(&RunConfig::default()).unwrap();
        let results = evaluate(&study, 2).unwrap();
        let relay = study.config.relay;
        let ppg_c1: Vec<_> = results
            .iter()
            .filter(|r| {
                r.scenario.is_internal()
                    && r.scenario.fault_type == diffstudy_core::network::FaultType::ABG
                    && r.scenario.control == diffstudy_core::ibr::NegSeqMode::C1
            })
            .collect();
        for e in [ElementId::G87, ElementId::Q87] {
            let plane = output::plane(&results, e, &relay);
            for r in &ppg_c1 {
                let p = plane.points.iter().find(|p| p.scenario_id == r.scenario.id()).unwrap();
                let operate = p.i_op_pu > relay.threshold(p.i_rst_pu);
                assert_eq!(operate, e == ElementId::G87, "{e} {}", p.scenario_id);
            }
        }
    }

    #[test]
    fn external_zone_tag() {
        let dir = tempfile::tempdir().unwrap();
        cmd_plane(&rc(dir.path(), Format::Json, Some("F7,AB")), ElementId::L87A).unwrap();
        let plane: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("plane_87L_a.json")).unwrap()).unwrap();
        let points = plane["points"].as_array().unwrap();
        assert_eq!(points.len(), 8);
        assert!(points.iter().all(|p| p["zone"] == "external" && p["i_op_pu"] == 0.0));
        assert_eq!(plane["boundary"].as_array().unwrap().len(), output::BOUNDARY_POINTS);
    }

    #[test]
    fn desensitised_relay_fails_findings() {
        let dir = tempfile::tempdir().unwrap();
        let rc = with_config(RunConfig::default(), dir.path(), "[relay]\nk0_pickup = 5.0\n");
        let (report, _) = cmd_verify(&rc).unwrap();
        assert!(!report.all_pass());
        for id in ["pg-c2-sensitivity", "pp-mirror", "ppp-robustness"] {
            assert_eq!(report.get(id).unwrap().status, FindingStatus::Fail, "{id}");
        }
    }

    #[test]
    fn c2_only_leaves_c1_blindness_unexercised() {
        let dir = tempfile::tempdir().unwrap();
        let rc = with_config(RunConfig::default(), dir.path(), "[matrix]\ncontrols = [\"C2\"]\n");
        let (report, _) = cmd_verify(&rc).unwrap();
        assert_eq!(report.get("pg-c1-blindness").unwrap().status, FindingStatus::NotExercised);
    }

    #[test]
    fn non_converged_scenarios_are_flagged_not_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let base = rc(dir.path(), Format::Csv, Some("F3,ABC"));
        let rc = with_config(base, dir.path(), "[solver]\nmax_iterations = 1\n");
        let out = cmd_run(&rc).unwrap();
        assert!(!out.warnings.is_empty());
        let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + 8 * ElementId::ALL.len());
        assert!(text.lines().any(|l| l.ends_with(",false")));
    }

    #[test]
    fn configuration_errors() {
        let dir = tempfile::tempdir().unwrap();
        let bad_key = with_config(RunConfig::default(), dir.path(), "[system.cable1]\nlenght_km = 3.0\n");
        let e = prepare(&bad_key).unwrap_err().to_string();
        assert!(e.contains("lenght_km") && e.contains("line 2"), "{e}");
        let bad_value = with_config(RunConfig::default(), dir.path(), "[relay]\nk_slope = 1.5\n");
        assert!(matches!(prepare(&bad_value), Err(CliError::Config(_))));
        let missing = RunConfig {
            config: Some(dir.path().join("absent.toml")),
            ..RunConfig::default()
        };
        assert!(matches!(prepare(&missing), Err(CliError::Config(_))));
    }
}
