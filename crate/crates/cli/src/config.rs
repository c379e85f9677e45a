//! Loading the study configuration file.

use std::path::Path;

use diffstudy_core::network::{FaultPoint, FaultType};
use diffstudy_core::ibr::NegSeqMode;
use diffstudy_core::scenarios::{ResistanceLevel, Study, StudyConfig};

use crate::CliError;

/// Reads a TOML configuration. Missing sections take their defaults;
/// unknown keys are errors.
pub fn load(path: Option<&Path>) -> Result<StudyConfig, CliError> {
    let Some(path) = path else {
        return Ok(StudyConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse(text: &str) -> Result<StudyConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

pub fn dump_defaults() -> String {
    let body = toml::to_string(&StudyConfig::default()).expect("default config serializes");
    format!(
        "# Default study configuration. Impedances are [re, im] or \"open\";\n\
         # cable impedances in ohm/km, equipment impedances in p.u. on own rating.\n\n{body}"
    )
}

pub fn build_study(config: StudyConfig) -> Result<Study, CliError> {
    Study::new(config).map_err(|e| CliError::Config(e.to_string()))
}

/// Restricts the matrix to `loc,type[,R][,control]`.
pub fn apply_only(config: &mut StudyConfig, filter: &str) -> Result<(), CliError> {
    let bad = |msg: String| CliError::Config(format!("--only {filter:?}: {msg}"));
    let parts: Vec<&str> = filter.split(',').map(str::trim).collect();
    if parts.len() < 2 || parts.len() > 4 {
        return Err(bad("expected loc,type[,R][,control]".into()));
    }
    let loc: FaultPoint = parts[0].parse().map_err(|e| bad(format!("{e}")))?;
    let ft: FaultType = parts[1].parse().map_err(|e| bad(format!("{e}")))?;
    let m = &mut config.matrix;
    m.locations = vec![loc];
    m.fault_types = vec![ft];
    for p in &parts[2..] {
        if let Ok(level) = p.parse::<ResistanceLevel>() {
            m.levels = vec![level];
        } else if let Ok(control) = p.parse::<NegSeqMode>() {
            m.controls = vec![control];
        } else {
            return Err(bad(format!("{p:?} is neither a resistance level nor a control mode")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        assert_eq!(parse(&dump_defaults()).unwrap(), StudyConfig::default());
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let c = parse("[relay]\nk0_pickup = 5.0\n").unwrap();
        assert_eq!(c.relay.k0_pickup, 5.0);
        assert_eq!(c.system, StudyConfig::default().system);
    }

    #[test]
    fn unknown_key_reports_line() {
        let e = parse("[relay]\nk_slope = 0.5\nk0_pikup = 0.2\n").unwrap_err();
        assert!(e.contains("line 3"), "{e}");
        assert!(e.contains("k0_pikup"), "{e}");
    }

    #[test]
    fn only_filter() {
        let mut c = StudyConfig::default();
        apply_only(&mut c, "F3,AG").unwrap();
        assert_eq!(diffstudy_core::scenarios::enumerate_scenarios(&c.matrix).len(), 8);
        apply_only(&mut c, "f3,ag,R2,C2").unwrap();
        assert_eq!(diffstudy_core::scenarios::enumerate_scenarios(&c.matrix).len(), 1);
        assert!(apply_only(&mut c, "F3").is_err());
        assert!(apply_only(&mut c, "F3,AG,R9").is_err());
    }
}
