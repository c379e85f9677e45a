//! Result tables and differential-plane files.

use std::io::Write;

use serde::Serialize;

use diffstudy_core::relays::{ElementId, RelaySettings};
use diffstudy_core::scenarios::ScenarioResult;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Formats `x` with nine significant digits, `%g` style, without `-0`.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if !(-5..9).contains(&exp) {
        format!("{}e{exp}", trim(mantissa.to_string()))
    } else {
        let decimals = (8 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    }
}

/// `x` rounded to the value printed by [`sig9`].
pub fn round9(x: f64) -> f64 {
    sig9(x).parse().expect("formatted float parses")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub scenario_id: String,
    pub location: String,
    pub fault_type: String,
    pub r_phase_ohm: f64,
    pub r_ground_ohm: f64,
    pub control: String,
    pub element: String,
    pub i_rst_pu: f64,
    pub i_op_pu: f64,
    pub trip: bool,
    pub converged: bool,
}

pub fn records(results: &[ScenarioResult]) -> Vec<Record> {
    results
        .iter()
        .flat_map(|r| {
            let s = r.scenario;
            let fault = s.fault();
            r.decisions.iter().map(move |d| Record {
                scenario_id: s.id(),
                location: s.location.to_string(),
                fault_type: s.fault_type.to_string(),
                r_phase_ohm: round9(fault.r_phase_ohm),
                r_ground_ohm: round9(fault.r_ground_ohm),
                control: s.control.to_string(),
                element: d.element.to_string(),
                i_rst_pu: round9(d.point.i_rst),
                i_op_pu: round9(d.point.i_op),
                trip: d.trip,
                converged: r.converged,
            })
        })
        .collect()
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_results<W: Write>(w: W, records: &[Record], format: Format) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            let mut out = csv_writer(w);
            out.write_record([
                "scenario_id",
                "location",
                "fault_type",
                "r_phase_ohm",
                "r_ground_ohm",
                "control",
                "element",
                "i_rst_pu",
                "i_op_pu",
                "trip",
                "converged",
            ])?;
            for r in records {
                out.write_record([
                    r.scenario_id.clone(),
                    r.location.clone(),
                    r.fault_type.clone(),
                    sig9(r.r_phase_ohm),
                    sig9(r.r_ground_ohm),
                    r.control.clone(),
                    r.element.clone(),
                    sig9(r.i_rst_pu),
                    sig9(r.i_op_pu),
                    r.trip.to_string(),
                    r.converged.to_string(),
                ])?;
            }
            out.flush()?;
        }
        Format::Json => {
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, records)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanePoint {
    pub i_rst_pu: f64,
    pub i_op_pu: f64,
    pub scenario_id: String,
    pub zone: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plane {
    pub element: String,
    pub k_slope: f64,
    pub k0_pickup: f64,
    pub points: Vec<PlanePoint>,
    /// Characteristic `i_op = K·i_rst + K0` as `[i_rst, i_op]` pairs.
    pub boundary: Vec<[f64; 2]>,
}

pub const BOUNDARY_POINTS: usize = 100;

pub fn boundary(settings: &RelaySettings, i_rst_max: f64) -> Vec<[f64; 2]> {
    (0..BOUNDARY_POINTS)
        .map(|k| {
            let x = i_rst_max * k as f64 / (BOUNDARY_POINTS - 1) as f64;
            [round9(x), round9(settings.threshold(x))]
        })
        .collect()
}

pub fn plane(results: &[ScenarioResult], element: ElementId, settings: &RelaySettings) -> Plane {
    let points: Vec<PlanePoint> = results
        .iter()
        .map(|r| {
            let p = r.decision(element).point;
            PlanePoint {
                i_rst_pu: round9(p.i_rst),
                i_op_pu: round9(p.i_op),
                scenario_id: r.scenario.id(),
                zone: if r.scenario.is_internal() { "internal" } else { "external" },
            }
        })
        .collect();
    let reach = points.iter().map(|p| p.i_rst_pu).fold(0.0, f64::max);
    Plane {
        element: element.to_string(),
        k_slope: settings.k_slope,
        k0_pickup: settings.k0_pickup,
        boundary: boundary(settings, (1.1 * reach).max(2.0)),
        points,
    }
}

/// Writes the points file and, for CSV, a separate boundary file.
pub fn write_plane(dir: &std::path::Path, plane: &Plane, format: Format) -> Result<Vec<std::path::PathBuf>, CliError> {
    let stem = format!("plane_{}", plane.element);
    match format {
        Format::Csv => {
            let points = dir.join(format!("{stem}.csv"));
            let mut w = csv_writer(std::fs::File::create(&points)?);
            w.write_record(["i_rst_pu", "i_op_pu", "scenario_id", "zone"])?;
            for p in &plane.points {
                w.write_record([sig9(p.i_rst_pu), sig9(p.i_op_pu), p.scenario_id.clone(), p.zone.to_string()])?;
            }
            w.flush()?;
            let bpath = dir.join(format!("boundary_{}.csv", plane.element));
            let mut w = csv_writer(std::fs::File::create(&bpath)?);
            w.write_record(["i_rst_pu", "i_op_pu"])?;
            for [x, y] in &plane.boundary {
                w.write_record([sig9(*x), sig9(*y)])?;
            }
            w.flush()?;
            Ok(vec![points, bpath])
        }
        Format::Json => {
            let path = dir.join(format!("{stem}.json"));
            let mut f = std::fs::File::create(&path)?;
            serde_json::to_writer_pretty(&mut f, plane)?;
            writeln!(f)?;
            Ok(vec![path])
        }
    }
}
