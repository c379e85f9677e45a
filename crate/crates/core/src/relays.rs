//! Percentage differential elements 87L (per phase), 87Q and 87G.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasor::{Phasor, SequenceSet, ThreePhaseSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelaySettings {
    /// Restraint slope K.
    pub k_slope: f64,
    /// Minimum pickup K0, p.u. of the cable's nominal current.
    pub k0_pickup: f64,
}

impl Default for RelaySettings {
    fn default() -> Self {
        Self {
            k_slope: 0.5,
            k0_pickup: 0.3,
        }
    }
}

impl RelaySettings {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.k_slope) {
            return Err(Error::InvalidConfig(format!("relay.k_slope must lie in [0, 1), got {}", self.k_slope)));
        }
        if !(self.k0_pickup.is_finite() && self.k0_pickup >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "relay.k0_pickup must be non-negative, got {}",
                self.k0_pickup
            )));
        }
        Ok(())
    }

    /// Operating threshold at a given restraint.
    pub fn threshold(&self, i_rst: f64) -> f64 {
        self.k_slope * i_rst + self.k0_pickup
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ElementId {
    #[serde(rename = "87L_a")]
    L87A,
    #[serde(rename = "87L_b")]
    L87B,
    #[serde(rename = "87L_c")]
    L87C,
    #[serde(rename = "87Q")]
    Q87,
    #[serde(rename = "87G")]
    G87,
}

impl ElementId {
    pub const ALL: [ElementId; 5] = [
        ElementId::L87A,
        ElementId::L87B,
        ElementId::L87C,
        ElementId::Q87,
        ElementId::G87,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ElementId::L87A => "87L_a",
            ElementId::L87B => "87L_b",
            ElementId::L87C => "87L_c",
            ElementId::Q87 => "87Q",
            ElementId::G87 => "87G",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ElementId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ElementId::ALL
            .into_iter()
            .find(|e| e.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown element {s:?}")))
    }
}

/// A point on the differential plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DifferentialPoint {
    pub i_rst: f64,
    pub i_op: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TripDecision {
    pub element: ElementId,
    pub point: DifferentialPoint,
    pub trip: bool,
}

/// Both currents measured into the protected zone.
pub fn differential_point(i_local: Phasor, i_remote: Phasor) -> DifferentialPoint {
    DifferentialPoint {
        i_rst: i_local.norm() + i_remote.norm(),
        i_op: (i_local + i_remote).norm(),
    }
}

/// Operates strictly above the characteristic; points on it restrain.
pub fn evaluate_element(element: ElementId, point: DifferentialPoint, settings: &RelaySettings) -> TripDecision {
    TripDecision {
        element,
        point,
        trip: point.i_op > settings.threshold(point.i_rst),
    }
}

/// Evaluates all five elements from the P1 and P2 terminal currents.
pub fn evaluate_all(p1: &ThreePhaseSet, p2: &ThreePhaseSet, settings: &RelaySettings) -> [TripDecision; 5] {
    evaluate(p1, p2, &p1.to_sequence(), &p2.to_sequence(), settings)
}

/// As [`evaluate_all`] from sequence currents, so that a sequence current
/// that is exactly zero stays zero in 87Q and 87G.
pub fn evaluate_sequences(s1: &SequenceSet, s2: &SequenceSet, settings: &RelaySettings) -> [TripDecision; 5] {
    evaluate(&s1.to_phases(), &s2.to_phases(), s1, s2, settings)
}

fn evaluate(
    p1: &ThreePhaseSet,
    p2: &ThreePhaseSet,
    s1: &SequenceSet,
    s2: &SequenceSet,
    settings: &RelaySettings,
) -> [TripDecision; 5] {
    ElementId::ALL.map(|e| {
        let (l, r) = match e {
            ElementId::L87A => (p1.a, p2.a),
            ElementId::L87B => (p1.b, p2.b),
            ElementId::L87C => (p1.c, p2.c),
            ElementId::Q87 => (s1.negative, s2.negative),
            ElementId::G87 => (s1.zero, s2.zero),
        };
        evaluate_element(e, differential_point(l, r), settings)
    })
}
