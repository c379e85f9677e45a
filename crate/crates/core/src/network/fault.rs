use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultType {
    AG,
    AB,
    ABG,
    ABC,
}

impl FaultType {
    pub const ALL: [FaultType; 4] = [FaultType::AG, FaultType::AB, FaultType::ABG, FaultType::ABC];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultType::AG => "AG",
            FaultType::AB => "AB",
            FaultType::ABG => "ABG",
            FaultType::ABC => "ABC",
        }
    }

    pub fn involves_ground(self) -> bool {
        matches!(self, FaultType::AG | FaultType::ABG)
    }
}

impl fmt::Display for FaultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FaultType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AG" => Ok(FaultType::AG),
            "AB" => Ok(FaultType::AB),
            "ABG" => Ok(FaultType::ABG),
            "ABC" => Ok(FaultType::ABC),
            other => Err(Error::InvalidFault(format!("unknown fault type {other:?}"))),
        }
    }
}

/// Named fault points. F1..F5 lie on collector cable 1 at 0, 25, 50, 75 and
/// 100 % of its length measured from P1; F6 and F7 are the 230 kV buses just
/// outside P1 and P2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultPoint {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
}

impl FaultPoint {
    pub const ALL: [FaultPoint; 7] = [
        FaultPoint::F1,
        FaultPoint::F2,
        FaultPoint::F3,
        FaultPoint::F4,
        FaultPoint::F5,
        FaultPoint::F6,
        FaultPoint::F7,
    ];
    pub const INTERNAL: [FaultPoint; 5] = [
        FaultPoint::F1,
        FaultPoint::F2,
        FaultPoint::F3,
        FaultPoint::F4,
        FaultPoint::F5,
    ];
    pub const EXTERNAL: [FaultPoint; 2] = [FaultPoint::F6, FaultPoint::F7];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultPoint::F1 => "F1",
            FaultPoint::F2 => "F2",
            FaultPoint::F3 => "F3",
            FaultPoint::F4 => "F4",
            FaultPoint::F5 => "F5",
            FaultPoint::F6 => "F6",
            FaultPoint::F7 => "F7",
        }
    }

    pub fn site(self) -> FaultSite {
        match self {
            FaultPoint::F1 => FaultSite::Internal(0.0),
            FaultPoint::F2 => FaultSite::Internal(0.25),
            FaultPoint::F3 => FaultSite::Internal(0.5),
            FaultPoint::F4 => FaultSite::Internal(0.75),
            FaultPoint::F5 => FaultSite::Internal(1.0),
            FaultPoint::F6 => FaultSite::ExternalP1Bus,
            FaultPoint::F7 => FaultSite::ExternalP2Bus,
        }
    }

    pub fn is_internal(self) -> bool {
        self.site().is_internal()
    }
}

impl fmt::Display for FaultPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FaultPoint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FaultPoint::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidFault(format!("unknown fault point {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FaultLocation {
    Point(FaultPoint),
    /// Fractional distance along collector cable 1, measured from P1.
    Distance(f64),
}

/// Where the fault sits electrically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaultSite {
    Internal(f64),
    ExternalP1Bus,
    ExternalP2Bus,
}

impl FaultSite {
    pub fn is_internal(&self) -> bool {
        matches!(self, FaultSite::Internal(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub fault_type: FaultType,
    pub location: FaultLocation,
    /// Phase (inter-phase) fault resistance, ohms.
    pub r_phase_ohm: f64,
    /// Ground fault resistance, ohms.
    pub r_ground_ohm: f64,
}

impl FaultSpec {
    pub fn at(point: FaultPoint, fault_type: FaultType, r_phase_ohm: f64, r_ground_ohm: f64) -> Self {
        Self {
            fault_type,
            location: FaultLocation::Point(point),
            r_phase_ohm,
            r_ground_ohm,
        }
    }

    pub fn site(&self) -> Result<FaultSite> {
        self.validate()?;
        Ok(match self.location {
            FaultLocation::Point(p) => p.site(),
            FaultLocation::Distance(d) => FaultSite::Internal(d),
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("r_phase", self.r_phase_ohm), ("r_ground", self.r_ground_ohm)] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::InvalidFault(format!("{name} must be finite and non-negative, got {r}")));
            }
        }
        if let FaultLocation::Distance(d) = self.location {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::InvalidFault(format!("fault distance must lie in [0, 1], got {d}")));
            }
        }
        Ok(())
    }
}
