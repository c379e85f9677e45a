//! Sequence-network interconnections for shunt faults.
//!
//! Faults are solved in the frame of the phase that is symmetric with
//! respect to the fault: phase a for AG and ABC, phase c for AB and ABG.
//! Results are returned referred to phase a.

use num_complex::Complex64;

use super::fault::FaultType;
use crate::error::{Error, Result};
use crate::phasor::{alpha, alpha2, SequenceSet};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Positive-sequence network reduced at the fault point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActiveEquivalent {
    /// No source and no path to ground.
    Open,
    /// Only current-limited sources remain: fixed injection, no admittance.
    CurrentSource(Complex64),
    Thevenin { emf: Complex64, z: Complex64 },
}

/// Negative- or zero-sequence network reduced at the fault point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PassiveEquivalent {
    Open,
    Impedance(Complex64),
}

impl ActiveEquivalent {
    pub fn from_norton(y: Complex64, j: Complex64) -> Self {
        if y == ZERO {
            if j == ZERO {
                ActiveEquivalent::Open
            } else {
                ActiveEquivalent::CurrentSource(j)
            }
        } else {
            ActiveEquivalent::Thevenin { emf: j / y, z: 1.0 / y }
        }
    }

    fn rotated(self, r: Complex64) -> Self {
        match self {
            ActiveEquivalent::Open => ActiveEquivalent::Open,
            ActiveEquivalent::CurrentSource(j) => ActiveEquivalent::CurrentSource(j * r),
            ActiveEquivalent::Thevenin { emf, z } => ActiveEquivalent::Thevenin { emf: emf * r, z },
        }
    }

    fn open_voltage(self) -> Complex64 {
        match self {
            ActiveEquivalent::Thevenin { emf, .. } => emf,
            _ => ZERO,
        }
    }

    fn check_unloaded(self) -> Result<()> {
        match self {
            ActiveEquivalent::CurrentSource(j) if j != ZERO => Err(Error::SingularNetwork(
                "current-limited sources drive an open fault loop".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Current into a loop closed through `z_loop` (everything but the
    /// positive network).
    fn drive(self, z_loop: Complex64) -> Result<Complex64> {
        match self {
            ActiveEquivalent::Open => Ok(ZERO),
            ActiveEquivalent::CurrentSource(j) => Ok(j),
            ActiveEquivalent::Thevenin { emf, z } => {
                let den = z + z_loop;
                if den == ZERO {
                    Err(Error::SingularNetwork("zero total fault-loop impedance".into()))
                } else {
                    Ok(emf / den)
                }
            }
        }
    }
}

impl PassiveEquivalent {
    pub fn from_norton(y: Complex64) -> Self {
        if y == ZERO {
            PassiveEquivalent::Open
        } else {
            PassiveEquivalent::Impedance(1.0 / y)
        }
    }

    pub fn is_open(&self) -> bool {
        matches!(self, PassiveEquivalent::Open)
    }

    fn z(&self) -> Complex64 {
        match self {
            PassiveEquivalent::Open => ZERO,
            PassiveEquivalent::Impedance(z) => *z,
        }
    }
}

/// Currents flowing out of each sequence network into the fault, and the
/// sequence voltages at the fault point, both referred to phase a.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultPointSolution {
    pub currents: SequenceSet,
    pub voltages: SequenceSet,
}

/// Connects the three reduced networks according to the fault type.
/// Resistances are in p.u.
pub fn interconnect(
    fault_type: FaultType,
    positive: ActiveEquivalent,
    negative: PassiveEquivalent,
    zero: PassiveEquivalent,
    r_phase: f64,
    r_ground: f64,
) -> Result<FaultPointSolution> {
    let (rot1, rot2) = match fault_type {
        FaultType::AG | FaultType::ABC => (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)),
        FaultType::AB | FaultType::ABG => (alpha(), alpha2()),
    };
    let pos = positive.rotated(rot1);
    let rf = Complex64::new(r_phase, 0.0);
    let rg3 = Complex64::new(3.0 * r_ground, 0.0);

    // (I1, I2, I0, V1, V2, V0) in the reference-phase frame.
    let (i1, i2, i0, v1, v2, v0) = match fault_type {
        FaultType::AG => {
            if negative.is_open() || zero.is_open() {
                pos.check_unloaded()?;
                let v1 = pos.open_voltage();
                let (v2, v0) = match (negative.is_open(), zero.is_open()) {
                    (true, _) => (-v1, ZERO),
                    (false, _) => (ZERO, -v1),
                };
                (ZERO, ZERO, ZERO, v1, v2, v0)
            } else {
                let i = pos.drive(negative.z() + zero.z() + rg3)?;
                let v2 = -negative.z() * i;
                let v0 = -zero.z() * i;
                let v1 = match pos {
                    ActiveEquivalent::Thevenin { emf, z } => emf - z * i,
                    _ => rg3 * i - v2 - v0,
                };
                (i, i, i, v1, v2, v0)
            }
        }
        FaultType::AB => {
            if negative.is_open() {
                pos.check_unloaded()?;
                let v1 = pos.open_voltage();
                (ZERO, ZERO, ZERO, v1, v1, ZERO)
            } else {
                let i1 = pos.drive(negative.z() + rf)?;
                let v2 = negative.z() * i1;
                let v1 = match pos {
                    ActiveEquivalent::Thevenin { emf, z } => emf - z * i1,
                    _ => v2 + rf * i1,
                };
                (i1, -i1, ZERO, v1, v2, ZERO)
            }
        }
        FaultType::ABG => {
            let b2 = match negative {
                PassiveEquivalent::Open => ZERO,
                PassiveEquivalent::Impedance(z) => inverse(z + rf)?,
            };
            let b0 = match zero {
                PassiveEquivalent::Open => ZERO,
                PassiveEquivalent::Impedance(z) => inverse(z + rf + rg3)?,
            };
            if b2 + b0 == ZERO {
                pos.check_unloaded()?;
                let v1 = pos.open_voltage();
                (ZERO, ZERO, ZERO, v1, v1, v1)
            } else {
                let zp = 1.0 / (b2 + b0);
                let i1 = pos.drive(rf + zp)?;
                let i2 = -i1 * b2 * zp;
                let i0 = -i1 * b0 * zp;
                let w = i1 * zp;
                (i1, i2, i0, w + rf * i1, w + rf * i2, w + (rf + rg3) * i0)
            }
        }
        FaultType::ABC => {
            let i1 = pos.drive(rf)?;
            (i1, ZERO, ZERO, rf * i1, ZERO, ZERO)
        }
    };

    Ok(FaultPointSolution {
        currents: SequenceSet::new(i0, i1 / rot1, i2 / rot2),
        voltages: SequenceSet::new(v0, v1 / rot1, v2 / rot2),
    })
}

fn inverse(z: Complex64) -> Result<Complex64> {
    if z == ZERO {
        Err(Error::SingularNetwork("zero-impedance fault branch".into()))
    } else {
        Ok(1.0 / z)
    }
}
