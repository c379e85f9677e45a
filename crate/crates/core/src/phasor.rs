//! Phasors, three-phase and sequence sets, per-unit bases, and the
//! Fortescue transform.
//!
//! Phasors are plain rectangular complex numbers. The forward transform uses
//! the 1/3 convention, so a balanced positive-sequence set of unit magnitude
//! maps to a unit positive-sequence component.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A complex phasor in rectangular form (p.u.).
pub type Phasor = Complex64;

/// The 120° rotation operator.
pub fn alpha() -> Phasor {
    Phasor::new(-0.5, 3f64.sqrt() / 2.0)
}

/// `alpha()` squared, i.e. 1∠240° = 1∠−120°.
pub fn alpha2() -> Phasor {
    Phasor::new(-0.5, -(3f64.sqrt()) / 2.0)
}

/// Polar accessors used throughout the crate.
pub trait PhasorExt {
    fn from_polar_deg(magnitude: f64, angle_deg: f64) -> Self;
    fn magnitude(&self) -> f64;
    /// Angle in degrees, normalized to (−180°, 180°].
    fn angle_deg(&self) -> f64;
    fn is_finite_phasor(&self) -> bool;
}

impl PhasorExt for Phasor {
    fn from_polar_deg(magnitude: f64, angle_deg: f64) -> Self {
        Phasor::from_polar(magnitude, angle_deg.to_radians())
    }

    fn magnitude(&self) -> f64 {
        self.norm()
    }

    fn angle_deg(&self) -> f64 {
        let a = self.im.atan2(self.re).to_degrees();
        if a <= -180.0 {
            a + 360.0
        } else {
            a
        }
    }

    fn is_finite_phasor(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Phase quantities (currents or voltages) of a three-phase circuit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThreePhaseSet {
    pub a: Phasor,
    pub b: Phasor,
    pub c: Phasor,
}

/// Symmetrical components referred to phase a.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SequenceSet {
    pub zero: Phasor,
    pub positive: Phasor,
    pub negative: Phasor,
}

impl ThreePhaseSet {
    pub fn new(a: Phasor, b: Phasor, c: Phasor) -> Self {
        Self { a, b, c }
    }

    /// Balanced positive-sequence set with phase a at `phase_a`.
    pub fn balanced(phase_a: Phasor) -> Self {
        Self::new(phase_a, alpha2() * phase_a, alpha() * phase_a)
    }

    pub fn phases(&self) -> [Phasor; 3] {
        [self.a, self.b, self.c]
    }

    pub fn is_finite(&self) -> bool {
        self.phases().iter().all(PhasorExt::is_finite_phasor)
    }

    pub fn to_sequence(&self) -> SequenceSet {
        abc_to_seq(self)
    }

    /// Largest phase magnitude.
    pub fn max_magnitude(&self) -> f64 {
        self.phases().iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s)
    }
}

impl SequenceSet {
    pub fn new(zero: Phasor, positive: Phasor, negative: Phasor) -> Self {
        Self {
            zero,
            positive,
            negative,
        }
    }

    pub fn to_phases(&self) -> ThreePhaseSet {
        seq_to_abc(self)
    }

    pub fn is_finite(&self) -> bool {
        [self.zero, self.positive, self.negative]
            .iter()
            .all(PhasorExt::is_finite_phasor)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.zero * s, self.positive * s, self.negative * s)
    }
}

macro_rules! componentwise_ops {
    ($ty:ident, $($f:ident),+) => {
        impl Add for $ty {
            type Output = $ty;
            fn add(self, rhs: $ty) -> $ty {
                $ty { $($f: self.$f + rhs.$f),+ }
            }
        }
        impl Sub for $ty {
            type Output = $ty;
            fn sub(self, rhs: $ty) -> $ty {
                $ty { $($f: self.$f - rhs.$f),+ }
            }
        }
        impl Neg for $ty {
            type Output = $ty;
            fn neg(self) -> $ty {
                $ty { $($f: -self.$f),+ }
            }
        }
        impl Mul<Phasor> for $ty {
            type Output = $ty;
            fn mul(self, rhs: Phasor) -> $ty {
                $ty { $($f: self.$f * rhs),+ }
            }
        }
    };
}

componentwise_ops!(ThreePhaseSet, a, b, c);
componentwise_ops!(SequenceSet, zero, positive, negative);

/// Forward Fortescue transform.
pub fn abc_to_seq(abc: &ThreePhaseSet) -> SequenceSet {
    let (a, a2) = (alpha(), alpha2());
    let third = 1.0 / 3.0;
    SequenceSet {
        zero: (abc.a + abc.b + abc.c) * third,
        positive: (abc.a + a * abc.b + a2 * abc.c) * third,
        negative: (abc.a + a2 * abc.b + a * abc.c) * third,
    }
}

/// Inverse Fortescue transform.
pub fn seq_to_abc(seq: &SequenceSet) -> ThreePhaseSet {
    let (a, a2) = (alpha(), alpha2());
    ThreePhaseSet {
        a: seq.zero + seq.positive + seq.negative,
        b: seq.zero + a2 * seq.positive + a * seq.negative,
        c: seq.zero + a * seq.positive + a2 * seq.negative,
    }
}

/// Three-phase per-unit base defined by rated power and line-to-line voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerUnitBase {
    /// Three-phase base power, MVA.
    pub s_mva: f64,
    /// Line-to-line base voltage, kV.
    pub v_kv: f64,
}

/// Physical quantities accepted by [`PerUnitBase::to_per_unit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    PowerMva(f64),
    VoltageKv(f64),
    CurrentKa(f64),
    ImpedanceOhm(f64),
}

impl PerUnitBase {
    pub fn new(s_mva: f64, v_kv: f64) -> Result<Self> {
        let base = Self { s_mva, v_kv };
        base.validate()?;
        Ok(base)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_mva.is_finite() && self.s_mva > 0.0) {
            return Err(Error::InvalidBase(format!(
                "base power must be positive, got {} MVA",
                self.s_mva
            )));
        }
        if !(self.v_kv.is_finite() && self.v_kv > 0.0) {
            return Err(Error::InvalidBase(format!(
                "base voltage must be positive, got {} kV",
                self.v_kv
            )));
        }
        Ok(())
    }

    /// Base impedance in ohms: kV² / MVA.
    pub fn z_base_ohm(&self) -> f64 {
        self.v_kv * self.v_kv / self.s_mva
    }

    /// Base line current in kA: MVA / (√3 · kV).
    pub fn i_base_ka(&self) -> f64 {
        self.s_mva / (3f64.sqrt() * self.v_kv)
    }

    pub fn to_per_unit(&self, value: Quantity) -> Result<f64> {
        self.validate()?;
        Ok(match value {
            Quantity::PowerMva(s) => s / self.s_mva,
            Quantity::VoltageKv(v) => v / self.v_kv,
            Quantity::CurrentKa(i) => i / self.i_base_ka(),
            Quantity::ImpedanceOhm(z) => z / self.z_base_ohm(),
        })
    }

    /// Converts an impedance given in p.u. on `rating_mva` (same voltage) to this base.
    pub fn rebase_impedance(&self, z_own: Complex64, rating_mva: f64) -> Complex64 {
        z_own * (self.s_mva / rating_mva)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Phasor, b: Phasor) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn balanced_positive_set() {
        let abc = ThreePhaseSet::new(
            Phasor::from_polar_deg(1.0, 0.0),
            Phasor::from_polar_deg(1.0, -120.0),
            Phasor::from_polar_deg(1.0, 120.0),
        );
        let s = abc_to_seq(&abc);
        assert!(close(s.zero, Phasor::new(0.0, 0.0)));
        assert!(close(s.positive, Phasor::new(1.0, 0.0)));
        assert!(close(s.negative, Phasor::new(0.0, 0.0)));
    }

    #[test]
    fn common_mode_set() {
        let one = Phasor::new(1.0, 0.0);
        let s = abc_to_seq(&ThreePhaseSet::new(one, one, one));
        assert!(close(s.zero, one));
        assert!(close(s.positive, Phasor::default()));
        assert!(close(s.negative, Phasor::default()));
    }

    #[test]
    fn reversed_rotation_is_negative_sequence() {
        let abc = ThreePhaseSet::new(
            Phasor::from_polar_deg(1.0, 0.0),
            Phasor::from_polar_deg(1.0, 120.0),
            Phasor::from_polar_deg(1.0, -120.0),
        );
        let s = abc_to_seq(&abc);
        assert!(close(s.zero, Phasor::default()));
        assert!(close(s.positive, Phasor::default()));
        assert!(close(s.negative, Phasor::new(1.0, 0.0)));
    }

    #[test]
    fn inverse_examples() {
        let one = Phasor::new(1.0, 0.0);
        let abc = seq_to_abc(&SequenceSet::new(Phasor::default(), one, Phasor::default()));
        assert!(close(abc.a, one));
        assert!(close(abc.b, Phasor::from_polar_deg(1.0, -120.0)));
        assert!(close(abc.c, Phasor::from_polar_deg(1.0, 120.0)));

        let abc = seq_to_abc(&SequenceSet::new(one, Phasor::default(), Phasor::default()));
        assert!(close(abc.a, one) && close(abc.b, one) && close(abc.c, one));
    }

    #[test]
    fn angle_normalization() {
        assert_eq!(Phasor::new(-1.0, -0.0).angle_deg(), 180.0);
        assert_eq!(Phasor::new(-1.0, 0.0).angle_deg(), 180.0);
        assert!((Phasor::from_polar_deg(2.0, -90.0).angle_deg() + 90.0).abs() < 1e-12);
        assert!((Phasor::from_polar_deg(2.0, 270.0).angle_deg() + 90.0).abs() < 1e-12);
    }

    #[test]
    fn per_unit_examples() {
        let base = PerUnitBase::new(450.0, 230.0).unwrap();
        assert_eq!(base.to_per_unit(Quantity::VoltageKv(230.0)).unwrap(), 1.0);
        assert_eq!(base.to_per_unit(Quantity::PowerMva(450.0)).unwrap(), 1.0);

        let base = PerUnitBase::new(1000.0, 230.0).unwrap();
        assert!((base.z_base_ohm() - 52.9).abs() < 1e-12);
        let z = base.to_per_unit(Quantity::ImpedanceOhm(52.9)).unwrap();
        assert!((z - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_base_rejected() {
        assert!(PerUnitBase::new(0.0, 230.0).is_err());
        assert!(PerUnitBase::new(450.0, -1.0).is_err());
        let bad = PerUnitBase {
            s_mva: -5.0,
            v_kv: 230.0,
        };
        assert!(bad.to_per_unit(Quantity::PowerMva(1.0)).is_err());
    }
}
