//! Test-system description: two wind clusters and the offshore converter
//! joined by 230 kV collector cables.
//!
//! [`TestSystemConfig`] is the serializable form (ohms per km for cables,
//! per unit on own rating for transformers and converter equivalents).
//! [`SystemModel`] is the same data converted to the study base.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::phasor::{PerUnitBase, Phasor, PhasorExt};

/// A series or shunt element impedance. `Open` is a first-class state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Impedance {
    Open,
    Closed(Complex64),
}

impl Impedance {
    pub fn closed(re: f64, im: f64) -> Self {
        Impedance::Closed(Complex64::new(re, im))
    }

    pub fn is_open(&self) -> bool {
        matches!(self, Impedance::Open)
    }

    /// Admittance, zero for an open element.
    pub fn admittance(&self) -> Complex64 {
        match self {
            Impedance::Open => Complex64::new(0.0, 0.0),
            Impedance::Closed(z) => 1.0 / z,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        match self {
            Impedance::Open => Impedance::Open,
            Impedance::Closed(z) => Impedance::Closed(z * s),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        match self {
            Impedance::Open => Ok(()),
            Impedance::Closed(z) if z.is_finite_phasor() && z.norm() > 0.0 => Ok(()),
            Impedance::Closed(_) => Err(Error::InvalidConfig(format!("{what}: impedance must be finite and non-zero"))),
        }
    }
}

impl fmt::Display for Impedance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Impedance::Open => write!(f, "open"),
            Impedance::Closed(z) => write!(f, "{}{:+}j", z.re, z.im),
        }
    }
}

// On disk: `[re, im]` or the string "open".
impl Serialize for Impedance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Impedance::Open => s.serialize_str("open"),
            Impedance::Closed(z) => [z.re, z.im].serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Impedance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Pair([f64; 2]),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Pair([re, im]) => Ok(Impedance::closed(re, im)),
            Repr::Word(w) if w == "open" => Ok(Impedance::Open),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "expected [re, im] or \"open\", got {w:?}"
            ))),
        }
    }
}

/// Positive-, negative- and zero-sequence impedances of one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceImpedances {
    pub z1: Impedance,
    pub z2: Impedance,
    pub z0: Impedance,
}

impl SequenceImpedances {
    pub fn scale(&self, s: f64) -> Self {
        Self {
            z1: self.z1.scale(s),
            z2: self.z2.scale(s),
            z0: self.z0.scale(s),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        self.z1.validate(what)?;
        self.z2.validate(what)?;
        self.z0.validate(what)
    }
}

/// The three converter-fed terminals of the collector system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Cluster1,
    Cluster2,
    Ommc,
}

impl Terminal {
    pub const ALL: [Terminal; 3] = [Terminal::Cluster1, Terminal::Cluster2, Terminal::Ommc];

    pub fn index(self) -> usize {
        match self {
            Terminal::Cluster1 => 0,
            Terminal::Cluster2 => 1,
            Terminal::Ommc => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Terminal::Cluster1 => "cluster1",
            Terminal::Cluster2 => "cluster2",
            Terminal::Ommc => "ommc",
        }
    }
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Collector cable data in ohms per km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CableConfig {
    pub length_km: f64,
    pub z1_ohm_per_km: Impedance,
    pub z2_ohm_per_km: Impedance,
    pub z0_ohm_per_km: Impedance,
}

/// Step-up transformer, impedances in p.u. on its own rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerConfig {
    pub rating_mva: f64,
    pub z1: Impedance,
    pub z2: Impedance,
    pub z0: Impedance,
    /// 230 kV winding is grounded wye.
    pub hv_grounded: bool,
    /// Converter-side winding is grounded wye.
    pub lv_grounded: bool,
}

/// Aggregated converter equivalent (wind cluster or offshore converter),
/// impedances in p.u. on its own rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub rating_mva: f64,
    /// Internal EMF as `[magnitude p.u., angle deg]`.
    pub emf: [f64; 2],
    pub z1: Impedance,
    /// Negative-sequence impedance used when the converter does not
    /// suppress negative-sequence current.
    pub z2: Impedance,
    pub z0: Impedance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestSystemConfig {
    /// Nominal 230 kV collector voltage, kV.
    pub v_kv: f64,
    pub cable1: CableConfig,
    pub cable2: CableConfig,
    pub transformer_c1: TransformerConfig,
    pub transformer_c2: TransformerConfig,
    pub transformer_ommc: TransformerConfig,
    pub cluster1: SourceConfig,
    pub cluster2: SourceConfig,
    pub ommc: SourceConfig,
}

impl Default for TestSystemConfig {
    fn default() -> Self {
        let cable = CableConfig {
            length_km: 20.0,
            z1_ohm_per_km: Impedance::closed(0.07, 0.08),
            z2_ohm_per_km: Impedance::closed(0.07, 0.08),
            z0_ohm_per_km: Impedance::closed(0.03, 0.35),
        };
        let transformer = |rating_mva, z0| TransformerConfig {
            rating_mva,
            z1: Impedance::closed(0.0, 0.08),
            z2: Impedance::closed(0.0, 0.08),
            z0,
            hv_grounded: true,
            lv_grounded: true,
        };
        let wind = SourceConfig {
            rating_mva: 450.0,
            emf: DEFAULT_WIND_EMF,
            z1: Impedance::closed(0.0, 0.10),
            z2: Impedance::closed(0.0, 0.10),
            z0: Impedance::closed(0.0, 0.40),
        };
        Self {
            v_kv: 230.0,
            cable1: cable.clone(),
            cable2: cable,
            transformer_c1: transformer(450.0, Impedance::closed(0.47, 0.80)),
            transformer_c2: transformer(450.0, Impedance::closed(0.47, 0.80)),
            transformer_ommc: transformer(900.0, Impedance::closed(0.05, 0.21)),
            cluster1: wind.clone(),
            cluster2: wind,
            ommc: SourceConfig {
                rating_mva: 900.0,
                emf: [1.01, 0.0],
                z1: Impedance::closed(0.0, 0.10),
                z2: Impedance::closed(0.0, DEFAULT_OMMC_Z2_PU),
                z0: Impedance::closed(0.0, 0.05),
            },
        }
    }
}

/// Wind-cluster EMF `[magnitude p.u., angle deg]` relative to the offshore
/// converter's voltage reference. Both clusters export close to rated
/// current before the fault.
pub const DEFAULT_WIND_EMF: [f64; 2] = [1.08, 20.0];

/// Negative-sequence equivalent of the offshore converter when it does not
/// suppress negative-sequence current (own-rating p.u.).
pub const DEFAULT_OMMC_Z2_PU: f64 = 1.24;

impl TestSystemConfig {
    pub fn transformer(&self, t: Terminal) -> &TransformerConfig {
        match t {
            Terminal::Cluster1 => &self.transformer_c1,
            Terminal::Cluster2 => &self.transformer_c2,
            Terminal::Ommc => &self.transformer_ommc,
        }
    }

    pub fn transformer_mut(&mut self, t: Terminal) -> &mut TransformerConfig {
        match t {
            Terminal::Cluster1 => &mut self.transformer_c1,
            Terminal::Cluster2 => &mut self.transformer_c2,
            Terminal::Ommc => &mut self.transformer_ommc,
        }
    }

    pub fn source(&self, t: Terminal) -> &SourceConfig {
        match t {
            Terminal::Cluster1 => &self.cluster1,
            Terminal::Cluster2 => &self.cluster2,
            Terminal::Ommc => &self.ommc,
        }
    }

    pub fn source_mut(&mut self, t: Terminal) -> &mut SourceConfig {
        match t {
            Terminal::Cluster1 => &mut self.cluster1,
            Terminal::Cluster2 => &mut self.cluster2,
            Terminal::Ommc => &mut self.ommc,
        }
    }

    /// Sets every transformer winding's grounding flag at once.
    pub fn set_all_grounding(&mut self, grounded: bool) {
        for t in Terminal::ALL {
            let tr = self.transformer_mut(t);
            tr.hv_grounded = grounded;
            tr.lv_grounded = grounded;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_kv.is_finite() && self.v_kv > 0.0) {
            return Err(Error::InvalidConfig(format!("v_kv must be positive, got {}", self.v_kv)));
        }
        for (name, cable) in [("cable1", &self.cable1), ("cable2", &self.cable2)] {
            if !(cable.length_km.is_finite() && cable.length_km > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name}.length_km must be positive, got {}",
                    cable.length_km
                )));
            }
            cable.per_km().validate(name)?;
            if cable.z1_ohm_per_km.is_open() || cable.z2_ohm_per_km.is_open() {
                return Err(Error::InvalidConfig(format!("{name}: z1 and z2 cannot be open")));
            }
        }
        for t in Terminal::ALL {
            let tr = self.transformer(t);
            let what = match t {
                Terminal::Cluster1 => "transformer_c1",
                Terminal::Cluster2 => "transformer_c2",
                Terminal::Ommc => "transformer_ommc",
            };
            if !(tr.rating_mva.is_finite() && tr.rating_mva > 0.0) {
                return Err(Error::InvalidConfig(format!("{what}.rating_mva must be positive")));
            }
            tr.impedances().validate(what)?;
            if tr.z1.is_open() || tr.z2.is_open() {
                return Err(Error::InvalidConfig(format!("{what}: z1 and z2 cannot be open")));
            }
            let src = self.source(t);
            if !(src.rating_mva.is_finite() && src.rating_mva > 0.0) {
                return Err(Error::InvalidConfig(format!("{t}.rating_mva must be positive")));
            }
            if !(src.emf[0].is_finite() && src.emf[1].is_finite() && src.emf[0] >= 0.0) {
                return Err(Error::InvalidConfig(format!("{t}.emf must be finite with non-negative magnitude")));
            }
            if src.z1.is_open() {
                return Err(Error::InvalidConfig(format!("{t}.z1 cannot be open")));
            }
            src.impedances().validate(t.name())?;
        }
        Ok(())
    }

    /// Converts the configuration to the study base.
    pub fn to_model(&self, base: PerUnitBase) -> Result<SystemModel> {
        base.validate()?;
        self.validate()?;
        if (self.v_kv - base.v_kv).abs() > 1e-9 * base.v_kv {
            return Err(Error::InvalidConfig(format!(
                "system voltage {} kV differs from base voltage {} kV",
                self.v_kv, base.v_kv
            )));
        }
        let z_base = base.z_base_ohm();
        let cable = |c: &CableConfig| c.per_km().scale(c.length_km / z_base);
        let transformer = |t: Terminal| {
            let tr = self.transformer(t);
            let s = base.s_mva / tr.rating_mva;
            let mut z = tr.impedances().scale(s);
            if !(tr.hv_grounded && tr.lv_grounded) {
                z.z0 = Impedance::Open;
            }
            z
        };
        let source = |t: Terminal| {
            let src = self.source(t);
            SourceModel {
                rating_mva: src.rating_mva,
                emf: Phasor::from_polar_deg(src.emf[0], src.emf[1]),
                z: src.impedances().scale(base.s_mva / src.rating_mva),
            }
        };
        Ok(SystemModel {
            base,
            cable1: cable(&self.cable1),
            cable2: cable(&self.cable2),
            transformers: Terminal::ALL.map(transformer),
            sources: Terminal::ALL.map(source),
        })
    }
}

impl CableConfig {
    pub fn per_km(&self) -> SequenceImpedances {
        SequenceImpedances {
            z1: self.z1_ohm_per_km,
            z2: self.z2_ohm_per_km,
            z0: self.z0_ohm_per_km,
        }
    }
}

impl TransformerConfig {
    pub fn impedances(&self) -> SequenceImpedances {
        SequenceImpedances {
            z1: self.z1,
            z2: self.z2,
            z0: self.z0,
        }
    }
}

impl SourceConfig {
    pub fn impedances(&self) -> SequenceImpedances {
        SequenceImpedances {
            z1: self.z1,
            z2: self.z2,
            z0: self.z0,
        }
    }
}

/// Converter equivalent on the study base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceModel {
    pub rating_mva: f64,
    pub emf: Phasor,
    pub z: SequenceImpedances,
}

/// The test system on the study base. Cable impedances are totals for the
/// full length; a transformer's zero-sequence branch is `Open` unless both
/// windings are grounded wye.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub base: PerUnitBase,
    pub cable1: SequenceImpedances,
    pub cable2: SequenceImpedances,
    pub transformers: [SequenceImpedances; 3],
    pub sources: [SourceModel; 3],
}

impl SystemModel {
    pub fn transformer(&self, t: Terminal) -> &SequenceImpedances {
        &self.transformers[t.index()]
    }

    pub fn source(&self, t: Terminal) -> &SourceModel {
        &self.sources[t.index()]
    }

    /// Ratio converting a current on the study base to p.u. of the
    /// terminal's own rating.
    pub fn own_rating_factor(&self, t: Terminal) -> f64 {
        self.base.s_mva / self.source(t).rating_mva
    }
}
