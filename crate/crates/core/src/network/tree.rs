//! Radial per-sequence network seen from the fault point.
//!
//! Every element hanging off a node is reduced to a Norton pair `(y, j)`:
//! the current it pushes into that node is `j − y·v`. An open series element
//! reduces to `(0, 0)`, an ideal current source to `(0, j)`.

use num_complex::Complex64;

use crate::system::{Impedance, Terminal};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Series elements whose current is observed by a relay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    /// Cable-1 segment between P1 and an internal fault.
    SegmentP1,
    /// Cable-1 segment between an internal fault and P2.
    SegmentP2,
    /// The whole of cable 1 (external faults).
    WholeCable,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    /// Shunt to ground at the current node, owned by a converter terminal.
    Leaf {
        terminal: Terminal,
        y: Complex64,
        j: Complex64,
    },
    /// Series impedance from the current node to a new node.
    Series {
        z: Impedance,
        probe: Option<Probe>,
        next: Box<Element>,
    },
    /// Several elements attached to the same node.
    Junction(Vec<Element>),
}

impl Element {
    pub fn series(z: Impedance, next: Element) -> Self {
        Element::Series {
            z,
            probe: None,
            next: Box::new(next),
        }
    }

    pub fn probed(z: Impedance, probe: Probe, next: Element) -> Self {
        Element::Series {
            z,
            probe: Some(probe),
            next: Box::new(next),
        }
    }

    pub fn norton(&self) -> (Complex64, Complex64) {
        match self {
            Element::Leaf { y, j, .. } => (*y, *j),
            Element::Series { z, next, .. } => match z {
                Impedance::Open => (ZERO, ZERO),
                Impedance::Closed(z) => {
                    let (y, j) = next.norton();
                    let k = 1.0 + y * z;
                    (y / k, j / k)
                }
            },
            Element::Junction(children) => children.iter().fold((ZERO, ZERO), |(ya, ja), c| {
                let (y, j) = c.norton();
                (ya + y, ja + j)
            }),
        }
    }

    /// Number of converter leaves with a closed path to this element's top node.
    pub fn connected_sources(&self) -> usize {
        match self {
            Element::Leaf { y, j, .. } => usize::from(*y != ZERO || *j != ZERO),
            Element::Series { z, next, .. } => {
                if z.is_open() {
                    0
                } else {
                    next.connected_sources()
                }
            }
            Element::Junction(children) => children.iter().map(Element::connected_sources).sum(),
        }
    }

    /// Series impedance from the top node down to the given terminal's leaf.
    pub fn path_impedance(&self, terminal: Terminal) -> Option<Impedance> {
        match self {
            Element::Leaf { terminal: t, .. } => (*t == terminal).then_some(Impedance::closed(0.0, 0.0)),
            Element::Series { z, next, .. } => next.path_impedance(terminal).map(|rest| match (z, rest) {
                (Impedance::Closed(a), Impedance::Closed(b)) => Impedance::Closed(a + b),
                _ => Impedance::Open,
            }),
            Element::Junction(children) => children.iter().find_map(|c| c.path_impedance(terminal)),
        }
    }

    /// Distributes currents given the voltage of the top node and returns
    /// the current this element pushes into it.
    pub fn flow(&self, v_top: Complex64, out: &mut Flows) -> Complex64 {
        match self {
            Element::Leaf { terminal, y, j } => {
                let i = j - y * v_top;
                out.leaf_current[terminal.index()] = i;
                out.leaf_voltage[terminal.index()] = v_top;
                i
            }
            Element::Series { z, probe, next } => {
                let i = match z {
                    Impedance::Open => {
                        // Isolated below: settle at its own open-circuit voltage.
                        let (y, j) = next.norton();
                        let v = if y != ZERO { j / y } else { ZERO };
                        next.flow(v, out);
                        ZERO
                    }
                    Impedance::Closed(z) => {
                        let (y, j) = next.norton();
                        let i = (j - y * v_top) / (1.0 + y * z);
                        next.flow(v_top + i * z, out);
                        i
                    }
                };
                if let Some(p) = probe {
                    out.probes.push((*p, i));
                }
                i
            }
            Element::Junction(children) => children.iter().map(|c| c.flow(v_top, out)).sum(),
        }
    }
}

/// Result of back-substitution through one sequence network.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Flows {
    /// Current each converter pushes into the network.
    pub leaf_current: [Complex64; 3],
    /// Voltage at each converter terminal.
    pub leaf_voltage: [Complex64; 3],
    pub probes: Vec<(Probe, Complex64)>,
    /// Current each root branch pushes into the fault node.
    pub root_currents: Vec<Complex64>,
}

impl Flows {
    pub fn probe(&self, p: Probe) -> Option<Complex64> {
        self.probes.iter().find(|(q, _)| *q == p).map(|(_, i)| *i)
    }
}
