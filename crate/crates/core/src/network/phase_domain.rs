//! Phase-domain nodal solution of the collector system.
//!
//! Every element is stamped as a coupled 3×3 admittance block, fault
//! resistances enter as explicit branches of a modified nodal system, and
//! the system is solved directly in phases a, b, c. It shares no reduction
//! code with the sequence-network solver and serves as its cross-check.
//!
//! Sequence networks without any path to ground leave a floating voltage
//! mode in the phase-domain matrix. When pivoted LU cannot solve the
//! system, a least-squares SVD takes over, and a singular network is only
//! reported when the equations are inconsistent. Branch currents do not
//! depend on the floating mode.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{FaultSite, FaultSpec, FaultType, NetworkSolution, SourceSet, TerminalFlow};
use crate::error::{Error, Result};
use crate::phasor::{abc_to_seq, alpha, alpha2, Quantity, ThreePhaseSet};
use crate::system::{Impedance, SequenceImpedances, SystemModel, Terminal};

type C = Complex64;
type Block = [[C; 3]; 3];

const ZERO: C = C::new(0.0, 0.0);

/// Phase-domain admittance of an element with sequence admittances
/// `(y0, y1, y2)`: `A · diag(y0, y1, y2) · A⁻¹`.
fn phase_block(y0: C, y1: C, y2: C) -> Block {
    let (a, a2) = (alpha(), alpha2());
    let one = C::new(1.0, 0.0);
    let fwd = [[one, one, one], [one, a2, a], [one, a, a2]];
    let inv = [[one, one, one], [one, a, a2], [one, a2, a]];
    let d = [y0, y1, y2];
    let mut out = [[ZERO; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| fwd[r][k] * d[k] * inv[k][c]).sum::<C>() / 3.0;
        }
    }
    out
}

fn adm(z: Impedance) -> C {
    z.admittance()
}

fn series_block(z: &SequenceImpedances) -> Block {
    phase_block(adm(z.z0), adm(z.z1), adm(z.z2))
}

fn mul(b: &Block, v: [C; 3]) -> [C; 3] {
    [0, 1, 2].map(|r| (0..3).map(|c| b[r][c] * v[c]).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Node {
    Lv(Terminal),
    Bus1,
    BusO,
    Bus2,
    Fault,
    Star,
}

struct Nodal {
    nodes: Vec<Node>,
    /// Fault branches: (from node, from phase, to node/phase or ground, resistance).
    branches: Vec<((Node, usize), Option<(Node, usize)>, f64)>,
    entries: Vec<(Node, Node, Block)>,
    injections: Vec<(Node, [C; 3])>,
}

impl Nodal {
    fn index(&self, n: Node) -> usize {
        self.nodes.iter().position(|m| *m == n).expect("node registered")
    }

    fn series(&mut self, from: Node, to: Node, block: Block) {
        let neg = block.map(|row| row.map(|x| -x));
        self.entries.push((from, from, block));
        self.entries.push((to, to, block));
        self.entries.push((from, to, neg));
        self.entries.push((to, from, neg));
    }

    fn shunt(&mut self, at: Node, block: Block) {
        self.entries.push((at, at, block));
    }

    fn solve(&self) -> Result<(DVector<C>, usize)> {
        let nv = 3 * self.nodes.len();
        let n = nv + self.branches.len();
        let mut m = DMatrix::<C>::zeros(n, n);
        let mut rhs = DVector::<C>::zeros(n);
        for (r, c, b) in &self.entries {
            let (ri, ci) = (3 * self.index(*r), 3 * self.index(*c));
            for p in 0..3 {
                for q in 0..3 {
                    m[(ri + p, ci + q)] += b[p][q];
                }
            }
        }
        for (node, i) in &self.injections {
            let k = 3 * self.index(*node);
            for p in 0..3 {
                rhs[k + p] += i[p];
            }
        }
        for (bi, (from, to, r)) in self.branches.iter().enumerate() {
            let col = nv + bi;
            let f = 3 * self.index(from.0) + from.1;
            // Branch current leaves `from` and enters `to`.
            m[(f, col)] += C::new(1.0, 0.0);
            m[(col, f)] += C::new(1.0, 0.0);
            if let Some(to) = to {
                let t = 3 * self.index(to.0) + to.1;
                m[(t, col)] -= C::new(1.0, 0.0);
                m[(col, t)] -= C::new(1.0, 0.0);
            }
            m[(col, col)] -= C::new(*r, 0.0);
        }

        let scale = m.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1.0);
        let tol = |x: &DVector<C>| 1e-9 * (rhs.norm() + scale * x.norm()).max(1.0);
        let residual = |x: &DVector<C>| (&m * x - &rhs).norm();
        if let Some(x) = m.clone().full_piv_lu().solve(&rhs) {
            if residual(&x) <= tol(&x) {
                return Ok((x, nv));
            }
        }
        // Floating sub-networks: minimum-norm solution on the real embedding,
        // which nalgebra decomposes more reliably than the complex matrix.
        let real = DMatrix::<f64>::from_fn(2 * n, 2 * n, |r, c| {
            let z = m[(r % n, c % n)];
            match (r < n, c < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        let svd = real.svd(true, true);
        let mut x = DVector::<C>::zeros(n);
        for _ in 0..4 {
            let r = &rhs - &m * &x;
            let rr = DVector::<f64>::from_fn(2 * n, |k, _| if k < n { r[k].re } else { r[k - n].im });
            let dy = svd
                .solve(&rr, 1e-11 * scale)
                .map_err(|e| Error::SingularNetwork(e.to_string()))?;
            x += DVector::<C>::from_fn(n, |k, _| C::new(dy[k], dy[k + n]));
        }
        let res = residual(&x);
        if !(res <= tol(&x)) {
            return Err(Error::SingularNetwork(format!(
                "phase-domain equations inconsistent (residual {res:.3e})"
            )));
        }
        Ok((x, nv))
    }
}

/// Solves the fault in the phase domain with the given converter
/// representation. Current-limited converters are treated as fixed
/// injections; no limiting logic is applied here.
pub fn brute_force_phase_solve(model: &SystemModel, sources: &SourceSet, fault: &FaultSpec) -> Result<NetworkSolution> {
    let site = fault.site()?;
    let base = model.base;
    let r_phase = base.to_per_unit(Quantity::ImpedanceOhm(fault.r_phase_ohm))?;
    let r_ground = base.to_per_unit(Quantity::ImpedanceOhm(fault.r_ground_ohm))?;

    let fault_node = match site {
        FaultSite::Internal(0.0) => Node::Bus1,
        FaultSite::Internal(1.0) => Node::BusO,
        FaultSite::Internal(_) => Node::Fault,
        FaultSite::ExternalP1Bus => Node::Bus1,
        FaultSite::ExternalP2Bus => Node::BusO,
    };
    let mut nodes = vec![
        Node::Lv(Terminal::Cluster1),
        Node::Lv(Terminal::Cluster2),
        Node::Lv(Terminal::Ommc),
        Node::Bus1,
        Node::BusO,
        Node::Bus2,
    ];
    if fault_node == Node::Fault {
        nodes.push(Node::Fault);
    }
    if matches!(fault.fault_type, FaultType::ABG | FaultType::ABC) {
        nodes.push(Node::Star);
    }
    let mut net = Nodal {
        nodes,
        branches: Vec::new(),
        entries: Vec::new(),
        injections: Vec::new(),
    };

    let bus_of = |t: Terminal| match t {
        Terminal::Cluster1 => Node::Bus1,
        Terminal::Cluster2 => Node::Bus2,
        Terminal::Ommc => Node::BusO,
    };

    let mut source_blocks = [[[ZERO; 3]; 3]; 3];
    let mut source_injections = [[ZERO; 3]; 3];
    for t in Terminal::ALL {
        let br = sources.get(t);
        let (y1, j1) = sources.positive_norton(model, t);
        let block = phase_block(br.zero.admittance(), y1, br.negative.admittance());
        let inj = [j1, alpha2() * j1, alpha() * j1];
        net.shunt(Node::Lv(t), block);
        net.injections.push((Node::Lv(t), inj));
        source_blocks[t.index()] = block;
        source_injections[t.index()] = inj;
        net.series(Node::Lv(t), bus_of(t), series_block(model.transformer(t)));
    }
    net.series(Node::Bus2, Node::BusO, series_block(&model.cable2));
    match (site, fault_node) {
        (FaultSite::Internal(d), Node::Fault) => {
            net.series(Node::Bus1, Node::Fault, series_block(&model.cable1.scale(d)));
            net.series(Node::Fault, Node::BusO, series_block(&model.cable1.scale(1.0 - d)));
        }
        _ => net.series(Node::Bus1, Node::BusO, series_block(&model.cable1)),
    }

    let fnode = fault_node;
    match fault.fault_type {
        FaultType::AG => net.branches.push(((fnode, 0), None, r_ground)),
        FaultType::AB => net.branches.push(((fnode, 0), Some((fnode, 1)), r_phase)),
        FaultType::ABG => {
            net.branches.push(((fnode, 0), Some((Node::Star, 0)), r_phase));
            net.branches.push(((fnode, 1), Some((Node::Star, 0)), r_phase));
            // Star node uses phase slot 0 only; tie its idle slots to ground.
            net.branches.push(((Node::Star, 0), None, r_ground));
            net.shunt(Node::Star, diag_unit_except_first());
        }
        FaultType::ABC => {
            for p in 0..3 {
                net.branches.push(((fnode, p), Some((Node::Star, 0)), r_phase));
            }
            net.shunt(Node::Star, diag_unit_except_first());
        }
    }

    let (x, nv) = net.solve()?;
    let v = |n: Node| -> [C; 3] {
        let k = 3 * net.index(n);
        [x[k], x[k + 1], x[k + 2]]
    };

    // Current leaving the network into the fault, per phase.
    let mut i_fault = [ZERO; 3];
    for (bi, (from, to, _)) in net.branches.iter().enumerate() {
        let i = x[nv + bi];
        if from.0 == fnode {
            i_fault[from.1] += i;
        }
        if let Some(to) = to {
            if to.0 == fnode {
                i_fault[to.1] -= i;
            }
        }
    }

    let through = |from: Node, to: Node, z: &SequenceImpedances| -> [C; 3] {
        let (vf, vt) = (v(from), v(to));
        mul(&series_block(z), [0, 1, 2].map(|p| vf[p] - vt[p]))
    };
    let sub = |a: [C; 3], b: [C; 3]| [0, 1, 2].map(|p| a[p] - b[p]);
    let add = |a: [C; 3], b: [C; 3]| [0, 1, 2].map(|p| a[p] + b[p]);

    let mut p1 = through(Node::Lv(Terminal::Cluster1), Node::Bus1, model.transformer(Terminal::Cluster1));
    let mut p2 = add(
        through(Node::Lv(Terminal::Ommc), Node::BusO, model.transformer(Terminal::Ommc)),
        through(Node::Bus2, Node::BusO, &model.cable2),
    );
    match site {
        FaultSite::ExternalP1Bus => p1 = sub(p1, i_fault),
        FaultSite::ExternalP2Bus => p2 = sub(p2, i_fault),
        FaultSite::Internal(_) => {}
    }

    let to_set = |p: [C; 3]| ThreePhaseSet::new(p[0], p[1], p[2]);
    let converters = Terminal::ALL.map(|t| {
        let vt = v(Node::Lv(t));
        let drawn = mul(&source_blocks[t.index()], vt);
        let current = sub(source_injections[t.index()], drawn);
        TerminalFlow {
            current: abc_to_seq(&to_set(current)),
            voltage: abc_to_seq(&to_set(vt)),
        }
    });

    let fault_current = abc_to_seq(&to_set(i_fault));
    Ok(NetworkSolution {
        fault: *fault,
        sources: *sources,
        fault_current,
        fault_voltage: abc_to_seq(&to_set(v(fnode))),
        i_fault_magnitude: to_set(i_fault).max_magnitude(),
        p1: to_set(p1),
        p2: to_set(p2),
        p1_sequence: to_set(p1).to_sequence(),
        p2_sequence: to_set(p2).to_sequence(),
        converters,
    })
}

fn diag_unit_except_first() -> Block {
    let one = C::new(1.0, 0.0);
    [[ZERO, ZERO, ZERO], [ZERO, one, ZERO], [ZERO, ZERO, one]]
}
