//! Radial unbalanced feeder model.
//!
//! A [`NetworkModel`] is a rooted tree of nodes joined by branches carrying
//! 3x3 phase impedance matrices. Every node keeps the subset of phases it
//! carries; absent phases are structurally zero in every matrix and vector
//! touching that node.

mod format;
pub mod ieee;
mod stats;

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::ops::{Add, AddAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::{parse_feeder, write_feeder};
pub use stats::{path_statistics, ImpedanceStats};
pub(crate) use stats::clip_psd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Phase {
        Phase::ALL[i % 3]
    }

    pub fn as_char(self) -> char {
        ['a', 'b', 'c'][self.index()]
    }

    pub fn from_char(c: char) -> Option<Phase> {
        match c.to_ascii_lowercase() {
            'a' => Some(Phase::A),
            'b' => Some(Phase::B),
            'c' => Some(Phase::C),
            _ => None,
        }
    }

    /// Nominal angle of the phase in radians (0, -120, +120 degrees).
    pub fn nominal_angle(self) -> f64 {
        use std::f64::consts::PI;
        match self {
            Phase::A => 0.0,
            Phase::B => -2.0 * PI / 3.0,
            Phase::C => 2.0 * PI / 3.0,
        }
    }

    /// Unit phasor at the nominal angle.
    pub fn rotor(self) -> Complex64 {
        Complex64::from_polar(1.0, self.nominal_angle())
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Subset of {a, b, c}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const ABC: PhaseSet = PhaseSet(0b111);
    pub const EMPTY: PhaseSet = PhaseSet(0);

    pub fn single(p: Phase) -> PhaseSet {
        PhaseSet(1 << p.index())
    }

    pub fn contains(self, p: Phase) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn insert(&mut self, p: Phase) {
        self.0 |= 1 << p.index();
    }

    pub fn is_subset_of(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    pub fn parse(s: &str) -> Option<PhaseSet> {
        let mut set = PhaseSet::EMPTY;
        for c in s.trim().chars() {
            let p = Phase::from_char(c)?;
            if set.contains(p) {
                return None;
            }
            set.insert(p);
        }
        (!set.is_empty()).then_some(set)
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

/// 3x3 complex impedance matrix indexed by phase pair, in ohms or per unit
/// depending on context.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseImpedanceMatrix(pub [[Complex64; 3]; 3]);

impl PhaseImpedanceMatrix {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn diagonal(z: Complex64) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            m.0[i][i] = z;
        }
        m
    }

    pub fn get(&self, row: Phase, col: Phase) -> Complex64 {
        self.0[row.index()][col.index()]
    }

    pub fn r(&self, row: Phase, col: Phase) -> f64 {
        self.get(row, col).re
    }

    pub fn x(&self, row: Phase, col: Phase) -> f64 {
        self.get(row, col).im
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|z| *z *= k);
        m
    }

    pub fn mul_vec(&self, v: &[Complex64; 3]) -> [Complex64; 3] {
        let mut out = [Complex64::default(); 3];
        for (i, row) in self.0.iter().enumerate() {
            out[i] = row.iter().zip(v).map(|(z, x)| z * x).sum();
        }
        out
    }

    /// Zero out rows and columns of phases outside `phases`.
    pub fn restricted_to(&self, phases: PhaseSet) -> Self {
        let mut m = *self;
        for i in Phase::ALL {
            for j in Phase::ALL {
                if !phases.contains(i) || !phases.contains(j) {
                    m.0[i.index()][j.index()] = Complex64::default();
                }
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..3).all(|i| (0..3).all(|j| (self.0[i][j] - self.0[j][i]).norm() <= tol))
    }
}

impl Add for PhaseImpedanceMatrix {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for PhaseImpedanceMatrix {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub phases: PhaseSet,
}

/// A branch oriented away from the source after validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Series impedance in ohms.
    pub z: PhaseImpedanceMatrix,
}

/// Raw, unvalidated feeder description; input to [`NetworkModel::new`].
#[derive(Debug, Clone, Default)]
pub struct FeederSpec {
    pub name: String,
    /// System line-to-line voltage in kV.
    pub v_nominal_kv: f64,
    /// Three-phase power base in kVA.
    pub s_base_kva: f64,
    /// Balanced source voltage magnitude in per unit of the nominal voltage.
    pub source_pu: f64,
    pub source: String,
    pub nodes: Vec<(String, PhaseSet)>,
    /// (from, to, impedance in ohms)
    pub branches: Vec<(String, String, PhaseImpedanceMatrix)>,
    /// (node, phase, kW, kvar); repeated entries accumulate.
    pub loads: Vec<(String, Phase, f64, f64)>,
}

/// Validated radial feeder. Immutable after construction.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    name: String,
    v_nominal_kv: f64,
    s_base_kva: f64,
    source_pu: f64,
    source: usize,
    nodes: Vec<Node>,
    branches: Vec<Branch>,
    /// kW + j kvar per node per phase.
    loads: Vec<[Complex64; 3]>,
    index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    parent_branch: Vec<Option<usize>>,
    depth: Vec<usize>,
    /// Nodes in breadth-first order from the source.
    order: Vec<usize>,
    children: Vec<Vec<usize>>,
    /// Impedance of the whole source-to-node path, ohms.
    path_z: Vec<PhaseImpedanceMatrix>,
}

const SYMMETRY_TOL: f64 = 1e-9;

impl NetworkModel {
    pub fn new(spec: FeederSpec) -> Result<Self> {
        if !(spec.v_nominal_kv > 0.0) || !spec.v_nominal_kv.is_finite() {
            return Err(Error::InvalidNetwork("v_nominal_kv must be positive".into()));
        }
        if !(spec.s_base_kva > 0.0) || !spec.s_base_kva.is_finite() {
            return Err(Error::InvalidNetwork("s_base_kva must be positive".into()));
        }
        if !(spec.source_pu > 0.0) || !spec.source_pu.is_finite() {
            return Err(Error::InvalidNetwork("source_pu must be positive".into()));
        }

        let mut index = HashMap::new();
        let mut nodes = Vec::with_capacity(spec.nodes.len());
        for (id, phases) in &spec.nodes {
            if index.insert(id.clone(), nodes.len()).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate node id {id}")));
            }
            nodes.push(Node {
                id: id.clone(),
                phases: *phases,
            });
        }
        let n = nodes.len();
        let lookup = |id: &str| index.get(id).copied().ok_or_else(|| Error::UnknownNode(id.to_string()));
        let source = lookup(&spec.source)?;

        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let mut raw = Vec::with_capacity(spec.branches.len());
        for (k, (from, to, z)) in spec.branches.iter().enumerate() {
            let (f, t) = (lookup(from)?, lookup(to)?);
            if f == t {
                return Err(Error::Cycle {
                    from: from.clone(),
                    to: to.clone(),
                });
            }
            if !z.is_symmetric(SYMMETRY_TOL * (1.0 + max_entry(z))) {
                return Err(Error::InvalidNetwork(format!(
                    "branch {from}-{to}: impedance matrix is not symmetric"
                )));
            }
            for p in Phase::ALL {
                if z.r(p, p) < 0.0 {
                    return Err(Error::InvalidNetwork(format!(
                        "branch {from}-{to}: negative resistance on phase {p}"
                    )));
                }
            }
            let shared = PhaseSet(nodes[f].phases.0 & nodes[t].phases.0);
            if z.restricted_to(shared) != *z {
                return Err(Error::InvalidNetwork(format!(
                    "branch {from}-{to}: nonzero impedance entry on a phase absent at an endpoint"
                )));
            }
            adjacency[f].push((t, k));
            adjacency[t].push((f, k));
            raw.push((f, t, *z));
        }

        // Breadth-first orientation from the source; a second visit is a cycle.
        let mut parent = vec![None; n];
        let mut parent_branch: Vec<Option<usize>> = vec![None; n];
        let mut depth = vec![0usize; n];
        let mut visited = vec![false; n];
        let mut used = vec![false; raw.len()];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([source]);
        visited[source] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(v, k) in &adjacency[u] {
                if used[k] {
                    continue;
                }
                used[k] = true;
                if visited[v] {
                    let (f, t, _) = &spec.branches[k];
                    return Err(Error::Cycle {
                        from: f.clone(),
                        to: t.clone(),
                    });
                }
                visited[v] = true;
                parent[v] = Some(u);
                parent_branch[v] = Some(k);
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
        if let Some(v) = (0..n).find(|&v| !visited[v]) {
            return Err(Error::Disconnected(nodes[v].id.clone()));
        }
        debug_assert_eq!(raw.len(), n - 1);

        let branches: Vec<Branch> = raw
            .iter()
            .map(|&(f, t, z)| {
                if parent[t] == Some(f) {
                    Branch { from: f, to: t, z }
                } else {
                    Branch { from: t, to: f, z }
                }
            })
            .collect();

        for &v in &order {
            if let Some(u) = parent[v] {
                if !nodes[v].phases.is_subset_of(nodes[u].phases) {
                    return Err(Error::InvalidNetwork(format!(
                        "node {} carries phases {} not present at its parent {}",
                        nodes[v].id, nodes[v].phases, nodes[u].id
                    )));
                }
            }
        }

        let mut loads = vec![[Complex64::default(); 3]; n];
        for (id, phase, p, q) in &spec.loads {
            let k = lookup(id)?;
            if !p.is_finite() || !q.is_finite() {
                return Err(Error::InvalidNetwork(format!("non-finite load at node {id}")));
            }
            // Phase subsets shrink away from the source, so presence at the
            // node implies presence along the whole path.
            if !nodes[k].phases.contains(*phase) {
                return Err(Error::LoadOnAbsentPhase {
                    node: id.clone(),
                    phase: phase.as_char(),
                });
            }
            loads[k][phase.index()] += Complex64::new(*p, *q);
        }

        let mut children = vec![Vec::new(); n];
        for &v in &order {
            if let Some(u) = parent[v] {
                children[u].push(v);
            }
        }

        let mut path_z = vec![PhaseImpedanceMatrix::zero(); n];
        for &v in &order {
            if let (Some(u), Some(b)) = (parent[v], parent_branch[v]) {
                path_z[v] = path_z[u] + branches[b].z;
            }
        }

        Ok(Self {
            name: spec.name,
            v_nominal_kv: spec.v_nominal_kv,
            s_base_kva: spec.s_base_kva,
            source_pu: spec.source_pu,
            source,
            nodes,
            branches,
            loads,
            index,
            parent,
            parent_branch,
            depth,
            order,
            children,
            path_z,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// System line-to-line voltage, kV.
    pub fn v_nominal_kv(&self) -> f64 {
        self.v_nominal_kv
    }

    /// Line-to-neutral base voltage, volts.
    pub fn v_base_ln(&self) -> f64 {
        self.v_nominal_kv * 1000.0 / 3f64.sqrt()
    }

    pub fn s_base_kva(&self) -> f64 {
        self.s_base_kva
    }

    /// Per-phase power base, kVA.
    pub fn s_base_phase_kva(&self) -> f64 {
        self.s_base_kva / 3.0
    }

    /// Impedance base, ohms.
    pub fn z_base(&self) -> f64 {
        self.v_nominal_kv * self.v_nominal_kv * 1000.0 / self.s_base_kva
    }

    pub fn source_pu(&self) -> f64 {
        self.source_pu
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &Node {
        &self.nodes[k]
    }

    pub fn phases(&self, k: usize) -> PhaseSet {
        self.nodes[k].phases
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn parent(&self, k: usize) -> Option<usize> {
        self.parent[k]
    }

    pub fn parent_branch(&self, k: usize) -> Option<&Branch> {
        self.parent_branch[k].map(|b| &self.branches[b])
    }

    pub fn children(&self, k: usize) -> &[usize] {
        &self.children[k]
    }

    pub fn depth(&self, k: usize) -> usize {
        self.depth[k]
    }

    /// Nodes ordered so that every parent precedes its children.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Base-case load per phase, kW + j kvar.
    pub fn load(&self, k: usize) -> [Complex64; 3] {
        self.loads[k]
    }

    pub fn loads(&self) -> &[[Complex64; 3]] {
        &self.loads
    }

    /// Total real power demand, kW.
    pub fn total_demand_kw(&self) -> f64 {
        self.loads.iter().flatten().map(|s| s.re).sum()
    }

    /// Every node except the source.
    pub fn non_source_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| k != self.source).collect()
    }

    fn check(&self, k: usize) -> Result<()> {
        if k < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(format!("#{k}")))
        }
    }

    /// Nodes on the path from the source to `k`, source first.
    pub fn path_from_source(&self, k: usize) -> Result<Vec<usize>> {
        self.check(k)?;
        let mut path = vec![k];
        let mut u = k;
        while let Some(p) = self.parent[u] {
            path.push(p);
            u = p;
        }
        path.reverse();
        Ok(path)
    }

    /// Lowest common ancestor of two nodes.
    pub fn common_ancestor(&self, mut u: usize, mut v: usize) -> Result<usize> {
        self.check(u)?;
        self.check(v)?;
        while self.depth[u] > self.depth[v] {
            u = self.parent[u].expect("deeper node has a parent");
        }
        while self.depth[v] > self.depth[u] {
            v = self.parent[v].expect("deeper node has a parent");
        }
        while u != v {
            u = self.parent[u].expect("non-root");
            v = self.parent[v].expect("non-root");
        }
        Ok(u)
    }

    /// Impedance (ohms) of the source path shared by `o` and `a`.
    pub fn shared_path_impedance(&self, o: usize, a: usize) -> Result<PhaseImpedanceMatrix> {
        let lca = self.common_ancestor(o, a)?;
        Ok(self.path_z[lca])
    }

    /// Shared-path impedance in per unit of the feeder base.
    pub fn shared_path_impedance_pu(&self, o: usize, a: usize) -> Result<PhaseImpedanceMatrix> {
        Ok(self.shared_path_impedance(o, a)?.scale(1.0 / self.z_base()))
    }

    /// Same feeder with a different source voltage magnitude.
    pub fn with_source_pu(&self, source_pu: f64) -> Result<Self> {
        if !(source_pu > 0.0) {
            return Err(Error::InvalidArgument("source_pu must be positive".into()));
        }
        let mut net = self.clone();
        net.source_pu = source_pu;
        Ok(net)
    }

    /// Same feeder with every load multiplied by `k`.
    pub fn with_scaled_loads(&self, k: f64) -> Self {
        let mut net = self.clone();
        net.loads.iter_mut().flatten().for_each(|s| *s *= k);
        net
    }

    /// Reconstruct a raw description (used by the writer).
    pub fn to_spec(&self) -> FeederSpec {
        let mut loads = Vec::new();
        for (k, s) in self.loads.iter().enumerate() {
            for p in Phase::ALL {
                let v = s[p.index()];
                if v != Complex64::default() {
                    loads.push((self.nodes[k].id.clone(), p, v.re, v.im));
                }
            }
        }
        FeederSpec {
            name: self.name.clone(),
            v_nominal_kv: self.v_nominal_kv,
            s_base_kva: self.s_base_kva,
            source_pu: self.source_pu,
            source: self.nodes[self.source].id.clone(),
            nodes: self.nodes.iter().map(|n| (n.id.clone(), n.phases)).collect(),
            branches: self
                .branches
                .iter()
                .map(|b| (self.nodes[b.from].id.clone(), self.nodes[b.to].id.clone(), b.z))
                .collect(),
            loads,
        }
    }
}

fn max_entry(z: &PhaseImpedanceMatrix) -> f64 {
    z.0.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Load a feeder from file content.
pub fn load_feeder(content: &str) -> Result<NetworkModel> {
    NetworkModel::new(parse_feeder(content)?)
}
