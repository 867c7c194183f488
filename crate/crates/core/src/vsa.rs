//! Linearized voltage change at an observation node caused by power changes
//! at actor nodes of a radial feeder.
//!
//! Power changes follow the load convention: a positive `p` is additional
//! consumption and lowers the voltage, PV generation enters with a negative
//! sign. All quantities are per unit of the feeder base.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::feeder::{NetworkModel, Phase, PhaseImpedanceMatrix, PhaseSet};

/// Per-phase complex power change at one node, per unit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerChangeVector {
    pub p: [f64; 3],
    pub q: [f64; 3],
}

impl PowerChangeVector {
    pub fn new(p: [f64; 3], q: [f64; 3]) -> Self {
        Self { p, q }
    }

    /// Convert kW / kvar per phase to per unit on the feeder base.
    pub fn from_kw(net: &NetworkModel, p_kw: [f64; 3], q_kvar: [f64; 3]) -> Self {
        let base = net.s_base_phase_kva();
        Self {
            p: p_kw.map(|x| x / base),
            q: q_kvar.map(|x| x / base),
        }
    }

    pub fn to_kw(&self, net: &NetworkModel) -> ([f64; 3], [f64; 3]) {
        let base = net.s_base_phase_kva();
        (self.p.map(|x| x * base), self.q.map(|x| x * base))
    }

    /// The six-entry vector [P^a, P^b, P^c, Q^a, Q^b, Q^c] / |V|.
    pub fn normalized(&self, vmag: [f64; 3]) -> [f64; 6] {
        let mut s = [0.0; 6];
        for h in 0..3 {
            s[h] = self.p[h] / vmag[h];
            s[h + 3] = self.q[h] / vmag[h];
        }
        s
    }

    pub fn from_normalized(s: &[f64; 6], vmag: [f64; 3]) -> Self {
        let mut out = Self::default();
        for h in 0..3 {
            out.p[h] = s[h] * vmag[h];
            out.q[h] = s[h + 3] * vmag[h];
        }
        out
    }

    pub fn complex(&self, h: Phase) -> Complex64 {
        Complex64::new(self.p[h.index()], self.q[h.index()])
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            p: self.p.map(|x| x * k),
            q: self.q.map(|x| x * k),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(&self.q).all(|x| x.is_finite())
    }
}

/// How a per-phase power change template lands on a node with fewer than
/// three phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorWiring {
    /// Entries on absent phases are dropped.
    #[default]
    PerPhase,
    /// The template describes one third of a three-phase unit per phase; at
    /// a node with `n` phases each present phase carries `3/n` times its
    /// template entry, so the unit's total power is preserved.
    Balanced,
}

impl ActorWiring {
    fn factor(self, phases: PhaseSet) -> f64 {
        match self {
            ActorWiring::PerPhase => 1.0,
            ActorWiring::Balanced => 3.0 / phases.len() as f64,
        }
    }

    /// Power change actually applied at a node carrying `phases`.
    pub fn realize(self, template: &PowerChangeVector, phases: PhaseSet) -> PowerChangeVector {
        let k = self.factor(phases);
        let mut out = PowerChangeVector::default();
        for h in phases.iter() {
            out.p[h.index()] = template.p[h.index()] * k;
            out.q[h.index()] = template.q[h.index()] * k;
        }
        out
    }

    /// Z-vectors that act on the template instead of the realized change.
    pub fn effective(self, z: &ZVectors, phases: PhaseSet) -> ZVectors {
        let k = self.factor(phases);
        let mut out = ZVectors::default();
        for h in phases.iter() {
            for j in [h.index(), h.index() + 3] {
                out.r[j] = z.r[j] * k;
                out.i[j] = z.i[j] * k;
            }
        }
        out
    }
}

/// Real and imaginary sensitivity vectors of one observation phase to the
/// six-entry normalized power change of one actor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZVectors {
    pub r: [f64; 6],
    pub i: [f64; 6],
}

impl ZVectors {
    /// Build from the shared-path impedance (per unit) for observation
    /// phase `phase`, under balanced phasors at 0, -120 and +120 degrees.
    ///
    /// The result is expressed in the frame of the observation phase, i.e.
    /// rotated by minus its nominal angle. For phase a this reproduces the
    /// familiar entries -R^aa, R^ab/2 - sqrt(3) X^ab/2, ...; phases b and c
    /// are the cyclic permutations.
    pub fn from_shared(z: &PhaseImpedanceMatrix, phase: Phase) -> Self {
        let mut out = Self::default();
        for h in Phase::ALL {
            let w = z.get(phase, h) * Complex64::from_polar(1.0, h.nominal_angle() - phase.nominal_angle());
            // dV = -conj(dS) Z / conj(V): dP contributes -w, dQ contributes +j w.
            out.r[h.index()] = -w.re;
            out.i[h.index()] = -w.im;
            out.r[h.index() + 3] = -w.im;
            out.i[h.index() + 3] = w.re;
        }
        out
    }

    pub fn dot_r(&self, s: &[f64; 6]) -> f64 {
        dot(&self.r, s)
    }

    pub fn dot_i(&self, s: &[f64; 6]) -> f64 {
        dot(&self.i, s)
    }
}

pub(crate) fn dot(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sensitivity vectors for observation node `o`, actor `a`, phase `phase`.
pub fn z_vectors(net: &NetworkModel, o: usize, a: usize, phase: Phase) -> Result<ZVectors> {
    Ok(ZVectors::from_shared(&net.shared_path_impedance_pu(o, a)?, phase))
}

/// Complex voltage change (absolute frame, per unit) at `o` from a power
/// change `ds` at actor `a` whose voltage phasors are `v_a`.
pub fn delta_v_single(
    net: &NetworkModel,
    o: usize,
    a: usize,
    ds: &PowerChangeVector,
    v_a: &[Complex64; 3],
) -> Result<[Complex64; 3]> {
    let z = net.shared_path_impedance_pu(o, a)?;
    let phases = net.phases(a);
    let mut w = [Complex64::default(); 3];
    for h in Phase::ALL {
        let s = ds.complex(h);
        if s == Complex64::default() {
            continue;
        }
        if !phases.contains(h) {
            return Err(Error::InvalidArgument(format!(
                "power change on absent phase {h} of node {}",
                net.node(a).id
            )));
        }
        let v = v_a[h.index()];
        if v.norm() == 0.0 {
            return Err(Error::ZeroVoltage {
                node: net.node(a).id.clone(),
                phase: h.as_char(),
            });
        }
        w[h.index()] = s.conj() / v.conj();
    }
    Ok(z.mul_vec(&w).map(|x| -x))
}

/// Superposition over several actors: (node, power change, actor voltages).
pub fn delta_v_multi(
    net: &NetworkModel,
    o: usize,
    actors: &[(usize, PowerChangeVector, [Complex64; 3])],
) -> Result<[Complex64; 3]> {
    let mut total = [Complex64::default(); 3];
    for (a, ds, v) in actors {
        let dv = delta_v_single(net, o, *a, ds, v)?;
        for p in 0..3 {
            total[p] += dv[p];
        }
    }
    Ok(total)
}

/// Real and imaginary voltage change of `phase` at `o` (frame of that
/// phase), from the sensitivity vectors and the normalized power change.
pub fn delta_v_real_imag(
    net: &NetworkModel,
    o: usize,
    a: usize,
    ds: &PowerChangeVector,
    vmag: [f64; 3],
    phase: Phase,
) -> Result<(f64, f64)> {
    let z = z_vectors(net, o, a, phase)?;
    let s = ds.normalized(vmag);
    Ok((z.dot_r(&s), z.dot_i(&s)))
}

/// Balanced nominal phasors of magnitude `vmag`.
pub fn balanced_phasors(vmag: f64) -> [Complex64; 3] {
    Phase::ALL.map(|p| p.rotor() * vmag)
}
