//! Unbalanced three-phase backward/forward sweep for radial feeders with
//! constant-PQ loads.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::feeder::{NetworkModel, Phase};

/// Complex power per node per phase, kW + j kvar, load convention
/// (positive = consumption). Indexed by node.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadChange(Vec<[Complex64; 3]>);

impl LoadChange {
    pub fn zeros(net: &NetworkModel) -> Self {
        Self(vec![[Complex64::default(); 3]; net.len()])
    }

    pub fn add(&mut self, node: usize, phase: Phase, p_kw: f64, q_kvar: f64) {
        self.0[node][phase.index()] += Complex64::new(p_kw, q_kvar);
    }

    pub fn get(&self, node: usize) -> [Complex64; 3] {
        self.0[node]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().flatten().all(|s| *s == Complex64::default())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Maximum power mismatch, per unit of the per-phase base.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoltageSolution {
    /// Per-unit line-to-neutral phasors, zero on absent phases.
    pub v: Vec<[Complex64; 3]>,
    pub iterations: usize,
    /// Worst |V conj(I) - S| at the last iteration, per unit.
    pub residual: f64,
    /// Same residual in kVA.
    pub residual_kva: f64,
    /// Line-to-neutral base voltage, volts.
    pub v_base: f64,
}

impl VoltageSolution {
    pub fn magnitude(&self, node: usize, phase: Phase) -> f64 {
        self.v[node][phase.index()].norm()
    }

    pub fn volts(&self, node: usize) -> [Complex64; 3] {
        self.v[node].map(|x| x * self.v_base)
    }

    /// Magnitudes on present phases; absent phases report 1 so that the
    /// result can be used as a divisor.
    pub fn magnitudes_or_one(&self, net: &NetworkModel, node: usize) -> [f64; 3] {
        let ph = net.phases(node);
        Phase::ALL.map(|p| if ph.contains(p) { self.magnitude(node, p) } else { 1.0 })
    }

    /// Smallest and largest magnitude over all present phases.
    pub fn extremes(&self, net: &NetworkModel) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..net.len() {
            for p in net.phases(k).iter() {
                let m = self.magnitude(k, p);
                lo = lo.min(m);
                hi = hi.max(m);
            }
        }
        (lo, hi)
    }

    /// CSV with columns node, phase, magnitude_pu, angle_deg.
    pub fn to_csv(&self, net: &NetworkModel) -> String {
        let mut out = String::from("node,phase,magnitude_pu,angle_deg\n");
        for k in 0..net.len() {
            for p in net.phases(k).iter() {
                let v = self.v[k][p.index()];
                let _ = writeln!(
                    out,
                    "{},{},{:.9},{:.6}",
                    net.node(k).id,
                    p,
                    v.norm(),
                    v.arg().to_degrees()
                );
            }
        }
        out
    }
}

/// Solve the base loading plus `delta` with default options.
pub fn solve(net: &NetworkModel, delta: Option<&LoadChange>) -> Result<VoltageSolution> {
    solve_with(net, delta, &SolveOptions::default(), None)
}

/// Solve the base loading plus `delta`, optionally starting from a previous
/// solution instead of the flat profile.
pub fn solve_with(
    net: &NetworkModel,
    delta: Option<&LoadChange>,
    opts: &SolveOptions,
    start: Option<&VoltageSolution>,
) -> Result<VoltageSolution> {
    let n = net.len();
    if let Some(d) = delta {
        if d.len() != n {
            return Err(Error::InvalidArgument(format!(
                "load change has {} nodes, feeder has {n}",
                d.len()
            )));
        }
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidArgument("tolerance and max_iter must be positive".into()));
    }

    let base = net.s_base_phase_kva();
    let mut s = vec![[Complex64::default(); 3]; n];
    for k in 0..n {
        let ph = net.phases(k);
        for p in Phase::ALL {
            let mut x = net.load(k)[p.index()];
            if let Some(d) = delta {
                x += d.get(k)[p.index()];
            }
            if x != Complex64::default() && !ph.contains(p) {
                return Err(Error::LoadOnAbsentPhase {
                    node: net.node(k).id.clone(),
                    phase: p.as_char(),
                });
            }
            if !x.re.is_finite() || !x.im.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite power at node {}", net.node(k).id)));
            }
            s[k][p.index()] = x / base;
        }
    }

    let z: Vec<_> = (0..n)
        .map(|k| net.parent_branch(k).map(|b| b.z.scale(1.0 / net.z_base())))
        .collect();
    let vs = Phase::ALL.map(|p| p.rotor() * net.source_pu());

    let mut v: Vec<[Complex64; 3]> = match start {
        Some(sol) if sol.v.len() == n => sol.v.clone(),
        _ => (0..n)
            .map(|k| {
                let ph = net.phases(k);
                Phase::ALL.map(|p| if ph.contains(p) { vs[p.index()] } else { Complex64::default() })
            })
            .collect(),
    };
    v[net.source()] = vs;

    let order = net.order();
    let mut inj = vec![[Complex64::default(); 3]; n];
    let mut flow = vec![[Complex64::default(); 3]; n];
    let mut worst = (f64::INFINITY, net.source());
    for it in 1..=opts.max_iter {
        for k in 0..n {
            for p in net.phases(k).iter() {
                let (vk, sk) = (v[k][p.index()], s[k][p.index()]);
                if sk == Complex64::default() {
                    inj[k][p.index()] = Complex64::default();
                    continue;
                }
                if vk.norm() == 0.0 {
                    return Err(Error::ZeroVoltage {
                        node: net.node(k).id.clone(),
                        phase: p.as_char(),
                    });
                }
                inj[k][p.index()] = (sk / vk).conj();
            }
        }

        // Backward: branch current into k is its own injection plus children.
        for &k in order.iter().rev() {
            let mut j = inj[k];
            for &c in net.children(k) {
                for h in 0..3 {
                    j[h] += flow[c][h];
                }
            }
            flow[k] = j;
        }

        // Forward: voltage drop along each branch.
        for &k in order {
            let (Some(par), Some(zk)) = (net.parent(k), &z[k]) else {
                continue;
            };
            let drop = zk.mul_vec(&flow[k]);
            let ph = net.phases(k);
            for p in Phase::ALL {
                let i = p.index();
                v[k][i] = if ph.contains(p) { v[par][i] - drop[i] } else { Complex64::default() };
            }
        }

        worst = (0.0, net.source());
        for k in 0..n {
            for p in net.phases(k).iter() {
                let i = p.index();
                let m = (v[k][i] * inj[k][i].conj() - s[k][i]).norm();
                if !m.is_finite() {
                    return Err(Error::NonConvergence {
                        iterations: it,
                        mismatch: m,
                        node: net.node(k).id.clone(),
                    });
                }
                if m > worst.0 {
                    worst = (m, k);
                }
            }
        }
        if worst.0 < opts.tol {
            return Ok(VoltageSolution {
                v,
                iterations: it,
                residual: worst.0,
                residual_kva: worst.0 * base,
                v_base: net.v_base_ln(),
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        mismatch: worst.0,
        node: net.node(worst.1).id.clone(),
    })
}

/// Complex voltage change (per unit) at every node caused by adding `delta`
/// on top of the loading that produced `base`.
pub fn voltage_change_oracle(
    net: &NetworkModel,
    base: &VoltageSolution,
    delta: &LoadChange,
    opts: &SolveOptions,
) -> Result<Vec<[Complex64; 3]>> {
    if delta.is_zero() {
        return Ok(vec![[Complex64::default(); 3]; net.len()]);
    }
    let after = solve_with(net, Some(delta), opts, Some(base))?;
    Ok(after
        .v
        .iter()
        .zip(&base.v)
        .map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]])
        .collect())
}

/// Complex power drawn from the source and total series losses, kVA.
pub fn power_balance(net: &NetworkModel, sol: &VoltageSolution) -> (Complex64, Complex64) {
    let base = net.s_base_phase_kva();
    let n = net.len();
    let mut inj = vec![[Complex64::default(); 3]; n];
    for k in 0..n {
        for p in net.phases(k).iter() {
            let i = p.index();
            let vk = sol.v[k][i];
            if vk.norm() > 0.0 {
                inj[k][i] = (net.load(k)[i] / base / vk).conj();
            }
        }
    }
    let mut flow = vec![[Complex64::default(); 3]; n];
    for &k in net.order().iter().rev() {
        let mut j = inj[k];
        for &c in net.children(k) {
            for h in 0..3 {
                j[h] += flow[c][h];
            }
        }
        flow[k] = j;
    }
    let mut losses = Complex64::default();
    for k in 0..n {
        if let Some(b) = net.parent_branch(k) {
            let zi = b.z.scale(1.0 / net.z_base()).mul_vec(&flow[k]);
            for h in 0..3 {
                losses += zi[h] * flow[k][h].conj();
            }
        }
    }
    let src = net.source();
    let mut from_source = Complex64::default();
    for h in 0..3 {
        // Source current is the sum of the flows of its children plus its own load.
        from_source += sol.v[src][h] * flow[src][h].conj();
    }
    (from_source * base, losses * base)
}
