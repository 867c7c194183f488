//! Sampling harness: empirical voltage change distributions from repeated
//! load flows, histograms and the Jensen-Shannon distance.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feeder::{path_statistics, NetworkModel, Phase};
use crate::power_flow::{self, LoadChange, SolveOptions, VoltageSolution};
use crate::st_pvsa::{
    self, CrossPq, MagnitudeDistribution, PowerChangeModel, PowerParams, Vec6, VoltageChangeMoments,
};
use crate::vsa::{ActorWiring, PowerChangeVector, ZVectors};

/// Deterministic random stream for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_with_factor<R: Rng + ?Sized>(mu: &DVector<f64>, l: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_fn(l.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    mu + l * z
}

/// `n` independent draws of one actor's normalized power change.
pub fn sample_power_changes<R: Rng + ?Sized>(pcm: &PowerChangeModel, n: usize, rng: &mut R) -> Result<Vec<Vec6>> {
    let l = pcm.joint_factor(1)?;
    let mu = DVector::from_row_slice(&pcm.mu);
    Ok((0..n)
        .map(|_| {
            let x = draw_with_factor(&mu, &l, rng);
            std::array::from_fn(|j| x[j])
        })
        .collect())
}

/// One joint draw for `n_actors` correlated actors, using a precomputed
/// factor from [`PowerChangeModel::joint_factor`].
pub fn sample_joint<R: Rng + ?Sized>(pcm: &PowerChangeModel, factor: &DMatrix<f64>, rng: &mut R) -> Vec<Vec6> {
    let n = factor.nrows() / 6;
    let mu = DVector::from_fn(6 * n, |r, _| pcm.mu[r % 6]);
    let x = draw_with_factor(&mu, factor, rng);
    (0..n).map(|a| std::array::from_fn(|j| x[6 * a + j])).collect()
}

/// Uniform-bin histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub n: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(hi > lo) || bins == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid histogram range [{lo}, {hi}] with {bins} bins")));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0; bins],
            n: 0,
        })
    }

    /// Histogram over `[0, 1.2 * max]`, the default layout for magnitudes.
    pub fn of_magnitudes(xs: &[f64], bins: usize) -> Result<Self> {
        let max = xs.iter().copied().fold(0.0f64, f64::max);
        let hi = if max > 0.0 { 1.2 * max } else { 1.0 };
        let mut h = Self::new(0.0, hi, bins)?;
        h.extend(xs);
        Ok(h)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins()).map(|k| self.lo + k as f64 * self.width()).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.bins()).map(|k| self.lo + (k as f64 + 0.5) * self.width()).collect()
    }

    /// Add one value; values outside the range are clamped to the end bins.
    pub fn add(&mut self, x: f64) {
        let k = ((x - self.lo) / self.width()).floor();
        let k = if k.is_nan() { 0 } else { (k.max(0.0) as usize).min(self.bins() - 1) };
        self.counts[k] += 1;
        self.n += 1;
    }

    pub fn extend(&mut self, xs: &[f64]) {
        for &x in xs {
            self.add(x);
        }
    }

    /// Add the counts of a histogram with identical bins.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if !self.same_bins(other) {
            return Err(Error::InvalidArgument("histograms have different bins".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n += other.n;
        Ok(())
    }

    pub fn same_bins(&self, other: &Histogram) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.bins() == other.bins()
    }

    /// Probability density per bin.
    pub fn density(&self) -> Vec<f64> {
        let norm = self.n as f64 * self.width();
        self.counts.iter().map(|&c| if self.n == 0 { 0.0 } else { c as f64 / norm }).collect()
    }

    fn probabilities(&self) -> Result<Vec<f64>> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("empty histogram".into()));
        }
        Ok(self.counts.iter().map(|&c| c as f64 / self.n as f64).collect())
    }

    /// CSV with columns bin_lo, bin_hi, density.
    pub fn to_csv(&self) -> String {
        let e = self.edges();
        let mut out = String::from("bin_lo,bin_hi,density\n");
        for (k, d) in self.density().iter().enumerate() {
            out.push_str(&format!("{:.9e},{:.9e},{:.9e}\n", e[k], e[k + 1], d));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    /// Distance in [0, 1].
    #[default]
    Two,
    Natural,
}

const JS_FLOOR: f64 = 1e-12;

fn js_from_probabilities(p: &[f64], q: &[f64], base: LogBase) -> f64 {
    let norm = |v: &[f64]| {
        let f: Vec<f64> = v.iter().map(|x| x + JS_FLOOR).collect();
        let s: f64 = f.iter().sum();
        f.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let (p, q) = (norm(p), norm(q));
    let mut d = 0.0;
    for (a, b) in p.iter().zip(&q) {
        let m = 0.5 * (a + b);
        d += 0.5 * a * (a / m).ln() + 0.5 * b * (b / m).ln();
    }
    if base == LogBase::Two {
        d /= std::f64::consts::LN_2;
    }
    d.max(0.0).sqrt()
}

/// Jensen-Shannon distance between two histograms with identical bins.
pub fn js_distance(p: &Histogram, q: &Histogram, base: LogBase) -> Result<f64> {
    if !p.same_bins(q) {
        return Err(Error::InvalidArgument("histograms have different bins".into()));
    }
    Ok(js_from_probabilities(&p.probabilities()?, &q.probabilities()?, base))
}

/// Jensen-Shannon distance between a histogram and a density discretized
/// on the histogram's bins by the midpoint rule.
pub fn js_distance_to_density(p: &Histogram, pdf: impl Fn(f64) -> f64, base: LogBase) -> Result<f64> {
    let pp = p.probabilities()?;
    let w = p.width();
    let q: Vec<f64> = p.midpoints().iter().map(|&x| pdf(x).max(0.0) * w).collect();
    let total: f64 = q.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Numerical("density has no mass on the histogram range".into()));
    }
    let q: Vec<f64> = q.iter().map(|x| x / total).collect();
    Ok(js_from_probabilities(&pp, &q, base))
}

/// Where the actors of a scenario sit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorSet {
    Fixed(Vec<usize>),
    /// `count` nodes drawn uniformly without replacement from `candidates`
    /// for every sample.
    Random { count: usize, candidates: Vec<usize> },
}

impl ActorSet {
    pub fn count(&self) -> usize {
        match self {
            ActorSet::Fixed(v) => v.len(),
            ActorSet::Random { count, .. } => *count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub observation: usize,
    pub phase: Phase,
    pub actors: ActorSet,
    pub params: PowerParams,
    /// Mean real / reactive power change per actor and phase, kW / kvar.
    pub mean_kw: [f64; 3],
    pub mean_kvar: [f64; 3],
    pub cross_pq: CrossPq,
    pub wiring: ActorWiring,
    pub samples: usize,
    pub seed: u64,
    pub bins: usize,
    /// Power-flow tolerance for the oracle.
    pub tol: f64,
}

impl ScenarioConfig {
    /// Nine phase-a actors at random locations, observed at node 709 phase a,
    /// with variances 5 kW^2 and 0.5 kvar^2 and correlations 0.2, 0.2, -0.5.
    pub fn nine_actor_default(net: &NetworkModel, samples: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            observation: net.index_of("709")?,
            phase: Phase::A,
            actors: ActorSet::Random {
                count: 9,
                candidates: net.non_source_nodes(),
            },
            params: PowerParams::uniform(5.0, 0.5, 0.2, 0.2, -0.5).only_phase(Phase::A),
            mean_kw: [0.0; 3],
            mean_kvar: [0.0; 3],
            cross_pq: CrossPq::default(),
            wiring: ActorWiring::PerPhase,
            samples,
            seed,
            bins: 200,
            tol: 1e-10,
        })
    }

    fn validate(&self, net: &NetworkModel) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        let check = |k: usize| {
            if k < net.len() {
                Ok(())
            } else {
                Err(Error::UnknownNode(format!("#{k}")))
            }
        };
        check(self.observation)?;
        if !net.phases(self.observation).contains(self.phase) {
            return Err(Error::InvalidArgument(format!(
                "observation node {} has no phase {}",
                net.node(self.observation).id,
                self.phase
            )));
        }
        match &self.actors {
            ActorSet::Fixed(v) => {
                if v.is_empty() {
                    return Err(Error::InvalidArgument("actor set is empty".into()));
                }
                v.iter().try_for_each(|&k| check(k))?;
            }
            ActorSet::Random { count, candidates } => {
                if *count == 0 || *count > candidates.len() {
                    return Err(Error::InvalidArgument(format!(
                        "cannot draw {count} actors from {} candidates",
                        candidates.len()
                    )));
                }
                candidates.iter().try_for_each(|&k| check(k))?;
            }
        }
        Ok(())
    }

    /// Model in per unit of the power change itself (no voltage scaling),
    /// used to draw samples.
    pub fn sampling_model(&self, net: &NetworkModel) -> Result<PowerChangeModel> {
        PowerChangeModel::from_params(
            &self.params,
            self.mean_kw,
            self.mean_kvar,
            net.s_base_phase_kva(),
            [1.0; 3],
            self.cross_pq,
        )
    }

    fn candidates(&self) -> &[usize] {
        match &self.actors {
            ActorSet::Fixed(v) => v,
            ActorSet::Random { candidates, .. } => candidates,
        }
    }
}

/// Average base-case magnitude per phase over a set of nodes; phases absent
/// everywhere report 1.
pub fn mean_magnitudes(net: &NetworkModel, base: &VoltageSolution, nodes: &[usize]) -> [f64; 3] {
    Phase::ALL.map(|p| {
        let (s, n) = nodes
            .iter()
            .filter(|&&k| net.phases(k).contains(p))
            .fold((0.0, 0usize), |(s, n), &k| (s + base.magnitude(k, p), n + 1));
        if n == 0 {
            1.0
        } else {
            s / n as f64
        }
    })
}

/// Analytical moments and magnitude distribution for a scenario.
pub fn analytical_distribution(
    net: &NetworkModel,
    base: &VoltageSolution,
    cfg: &ScenarioConfig,
) -> Result<(VoltageChangeMoments, MagnitudeDistribution)> {
    cfg.validate(net)?;
    let vmag = mean_magnitudes(net, base, cfg.candidates());
    let pcm = PowerChangeModel::from_params(
        &cfg.params,
        cfg.mean_kw,
        cfg.mean_kvar,
        net.s_base_phase_kva(),
        vmag,
        cfg.cross_pq,
    )?;
    let m = match &cfg.actors {
        ActorSet::Random { count, candidates } => {
            let z = path_statistics(net, cfg.observation, cfg.phase, candidates, cfg.wiring)?;
            st_pvsa::voltage_change_moments(&z, &pcm, *count)?
        }
        ActorSet::Fixed(actors) => fixed_actor_moments(net, cfg.observation, cfg.phase, actors, &pcm, cfg.wiring)?,
    };
    Ok((m, st_pvsa::magnitude_distribution(&m)?))
}

/// Exact moments for actors at known locations (no location randomness).
pub fn fixed_actor_moments(
    net: &NetworkModel,
    o: usize,
    phase: Phase,
    actors: &[usize],
    pcm: &PowerChangeModel,
    wiring: ActorWiring,
) -> Result<VoltageChangeMoments> {
    let zs: Vec<ZVectors> = actors
        .iter()
        .map(|&a| Ok(wiring.effective(&crate::vsa::z_vectors(net, o, a, phase)?, net.phases(a))))
        .collect::<Result<_>>()?;
    let bil = |x: &Vec6, m: &[[f64; 6]; 6], y: &Vec6| -> f64 {
        (0..6).flat_map(|j| (0..6).map(move |k| (j, k))).map(|(j, k)| x[j] * m[j][k] * y[k]).sum()
    };
    let mut out = VoltageChangeMoments {
        mu_r: 0.0,
        mu_i: 0.0,
        var_r: 0.0,
        var_i: 0.0,
        c: 0.0,
        n_actors: actors.len(),
    };
    for (a, za) in zs.iter().enumerate() {
        out.mu_r += za.dot_r(&pcm.mu);
        out.mu_i += za.dot_i(&pcm.mu);
        for (b, zb) in zs.iter().enumerate() {
            let m = if a == b { &pcm.sigma } else { &pcm.cross };
            out.var_r += bil(&za.r, m, &zb.r);
            out.var_i += bil(&za.i, m, &zb.i);
            out.c += bil(&za.r, m, &zb.i);
        }
    }
    out.var_r = out.var_r.max(0.0);
    out.var_i = out.var_i.max(0.0);
    Ok(out)
}

/// Empirical distribution at the observation node and phase.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalResult {
    /// |dV| per successful sample, in sample order.
    pub delta_v: Vec<f64>,
    /// |V| after the change, per successful sample.
    pub future_v: Vec<f64>,
    pub delta_v_hist: Histogram,
    pub future_v_hist: Histogram,
    pub failures: usize,
}

/// Samples per independent random stream.
pub const CHUNK: usize = 1024;

/// Draw power changes (and locations), solve the load flow for each draw
/// and record the voltage at the observation node. Chunks of [`CHUNK`]
/// samples use stream `(seed, chunk index)`, so the output does not depend
/// on the number of worker threads.
pub fn empirical_voltage_distribution(
    net: &NetworkModel,
    base: &VoltageSolution,
    cfg: &ScenarioConfig,
) -> Result<EmpiricalResult> {
    cfg.validate(net)?;
    let pcm = cfg.sampling_model(net)?;
    let n_act = cfg.actors.count();
    let factor = pcm.joint_factor(n_act)?;
    let opts = SolveOptions {
        tol: cfg.tol,
        max_iter: 200,
    };
    let kva = net.s_base_phase_kva();
    let (o, p) = (cfg.observation, cfg.phase.index());
    let n_chunks = cfg.samples.div_ceil(CHUNK);

    let chunks: Vec<(Vec<(f64, f64)>, usize)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(cfg.seed, c as u64);
            let len = CHUNK.min(cfg.samples - c * CHUNK);
            let mut out = Vec::with_capacity(len);
            let mut failed = 0;
            for _ in 0..len {
                let actors: Vec<usize> = match &cfg.actors {
                    ActorSet::Fixed(v) => v.clone(),
                    ActorSet::Random { count, candidates } => rand::seq::index::sample(&mut rng, candidates.len(), *count)
                        .into_iter()
                        .map(|i| candidates[i])
                        .collect(),
                };
                let draws = sample_joint(&pcm, &factor, &mut rng);
                let mut delta = LoadChange::zeros(net);
                for (&a, s) in actors.iter().zip(&draws) {
                    let template = PowerChangeVector::from_normalized(s, [1.0; 3]);
                    let real = cfg.wiring.realize(&template, net.phases(a));
                    for ph in net.phases(a).iter() {
                        let h = ph.index();
                        delta.add(a, ph, real.p[h] * kva, real.q[h] * kva);
                    }
                }
                match power_flow::voltage_change_oracle(net, base, &delta, &opts) {
                    Ok(dv) => {
                        let after = base.v[o][p] + dv[o][p];
                        out.push((dv[o][p].norm(), after.norm()));
                    }
                    Err(_) => failed += 1,
                }
            }
            (out, failed)
        })
        .collect();

    let failures: usize = chunks.iter().map(|c| c.1).sum();
    if failures as f64 > 0.01 * cfg.samples as f64 {
        return Err(Error::Numerical(format!(
            "{failures} of {} load flows failed (limit 1%)",
            cfg.samples
        )));
    }
    let (delta_v, future_v): (Vec<f64>, Vec<f64>) = chunks.into_iter().flat_map(|c| c.0).unzip();
    let delta_v_hist = Histogram::of_magnitudes(&delta_v, cfg.bins)?;
    let (vlo, vhi) = future_v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let pad = ((vhi - vlo) * 0.1).max(1e-9);
    let mut future_v_hist = Histogram::new(vlo - pad, vhi + pad, cfg.bins)?;
    future_v_hist.extend(&future_v);
    Ok(EmpiricalResult {
        delta_v,
        future_v,
        delta_v_hist,
        future_v_hist,
        failures,
    })
}
