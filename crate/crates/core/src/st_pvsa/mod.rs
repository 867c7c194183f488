//! Moments of the voltage change at an observation phase when power changes
//! are Gaussian and actor locations are random, and the magnitude
//! distributions built on them.
//!
//! All quantities are per unit. A power change vector has six entries
//! `[P^a, P^b, P^c, Q^a, Q^b, Q^c] / |V|`, load convention.

mod distribution;

pub use distribution::{
    chi_square_params, future_voltage_distribution, magnitude_distribution, violation_probability,
    ChiSquareParams, ChiSquareVariant, MagnitudeDistribution, VARIANCE_FLOOR, ZERO_MEAN_TOL,
};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feeder::ImpedanceStats;

pub type Vec6 = [f64; 6];
pub type Mat6 = [[f64; 6]; 6];

/// Per-phase power fluctuation parameters in kW / kvar units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerParams {
    /// Variance of the real power change, kW^2.
    pub sigma_p2: [f64; 3],
    /// Variance of the reactive power change, kvar^2.
    pub sigma_q2: [f64; 3],
    /// Correlation of real power between two different actors.
    pub rho_p: [f64; 3],
    /// Correlation of reactive power between two different actors.
    pub rho_q: [f64; 3],
    /// Correlation of real and reactive power within one actor.
    pub rho_pq: [f64; 3],
}

impl PowerParams {
    /// Same parameters on all three phases.
    pub fn uniform(sigma_p2: f64, sigma_q2: f64, rho_p: f64, rho_q: f64, rho_pq: f64) -> Self {
        Self {
            sigma_p2: [sigma_p2; 3],
            sigma_q2: [sigma_q2; 3],
            rho_p: [rho_p; 3],
            rho_q: [rho_q; 3],
            rho_pq: [rho_pq; 3],
        }
    }

    /// Zero the variances of every phase except `keep`.
    pub fn only_phase(mut self, keep: crate::feeder::Phase) -> Self {
        for h in 0..3 {
            if h != keep.index() {
                self.sigma_p2[h] = 0.0;
                self.sigma_q2[h] = 0.0;
            }
        }
        self
    }

    fn validate(&self) -> Result<()> {
        for h in 0..3 {
            for (name, s) in [("sigma_p2", self.sigma_p2[h]), ("sigma_q2", self.sigma_q2[h])] {
                if !(s >= 0.0) || !s.is_finite() {
                    return Err(Error::InvalidArgument(format!("{name} must be a finite non-negative number")));
                }
            }
            for (name, r) in [("rho_p", self.rho_p[h]), ("rho_q", self.rho_q[h]), ("rho_pq", self.rho_pq[h])] {
                if !(-1.0..=1.0).contains(&r) {
                    return Err(Error::InvalidArgument(format!("{name} = {r} is outside [-1, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// How the real/reactive covariance between two different actors is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossPq {
    /// `rho_pq * sqrt(rho_p rho_q) * sigma_p sigma_q`: the value implied by a
    /// shared-component model, which keeps the joint covariance of any number
    /// of actors positive semidefinite.
    #[default]
    SharedComponent,
    /// `rho_pq * sigma_p sigma_q`, the within-actor value reused across actors.
    /// Can be indefinite for many actors.
    WithinActor,
}

/// Gaussian model of the normalized power change at one actor, plus the
/// covariance between two distinct actors.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerChangeModel {
    pub mu: Vec6,
    /// Covariance within one actor.
    pub sigma: Mat6,
    /// Covariance between the vectors of two different actors.
    pub cross: Mat6,
}

impl PowerChangeModel {
    /// Build from kW-unit parameters. `mean_kw` and `mean_kvar` are per phase,
    /// `s_base_phase_kva` converts to per unit and `vmag` normalizes.
    pub fn from_params(
        params: &PowerParams,
        mean_kw: [f64; 3],
        mean_kvar: [f64; 3],
        s_base_phase_kva: f64,
        vmag: [f64; 3],
        rule: CrossPq,
    ) -> Result<Self> {
        params.validate()?;
        if !(s_base_phase_kva > 0.0) || vmag.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument("base power and voltage magnitudes must be positive".into()));
        }
        let mut mu = [0.0; 6];
        let mut sigma = [[0.0; 6]; 6];
        let mut cross = [[0.0; 6]; 6];
        for h in 0..3 {
            let k = 1.0 / (s_base_phase_kva * vmag[h]);
            mu[h] = mean_kw[h] * k;
            mu[h + 3] = mean_kvar[h] * k;
            let sp = params.sigma_p2[h].sqrt() * k;
            let sq = params.sigma_q2[h].sqrt() * k;
            let (p, q) = (h, h + 3);
            sigma[p][p] = sp * sp;
            sigma[q][q] = sq * sq;
            sigma[p][q] = params.rho_pq[h] * sp * sq;
            sigma[q][p] = sigma[p][q];
            cross[p][p] = params.rho_p[h] * sp * sp;
            cross[q][q] = params.rho_q[h] * sq * sq;
            let rpq = match rule {
                CrossPq::WithinActor => params.rho_pq[h],
                CrossPq::SharedComponent => {
                    let (a, b) = (params.rho_p[h], params.rho_q[h]);
                    if a * b > 0.0 {
                        params.rho_pq[h] * a.signum() * (a * b).sqrt()
                    } else {
                        0.0
                    }
                }
            };
            cross[p][q] = rpq * sp * sq;
            cross[q][p] = cross[p][q];
        }
        Self::from_matrices(mu, sigma, cross)
    }

    /// Build directly from normalized per-unit moments.
    pub fn from_matrices(mu: Vec6, sigma: Mat6, cross: Mat6) -> Result<Self> {
        if mu.iter().chain(sigma.iter().flatten()).chain(cross.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite power change moments".into()));
        }
        for j in 0..6 {
            for k in 0..6 {
                let tol = 1e-12 * (sigma[j][j].abs() + sigma[k][k].abs()).max(f64::MIN_POSITIVE);
                if (sigma[j][k] - sigma[k][j]).abs() > tol || (cross[j][k] - cross[k][j]).abs() > tol {
                    return Err(Error::InvalidArgument("power change covariance is not symmetric".into()));
                }
            }
        }
        let sigma = crate::feeder::clip_psd(sigma)?;
        Ok(Self { mu, sigma, cross })
    }

    /// Same model with a different mean.
    pub fn with_mean(&self, mu: Vec6) -> Self {
        Self { mu, ..self.clone() }
    }

    /// Zero mean, zero variance.
    pub fn zero() -> Self {
        Self {
            mu: [0.0; 6],
            sigma: [[0.0; 6]; 6],
            cross: [[0.0; 6]; 6],
        }
    }

    /// Covariance of the stacked vectors of `n` actors.
    pub fn joint_covariance(&self, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(6 * n, 6 * n, |r, c| {
            let (a, j) = (r / 6, r % 6);
            let (b, k) = (c / 6, c % 6);
            if a == b {
                self.sigma[j][k]
            } else {
                self.cross[j][k]
            }
        })
    }

    /// Factor `L` with `L L^T` equal to the joint covariance of `n` actors.
    /// Fails when that covariance is indefinite.
    pub fn joint_factor(&self, n: usize) -> Result<DMatrix<f64>> {
        let c = self.joint_covariance(n);
        let scale = c.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return Ok(DMatrix::zeros(6 * n, 6 * n));
        }
        let eig = SymmetricEigen::new(c);
        let min = eig.eigenvalues.min();
        if min < -1e-9 * scale {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        Ok(eig.eigenvectors * DMatrix::from_diagonal(&d))
    }
}

/// First two moments of the real and imaginary voltage change, per unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageChangeMoments {
    pub mu_r: f64,
    pub mu_i: f64,
    pub var_r: f64,
    pub var_i: f64,
    /// Covariance of the real and imaginary parts.
    pub c: f64,
    pub n_actors: usize,
}

/// Covariances between the voltage changes caused by two different actors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CrossCovariance {
    pub rr: f64,
    pub ii: f64,
    /// Real part from one actor against imaginary part from the other.
    pub ri: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Real,
    Imag,
}

fn quad(a: &Vec6, m: &Mat6, b: &Vec6) -> f64 {
    let mut s = 0.0;
    for j in 0..6 {
        for k in 0..6 {
            s += a[j] * m[j][k] * b[k];
        }
    }
    s
}

fn trace_prod(a: &Mat6, b: &Mat6) -> f64 {
    let mut s = 0.0;
    for j in 0..6 {
        for k in 0..6 {
            s += a[j][k] * b[k][j];
        }
    }
    s
}

fn transpose(m: &Mat6) -> Mat6 {
    let mut t = [[0.0; 6]; 6];
    for j in 0..6 {
        for k in 0..6 {
            t[k][j] = m[j][k];
        }
    }
    t
}

/// Mean, variance and real/imaginary covariance of `z^T dS` for one actor
/// at a random location, with `z` independent of `dS`.
pub fn single_actor_moments(z: &ImpedanceStats, pcm: &PowerChangeModel) -> Result<VoltageChangeMoments> {
    let mu = &pcm.mu;
    let s = &pcm.sigma;
    let mu_r = crate::vsa::dot(&z.mu_zr, mu);
    let mu_i = crate::vsa::dot(&z.mu_zi, mu);
    let var_r = quad(&z.mu_zr, s, &z.mu_zr) + quad(mu, &z.cov_zr, mu) + trace_prod(&z.cov_zr, s);
    let var_i = quad(&z.mu_zi, s, &z.mu_zi) + quad(mu, &z.cov_zi, mu) + trace_prod(&z.cov_zi, s);
    // cov(z_r^T s, z_i^T s) with K = cov(z_r, z_i): mu_zr^T S mu_zi + mu^T K mu + tr(K^T S).
    let k = &z.cov_zr_zi;
    let c = quad(&z.mu_zr, s, &z.mu_zi) + quad(mu, k, mu) + trace_prod(&transpose(k), s);
    let out = VoltageChangeMoments {
        mu_r,
        mu_i,
        var_r: var_r.max(0.0),
        var_i: var_i.max(0.0),
        c,
        n_actors: 1,
    };
    check_moments(&out)?;
    Ok(out)
}

/// Real/imaginary covariance between the voltage changes of two different
/// actors: `mu_zr^T C mu_zi` with `C` the cross-actor power covariance.
pub fn real_imag_covariance(z: &ImpedanceStats, pcm: &PowerChangeModel) -> f64 {
    quad(&z.mu_zr, &pcm.cross, &z.mu_zi)
}

/// Covariance of the real (or imaginary) voltage change between two actors
/// drawn independently from the candidate set.
pub fn cross_actor_covariance(z: &ImpedanceStats, pcm: &PowerChangeModel, part: Part) -> f64 {
    match part {
        Part::Real => quad(&z.mu_zr, &pcm.cross, &z.mu_zr),
        Part::Imag => quad(&z.mu_zi, &pcm.cross, &z.mu_zi),
    }
}

/// All three cross-actor covariances.
pub fn cross_covariance(z: &ImpedanceStats, pcm: &PowerChangeModel) -> CrossCovariance {
    CrossCovariance {
        rr: cross_actor_covariance(z, pcm, Part::Real),
        ii: cross_actor_covariance(z, pcm, Part::Imag),
        ri: real_imag_covariance(z, pcm),
    }
}

/// Moments of the sum over `n` actors with identical pairwise covariance.
pub fn aggregate_moments(
    single: &VoltageChangeMoments,
    cross: &CrossCovariance,
    n: usize,
) -> Result<VoltageChangeMoments> {
    if n == 0 {
        return Err(Error::InvalidArgument("number of actors must be at least 1".into()));
    }
    let nf = n as f64;
    let pairs = nf * (nf - 1.0);
    let var_r = nf * single.var_r + pairs * cross.rr;
    let var_i = nf * single.var_i + pairs * cross.ii;
    let scale = nf * (single.var_r + single.var_i) + pairs * (cross.rr.abs() + cross.ii.abs());
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    if var_r < -tol || var_i < -tol {
        return Err(Error::Numerical(format!(
            "aggregate variance is negative (real {var_r:.3e}, imag {var_i:.3e}); the cross-actor correlations are inconsistent"
        )));
    }
    let out = VoltageChangeMoments {
        mu_r: nf * single.mu_r,
        mu_i: nf * single.mu_i,
        var_r: var_r.max(0.0),
        var_i: var_i.max(0.0),
        c: nf * single.c + pairs * cross.ri,
        n_actors: n * single.n_actors,
    };
    check_moments(&out)?;
    Ok(out)
}

/// Single-actor moments for `z`, aggregated over `n` actors.
pub fn voltage_change_moments(z: &ImpedanceStats, pcm: &PowerChangeModel, n: usize) -> Result<VoltageChangeMoments> {
    let single = single_actor_moments(z, pcm)?;
    aggregate_moments(&single, &cross_covariance(z, pcm), n)
}

fn check_moments(m: &VoltageChangeMoments) -> Result<()> {
    let bound = (m.var_r * m.var_i).sqrt();
    if !m.c.is_finite() || m.c.abs() > bound * (1.0 + 1e-9) + 1e-12 * (m.var_r + m.var_i) {
        return Err(Error::Numerical(format!(
            "real/imaginary covariance {:.3e} exceeds the product of deviations {bound:.3e}",
            m.c
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeder::{Phase, PhaseImpedanceMatrix};
    use crate::vsa::ZVectors;
    use num_complex::Complex64;

    const S3: f64 = 1.732_050_807_568_877_2;

    fn fixed_stats(z: &PhaseImpedanceMatrix) -> ImpedanceStats {
        let v = ZVectors::from_shared(z, Phase::A);
        let mut mu_r = [[0.0; 3]; 3];
        let mut mu_x = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                mu_r[i][j] = z.0[i][j].re;
                mu_x[i][j] = z.0[i][j].im;
            }
        }
        ImpedanceStats {
            mu_zr: v.r,
            mu_zi: v.i,
            cov_zr: [[0.0; 6]; 6],
            cov_zi: [[0.0; 6]; 6],
            cov_zr_zi: [[0.0; 6]; 6],
            mu_r,
            mu_x,
            rho_rx: 0.0,
            n_candidates: 1,
        }
    }

    fn sample_z() -> PhaseImpedanceMatrix {
        let c = Complex64::new;
        PhaseImpedanceMatrix([
            [c(0.031, 0.052), c(0.011, 0.024), c(0.009, 0.019)],
            [c(0.011, 0.024), c(0.029, 0.050), c(0.010, 0.021)],
            [c(0.009, 0.019), c(0.010, 0.021), c(0.030, 0.051)],
        ])
    }

    fn params() -> PowerParams {
        PowerParams {
            sigma_p2: [5.0, 3.0, 4.0],
            sigma_q2: [0.5, 0.7, 0.4],
            rho_p: [0.2, 0.3, 0.25],
            rho_q: [0.2, 0.1, 0.15],
            rho_pq: [-0.5, 0.4, -0.3],
        }
    }

    #[test]
    fn zero_mean_power_gives_zero_mean_voltage() {
        let z = fixed_stats(&sample_z());
        let pcm = PowerChangeModel::from_params(&params(), [0.0; 3], [0.0; 3], 1.0, [1.0; 3], CrossPq::default()).unwrap();
        let m = single_actor_moments(&z, &pcm).unwrap();
        assert_eq!((m.mu_r, m.mu_i), (0.0, 0.0));
    }

    #[test]
    fn deterministic_power_leaves_only_impedance_variance() {
        let net = crate::feeder::ieee::ieee37().unwrap();
        let o = net.index_of("709").unwrap();
        let z = crate::feeder::path_statistics(&net, o, Phase::A, &net.non_source_nodes(), Default::default()).unwrap();
        let mu = [0.01, -0.02, 0.005, 0.003, 0.0, -0.001];
        let pcm = PowerChangeModel::from_matrices(mu, [[0.0; 6]; 6], [[0.0; 6]; 6]).unwrap();
        let m = single_actor_moments(&z, &pcm).unwrap();
        assert!((m.var_r - quad(&mu, &z.cov_zr, &mu)).abs() < 1e-18);
        assert!((m.var_i - quad(&mu, &z.cov_zi, &mu)).abs() < 1e-18);
    }

    // The nine-term real/imaginary expression written out term by term.
    fn written_real_imag(z: &ImpedanceStats, p: &PowerParams) -> f64 {
        let (r, x) = (&z.mu_r, &z.mu_x);
        let (rab, xab, rac, xac) = (r[0][1], x[0][1], r[0][2], x[0][2]);
        let c43 = S3 / 4.0;
        p.rho_p[0] * p.sigma_p2[0] * r[0][0] * x[0][0] - p.rho_q[0] * p.sigma_q2[0] * r[0][0] * x[0][0]
            + p.rho_p[1] * p.sigma_p2[1] * (c43 * rab * rab - 0.5 * rab * xab - c43 * xab * xab)
            + p.rho_p[2] * p.sigma_p2[2] * (-c43 * rac * rac - 0.5 * rac * xac + c43 * xac * xac)
            + p.rho_q[1] * p.sigma_q2[1] * (-c43 * rab * rab + 0.5 * rab * xab + c43 * xab * xab)
            + p.rho_q[2] * p.sigma_q2[2] * (c43 * rac * rac + 0.5 * rac * xac - c43 * xac * xac)
            + p.rho_pq[0] * (p.sigma_p2[0] * p.sigma_q2[0]).sqrt() * (-r[0][0] * r[0][0] + x[0][0] * x[0][0])
            + p.rho_pq[1] * (p.sigma_p2[1] * p.sigma_q2[1]).sqrt() * (0.5 * rab * rab + S3 * rab * xab - 0.5 * xab * xab)
            + p.rho_pq[2] * (p.sigma_p2[2] * p.sigma_q2[2]).sqrt() * (0.5 * rac * rac - S3 * rac * xac - 0.5 * xac * xac)
    }

    #[test]
    fn real_imag_covariance_matches_written_expansion() {
        let z = fixed_stats(&sample_z());
        let p = params();
        let pcm = PowerChangeModel::from_params(&p, [0.0; 3], [0.0; 3], 1.0, [1.0; 3], CrossPq::WithinActor).unwrap();
        let got = real_imag_covariance(&z, &pcm);
        let want = written_real_imag(&z, &p);
        assert!((got - want).abs() < 1e-13 * want.abs(), "{got} {want}");
    }

    #[test]
    fn real_imag_phase_a_only() {
        let z = fixed_stats(&sample_z());
        let p = PowerParams {
            sigma_p2: [5.0, 0.0, 0.0],
            sigma_q2: [0.5, 0.0, 0.0],
            rho_p: [0.2; 3],
            rho_q: [0.3; 3],
            rho_pq: [0.0; 3],
        };
        let v = 1.02;
        let pcm = PowerChangeModel::from_params(&p, [0.0; 3], [0.0; 3], 1.0, [v; 3], CrossPq::default()).unwrap();
        let (r, x) = (z.mu_r[0][0], z.mu_x[0][0]);
        let want = (0.2 * 5.0 - 0.3 * 0.5) * r * x / (v * v);
        assert!((real_imag_covariance(&z, &pcm) - want).abs() < 1e-15);
    }

    // Real-part cross-actor expansion with the real/reactive terms removed.
    fn written_cross_real(z: &ImpedanceStats, p: &PowerParams) -> f64 {
        let (r, x) = (&z.mu_r, &z.mu_x);
        let (rab, xab, rac, xac) = (r[0][1], x[0][1], r[0][2], x[0][2]);
        let c86 = S3 / 2.0;
        p.rho_p[0] * p.sigma_p2[0] * r[0][0] * r[0][0]
            + p.rho_q[0] * p.sigma_q2[0] * x[0][0] * x[0][0]
            + p.rho_p[1] * p.sigma_p2[1] * (0.25 * rab * rab - c86 * rab * xab + 0.75 * xab * xab)
            + p.rho_p[2] * p.sigma_p2[2] * (0.25 * rac * rac + c86 * rac * xac + 0.75 * xac * xac)
            + p.rho_q[1] * p.sigma_q2[1] * (0.75 * rab * rab + c86 * rab * xab + 0.25 * xab * xab)
            + p.rho_q[2] * p.sigma_q2[2] * (0.75 * rac * rac - c86 * rac * xac + 0.25 * xac * xac)
    }

    #[test]
    fn cross_real_matches_written_expansion_without_pq_terms() {
        let z = fixed_stats(&sample_z());
        let mut p = params();
        p.rho_pq = [0.0; 3];
        let pcm = PowerChangeModel::from_params(&p, [0.0; 3], [0.0; 3], 1.0, [1.0; 3], CrossPq::default()).unwrap();
        let got = cross_actor_covariance(&z, &pcm, Part::Real);
        let want = written_cross_real(&z, &p);
        assert!((got - want).abs() < 1e-13 * want.abs(), "{got} {want}");
    }

    #[test]
    fn cross_real_phase_a_only() {
        let z = fixed_stats(&sample_z());
        let p = PowerParams {
            sigma_p2: [5.0, 0.0, 0.0],
            sigma_q2: [0.5, 0.0, 0.0],
            rho_p: [0.2; 3],
            rho_q: [0.0; 3],
            rho_pq: [0.0; 3],
        };
        let pcm = PowerChangeModel::from_params(&p, [0.0; 3], [0.0; 3], 1.0, [0.98; 3], CrossPq::default()).unwrap();
        let want = 0.2 * 5.0 * z.mu_r[0][0].powi(2) / (0.98 * 0.98);
        assert!((cross_actor_covariance(&z, &pcm, Part::Real) - want).abs() < 1e-15);
    }

    #[test]
    fn uncorrelated_actors_have_zero_cross_terms() {
        let z = fixed_stats(&sample_z());
        let mut p = params();
        p.rho_p = [0.0; 3];
        p.rho_q = [0.0; 3];
        let pcm = PowerChangeModel::from_params(&p, [0.0; 3], [0.0; 3], 1.0, [1.0; 3], CrossPq::default()).unwrap();
        assert_eq!(cross_covariance(&z, &pcm), CrossCovariance::default());
    }

    #[test]
    fn aggregation_identities() {
        let m = VoltageChangeMoments {
            mu_r: 0.1,
            mu_i: -0.2,
            var_r: 0.3,
            var_i: 0.4,
            c: 0.05,
            n_actors: 1,
        };
        assert_eq!(aggregate_moments(&m, &CrossCovariance { rr: 0.01, ii: 0.02, ri: 0.003 }, 1).unwrap(), m);
        let a = aggregate_moments(&m, &CrossCovariance::default(), 7).unwrap();
        assert!((a.var_r - 7.0 * 0.3).abs() < 1e-15 && (a.var_i - 7.0 * 0.4).abs() < 1e-15);
        let cross = CrossCovariance { rr: 0.01, ii: 0.02, ri: 0.003 };
        let b = aggregate_moments(&m, &cross, 9).unwrap();
        assert!((b.var_r - (9.0 * 0.3 + 72.0 * 0.01)).abs() < 1e-14);
        assert!((b.c - (9.0 * 0.05 + 72.0 * 0.003)).abs() < 1e-14);
        assert!((b.mu_i + 1.8).abs() < 1e-15);
        assert!(aggregate_moments(&m, &cross, 0).is_err());
    }

    #[test]
    fn negative_aggregate_variance_is_reported() {
        let m = VoltageChangeMoments {
            mu_r: 0.0,
            mu_i: 0.0,
            var_r: 1.0,
            var_i: 1.0,
            c: 0.0,
            n_actors: 1,
        };
        let err = aggregate_moments(&m, &CrossCovariance { rr: -0.5, ii: 0.0, ri: 0.0 }, 5).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn within_actor_rule_is_indefinite_for_many_actors() {
        let p = PowerParams::uniform(5.0, 0.5, 0.2, 0.2, -0.5).only_phase(Phase::A);
        let lit = PowerChangeModel::from_params(&p, [0.0; 3], [0.0; 3], 1.0, [1.0; 3], CrossPq::WithinActor).unwrap();
        assert!(matches!(lit.joint_factor(9), Err(Error::NotPsd { .. })));
        let shared = PowerChangeModel::from_params(&p, [0.0; 3], [0.0; 3], 1.0, [1.0; 3], CrossPq::SharedComponent).unwrap();
        assert!(shared.joint_factor(9).is_ok());
    }

    #[test]
    fn out_of_range_correlation_is_rejected() {
        let mut p = params();
        p.rho_pq[1] = 1.5;
        assert!(PowerChangeModel::from_params(&p, [0.0; 3], [0.0; 3], 1.0, [1.0; 3], CrossPq::default()).is_err());
    }

    #[test]
    fn joint_factor_reproduces_covariance() {
        let pcm = PowerChangeModel::from_params(&params(), [0.0; 3], [0.0; 3], 1.0, [1.0; 3], CrossPq::default()).unwrap();
        let l = pcm.joint_factor(3).unwrap();
        let c = &l * l.transpose();
        assert!((c - pcm.joint_covariance(3)).abs().max() < 1e-12);
    }
}
