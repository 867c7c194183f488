use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::VoltageChangeMoments;
use crate::error::{Error, Result};
use crate::special::{i0e, i1e, integrate, invert_monotone, marcum_q1_pair, ncx2_cdf, ncx2_pdf, ncx2_sf, reg_gamma_p, reg_gamma_q};

/// Floor applied to variances, pu^2.
pub const VARIANCE_FLOOR: f64 = 1e-15;

/// Means below this magnitude (pu) select the zero-mean branch.
pub const ZERO_MEAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiSquareVariant {
    /// Parameters that reproduce the mean and variance of the two-term sum.
    #[default]
    MomentMatched,
    /// The historical closed forms, whose `w` and `v` denominators are not
    /// symmetric in the real and imaginary terms. Kept for comparison.
    Alternative,
}

/// Scale `lambda`, noncentrality `w` and degrees of freedom `v` of the
/// approximation `|dV|^2 ~ lambda * chi2_v(w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareParams {
    pub lambda: f64,
    pub w: f64,
    pub v: f64,
}

/// Match `var_r chi2_1(mu_r^2/var_r) + var_i chi2_1(mu_i^2/var_i)` with a
/// single scaled noncentral chi-square.
pub fn chi_square_params(m: &VoltageChangeMoments, variant: ChiSquareVariant) -> Result<ChiSquareParams> {
    if !(m.var_r > 0.0 || m.var_i > 0.0) {
        return Err(Error::Numerical("both variances are zero".into()));
    }
    let sr = m.var_r.max(VARIANCE_FLOOR);
    let si = m.var_i.max(VARIANCE_FLOOR);
    let dr = m.mu_r * m.mu_r / sr;
    let di = m.mu_i * m.mu_i / si;
    let (lambda, w, v) = match variant {
        ChiSquareVariant::MomentMatched => {
            let a1 = sr * (1.0 + 2.0 * dr) + si * (1.0 + 2.0 * di);
            let a2 = sr * sr * (1.0 + 2.0 * dr) + si * si * (1.0 + 2.0 * di);
            let lambda = a2 / a1;
            (lambda, (sr * dr + si * di) / lambda, (sr + si) / lambda)
        }
        ChiSquareVariant::Alternative => {
            let lambda = (sr * sr * (1.0 + 2.0 * dr) + si * si * (1.0 + 2.0 * di))
                / (sr * (1.0 + 2.0 * dr) + si * (1.0 + 2.0 * di));
            let mid = sr + si + 2.0 * sr * dr + 2.0 * si * di;
            let w = (sr * dr + si * di) * mid / (sr * sr + si * si + 2.0 * sr * sr * dr + 2.0 * sr * sr * di);
            let v = (sr + si) * mid / (sr + si + 2.0 * sr * sr * dr + 2.0 * si * si * di);
            (lambda, w, v)
        }
    };
    if !(lambda > 0.0) || !(w >= 0.0) || !(v > 0.0) || !lambda.is_finite() || !w.is_finite() || !v.is_finite() {
        return Err(Error::Numerical(format!("invalid chi-square parameters ({lambda}, {w}, {v})")));
    }
    Ok(ChiSquareParams { lambda, w, v })
}

/// Distribution of a voltage (change) magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MagnitudeDistribution {
    /// `|nu + sigma (N1 + j N2)|` with `nu = k sigma`.
    Rician { k: f64, sigma: f64 },
    /// Square root of a gamma variable with shape `m` and mean `omega^2`.
    Nakagami { m: f64, omega: f64 },
    /// Square root of `lambda * chi2_v(w)`.
    ScaledNcChiSquare { lambda: f64, w: f64, v: f64 },
}

impl MagnitudeDistribution {
    pub fn rician(k: f64, sigma: f64) -> Result<Self> {
        if !(k >= 0.0 && sigma > 0.0) || !k.is_finite() || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid Rician parameters k = {k}, sigma = {sigma}")));
        }
        Ok(Self::Rician { k, sigma })
    }

    pub fn nakagami(m: f64, omega: f64) -> Result<Self> {
        if !(m > 0.0 && omega > 0.0) || !m.is_finite() || !omega.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid Nakagami parameters m = {m}, omega = {omega}")));
        }
        Ok(Self::Nakagami { m, omega })
    }

    pub fn scaled_nc_chi_square(p: ChiSquareParams) -> Result<Self> {
        if !(p.lambda > 0.0 && p.w >= 0.0 && p.v > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid chi-square parameters {p:?}")));
        }
        Ok(Self::ScaledNcChiSquare {
            lambda: p.lambda,
            w: p.w,
            v: p.v,
        })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match *self {
            Self::Rician { k, sigma } => {
                let nu = k * sigma;
                let s2 = sigma * sigma;
                x / s2 * (-(x - nu) * (x - nu) / (2.0 * s2)).exp() * i0e(x * nu / s2)
            }
            Self::Nakagami { m, omega } => {
                let o2 = omega * omega;
                if x == 0.0 {
                    return if m < 0.5 { f64::INFINITY } else if m == 0.5 { (2.0 / (std::f64::consts::PI * o2)).sqrt() } else { 0.0 };
                }
                (std::f64::consts::LN_2 + m * (m / o2).ln() - ln_gamma(m) + (2.0 * m - 1.0) * x.ln() - m * x * x / o2).exp()
            }
            Self::ScaledNcChiSquare { lambda, w, v } => 2.0 * x / lambda * ncx2_pdf(x * x / lambda, v, w),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Rician { k, sigma } => marcum_q1_pair(k, x / sigma).0,
            Self::Nakagami { m, omega } => reg_gamma_p(m, m * x * x / (omega * omega)),
            Self::ScaledNcChiSquare { lambda, w, v } => ncx2_cdf(x * x / lambda, v, w),
        }
    }

    /// `1 - cdf(x)`, evaluated directly for accuracy in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match *self {
            Self::Rician { k, sigma } => marcum_q1_pair(k, x / sigma).1,
            Self::Nakagami { m, omega } => reg_gamma_q(m, m * x * x / (omega * omega)),
            Self::ScaledNcChiSquare { lambda, w, v } => ncx2_sf(x * x / lambda, v, w),
        }
    }

    /// `E[X^2]`.
    pub fn second_moment(&self) -> f64 {
        match *self {
            Self::Rician { k, sigma } => sigma * sigma * (2.0 + k * k),
            Self::Nakagami { omega, .. } => omega * omega,
            Self::ScaledNcChiSquare { lambda, w, v } => lambda * (v + w),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Rician { k, sigma } => {
                let t = k * k / 2.0;
                sigma * (std::f64::consts::PI / 2.0).sqrt() * ((1.0 + t) * i0e(t / 2.0) + t * i1e(t / 2.0))
            }
            Self::Nakagami { m, omega } => (ln_gamma(m + 0.5) - ln_gamma(m)).exp() * omega / m.sqrt(),
            Self::ScaledNcChiSquare { .. } => {
                let hi = self.quantile(1.0 - 1e-14);
                integrate(|x| self.sf(x), 0.0, hi, 0.0, 1e-12)
            }
        }
    }

    /// Smallest `x` with `cdf(x) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        let rms = self.second_moment().sqrt();
        if p > 0.5 {
            // Bisect on the survival function to keep precision near 1.
            let q = 1.0 - p;
            invert_monotone(|x| -self.sf(x), -q, 0.0, 2.0 * rms)
        } else {
            invert_monotone(|x| self.cdf(x), p, 0.0, 2.0 * rms)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Rician { k, sigma } => {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                ((k + a) * (k + a) + b * b).sqrt() * sigma
            }
            Self::Nakagami { m, omega } => {
                let g = Gamma::new(m, omega * omega / m).expect("validated parameters");
                g.sample(rng).sqrt()
            }
            Self::ScaledNcChiSquare { lambda, w, v } => {
                let j = if w > 0.0 {
                    Poisson::new(w / 2.0).expect("validated parameters").sample(rng)
                } else {
                    0.0
                };
                let g = Gamma::new(v / 2.0 + j, 2.0).expect("validated parameters");
                (lambda * g.sample(rng)).sqrt()
            }
        }
    }

    /// Draw a complex Gaussian with the given moments and return its modulus.
    /// Used to check the magnitude approximations.
    pub fn sample_complex_gaussian<R: Rng + ?Sized>(m: &VoltageChangeMoments, rng: &mut R) -> f64 {
        let sr = m.var_r.max(0.0).sqrt();
        let si = m.var_i.max(0.0).sqrt();
        let rho = if sr > 0.0 && si > 0.0 { (m.c / (sr * si)).clamp(-1.0, 1.0) } else { 0.0 };
        let n = Normal::new(0.0, 1.0).expect("unit normal");
        let a = n.sample(rng);
        let b = n.sample(rng);
        let re = m.mu_r + sr * a;
        let im = m.mu_i + si * (rho * a + (1.0 - rho * rho).sqrt() * b);
        Complex64::new(re, im).norm()
    }
}

/// Magnitude distribution of a voltage change with moments `m`: Nakagami
/// for a zero mean, Rician otherwise.
pub fn magnitude_distribution(m: &VoltageChangeMoments) -> Result<MagnitudeDistribution> {
    if !(m.var_r > 0.0 || m.var_i > 0.0) {
        return Err(Error::Numerical("degenerate voltage change variance".into()));
    }
    if m.mu_r.abs() <= ZERO_MEAN_TOL && m.mu_i.abs() <= ZERO_MEAN_TOL {
        let sr = m.var_r.max(VARIANCE_FLOOR);
        let si = m.var_i.max(VARIANCE_FLOOR);
        let theta = 2.0 * (sr * sr + si * si + 2.0 * m.c * m.c) / (sr + si);
        let shape = (sr + si) / theta;
        return MagnitudeDistribution::nakagami(shape, (shape * theta).sqrt());
    }
    rician_from(m)
}

fn rician_from(m: &VoltageChangeMoments) -> Result<MagnitudeDistribution> {
    let p = chi_square_params(m, ChiSquareVariant::MomentMatched)?;
    MagnitudeDistribution::rician(p.w.sqrt(), p.lambda.sqrt())
}

/// Distribution of the future voltage magnitude: base voltage (in the frame
/// of the observed phase) shifted by the voltage change moments.
pub fn future_voltage_distribution(base_v: Complex64, m: &VoltageChangeMoments) -> Result<MagnitudeDistribution> {
    if !base_v.re.is_finite() || !base_v.im.is_finite() {
        return Err(Error::InvalidArgument("non-finite base voltage".into()));
    }
    let shifted = VoltageChangeMoments {
        mu_r: base_v.re + m.mu_r,
        mu_i: base_v.im + m.mu_i,
        var_r: m.var_r.max(VARIANCE_FLOOR),
        var_i: m.var_i.max(VARIANCE_FLOOR),
        ..*m
    };
    rician_from(&shifted)
}

/// Probability of falling outside `[v_min, v_max]`.
pub fn violation_probability(d: &MagnitudeDistribution, limits: (f64, f64)) -> Result<f64> {
    let (lo, hi) = limits;
    if !(lo < hi) || lo.is_nan() || hi.is_nan() {
        return Err(Error::InvalidArgument(format!("invalid voltage limits ({lo}, {hi})")));
    }
    Ok((d.cdf(lo) + d.sf(hi)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(mu_r: f64, mu_i: f64, var_r: f64, var_i: f64, c: f64) -> VoltageChangeMoments {
        VoltageChangeMoments {
            mu_r,
            mu_i,
            var_r,
            var_i,
            c,
            n_actors: 1,
        }
    }

    #[test]
    fn central_equal_variances_give_two_dof() {
        let p = chi_square_params(&moments(0.0, 0.0, 0.3, 0.3, 0.0), ChiSquareVariant::MomentMatched).unwrap();
        assert!((p.lambda - 0.3).abs() < 1e-15 && p.w == 0.0 && (p.v - 2.0).abs() < 1e-15);
        // The historical v collapses to var_r + var_i instead of 2.
        let q = chi_square_params(&moments(0.0, 0.0, 0.3, 0.3, 0.0), ChiSquareVariant::Alternative).unwrap();
        assert!((q.lambda - 0.3).abs() < 1e-15 && q.w == 0.0 && (q.v - 0.6).abs() < 1e-15);
    }

    #[test]
    fn single_term_limit() {
        let m = moments(0.2, 0.0, 0.04, 0.0, 0.0);
        let p = chi_square_params(&m, ChiSquareVariant::MomentMatched).unwrap();
        assert!((p.lambda - 0.04).abs() < 1e-12);
        assert!((p.w - 0.2 * 0.2 / 0.04).abs() < 1e-9);
    }

    #[test]
    fn alternative_variant_differs_once_means_are_nonzero() {
        let m = moments(0.02, 0.01, 4e-4, 1e-4, 0.0);
        let a = chi_square_params(&m, ChiSquareVariant::MomentMatched).unwrap();
        let b = chi_square_params(&m, ChiSquareVariant::Alternative).unwrap();
        assert_eq!(a.lambda, b.lambda);
        assert!((a.v - b.v).abs() > 1e-3);
    }

    #[test]
    fn degenerate_moments_are_rejected() {
        assert!(chi_square_params(&moments(0.1, 0.0, 0.0, 0.0, 0.0), ChiSquareVariant::default()).is_err());
        assert!(magnitude_distribution(&moments(0.0, 0.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn rayleigh_special_case() {
        let s2 = 0.01;
        let d = magnitude_distribution(&moments(0.0, 0.0, s2, s2, 0.0)).unwrap();
        let MagnitudeDistribution::Nakagami { m, omega } = d else { panic!("{d:?}") };
        assert!((m - 1.0).abs() < 1e-15);
        assert!((omega - (2.0 * s2).sqrt()).abs() < 1e-15);
        // Rayleigh cdf 1 - exp(-x^2 / (2 s^2)).
        for x in [0.05, 0.1, 0.3] {
            assert!((d.cdf(x) - (1.0 - (-x * x / (2.0 * s2)).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn rician_with_two_dof_equals_chi_square_form() {
        let r = MagnitudeDistribution::rician(1.7, 0.3).unwrap();
        let c = MagnitudeDistribution::ScaledNcChiSquare {
            lambda: 0.09,
            w: 1.7 * 1.7,
            v: 2.0,
        };
        for x in [0.1, 0.4, 0.6, 1.0, 1.5] {
            assert!((r.cdf(x) - c.cdf(x)).abs() < 1e-12, "{x}");
            assert!((r.pdf(x) - c.pdf(x)).abs() < 1e-11 * r.pdf(x).max(1.0), "{x}");
        }
        assert!((r.mean() - c.mean()).abs() < 1e-9);
    }

    #[test]
    fn densities_integrate_to_one() {
        let ds = [
            MagnitudeDistribution::rician(0.0, 0.2).unwrap(),
            MagnitudeDistribution::rician(3.5, 0.01).unwrap(),
            MagnitudeDistribution::rician(250.0, 0.004).unwrap(),
            MagnitudeDistribution::nakagami(0.7, 0.03).unwrap(),
            MagnitudeDistribution::nakagami(4.0, 1.1).unwrap(),
            MagnitudeDistribution::ScaledNcChiSquare { lambda: 0.02, w: 3.0, v: 1.6 },
        ];
        for d in ds {
            let hi = d.quantile(1.0 - 1e-10);
            let total = integrate(|x| d.pdf(x), 0.0, hi, 0.0, 1e-12);
            assert!((total - 1.0).abs() < 1e-8, "{d:?} {total}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = MagnitudeDistribution::rician(2.0, 0.5).unwrap();
        for p in [1e-6, 0.1, 0.5, 0.9, 1.0 - 1e-9] {
            let x = d.quantile(p);
            let back = if p > 0.5 { 1.0 - d.sf(x) } else { d.cdf(x) };
            assert!((back - p).abs() < 1e-9 * p.max(1e-3), "{p} {back}");
        }
    }

    #[test]
    fn sample_means_match_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ds = [
            MagnitudeDistribution::rician(1.3, 0.2).unwrap(),
            MagnitudeDistribution::nakagami(1.8, 0.5).unwrap(),
            MagnitudeDistribution::ScaledNcChiSquare { lambda: 0.5, w: 2.0, v: 3.0 },
        ];
        let n = 200_000;
        for d in ds {
            let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - d.mean()).abs() < 4.0 * se, "{d:?} {mean} {}", d.mean());
        }
    }

    #[test]
    fn point_mass_future_voltage() {
        let zero = moments(0.0, 0.0, 0.0, 0.0, 0.0);
        let d = future_voltage_distribution(Complex64::new(1.0, 0.0), &zero).unwrap();
        assert!(d.cdf(1.0 - 1e-6) < 1e-6);
        assert!(d.cdf(1.0 + 1e-6) > 1.0 - 1e-6);
        assert_eq!(violation_probability(&d, (0.95, 1.05)).unwrap(), 0.0);
    }

    #[test]
    fn high_snr_mean_tracks_shift() {
        let m = moments(0.012, -0.003, 2e-6, 1e-6, 0.0);
        let d = future_voltage_distribution(Complex64::new(1.0, -0.01), &m).unwrap();
        assert!((d.mean() - (1.0 + 0.012)).abs() < 1e-3);
    }

    #[test]
    fn violation_probability_matches_quadrature() {
        let m = moments(0.03, 0.004, 4e-4, 2e-4, 5e-5);
        let d = future_voltage_distribution(Complex64::new(1.02, -0.02), &m).unwrap();
        let (lo, hi) = (0.95, 1.05);
        let p = violation_probability(&d, (lo, hi)).unwrap();
        let inside = integrate(|x| d.pdf(x), lo, hi, 0.0, 1e-13);
        assert!((p - (1.0 - inside)).abs() < 1e-6, "{p} {inside}");
        assert_eq!(violation_probability(&d, (0.0, f64::INFINITY)).unwrap(), 0.0);
        assert!(violation_probability(&d, (1.1, 0.9)).is_err());
    }
}
