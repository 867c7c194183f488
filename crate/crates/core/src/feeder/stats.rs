//! Statistics of shared-path impedance over a set of candidate actor nodes.

use nalgebra::{Matrix6, SymmetricEigen};

use super::{NetworkModel, Phase};
use crate::error::{Error, Result};
use crate::vsa::{ActorWiring, ZVectors};

/// Moments of the sensitivity vectors when the actor is drawn uniformly
/// from a candidate set. All impedances are per unit.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ImpedanceStats {
    pub mu_zr: [f64; 6],
    pub mu_zi: [f64; 6],
    pub cov_zr: [[f64; 6]; 6],
    pub cov_zi: [[f64; 6]; 6],
    /// Cross-covariance, `cov_zr_zi[j][k] = cov(z_r[j], z_i[k])`.
    pub cov_zr_zi: [[f64; 6]; 6],
    /// Mean shared-path resistance per phase pair.
    pub mu_r: [[f64; 3]; 3],
    /// Mean shared-path reactance per phase pair.
    pub mu_x: [[f64; 3]; 3],
    /// Correlation of the self resistance and reactance of the observed phase.
    pub rho_rx: f64,
    pub n_candidates: usize,
}

/// Build per-candidate sensitivity vectors for `o`/`phase` and return their
/// means and (population) covariances over `candidates`.
pub fn path_statistics(
    net: &NetworkModel,
    o: usize,
    phase: Phase,
    candidates: &[usize],
    wiring: ActorWiring,
) -> Result<ImpedanceStats> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate set".into()));
    }
    if o >= net.len() {
        return Err(Error::UnknownNode(format!("#{o}")));
    }
    let n = candidates.len() as f64;
    let mut zs = Vec::with_capacity(candidates.len());
    let mut rx = Vec::with_capacity(candidates.len());
    let mut mu_r = [[0.0; 3]; 3];
    let mut mu_x = [[0.0; 3]; 3];
    for &a in candidates {
        let z = net.shared_path_impedance_pu(o, a)?;
        let p = phase.index();
        rx.push((z.0[p][p].re, z.0[p][p].im));
        for i in 0..3 {
            for j in 0..3 {
                mu_r[i][j] += z.0[i][j].re / n;
                mu_x[i][j] += z.0[i][j].im / n;
            }
        }
        zs.push(wiring.effective(&ZVectors::from_shared(&z, phase), net.phases(a)));
    }

    let mean = |f: &dyn Fn(&ZVectors) -> [f64; 6]| {
        let mut m = [0.0; 6];
        for z in &zs {
            for (acc, v) in m.iter_mut().zip(f(z)) {
                *acc += v / n;
            }
        }
        m
    };
    let mu_zr = mean(&|z| z.r);
    let mu_zi = mean(&|z| z.i);

    let cov = |x: &dyn Fn(&ZVectors) -> [f64; 6], mx: &[f64; 6], y: &dyn Fn(&ZVectors) -> [f64; 6], my: &[f64; 6]| {
        let mut c = [[0.0; 6]; 6];
        for z in &zs {
            let (a, b) = (x(z), y(z));
            for j in 0..6 {
                for k in 0..6 {
                    c[j][k] += (a[j] - mx[j]) * (b[k] - my[k]) / n;
                }
            }
        }
        c
    };
    let cov_zr = clip_psd(cov(&|z| z.r, &mu_zr, &|z| z.r, &mu_zr))?;
    let cov_zi = clip_psd(cov(&|z| z.i, &mu_zi, &|z| z.i, &mu_zi))?;
    let cov_zr_zi = cov(&|z| z.r, &mu_zr, &|z| z.i, &mu_zi);

    let (mr, mx) = rx
        .iter()
        .fold((0.0, 0.0), |(a, b), (r, x)| (a + r / n, b + x / n));
    let (mut srr, mut sxx, mut srx) = (0.0, 0.0, 0.0);
    for (r, x) in &rx {
        srr += (r - mr) * (r - mr);
        sxx += (x - mx) * (x - mx);
        srx += (r - mr) * (x - mx);
    }
    let rho_rx = if srr > 0.0 && sxx > 0.0 {
        (srx / (srr * sxx).sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    };

    Ok(ImpedanceStats {
        mu_zr,
        mu_zi,
        cov_zr,
        cov_zi,
        cov_zr_zi,
        mu_r,
        mu_x,
        rho_rx,
        n_candidates: candidates.len(),
    })
}

/// Symmetrize and clip small negative eigenvalues of a covariance matrix.
/// Eigenvalues below `-1e-9 * trace` are reported as an error.
pub(crate) fn clip_psd(c: [[f64; 6]; 6]) -> Result<[[f64; 6]; 6]> {
    let m = Matrix6::from_fn(|i, j| 0.5 * (c[i][j] + c[j][i]));
    let trace = m.trace();
    let eig = SymmetricEigen::new(m);
    let min = eig.eigenvalues.min();
    if min >= 0.0 {
        return Ok(to_array(&m));
    }
    if min < -1e-9 * trace.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let repaired = eig.eigenvectors * Matrix6::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    Ok(to_array(&repaired))
}

fn to_array(m: &Matrix6<f64>) -> [[f64; 6]; 6] {
    let mut out = [[0.0; 6]; 6];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeder::ieee;

    #[test]
    fn single_candidate_has_zero_covariance() {
        let net = ieee::ieee37().unwrap();
        let o = net.index_of("709").unwrap();
        let a = net.index_of("741").unwrap();
        let s = path_statistics(&net, o, Phase::A, &[a], ActorWiring::PerPhase).unwrap();
        assert!(s.cov_zr.iter().flatten().all(|&v| v == 0.0));
        assert!(s.cov_zi.iter().flatten().all(|&v| v == 0.0));
        let z = ZVectors::from_shared(&net.shared_path_impedance_pu(o, a).unwrap(), Phase::A);
        assert_eq!(s.mu_zr, z.r);
    }

    #[test]
    fn empty_candidates_is_an_error() {
        let net = ieee::ieee37().unwrap();
        assert!(path_statistics(&net, 1, Phase::A, &[], ActorWiring::PerPhase).is_err());
    }

    #[test]
    fn means_match_direct_averaging() {
        let net = ieee::ieee123().unwrap();
        let o = net.index_of("83").unwrap();
        let cands = net.non_source_nodes();
        let s = path_statistics(&net, o, Phase::B, &cands, ActorWiring::Balanced).unwrap();
        // Oracle: plain accumulation of each candidate's vectors.
        let mut sum = [0.0; 6];
        for &a in &cands {
            let zv = crate::vsa::z_vectors(&net, o, a, Phase::B).unwrap();
            let eff = ActorWiring::Balanced.effective(&zv, net.phases(a));
            for j in 0..6 {
                sum[j] += eff.i[j];
            }
        }
        for j in 0..6 {
            let want = sum[j] / cands.len() as f64;
            assert!((s.mu_zi[j] - want).abs() <= 1e-14 * want.abs().max(1e-6));
        }
    }

    #[test]
    fn ordering_does_not_change_statistics() {
        let net = ieee::ieee37().unwrap();
        let o = net.index_of("736").unwrap();
        let mut cands = net.non_source_nodes();
        let a = path_statistics(&net, o, Phase::C, &cands, ActorWiring::PerPhase).unwrap();
        cands.reverse();
        cands.rotate_left(7);
        let b = path_statistics(&net, o, Phase::C, &cands, ActorWiring::PerPhase).unwrap();
        for j in 0..6 {
            assert!((a.mu_zr[j] - b.mu_zr[j]).abs() < 1e-15);
            for k in 0..6 {
                assert!((a.cov_zr[j][k] - b.cov_zr[j][k]).abs() < 1e-15);
                assert!((a.cov_zi[j][k] - b.cov_zi[j][k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn clip_rejects_clearly_indefinite() {
        let mut c = [[0.0; 6]; 6];
        c[0][0] = 1.0;
        c[1][1] = -0.5;
        assert!(matches!(clip_psd(c), Err(Error::NotPsd { .. })));
        c[1][1] = -1e-14;
        let fixed = clip_psd(c).unwrap();
        assert!(fixed[1][1].abs() < 1e-13);
    }
}
