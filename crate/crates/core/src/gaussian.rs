//! Exact simulation of the Gaussian limit processes on finite time grids.
//!
//! Grids are small (tens of points) and neither the sub-fractional motion nor
//! its companion has stationary increments, so plain Cholesky factorization of
//! the covariance matrix is the right tool; no circulant embedding tricks.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::theory::CovarianceModel;

/// A limit process frozen on a time grid: covariance kernel, grid, and cached
/// lower-triangular factor.
#[derive(Debug, Clone)]
pub struct GaussianPathModel {
    cov: CovarianceModel,
    grid: Vec<f64>,
    /// Row-major lower-triangular factor with `factor * factor^T = K`.
    factor: Vec<f64>,
    jitter_used: f64,
}

/// Assemble the covariance matrix and factor it, escalating diagonal jitter
/// `(0, 1e-12, 1e-10) * trace/n` until the factorization succeeds.
pub fn build_model(cov: CovarianceModel, grid: &[f64]) -> Result<GaussianPathModel> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] < 0.0 {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: "time grid must be nonnegative and strictly increasing".into(),
        });
    }
    let n = grid.len();
    let mut matrix = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            matrix[i * n + j] = cov.eval(grid[i], grid[j]);
        }
    }
    let trace: f64 = (0..n).map(|i| matrix[i * n + i]).sum();
    let scale = (trace / n as f64).max(f64::MIN_POSITIVE);
    let mut worst = 0.0;
    for jitter_factor in [0.0, 1e-12, 1e-10] {
        let jitter = jitter_factor * scale;
        match cholesky_psd(&matrix, n, jitter, scale) {
            Ok(factor) => {
                return Ok(GaussianPathModel {
                    cov,
                    grid: grid.to_vec(),
                    factor,
                    jitter_used: jitter,
                })
            }
            Err(pivot) => worst = pivot,
        }
    }
    Err(Error::IndefiniteCovariance { kernel: cov.name().to_string(), n, pivot: worst })
}

/// PSD-tolerant Cholesky: pivots within noise of zero produce zero columns
/// (degenerate kernels sample constant paths); genuinely negative pivots fail
/// with the offending value.
fn cholesky_psd(
    matrix: &[f64],
    n: usize,
    jitter: f64,
    scale: f64,
) -> std::result::Result<Vec<f64>, f64> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = matrix[i * n + j];
            if i == j {
                sum += jitter;
            }
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum > 1e-14 * scale {
                    l[i * n + i] = sum.sqrt();
                } else if sum > -1e-10 * scale {
                    l[i * n + i] = 0.0;
                } else {
                    return Err(sum);
                }
            } else if l[j * n + j] > 0.0 {
                l[i * n + j] = sum / l[j * n + j];
            } else {
                l[i * n + j] = 0.0;
            }
        }
    }
    Ok(l)
}

impl GaussianPathModel {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn cov(&self) -> &CovarianceModel {
        &self.cov
    }

    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    /// Relative Frobenius error of `factor factor^T` against the kernel matrix.
    pub fn reconstruction_error(&self) -> f64 {
        let n = self.grid.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut rec = 0.0;
                for k in 0..=i.min(j) {
                    rec += self.factor[i * n + k] * self.factor[j * n + k];
                }
                let k_ij = self.cov.eval(self.grid[i], self.grid[j]);
                num += (rec - k_ij) * (rec - k_ij);
                den += k_ij * k_ij;
            }
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    /// `count` independent centered Gaussian paths with the model covariance;
    /// one row per path.
    pub fn sample_paths<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let n = self.grid.len();
        let mut out = Vec::with_capacity(count);
        let mut z = vec![0.0; n];
        for _ in 0..count {
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            let mut row = vec![0.0; n];
            for i in 0..n {
                let mut acc = 0.0;
                for k in 0..=i {
                    acc += self.factor[i * n + k] * z[k];
                }
                row[i] = acc;
            }
            out.push(row);
        }
        out
    }
}

/// Paths of the mixture `sqrt(E theta) zeta^H + sqrt(Var theta) theta^H` with
/// independent component draws.
pub fn sample_xi<R: Rng + ?Sized>(
    e_theta: f64,
    var_theta: f64,
    h: f64,
    grid: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if e_theta < 0.0 || var_theta < 0.0 {
        return Err(Error::InvalidParameter {
            name: "theta_moments",
            reason: "moment weights must be nonnegative".into(),
        });
    }
    let sub = build_model(CovarianceModel::SubFbm { h }, grid)?;
    let comp = build_model(CovarianceModel::ThetaProc { h }, grid)?;
    let (ws, wc) = (e_theta.sqrt(), var_theta.sqrt());
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let a = sub.sample_paths(1, rng).pop().unwrap();
        let b = comp.sample_paths(1, rng).pop().unwrap();
        out.push(a.iter().zip(&b).map(|(x, y)| ws * x + wc * y).collect());
    }
    Ok(out)
}

/// CSV export, one row per path.
pub fn paths_to_csv(grid: &[f64], paths: &[Vec<f64>]) -> String {
    let mut s = String::new();
    s.push_str("path");
    for t in grid {
        s.push_str(&format!(",t={t}"));
    }
    s.push('\n');
    for (i, p) in paths.iter().enumerate() {
        s.push_str(&i.to_string());
        for v in p {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use crate::theory::subfbm_cov;

    #[test]
    fn brownian_member_factors_without_jitter() {
        let grid = [0.5, 1.0, 1.5, 2.0];
        let m = build_model(CovarianceModel::SubFbm { h: 0.5 }, &grid).unwrap();
        assert_eq!(m.jitter_used(), 0.0);
        // H = 1/2: matrix is [min(t_i, t_j)].
        assert!(m.reconstruction_error() < 1e-12);
    }

    #[test]
    fn degenerate_kernel_samples_zero_paths() {
        let grid = [0.5, 1.0, 2.0];
        let m = build_model(CovarianceModel::ThetaProc { h: 0.5 }, &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in m.sample_paths(10, &mut rng) {
            assert!(p.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn subfbm_matrix_entries_match_kernel() {
        // Independent recomputation of the kernel on the documented grid.
        let grid = [0.5, 1.0, 1.5, 2.0];
        let h = 5.0 / 6.0;
        let m = build_model(CovarianceModel::SubFbm { h }, &grid).unwrap();
        assert!(m.reconstruction_error() < 1e-10);
        let p = 2.0 * h;
        for (i, &s) in grid.iter().enumerate() {
            for (j, &t) in grid.iter().enumerate() {
                let direct =
                    s.powf(p) + t.powf(p) - 0.5 * ((s + t).powf(p) + (s - t).abs().powf(p));
                let mut rec = 0.0;
                for k in 0..=i.min(j) {
                    rec += m.factor()[i * 4 + k] * m.factor()[j * 4 + k];
                }
                assert_abs_diff_eq!(rec, direct, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn sampled_variance_matches_kernel() {
        let grid = [0.25, 0.75, 1.5];
        let h = 0.75;
        let m = build_model(CovarianceModel::SubFbm { h }, &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 60_000;
        let paths = m.sample_paths(n, &mut rng);
        for (k, &t) in grid.iter().enumerate() {
            let mean: f64 = paths.iter().map(|p| p[k]).sum::<f64>() / n as f64;
            let var: f64 =
                paths.iter().map(|p| (p[k] - mean) * (p[k] - mean)).sum::<f64>() / (n - 1) as f64;
            let expect = subfbm_cov(h, t, t);
            let se = expect * (2.0 / n as f64).sqrt();
            assert!((var - expect).abs() < 4.0 * se, "var {var} vs {expect}");
        }
    }

    #[test]
    fn xi_collapses_when_var_is_zero() {
        let grid = [1.0, 2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let paths = sample_xi(4.0, 0.0, 0.75, &grid, 2_000, &mut rng).unwrap();
        // Variance at t: 4 * C^H(t,t).
        let var: f64 = paths.iter().map(|p| p[0] * p[0]).sum::<f64>() / 2_000.0;
        let expect = 4.0 * subfbm_cov(0.75, 1.0, 1.0);
        assert_relative_eq!(var, expect, max_relative = 0.15);
    }

    #[test]
    fn grid_validation() {
        assert!(build_model(CovarianceModel::SubFbm { h: 0.7 }, &[]).is_err());
        assert!(build_model(CovarianceModel::SubFbm { h: 0.7 }, &[1.0, 1.0]).is_err());
        assert!(build_model(CovarianceModel::SubFbm { h: 0.7 }, &[-1.0, 1.0]).is_err());
    }
}
