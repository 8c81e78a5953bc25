use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Diagonal ridge added to every fitted covariance.
pub const COV_RIDGE: f64 = 1e-6;

/// Mean and (unbiased, ridge-stabilized) covariance of `N x D` row features.
#[derive(Debug, Clone)]
pub struct GaussianFit {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub n: usize,
}

pub fn fit_gaussian(features: &[Vec<f64>]) -> Result<GaussianFit> {
    if features.len() < 2 {
        return Err(Error::Metric(format!("need at least 2 samples, got {}", features.len())));
    }
    let d = features[0].len();
    if d == 0 || features.iter().any(|f| f.len() != d) {
        return Err(Error::Metric("feature rows have inconsistent dimension".into()));
    }
    let n = features.len();
    let mut mean = DVector::zeros(d);
    for f in features {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    mean /= n as f64;
    let mut centered = DMatrix::zeros(n, d);
    for (i, f) in features.iter().enumerate() {
        for j in 0..d {
            centered[(i, j)] = f[j] - mean[j];
        }
    }
    let mut cov = centered.transpose() * &centered / (n - 1) as f64;
    for j in 0..d {
        cov[(j, j)] += COV_RIDGE;
    }
    Ok(GaussianFit { mean, cov, n })
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric PSD square root with negative eigenvalues clamped to zero.
pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// `|mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2))`.
///
/// The cross term uses `tr((S1^(1/2) S2 S1^(1/2))^(1/2))`, which equals the
/// trace of `(S1 S2)^(1/2)` and only needs symmetric eigendecompositions.
pub fn frechet_distance(a: &GaussianFit, b: &GaussianFit) -> Result<f64> {
    if a.mean.len() != b.mean.len() {
        return Err(Error::ShapeMismatch {
            expected: a.mean.len(),
            got: b.mean.len(),
        });
    }
    let diff = (&a.mean - &b.mean).norm_squared();
    let root_a = sqrt_psd(&a.cov);
    let inner = symmetrize(&(&root_a * &b.cov * &root_a));
    let cross: f64 = SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .sum();
    Ok((diff + a.cov.trace() + b.cov.trace() - 2.0 * cross).max(0.0))
}

/// Fréchet distance between Gaussians fitted to two feature sets.
pub fn fid(features_real: &[Vec<f64>], features_gen: &[Vec<f64>]) -> Result<f64> {
    frechet_distance(&fit_gaussian(features_real)?, &fit_gaussian(features_gen)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_root_squares_back() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let r = sqrt_psd(&m);
        assert!((&r * &r - &m).abs().max() < 1e-12);
    }

    #[test]
    fn diagonal_closed_form() {
        // Exact Gaussians: build fits directly.
        let a = GaussianFit {
            mean: DVector::from_vec(vec![0.0, 1.0]),
            cov: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
            n: 10,
        };
        let b = GaussianFit {
            mean: DVector::from_vec(vec![2.0, 1.0]),
            cov: DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 1.0])),
            n: 10,
        };
        // 4 + (1-3)^2 + (2-1)^2
        assert!((frechet_distance(&a, &b).unwrap() - 9.0).abs() < 1e-10);
        assert!(frechet_distance(&a, &a).unwrap() < 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(fid(&[vec![1.0]], &[vec![1.0], vec![2.0]]).is_err());
        assert!(fid(&[vec![1.0], vec![2.0]], &[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    }
}
