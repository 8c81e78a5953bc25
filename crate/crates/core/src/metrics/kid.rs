use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subset-averaged unbiased MMD^2 and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KidEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_subsets: usize,
}

fn kernel(x: &[f64], y: &[f64]) -> f64 {
    let d = x.len() as f64;
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (dot / d + 1.0).powi(3)
}

/// Unbiased MMD^2 between two equal-size samples under the cubic
/// polynomial kernel `(x.y / D + 1)^3`.
pub fn mmd2_unbiased(x: &[&[f64]], y: &[&[f64]]) -> f64 {
    let m = x.len();
    let mut kxx = 0.0;
    let mut kyy = 0.0;
    let mut kxy = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                kxx += kernel(x[i], x[j]);
                kyy += kernel(y[i], y[j]);
            }
            kxy += kernel(x[i], y[j]);
        }
    }
    let mf = m as f64;
    (kxx + kyy) / (mf * (mf - 1.0)) - 2.0 * kxy / (mf * mf)
}

/// Kernel inception distance over `n_subsets` random subsets of size
/// `subset_size`.
///
/// When both sets are large enough, the real and generated subsets use
/// disjoint index sets, so passing the same features twice gives an
/// unbiased zero-centered estimate.
pub fn kid(
    features_real: &[Vec<f64>],
    features_gen: &[Vec<f64>],
    subset_size: usize,
    n_subsets: usize,
    seed: u64,
) -> Result<KidEstimate> {
    let (n, m) = (features_real.len(), features_gen.len());
    if subset_size < 2 || subset_size > n.min(m) {
        return Err(Error::Metric(format!(
            "subset size {subset_size} must be in [2, {}]",
            n.min(m)
        )));
    }
    if n_subsets == 0 {
        return Err(Error::Metric("at least one subset is required".into()));
    }
    let d = features_real[0].len();
    if features_real.iter().chain(features_gen).any(|f| f.len() != d) {
        return Err(Error::Metric("feature rows have inconsistent dimension".into()));
    }
    let shared = n.min(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..n_subsets)
        .map(|_| {
            let (xi, yi): (Vec<usize>, Vec<usize>) = if 2 * subset_size <= shared {
                let idx = sample(&mut rng, shared, 2 * subset_size).into_vec();
                (idx[..subset_size].to_vec(), idx[subset_size..].to_vec())
            } else {
                (
                    sample(&mut rng, n, subset_size).into_vec(),
                    sample(&mut rng, m, subset_size).into_vec(),
                )
            };
            let x: Vec<&[f64]> = xi.iter().map(|&i| features_real[i].as_slice()).collect();
            let y: Vec<&[f64]> = yi.iter().map(|&i| features_gen[i].as_slice()).collect();
            mmd2_unbiased(&x, &y)
        })
        .collect();
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let stderr = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt() / k.sqrt()
    } else {
        0.0
    };
    Ok(KidEstimate {
        mean,
        stderr,
        n_subsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_value() {
        assert_eq!(kernel(&[1.0, 1.0], &[2.0, 0.0]), 8.0);
    }

    #[test]
    fn separated_samples_give_positive_mmd() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 / 50.0) - 0.5]).collect();
        let y: Vec<Vec<f64>> = x.iter().map(|v| vec![v[0] + 5.0]).collect();
        let k = kid(&x, &y, 20, 10, 1).unwrap();
        assert!(k.mean > 1.0);
        assert_eq!(k, kid(&x, &y, 20, 10, 1).unwrap());
    }

    #[test]
    fn subset_size_validated() {
        let x = vec![vec![0.0]; 5];
        assert!(kid(&x, &x, 6, 3, 0).is_err());
        assert!(kid(&x, &x, 1, 3, 0).is_err());
    }
}
