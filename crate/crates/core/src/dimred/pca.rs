use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math::sqrt;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Orthonormal components, strongest first.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns `(eigenvalues, eigenvectors as columns of a row-major d x d)`.
pub(crate) fn jacobi_eigen(mut a: Vec<f64>, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j] * a[i * d + j])
            .sum();
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..d).map(|i| a[i * d + i]).collect(), v)
}

/// Top-`k` principal components of the covariance of `x`.
///
/// Each component's sign is fixed so that its largest-magnitude entry is
/// positive.
pub fn pca_fit(x: &Matrix, k: usize) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if k == 0 || k > d {
        return Err(Error::config(alloc::format!("PCA needs 1 <= k <= {d}, got {k}")));
    }
    if n == 0 {
        return Err(Error::precondition("PCA needs at least one row"));
    }
    let mean = x.column_means();
    let mut cov = vec![0.0; d * d];
    for row in x.iter_rows() {
        for i in 0..d {
            let ci = row[i] - mean[i];
            for j in i..d {
                cov[i * d + j] += ci * (row[j] - mean[j]);
            }
        }
    }
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= denom;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    let (values, vectors) = jacobi_eigen(cov, d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();

    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &c in order.iter().take(k) {
        let mut comp: Vec<f64> = (0..d).map(|r| vectors[r * d + c]).collect();
        let pivot = comp
            .iter()
            .copied()
            .fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            comp.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(comp);
        explained_variance.push(values[c].max(0.0));
    }
    let explained_variance_ratio = explained_variance
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        explained_variance_ratio,
    })
}

impl PcaModel {
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        let d = self.mean.len();
        if x.cols() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: x.cols(),
            });
        }
        let k = self.components.len();
        let mut out = Matrix::zeros(x.rows(), k);
        let mut centered = vec![0.0; d];
        for (i, row) in x.iter_rows().enumerate() {
            for j in 0..d {
                centered[j] = row[j] - self.mean[j];
            }
            for (c, comp) in self.components.iter().enumerate() {
                out.set(i, c, crate::math::dot(&centered, comp));
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, z: &Matrix) -> Result<Matrix> {
        let k = self.components.len();
        if z.cols() != k {
            return Err(Error::Dimension {
                expected: k,
                actual: z.cols(),
            });
        }
        let d = self.mean.len();
        let mut out = Matrix::zeros(z.rows(), d);
        for (i, row) in z.iter_rows().enumerate() {
            let o = out.row_mut(i);
            o.copy_from_slice(&self.mean);
            for (c, comp) in self.components.iter().enumerate() {
                for j in 0..d {
                    o[j] += row[c] * comp[j];
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn collinear_points() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [5.0, 5.0]]).unwrap();
        let p = pca_fit(&x, 1).unwrap();
        let h = 1.0 / sqrt(2.0);
        assert!((p.components[0][0] - h).abs() < 1e-12);
        assert!((p.components[0][1] - h).abs() < 1e-12);
        assert!((p.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_matches_closed_form_eigenvalues() {
        let mut r = rng::seeded(5);
        let rows: Vec<[f64; 2]> = (0..10_000)
            .map(|_| [r.sample(StandardNormal), r.sample(StandardNormal)])
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = pca_fit(&x, 2).unwrap();

        // independent route: closed-form eigenvalues of the 2x2 sample covariance
        let m = x.column_means();
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for row in &rows {
            let (dx, dy) = (row[0] - m[0], row[1] - m[1]);
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        let nm1 = (rows.len() - 1) as f64;
        let (sxx, syy, sxy) = (sxx / nm1, syy / nm1, sxy / nm1);
        let tr = sxx + syy;
        let disc = sqrt((sxx - syy) * (sxx - syy) / 4.0 + sxy * sxy);
        let (l1, l2) = (tr / 2.0 + disc, tr / 2.0 - disc);
        assert!((p.explained_variance[0] - l1).abs() < 1e-9);
        assert!((p.explained_variance[1] - l2).abs() < 1e-9);
        assert!((p.explained_variance_ratio[0] - 0.5).abs() < 0.03);
        assert!((p.explained_variance_ratio[1] - 0.5).abs() < 0.03);
    }

    #[test]
    fn full_rank_round_trip() {
        let mut r = rng::seeded(9);
        let rows: Vec<[f64; 4]> = (0..50)
            .map(|_| core::array::from_fn(|_| r.random_range(-3.0..3.0)))
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = pca_fit(&x, 4).unwrap();
        let back = p.inverse_transform(&p.transform(&x).unwrap()).unwrap();
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() < 1e-8);
        }
        // orthonormal, non-increasing ratios
        for i in 0..4 {
            for j in 0..4 {
                let dp = crate::math::dot(&p.components[i], &p.components[j]);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dp - expected).abs() < 1e-8);
            }
        }
        assert!(p.explained_variance_ratio.windows(2).all(|w| w[0] >= w[1]));
        assert!(p.explained_variance_ratio.iter().sum::<f64>() <= 1.0 + 1e-9);
    }

    #[test]
    fn k_above_d_is_rejected() {
        let x = Matrix::from_rows(&[[0.0, 1.0]]).unwrap();
        assert!(pca_fit(&x, 3).is_err());
    }
}
