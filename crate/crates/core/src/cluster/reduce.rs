use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::Points;
use crate::error::{AtemError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reducer {
    Pca,
    Identity,
}

/// Project points to `target_dim` coordinates.
///
/// `Pca` centres the data and projects onto the leading eigenvectors of the
/// covariance matrix (largest variance first; each eigenvector's largest
/// component is made positive so the output is reproducible). `Identity`
/// passes the data through and requires `target_dim == dim`.
pub fn reduce_dimensions(points: &Points, target_dim: usize, method: Reducer) -> Result<Points> {
    if target_dim == 0 {
        return Err(AtemError::InvalidParam("target_dim must be > 0".into()));
    }
    if target_dim > points.dim {
        return Err(AtemError::InvalidParam(format!(
            "target_dim {target_dim} exceeds input dim {}",
            points.dim
        )));
    }
    match method {
        Reducer::Identity => {
            if target_dim != points.dim {
                return Err(AtemError::InvalidParam("identity reduction needs target_dim == dim".into()));
            }
            Ok(points.clone())
        }
        Reducer::Pca => Ok(pca(points, target_dim)),
    }
}

fn pca(points: &Points, k: usize) -> Points {
    let n = points.len();
    let d = points.dim;
    if n == 0 {
        return Points::new(k, Vec::new());
    }
    let mut mean = vec![0f64; d];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(points.row(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| points.row(i)[j] - mean[j]);
    let cov = centered.transpose() * &centered / (n.max(2) - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut basis = DMatrix::zeros(d, k);
    for (c, &src) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(src).clone_owned();
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        basis.set_column(c, &v);
    }
    let projected = centered * basis;
    let mut data = Vec::with_capacity(n * k);
    for i in 0..n {
        for j in 0..k {
            data.push(projected[(i, j)]);
        }
    }
    Points::new(k, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::euclidean;
    use crate::seed;
    use rand::Rng;

    #[test]
    fn identity_returns_input() {
        let p = Points::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(reduce_dimensions(&p, 2, Reducer::Identity).unwrap(), p);
        assert!(reduce_dimensions(&p, 0, Reducer::Pca).is_err());
        assert!(reduce_dimensions(&p, 3, Reducer::Pca).is_err());
    }

    #[test]
    fn rank_one_data_reconstructs() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.3, i as f64 * 0.6]).collect();
        let p = Points::from_rows(&rows);
        let r = reduce_dimensions(&p, 1, Reducer::Pca).unwrap();
        // Rebuild along the unit direction (1,2)/sqrt5 and compare.
        let mean = [rows.iter().map(|r| r[0]).sum::<f64>() / 20.0, rows.iter().map(|r| r[1]).sum::<f64>() / 20.0];
        let u = [1.0 / 5f64.sqrt(), 2.0 / 5f64.sqrt()];
        let variance: f64 = rows.iter().map(|r| (r[0] - mean[0]).powi(2) + (r[1] - mean[1]).powi(2)).sum();
        let err: f64 = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let s = r.row(i)[0];
                (mean[0] + s * u[0] - row[0]).powi(2) + (mean[1] + s * u[1] - row[1]).powi(2)
            })
            .sum();
        assert!(err < 1e-6 * variance, "err {err}");
    }

    #[test]
    fn component_variance_is_non_increasing() {
        let mut rng = seed::rng(9);
        let scales = [0.5, 3.0, 1.0, 2.0, 0.1];
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| scales.iter().map(|s| s * rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let r = reduce_dimensions(&Points::from_rows(&rows), 5, Reducer::Pca).unwrap();
        let var: Vec<f64> = (0..5)
            .map(|j| (0..r.len()).map(|i| r.row(i)[j].powi(2)).sum::<f64>())
            .collect();
        for w in var.windows(2) {
            assert!(w[0] + 1e-9 >= w[1], "{var:?}");
        }
    }

    #[test]
    fn low_rank_data_keeps_distance_order() {
        let mut rng = seed::rng(4);
        // 2-D data embedded in 5-D by a fixed linear map.
        let map = [[1.0, 0.5, -0.3, 0.0, 2.0], [0.0, 1.0, 0.7, -1.2, 0.1]];
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let (a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                (0..5).map(|j| a * map[0][j] + b * map[1][j]).collect()
            })
            .collect();
        let p = Points::from_rows(&rows);
        let r = reduce_dimensions(&p, 2, Reducer::Pca).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let before = euclidean(p.row(i), p.row(j));
                let after = euclidean(r.row(i), r.row(j));
                assert!((before - after).abs() < 1e-8);
            }
        }
    }
}
