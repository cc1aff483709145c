use nalgebra::{DMatrix, SymmetricEigen};

use super::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Projects rows onto the top two principal components.
///
/// Columns are ordered by descending eigenvalue. Each component's sign is
/// fixed so that its largest-magnitude loading is positive, which makes the
/// output reproducible across runs.
pub fn project_2d(e: &EmbeddingMatrix) -> Result<Matrix> {
    let (n, d) = (e.rows(), e.dim());
    if n < 2 {
        return Err(Error::invalid("projection needs at least 2 rows"));
    }
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(e.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| e.row(i)[j] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut out = Matrix::zeros(n, 2);
    for (col, &k) in order.iter().take(2).enumerate() {
        let mut axis: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let pivot = axis
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        for i in 0..n {
            out[(i, col)] = centered.row(i).iter().zip(&axis).map(|(x, a)| x * a).sum();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EntityKind;

    fn emb(rows: &[Vec<f64>]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(EntityKind::Service, Matrix::from_rows(rows).unwrap()).unwrap()
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn full_basis_preserves_distances() {
        let rows = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let p = project_2d(&emb(&rows)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((dist(&rows[i], &rows[j]) - dist(p.row(i), p.row(j))).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn collinear_points_have_flat_second_axis() {
        let dir = [1.0, -2.0, 0.5, 3.0, 0.0, 1.0, -1.0, 2.0];
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|t| dir.iter().map(|d| 0.3 + d * t as f64).collect())
            .collect();
        let p = project_2d(&emb(&rows)).unwrap();
        for i in 0..6 {
            assert!(p[(i, 1)].abs() < 1e-9, "{}", p[(i, 1)]);
        }
    }

    #[test]
    fn antipodal_points_are_symmetric() {
        let p = project_2d(&emb(&[vec![2.0, 3.0, 1.0], vec![-2.0, -3.0, -1.0]])).unwrap();
        assert!((p[(0, 0)] + p[(1, 0)]).abs() < 1e-12);
        assert!((p[(0, 1)] + p[(1, 1)]).abs() < 1e-12);
        assert!(project_2d(&emb(&[vec![1.0, 2.0]])).is_err());
    }
}
