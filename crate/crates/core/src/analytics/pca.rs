//! PCA projection via cyclic Jacobi rotations on the column-centered
//! covariance. Dependency-free and deterministic; adequate for the dimension
//! counts embedding diagnostics see at desk scale.

use super::{AnalyticsError, EmbeddingMatrix};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct PcaOutput<T> {
    /// N×out_dim projections of the centered rows.
    pub projections: Vec<Vec<T>>,
    /// Top out_dim eigenvalues of the sample covariance, descending.
    pub eigenvalues: Vec<T>,
    /// Per-component fraction of total variance (zero vector when the data
    /// has no variance at all).
    pub explained: Vec<T>,
    /// Trace of the covariance = sum of all its eigenvalues.
    pub total_variance: T,
    /// out_dim×d principal axes; each axis's largest-magnitude entry is
    /// positive (sign convention).
    pub components: Vec<Vec<T>>,
    /// Kept eigenvalues that are numerically zero: rank deficiency reached
    /// inside the requested components.
    pub zero_eigenvalues: usize,
    /// Jacobi sweeps used.
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 100;

/// Projects rows onto the top `out_dim` principal axes.
pub fn pca_project<T: Real>(
    x: &EmbeddingMatrix<T>,
    out_dim: usize,
) -> Result<PcaOutput<T>, AnalyticsError> {
    let n = x.nrows();
    let d = x.dim();
    if n < 2 {
        return Err(AnalyticsError::TooFewRows { rows: n });
    }
    if out_dim == 0 || out_dim > d {
        return Err(AnalyticsError::OutDimTooLarge { out_dim, limit: d });
    }

    let means = x.column_means();
    // Sample covariance (n - 1 denominator), built column-by-column.
    let denom = T::from_usize(n - 1).unwrap();
    let mut cov = vec![T::zero(); d * d];
    for i in 0..n {
        let row = x.row(i);
        for a in 0..d {
            let xa = row[a] - means[a];
            for b in a..d {
                cov[a * d + b] += xa * (row[b] - means[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / denom;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    let total_variance = (0..d).map(|i| cov[i * d + i]).sum::<T>();

    let (mut eigenvalues, mut vectors, sweeps) = jacobi_eigen(cov, d);

    // Descending eigenvalue order; stable under ties.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eigenvalues[j].partial_cmp(&eigenvalues[i]).unwrap());
    eigenvalues = order.iter().map(|&i| eigenvalues[i]).collect();
    vectors = reorder_columns(&vectors, d, &order);

    // Sign convention: largest-magnitude entry of each axis is positive.
    for c in 0..d {
        let mut arg = 0;
        for r in 1..d {
            if vectors[r * d + c].abs() > vectors[arg * d + c].abs() {
                arg = r;
            }
        }
        if vectors[arg * d + c] < T::zero() {
            for r in 0..d {
                vectors[r * d + c] = -vectors[r * d + c];
            }
        }
    }

    let components: Vec<Vec<T>> = (0..out_dim)
        .map(|c| (0..d).map(|r| vectors[r * d + c]).collect())
        .collect();

    let mut projections = Vec::with_capacity(n);
    for i in 0..n {
        let row = x.row(i);
        let proj: Vec<T> = components
            .iter()
            .map(|axis| {
                let mut acc = T::zero();
                for a in 0..d {
                    acc += (row[a] - means[a]) * axis[a];
                }
                acc
            })
            .collect();
        projections.push(proj);
    }

    let kept: Vec<T> = eigenvalues[..out_dim].to_vec();
    let explained: Vec<T> = if total_variance > T::zero() {
        kept.iter().map(|&e| e / total_variance).collect()
    } else {
        vec![T::zero(); out_dim]
    };
    let zero_tol = T::of(1e-12) * total_variance.max(T::one());
    let zero_eigenvalues = kept.iter().filter(|&&e| e.abs() <= zero_tol).count();

    Ok(PcaOutput {
        projections,
        eigenvalues: kept,
        explained,
        total_variance,
        components,
        zero_eigenvalues,
        sweeps,
    })
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major d×d).
/// Returns (eigenvalues, eigenvector matrix with eigenvectors as columns,
/// sweeps used). Converged when the off-diagonal Frobenius norm drops below
/// 1e-10, capped at 100 sweeps.
fn jacobi_eigen<T: Real>(mut a: Vec<T>, d: usize) -> (Vec<T>, Vec<T>, usize) {
    let mut v = vec![T::zero(); d * d];
    for i in 0..d {
        v[i * d + i] = T::one();
    }
    let tol = T::of(1e-10);
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && off_frobenius(&a, d) >= tol {
        sweeps += 1;
        for p in 0..d.saturating_sub(1) {
            for q in p + 1..d {
                rotate(&mut a, &mut v, d, p, q);
            }
        }
    }
    let eigenvalues = (0..d).map(|i| a[i * d + i]).collect();
    (eigenvalues, v, sweeps)
}

fn off_frobenius<T: Real>(a: &[T], d: usize) -> T {
    let mut acc = T::zero();
    for p in 0..d {
        for q in 0..d {
            if p != q {
                acc += a[p * d + q] * a[p * d + q];
            }
        }
    }
    acc.sqrt()
}

/// One Jacobi rotation zeroing a[p][q], accumulated into the eigenvector
/// matrix.
fn rotate<T: Real>(a: &mut [T], v: &mut [T], d: usize, p: usize, q: usize) {
    let apq = a[p * d + q];
    if apq == T::zero() {
        return;
    }
    let app = a[p * d + p];
    let aqq = a[q * d + q];
    let theta = (aqq - app) / (T::of(2.0) * apq);
    // Asymptotic form once theta^2 would lose all precision (or overflow in
    // f32); relative error is O(theta^-2).
    let t = if theta.abs() > T::of(1e12) {
        (T::of(2.0) * theta).recip()
    } else if theta >= T::zero() {
        (theta + (theta * theta + T::one()).sqrt()).recip()
    } else {
        (theta - (theta * theta + T::one()).sqrt()).recip()
    };
    let c = (t * t + T::one()).sqrt().recip();
    let s = t * c;

    for r in 0..d {
        if r == p || r == q {
            continue;
        }
        let arp = a[r * d + p];
        let arq = a[r * d + q];
        let nrp = c * arp - s * arq;
        let nrq = s * arp + c * arq;
        a[r * d + p] = nrp;
        a[p * d + r] = nrp;
        a[r * d + q] = nrq;
        a[q * d + r] = nrq;
    }
    a[p * d + p] = app - t * apq;
    a[q * d + q] = aqq + t * apq;
    a[p * d + q] = T::zero();
    a[q * d + p] = T::zero();

    for r in 0..d {
        let vrp = v[r * d + p];
        let vrq = v[r * d + q];
        v[r * d + p] = c * vrp - s * vrq;
        v[r * d + q] = s * vrp + c * vrq;
    }
}

fn reorder_columns<T: Real>(m: &[T], d: usize, order: &[usize]) -> Vec<T> {
    let mut out = vec![T::zero(); d * d];
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..d {
            out[r * d + new_c] = m[r * d + old_c];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn matrix(rows: Vec<Vec<f64>>) -> EmbeddingMatrix<f64> {
        let ids = (0..rows.len()).map(|i| format!("e{i}")).collect();
        EmbeddingMatrix::from_rows(ids, rows).unwrap()
    }

    fn random_matrix(n: usize, d: usize, seed: u64) -> EmbeddingMatrix<f64> {
        let mut rng = crate::seeds::rng(seed, "pca-test", 0);
        matrix((0..n).map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect())
    }

    #[test]
    fn collinear_fixture_projects_to_sqrt_two() {
        let x = matrix(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]);
        let out = pca_project(&x, 1).unwrap();
        let sqrt2 = 2f64.sqrt();
        let expected = [-sqrt2, 0.0, sqrt2];
        for (p, e) in out.projections.iter().zip(expected) {
            assert!((p[0] - e).abs() < 1e-12, "{p:?} vs {e}");
        }
        assert!((out.explained[0] - 1.0).abs() < 1e-12);
        assert!((out.eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!((out.total_variance - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_rows_have_zero_variance_and_zero_projections() {
        let x = matrix(vec![vec![3.0, -1.0], vec![3.0, -1.0], vec![3.0, -1.0]]);
        let out = pca_project(&x, 2).unwrap();
        assert_eq!(out.total_variance, 0.0);
        assert!(out.projections.iter().flatten().all(|&p| p == 0.0));
        assert_eq!(out.explained, vec![0.0, 0.0]);
        assert_eq!(out.zero_eigenvalues, 2);
    }

    #[test]
    fn full_rank_explained_variance_sums_to_total() {
        for seed in 0..10 {
            let x = random_matrix(12, 4, seed);
            let out = pca_project(&x, 4).unwrap();
            let sum: f64 = out.eigenvalues.iter().sum();
            assert!(
                (sum - out.total_variance).abs() <= 1e-9 * out.total_variance.max(1.0),
                "seed {seed}: {sum} vs {}",
                out.total_variance
            );
            let explained: f64 = out.explained.iter().sum();
            assert!((explained - 1.0).abs() <= 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn eigenvalues_descend_and_components_are_orthonormal() {
        let x = random_matrix(20, 5, 3);
        let out = pca_project(&x, 5).unwrap();
        for w in out.eigenvalues.windows(2) {
            assert!(w[0] >= w[1] - 1e-12, "{:?}", out.eigenvalues);
        }
        for i in 0..5 {
            for j in 0..5 {
                let dot: f64 =
                    out.components[i].iter().zip(&out.components[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9, "components {i},{j}: {dot}");
            }
        }
    }

    #[test]
    fn sign_convention_largest_entry_positive() {
        for seed in 0..20 {
            let x = random_matrix(10, 4, 100 + seed);
            let out = pca_project(&x, 4).unwrap();
            for axis in &out.components {
                let max = axis.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
                let arg = axis.iter().position(|v| v.abs() == max).unwrap();
                assert!(axis[arg] > 0.0, "seed {seed}: {axis:?}");
            }
        }
    }

    #[test]
    fn projections_are_translation_invariant() {
        let x = random_matrix(15, 4, 7);
        let shift = [100.0, -40.0, 3.5, 0.25];
        let shifted = matrix(
            (0..x.nrows())
                .map(|i| x.row(i).iter().zip(shift).map(|(v, s)| v + s).collect())
                .collect(),
        );
        let a = pca_project(&x, 3).unwrap();
        let b = pca_project(&shifted, 3).unwrap();
        for (pa, pb) in a.projections.iter().zip(&b.projections) {
            for (va, vb) in pa.iter().zip(pb) {
                assert!((va - vb).abs() < 1e-8, "{va} vs {vb}");
            }
        }
    }

    #[test]
    fn reconstruction_residual_orthogonal_to_components() {
        // Av = lambda v for each kept eigenpair, checked against the
        // covariance rebuilt independently here.
        let x = random_matrix(9, 4, 11);
        let out = pca_project(&x, 4).unwrap();
        let n = x.nrows();
        let d = x.dim();
        let means = x.column_means();
        let mut cov = vec![0.0f64; d * d];
        for i in 0..n {
            for a in 0..d {
                for b in 0..d {
                    cov[a * d + b] +=
                        (x.row(i)[a] - means[a]) * (x.row(i)[b] - means[b]) / (n as f64 - 1.0);
                }
            }
        }
        for (idx, axis) in out.components.iter().enumerate() {
            let lambda = out.eigenvalues[idx];
            for r in 0..d {
                let av: f64 = (0..d).map(|c| cov[r * d + c] * axis[c]).sum();
                assert!(
                    (av - lambda * axis[r]).abs() < 1e-9,
                    "eigenpair {idx}: row {r}: {av} vs {}",
                    lambda * axis[r]
                );
            }
        }
    }

    #[test]
    fn preconditions_are_enforced() {
        let x = matrix(vec![vec![1.0, 2.0]]);
        assert!(matches!(pca_project(&x, 1), Err(AnalyticsError::TooFewRows { .. })));
        let x = matrix(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(matches!(pca_project(&x, 3), Err(AnalyticsError::OutDimTooLarge { .. })));
        assert!(matches!(pca_project(&x, 0), Err(AnalyticsError::OutDimTooLarge { .. })));
    }

    #[test]
    fn rank_deficiency_is_flagged_not_fatal() {
        // Rank 1 data, two components requested: second eigenvalue is zero.
        let x = matrix(vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]);
        let out = pca_project(&x, 2).unwrap();
        assert_eq!(out.zero_eigenvalues, 1);
        assert!(out.eigenvalues[1].abs() < 1e-12);
    }
}
