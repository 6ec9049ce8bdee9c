//! Dense solvers for the tiny systems the geometry stages need.

use crate::geom::{Mat3, Vec3};

/// Eigen-decomposition of a symmetric 3×3 matrix by cyclic Jacobi sweeps.
///
/// Eigenvalues are returned in descending order with matching unit
/// eigenvectors.
pub fn sym_eigen3(m: &Mat3) -> ([f64; 3], [Vec3; 3]) {
    let mut a = [[0.0f64; 3]; 3];
    for (i, row) in a.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = 0.5 * (m.rows[i][j] + m.rows[j][i]);
        }
    }
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / libm::sqrt(t * t + 1.0);
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let vals = [a[idx[0]][idx[0]], a[idx[1]][idx[1]], a[idx[2]][idx[2]]];
    let col = |c: usize| Vec3::new(v[0][c], v[1][c], v[2][c]).normalize_or_zero();
    (vals, [col(idx[0]), col(idx[1]), col(idx[2])])
}

/// Eigenpairs of the symmetric form `[[a, b], [b, c]]`, larger eigenvalue first.
///
/// On a repeated eigenvalue the directions default to the coordinate axes.
pub fn sym_eigen2(a: f64, b: f64, c: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let r = libm::hypot(half_diff, b);
    let l1 = mean + r;
    let l2 = mean - r;
    if r == 0.0 {
        return ([l1, l2], [[1.0, 0.0], [0.0, 1.0]]);
    }
    // Half-angle form is stable for every sign combination of (a - c, b).
    let phi = 0.5 * libm::atan2(b, half_diff);
    let (s, co) = (libm::sin(phi), libm::cos(phi));
    ([l1, l2], [[co, s], [-s, co]])
}

/// Solve `A x = b` for a small dense system by Gaussian elimination with
/// partial pivoting. Returns `None` when a pivot falls below
/// `rel_tol · max|A|`.
pub fn solve_dense<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N], rel_tol: f64) -> Option<[f64; N]> {
    let scale = a.iter().flat_map(|r| r.iter()).fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for col in 0..N {
        let mut piv = col;
        for r in col + 1..N {
            if libm::fabs(a[r][col]) > libm::fabs(a[piv][col]) {
                piv = r;
            }
        }
        if libm::fabs(a[piv][col]) <= rel_tol * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..N {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..N {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for i in (0..N).rev() {
        let mut s = b[i];
        for k in i + 1..N {
            s -= a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen3_diagonal_sorted() {
        let m = Mat3::from_rows(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 3.0, 0.0), Vec3::new(0.0, 0.0, 2.0));
        let (vals, vecs) = sym_eigen3(&m);
        assert_eq!(vals, [3.0, 2.0, 1.0]);
        assert!((vecs[0].dot(Vec3::Y)).abs() > 1.0 - 1e-12);
    }

    #[test]
    fn eigen3_reconstructs() {
        let m = Mat3::from_rows(Vec3::new(4.0, 1.0, -2.0), Vec3::new(1.0, 2.0, 0.5), Vec3::new(-2.0, 0.5, 3.0));
        let (vals, vecs) = sym_eigen3(&m);
        for k in 0..3 {
            let r = m.mul_vec(vecs[k]) - vecs[k] * vals[k];
            assert!(r.norm() < 1e-10);
        }
    }

    #[test]
    fn eigen2_off_diagonal() {
        let ([l1, l2], [e1, e2]) = sym_eigen2(0.0, 1.0, 0.0);
        assert!((l1 - 1.0).abs() < 1e-15 && (l2 + 1.0).abs() < 1e-15);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((e1[0] - h).abs() < 1e-15 && (e1[1] - h).abs() < 1e-15);
        assert!((e1[0] * e2[0] + e1[1] * e2[1]).abs() < 1e-15);
    }

    #[test]
    fn dense_solve_and_singular() {
        let x = solve_dense([[2.0, 1.0], [1.0, 3.0]], [3.0, 5.0], 1e-12).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve_dense([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0], 1e-12).is_none());
    }
}
