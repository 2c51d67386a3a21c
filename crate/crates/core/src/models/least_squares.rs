use nalgebra::{DMatrix, DVector};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::models::features::FeatureMap;

/// Relative threshold on the pivoted-QR diagonal below which a column is
/// treated as linearly dependent.
const RANK_TOL: f64 = 1e-10;

/// Expands every row of `x` through `map` into an `n × m` design matrix.
pub fn design_matrix(map: &FeatureMap, x: &Matrix) -> DMatrix<f64> {
    let (n, m) = (x.rows(), map.len());
    let mut design = DMatrix::zeros(n, m);
    let mut buf = Vec::with_capacity(m);
    for i in 0..n {
        map.expand_into(x.row(i), &mut buf);
        for (k, v) in buf.iter().enumerate() {
            design[(i, k)] = *v;
        }
    }
    design
}

/// Minimizes `||design * beta - y||²` through a column-pivoted QR
/// factorization.
pub fn solve_least_squares(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (n, m) = design.shape();
    if n < m {
        return Err(Error::Underdetermined { rows: n, cols: m });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let qr = design.clone().col_piv_qr();
    let r = qr.r();
    let scale = (0..m).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let rank = (0..m).filter(|&i| r[(i, i)].abs() > RANK_TOL * scale).count();
    if scale == 0.0 || rank < m {
        return Err(Error::SingularDesign { rank, cols: m });
    }

    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let mut z = DVector::from_iterator(m, qty.iter().take(m).copied());
    for i in (0..m).rev() {
        let mut acc = z[i];
        for k in i + 1..m {
            acc -= r[(i, k)] * z[k];
        }
        z[i] = acc / r[(i, i)];
    }
    // A P = Q R with P the recorded column swaps, so beta = P z.
    qr.p().inv_permute_rows(&mut z);
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let design = DMatrix::from_row_slice(4, 2, &[1., 0., 1., 1., 1., 2., 1., 3.]);
        let y = DVector::from_vec(vec![1., 3., 5., 7.]);
        let beta = solve_least_squares(&design, &y).unwrap();
        assert!((beta[0] - 1.0).abs() < 1e-12 && (beta[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pivoting_recovers_order() {
        // large second column forces a column swap in the factorization
        let design = DMatrix::from_row_slice(3, 2, &[1., 100., 1., 200., 1., 400.]);
        let y = DVector::from_vec(vec![7. + 300., 7. + 600., 7. + 1200.]);
        let beta = solve_least_squares(&design, &y).unwrap();
        assert!((beta[0] - 7.0).abs() < 1e-9, "{beta}");
        assert!((beta[1] - 3.0).abs() < 1e-12, "{beta}");
    }

    #[test]
    fn singular_and_underdetermined() {
        let design = DMatrix::from_row_slice(3, 2, &[1., 2., 1., 2., 1., 2.]);
        let y = DVector::from_vec(vec![1., 2., 3.]);
        assert!(matches!(
            solve_least_squares(&design, &y),
            Err(Error::SingularDesign { rank: 1, cols: 2 })
        ));
        let wide = DMatrix::from_row_slice(1, 2, &[1., 2.]);
        assert!(matches!(
            solve_least_squares(&wide, &DVector::from_vec(vec![1.])),
            Err(Error::Underdetermined { .. })
        ));
    }
}
