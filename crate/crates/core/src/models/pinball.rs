//! Linear quantile regression by a primal-dual interior-point method.
//!
//! The pinball problem `min_beta sum rho_tau(y_i - x_i' beta)` is solved through
//! its bounded dual
//!
//! ```text
//! max y'a   s.t.  X'a = (1 - tau) X'1,  0 <= a <= 1
//! ```
//!
//! with Mehrotra predictor-corrector steps (the Frisch-Newton scheme). The
//! coefficient vector is the negated multiplier of the equality constraint.
//! Because `a` stays strictly feasible, the difference between the pinball
//! loss at the current coefficients and the dual objective is a certified
//! optimality gap; iteration stops when it falls below
//! `GAP_TOL * loss + SCALE_TOL * sum|y|`, and fails after `MAX_ITER` steps.
//!
//! A final pass tries the basic solution interpolating the `m` observations
//! with the smallest residuals and keeps it when its loss is no larger.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::least_squares::solve_least_squares;

pub const MAX_ITER: usize = 100;
const GAP_TOL: f64 = 1e-11;
const SCALE_TOL: f64 = 1e-13;
const STEP_FRACTION: f64 = 0.99995;

#[inline]
pub fn pinball(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

/// Sum of pinball losses of the residuals `y - design * beta`.
pub fn pinball_loss(design: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, tau: f64) -> f64 {
    let fitted = design * beta;
    y.iter().zip(fitted.iter()).map(|(yi, fi)| pinball(yi - fi, tau)).sum()
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

/// Solves `design' diag(1/q) design * dy = rhs` with a ridge fallback.
fn normal_solve(design: &DMatrix<f64>, inv_q: &DVector<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let scaled = DMatrix::from_fn(design.nrows(), design.ncols(), |i, k| design[(i, k)] * inv_q[i]);
    let mut normal = design.transpose() * scaled;
    if let Some(chol) = normal.clone().cholesky() {
        return Some(chol.solve(rhs));
    }
    let trace = normal.trace() / normal.nrows() as f64;
    for jitter in [1e-14, 1e-12, 1e-10] {
        for i in 0..normal.nrows() {
            normal[(i, i)] += jitter * trace;
        }
        if let Some(chol) = normal.clone().cholesky() {
            return Some(chol.solve(rhs));
        }
    }
    None
}

/// Coefficients approximately minimizing the pinball loss at level `tau`.
pub fn fit_quantile_design(design: &DMatrix<f64>, y: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
    let (n, m) = design.shape();
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidLevel(tau));
    }
    if n < m {
        return Err(Error::Underdetermined { rows: n, cols: m });
    }
    let abs_sum: f64 = y.iter().map(|v| v.abs()).sum();
    let y_max = y.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    // Starting point: a = 1 - tau (exactly feasible), multiplier from least
    // squares of c = -y, slack duals split from the least-squares residual.
    let c = -y;
    let b = design.transpose() * DVector::from_element(n, 1.0 - tau);
    let mut x = DVector::from_element(n, 1.0 - tau);
    let mut s = DVector::from_element(n, tau);
    let mut dual = solve_least_squares(design, &c)?;
    let r = &c - design * &dual;
    let mut z = r.map(|v| v.max(0.0));
    let mut w = r.map(|v| (-v).max(0.0));
    let mut shift = 0.5 * (x.dot(&z) + s.dot(&w)) / n as f64;
    if shift <= 0.0 {
        shift = 1e-8 * if y_max > 0.0 { y_max } else { 1.0 };
    }
    z.add_scalar_mut(shift);
    w.add_scalar_mut(shift);

    let certified_gap = |dual: &DVector<f64>, x: &DVector<f64>| {
        let beta = -dual;
        let loss = pinball_loss(design, y, &beta, tau);
        let dual_obj = y.dot(x) - (1.0 - tau) * y.sum();
        (loss, loss - dual_obj)
    };

    let mut converged = false;
    let mut last_gap = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let (loss, gap) = certified_gap(&dual, &x);
        last_gap = gap;
        if gap <= GAP_TOL * loss + SCALE_TOL * abs_sum {
            converged = true;
            break;
        }

        let r_p = &b - design.transpose() * &x;
        let r_d = &c - design * &dual - &z + &w;
        let q = z.component_div(&x) + w.component_div(&s);
        let inv_q = q.map(|v| 1.0 / v);

        let direction = |r_xz: &DVector<f64>, r_sw: &DVector<f64>| {
            let rhs_vec = &r_d - r_xz.component_div(&x) + r_sw.component_div(&s);
            let rhs = &r_p + design.transpose() * rhs_vec.component_mul(&inv_q);
            let dy = normal_solve(design, &inv_q, &rhs)?;
            let dx = (design * &dy - &rhs_vec).component_mul(&inv_q);
            let ds = -&dx;
            let dz = (r_xz - z.component_mul(&dx)).component_div(&x);
            let dw = (r_sw - w.component_mul(&ds)).component_div(&s);
            Some((dx, ds, dy, dz, dw))
        };

        // predictor
        let r_xz = -x.component_mul(&z);
        let r_sw = -s.component_mul(&w);
        let Some((dx, ds, _, dz, dw)) = direction(&r_xz, &r_sw) else {
            break;
        };
        let a_p = max_step(&x, &dx).min(max_step(&s, &ds)).min(1.0);
        let a_d = max_step(&z, &dz).min(max_step(&w, &dw)).min(1.0);
        let mu = (x.dot(&z) + s.dot(&w)) / (2 * n) as f64;
        let mu_aff =
            ((&x + a_p * &dx).dot(&(&z + a_d * &dz)) + (&s + a_p * &ds).dot(&(&w + a_d * &dw))) / (2 * n) as f64;
        let sigma = (mu_aff / mu).powi(3);

        // corrector
        let r_xz = &r_xz - dx.component_mul(&dz) + DVector::from_element(n, sigma * mu);
        let r_sw = &r_sw - ds.component_mul(&dw) + DVector::from_element(n, sigma * mu);
        let Some((dx, ds, dy, dz, dw)) = direction(&r_xz, &r_sw) else {
            break;
        };
        let a_p = (STEP_FRACTION * max_step(&x, &dx).min(max_step(&s, &ds))).min(1.0);
        let a_d = (STEP_FRACTION * max_step(&z, &dz).min(max_step(&w, &dw))).min(1.0);
        x += a_p * dx;
        s += a_p * ds;
        dual += a_d * dy;
        z += a_d * dz;
        w += a_d * dw;
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: MAX_ITER,
            gap: last_gap,
        });
    }

    let beta = -dual;
    Ok(polish_vertex(design, y, tau, beta))
}

/// Replaces `beta` by the basic solution through the `m` best-fitting rows
/// when that does not increase the loss.
fn polish_vertex(design: &DMatrix<f64>, y: &DVector<f64>, tau: f64, beta: DVector<f64>) -> DVector<f64> {
    let (n, m) = design.shape();
    let fitted = design * &beta;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        (y[i] - fitted[i])
            .abs()
            .total_cmp(&(y[j] - fitted[j]).abs())
            .then(i.cmp(&j))
    });
    let rows: Vec<usize> = order.into_iter().take(m).collect();
    let sub = DMatrix::from_fn(m, m, |a, k| design[(rows[a], k)]);
    let rhs = DVector::from_iterator(m, rows.iter().map(|&i| y[i]));
    let Some(candidate) = sub.lu().solve(&rhs) else {
        return beta;
    };
    if !candidate.iter().all(|v| v.is_finite()) {
        return beta;
    }
    if pinball_loss(design, y, &candidate, tau) <= pinball_loss(design, y, &beta, tau) {
        candidate
    } else {
        beta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exact optimum by enumerating every basic solution through `m` rows.
    fn vertex_oracle(design: &DMatrix<f64>, y: &DVector<f64>, tau: f64) -> f64 {
        let (n, m) = design.shape();
        assert_eq!(m, 2);
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let sub = DMatrix::from_fn(2, 2, |a, k| design[(if a == 0 { i } else { j }, k)]);
                let rhs = DVector::from_vec(vec![y[i], y[j]]);
                if let Some(beta) = sub.lu().solve(&rhs) {
                    if beta.iter().all(|v| v.is_finite()) {
                        best = best.min(pinball_loss(design, y, &beta, tau));
                    }
                }
            }
        }
        best
    }

    fn random_problem(seed: u64, n: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let design = DMatrix::from_fn(n, 2, |_, k| if k == 0 { 1.0 } else { rng.random_range(-3.0..3.0) });
        let y = DVector::from_fn(n, |i, _| {
            1.0 + 0.5 * design[(i, 1)] + rng.random_range(-1.0f64..1.0).powi(3) * 4.0
        });
        (design, y)
    }

    #[test]
    fn matches_vertex_enumeration() {
        for seed in 0..12 {
            let (design, y) = random_problem(seed, 40);
            for tau in [0.05, 0.3, 0.5, 0.9] {
                let beta = fit_quantile_design(&design, &y, tau).unwrap();
                let got = pinball_loss(&design, &y, &beta, tau) / 40.0;
                let want = vertex_oracle(&design, &y, tau) / 40.0;
                assert!(got - want <= 1e-6, "seed {seed} tau {tau}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn constant_response() {
        let design = DMatrix::from_fn(30, 2, |i, k| if k == 0 { 1.0 } else { i as f64 });
        let y = DVector::from_element(30, 4.25);
        for tau in [0.1, 0.5, 0.95] {
            let beta = fit_quantile_design(&design, &y, tau).unwrap();
            assert!((beta[0] - 4.25).abs() < 1e-9, "{beta}");
            assert!(beta[1].abs() < 1e-9);
        }
    }

    #[test]
    fn never_worse_than_zero() {
        for seed in 0..5 {
            let (design, y) = random_problem(100 + seed, 25);
            let beta = fit_quantile_design(&design, &y, 0.7).unwrap();
            let zero = DVector::zeros(2);
            assert!(pinball_loss(&design, &y, &beta, 0.7) <= pinball_loss(&design, &y, &zero, 0.7));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let (design, y) = random_problem(1, 10);
        assert!(matches!(
            fit_quantile_design(&design, &y, 1.0),
            Err(Error::InvalidLevel(_))
        ));
        let short = DMatrix::from_element(1, 2, 1.0);
        assert!(matches!(
            fit_quantile_design(&short, &DVector::from_element(1, 1.0), 0.5),
            Err(Error::Underdetermined { .. })
        ));
    }
}
