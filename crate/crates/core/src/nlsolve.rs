//! Dense Newton iteration and partial-pivoting LU.
//!
//! Every implicit stage system in the crate is small (a few dozen unknowns at
//! most), so everything here is dense and allocation-happy.

use nalgebra::{DMatrix, DVector};

use crate::error::SolveError;

/// Pivots smaller than this, relative to the largest entry of the matrix,
/// are treated as zero.
pub const SINGULAR_PIVOT: f64 = 1e-14;

/// Settings shared by every Newton solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Infinity-norm tolerance on the residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Relative forward-difference step; the absolute step for component
    /// `i` is `fd_step * max(1, |x_i|)`.
    pub fd_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 50,
            fd_step: f64::EPSILON.sqrt(),
        }
    }
}

impl SolverConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Outcome of a Newton solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
    /// Residual norm before the first iteration and after each iteration.
    pub history: Vec<f64>,
}

/// A partial-pivoting LU factorization `PA = LU`, stored compactly.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &DMatrix<f64>) -> Result<Self, SolveError> {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.amax().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (mut piv, mut best) = (k, lu[(k, k)].abs());
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    piv = i;
                    best = v;
                }
            }
            if !(best > SINGULAR_PIVOT * scale) {
                return Err(SolveError::SingularMatrix {
                    column: k,
                    pivot: best,
                });
            }
            if piv != k {
                lu.swap_rows(k, piv);
                perm.swap(k, piv);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        assert_eq!(rhs.len(), n, "right-hand side has the wrong length");
        let mut x = DVector::from_fn(n, |i, _| rhs[self.perm[i]]);
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rhs.nrows(), rhs.ncols());
        for j in 0..rhs.ncols() {
            out.set_column(j, &self.solve(&rhs.column(j).into_owned()));
        }
        out
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.solve_matrix(&DMatrix::identity(self.dim(), self.dim()))
    }
}

/// Solves `A x = rhs` by partial-pivoting LU.
pub fn lu_solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>, SolveError> {
    Ok(Lu::new(a)?.solve(rhs))
}

/// Inverse of a square matrix via LU.
pub fn invert(a: &DMatrix<f64>) -> Result<DMatrix<f64>, SolveError> {
    Ok(Lu::new(a)?.inverse())
}

/// Forward-difference Jacobian of `f` at `x`, given `fx = f(x)`.
pub fn fd_jacobian<E, F>(
    f: &mut F,
    x: &DVector<f64>,
    fx: &DVector<f64>,
    rel_step: f64,
) -> Result<DMatrix<f64>, E>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>, E>,
{
    let mut jac = DMatrix::zeros(fx.len(), x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let xj = x[j];
        let trial = xj + rel_step * xj.abs().max(1.0);
        // Use the step that is actually representable.
        let step = trial - xj;
        xp[j] = trial;
        let fp = f(&xp)?;
        xp[j] = xj;
        for i in 0..fx.len() {
            jac[(i, j)] = (fp[i] - fx[i]) / step;
        }
    }
    Ok(jac)
}

fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn newton_loop<E, F, J>(
    mut f: F,
    mut jac: J,
    x0: DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, SolveReport), E>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>, E>,
    J: FnMut(&mut F, &DVector<f64>, &DVector<f64>) -> Result<DMatrix<f64>, E>,
    E: From<SolveError>,
{
    let mut x = x0;
    let mut r = f(&x)?;
    if !all_finite(&r) {
        return Err(SolveError::Divergence { iteration: 0 }.into());
    }
    let mut norm = r.amax();
    let mut history = vec![norm];
    let mut iterations = 0;
    let mut last_lu = None;
    while norm > cfg.tol && iterations < cfg.max_iters {
        iterations += 1;
        let j = jac(&mut f, &x, &r)?;
        let lu = Lu::new(&j).map_err(|_| SolveError::SingularJacobian {
            iteration: iterations,
        })?;
        let dx = lu.solve(&(-&r));
        x += dx;
        r = f(&x)?;
        if !all_finite(&r) {
            return Err(SolveError::Divergence {
                iteration: iterations,
            }
            .into());
        }
        norm = r.amax();
        history.push(norm);
        last_lu = Some(lu);
    }
    // One extra update with the last factorization once the tolerance is met.
    // Unknowns that enter the residual only through a small factor, such as
    // multipliers scaled by the step size, are otherwise left with errors far
    // above the residual tolerance.
    if let Some(lu) = last_lu.filter(|_| norm <= cfg.tol && norm > 0.0) {
        let polished = &x - lu.solve(&r);
        let r_polished = f(&polished)?;
        if all_finite(&r_polished) && r_polished.amax() <= norm {
            x = polished;
            norm = r_polished.amax();
        }
    }
    Ok((
        x,
        SolveReport {
            iterations,
            residual_norm: norm,
            converged: norm <= cfg.tol,
            history,
        },
    ))
}

/// Full-step Newton with a forward-difference Jacobian.
///
/// Returns the final iterate and a report; a report with `converged == false`
/// is not an error at this level, callers decide what to do with it.
pub fn newton_solve<E, F>(
    f: F,
    x0: DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, SolveReport), E>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>, E>,
    E: From<SolveError>,
{
    let step = cfg.fd_step;
    newton_loop(f, |f, x, fx| fd_jacobian(f, x, fx, step), x0, cfg)
}

/// Full-step Newton with a caller-supplied Jacobian.
pub fn newton_solve_with_jacobian<E, F, J>(
    f: F,
    mut jacobian: J,
    x0: DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, SolveReport), E>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>, E>,
    J: FnMut(&DVector<f64>) -> Result<DMatrix<f64>, E>,
    E: From<SolveError>,
{
    newton_loop(f, |_, x, _| jacobian(x), x0, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    type R = Result<DVector<f64>, SolveError>;

    #[test]
    fn scalar_quadratic() {
        let (x, rep) =
            newton_solve(|x: &DVector<f64>| -> R { Ok(dvector![x[0] * x[0] - 4.0]) }, dvector![1.0], &SolverConfig::default())
                .unwrap();
        assert!(rep.converged);
        assert!((x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn affine_residual_takes_one_iteration() {
        let a = dmatrix![4.0, 1.0, 0.0; 1.0, 3.0, -1.0; 0.0, 2.0, 5.0];
        let b = dvector![1.0, -2.0, 0.5];
        let (x, rep) = newton_solve_with_jacobian(
            |x: &DVector<f64>| -> R { Ok(&a * x - &b) },
            |_: &DVector<f64>| Ok::<_, SolveError>(a.clone()),
            DVector::zeros(3),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(rep.iterations, 1);
        assert!((&a * x - &b).amax() < 1e-14);
    }

    #[test]
    fn circle_line_intersection() {
        let f = |x: &DVector<f64>| -> R { Ok(dvector![x[0] * x[0] + x[1] * x[1] - 1.0, x[0] - x[1]]) };
        let (x, rep) = newton_solve(f, dvector![1.0, 0.0], &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((x[0] - h).abs() < 1e-12 && (x[1] - h).abs() < 1e-12);
    }

    #[test]
    fn quadratic_local_convergence() {
        let f = |x: &DVector<f64>| -> R {
            Ok(dvector![x[0].exp() - 2.0 + x[1], x[0] * x[1] + x[1].sin() - 0.3])
        };
        let (_, rep) = newton_solve(f, dvector![0.5, 0.2], &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        let h = &rep.history;
        for k in 1..h.len() - 1 {
            if h[k] < 1e-2 && h[k + 1] > 1e-13 {
                assert!(h[k + 1] <= 10.0 * h[k] * h[k], "history {h:?}");
            }
        }
    }

    #[test]
    fn fd_jacobian_matches_analytic() {
        let mut f = |x: &DVector<f64>| -> R { Ok(dvector![x[0].exp() * x[1], x[0] * x[0] - x[1].cos()]) };
        let x = dvector![0.3, -1.2];
        let fx = f(&x).unwrap();
        let j = fd_jacobian(&mut f, &x, &fx, f64::EPSILON.sqrt()).unwrap();
        let exact = dmatrix![x[0].exp() * x[1], x[0].exp(); 2.0 * x[0], x[1].sin()];
        for (a, e) in j.iter().zip(exact.iter()) {
            assert!((a - e).abs() <= 1e-6 * e.abs().max(1.0));
        }
    }

    #[test]
    fn singular_jacobian_reports_iteration() {
        let f = |x: &DVector<f64>| -> R { Ok(dvector![x[0] + x[1] - 1.0, 2.0 * x[0] + 2.0 * x[1]]) };
        let err = newton_solve(f, dvector![0.0, 0.0], &SolverConfig::default()).unwrap_err();
        assert_eq!(err, SolveError::SingularJacobian { iteration: 1 });
    }

    #[test]
    fn nan_residual_is_divergence() {
        let f = |x: &DVector<f64>| -> R { Ok(dvector![(x[0] - 1.0).sqrt()]) };
        let err = newton_solve(f, dvector![0.0], &SolverConfig::default()).unwrap_err();
        assert_eq!(err, SolveError::Divergence { iteration: 0 });
    }

    #[test]
    fn identity_and_permutation() {
        let rhs = dvector![3.0, -1.0];
        assert_eq!(lu_solve(&DMatrix::identity(2, 2), &rhs).unwrap(), rhs);
        let p = dmatrix![0.0, 1.0; 1.0, 0.0];
        assert_eq!(lu_solve(&p, &rhs).unwrap(), dvector![-1.0, 3.0]);
    }

    #[test]
    fn hilbert_inverse() {
        let h = DMatrix::from_fn(3, 3, |i, j| 1.0 / (i + j + 1) as f64);
        let exact = dmatrix![9.0, -36.0, 30.0; -36.0, 192.0, -180.0; 30.0, -180.0, 180.0];
        let inv = invert(&h).unwrap();
        assert!((inv - exact).amax() < 1e-10);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = dmatrix![1.0, 2.0; 2.0, 4.0];
        assert!(matches!(lu_solve(&a, &dvector![1.0, 1.0]), Err(SolveError::SingularMatrix { .. })));
    }
}
