//! Vector-space mechanical systems with velocity constraints.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, SolveError};
use crate::nlsolve::{invert, lu_solve, Lu, SolverConfig};

const HESSIAN_STEP: f64 = 1e-6;

/// Central-difference Jacobian of a vector field, used for default Hessians.
pub(crate) fn central_jacobian(
    x: &DVector<f64>,
    rows: usize,
    mut f: impl FnMut(&DVector<f64>) -> DVector<f64>,
) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(rows, x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let h = HESSIAN_STEP * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        jac.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    jac
}

/// A Lagrangian system on `ℝⁿ` with `m` constraints `Φ(q, v) = 0`, linear or
/// not in the velocities.
///
/// Constraint forces enter the Euler–Lagrange equations as `+ D2Φᵀ λ`.
pub trait VecSystem: Send + Sync {
    fn dim(&self) -> usize;

    fn n_constraints(&self) -> usize {
        0
    }

    fn lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64;

    /// `∂L/∂q`.
    fn dq_lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;

    /// `∂L/∂v`, the Legendre transform.
    fn dv_lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;

    /// `∂²L/∂v²`. Defaults to central differences of [`Self::dv_lagrangian`].
    fn velocity_hessian(&self, q: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
        central_jacobian(v, self.dim(), |w| self.dv_lagrangian(q, w))
    }

    /// `∂²L/∂v∂q`, entry `(i, j)` being `∂/∂q_j (∂L/∂v_i)`.
    fn mixed_hessian(&self, q: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
        central_jacobian(q, self.dim(), |x| self.dv_lagrangian(x, v))
    }

    fn constraint(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }

    /// `∂Φ/∂q`, an `m × n` matrix.
    fn constraint_dq(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(0, self.dim())
    }

    /// `∂Φ/∂v`, an `m × n` matrix.
    fn constraint_dv(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(0, self.dim())
    }
}

/// The Hamiltonian side of a regular system.
pub trait HamiltonianSystem: VecSystem {
    fn hamiltonian(&self, q: &DVector<f64>, p: &DVector<f64>) -> f64;
    fn dq_hamiltonian(&self, q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64>;
    fn dp_hamiltonian(&self, q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64>;

    /// `∂²H/∂p²`. Defaults to central differences of [`Self::dp_hamiltonian`].
    fn momentum_hessian(&self, q: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        central_jacobian(p, self.dim(), |w| self.dp_hamiltonian(q, w))
    }
}

/// Position constraints `Φ(q) = 0`, used by the holonomic stepper.
pub trait HolonomicSystem: VecSystem {
    fn n_position_constraints(&self) -> usize;
    fn position_constraint(&self, q: &DVector<f64>) -> DVector<f64>;
    /// `DΦ(q)`, an `m × n` matrix.
    fn position_constraint_jacobian(&self, q: &DVector<f64>) -> DMatrix<f64>;
}

/// One point of a discrete flow on a vector space.
#[derive(Debug, Clone, PartialEq)]
pub struct VecState {
    pub t: f64,
    pub q: DVector<f64>,
    pub p: DVector<f64>,
    pub v: DVector<f64>,
    pub lambda: DVector<f64>,
}

impl VecState {
    /// Builds a state from position and velocity, deriving `p` by the
    /// Legendre transform and setting `λ` to zero.
    pub fn from_velocity(sys: &dyn VecSystem, t: f64, q: DVector<f64>, v: DVector<f64>) -> Self {
        let p = legendre(sys, &q, &v);
        let m = sys.n_constraints();
        Self {
            t,
            q,
            p,
            v,
            lambda: DVector::zeros(m),
        }
    }

    /// Like [`Self::from_velocity`], with `λ` from [`consistent_multiplier`].
    pub fn consistent(sys: &dyn VecSystem, t: f64, q: DVector<f64>, v: DVector<f64>) -> Result<Self> {
        let lambda = consistent_multiplier(sys, &q, &v)?;
        Ok(Self {
            lambda,
            ..Self::from_velocity(sys, t, q, v)
        })
    }
}

pub fn legendre(sys: &dyn VecSystem, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    sys.dv_lagrangian(q, v)
}

/// Solves `∂L/∂v(q, v) = p` for `v` by Newton, starting from `v = p`.
pub fn legendre_inverse(sys: &dyn VecSystem, q: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>> {
    legendre_inverse_from(sys, q, p, p.clone())
}

/// [`legendre_inverse`] with an explicit starting guess.
pub fn legendre_inverse_from(
    sys: &dyn VecSystem,
    q: &DVector<f64>,
    p: &DVector<f64>,
    guess: DVector<f64>,
) -> Result<DVector<f64>> {
    invert_fibre(p, guess, |v| sys.dv_lagrangian(q, v), |v| sys.velocity_hessian(q, v))
}

/// Newton on `momentum(v) = p`, shared by the vector and Lie-group sides.
pub(crate) fn invert_fibre(
    p: &DVector<f64>,
    guess: DVector<f64>,
    momentum: impl Fn(&DVector<f64>) -> DVector<f64>,
    hessian: impl Fn(&DVector<f64>) -> DMatrix<f64>,
) -> Result<DVector<f64>> {
    let tol = 1e-14 * p.amax().max(1.0);
    let accept = SolverConfig::default().tol * p.amax().max(1.0);
    let mut v = guess;
    let mut res = momentum(&v) - p;
    let mut norm = res.amax();
    let mut iteration = 0;
    while norm > tol {
        iteration += 1;
        if iteration > 50 {
            break;
        }
        let dv = lu_solve(&hessian(&v), &res).map_err(|_| Error::Regularity(SolveError::SingularJacobian { iteration }))?;
        v -= dv;
        res = momentum(&v) - p;
        let next = res.amax();
        if !next.is_finite() {
            return Err(Error::Regularity(SolveError::Divergence { iteration }));
        }
        // Once rounding stalls progress, an acceptable residual is final.
        if next >= 0.5 * norm && next <= accept {
            norm = next;
            break;
        }
        norm = next;
    }
    if norm <= accept {
        Ok(v)
    } else {
        Err(Error::Regularity(SolveError::NotConverged {
            iterations: iteration,
            residual: norm,
        }))
    }
}

/// `E = v·∂L/∂v − L`.
pub fn energy(sys: &dyn VecSystem, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
    sys.dv_lagrangian(q, v).dot(v) - sys.lagrangian(q, v)
}

/// `C = D2Φ g_L^{-1} D2Φᵀ`.
pub fn compatibility_matrix(sys: &dyn VecSystem, q: &DVector<f64>, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let d2phi = sys.constraint_dv(q, v);
    let hess = Lu::new(&sys.velocity_hessian(q, v)).map_err(Error::Regularity)?;
    Ok(&d2phi * hess.solve_matrix(&d2phi.transpose()))
}

/// The multiplier of the continuous equations at a consistent state: the
/// solution of `C λ = −dΦ/dt|_free`, where the derivative is taken along the
/// unconstrained Euler–Lagrange flow.
pub fn consistent_multiplier(sys: &dyn VecSystem, q: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let m = sys.n_constraints();
    if m == 0 {
        return Ok(DVector::zeros(0));
    }
    let hess = Lu::new(&sys.velocity_hessian(q, v)).map_err(Error::Regularity)?;
    let force = sys.dq_lagrangian(q, v) - sys.mixed_hessian(q, v) * v;
    let accel = hess.solve(&force);
    let drift = sys.constraint_dq(q, v) * v + sys.constraint_dv(q, v) * accel;
    let c = compatibility_matrix(sys, q, v)?;
    let inv = invert(&c).map_err(|_| Error::Compatibility)?;
    Ok(-(inv * drift))
}

pub(crate) fn relative_gap(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| (a - n).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}

fn gradient(x: &DVector<f64>, f: impl Fn(&DVector<f64>) -> f64) -> DMatrix<f64> {
    central_jacobian(x, 1, |w| DVector::from_element(1, f(w))).transpose()
}

/// Largest relative disagreement between the analytic derivatives of the
/// Lagrangian and constraints and central differences of the functions they
/// differentiate.
pub fn derivative_defect(sys: &dyn VecSystem, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let (n, m) = (sys.dim(), sys.n_constraints());
    let as_col = |x: DVector<f64>| DMatrix::from_column_slice(x.len(), 1, x.as_slice());
    [
        relative_gap(&as_col(sys.dq_lagrangian(q, v)), &gradient(q, |x| sys.lagrangian(x, v))),
        relative_gap(&as_col(sys.dv_lagrangian(q, v)), &gradient(v, |w| sys.lagrangian(q, w))),
        relative_gap(&sys.velocity_hessian(q, v), &central_jacobian(v, n, |w| sys.dv_lagrangian(q, w))),
        relative_gap(&sys.mixed_hessian(q, v), &central_jacobian(q, n, |x| sys.dv_lagrangian(x, v))),
        relative_gap(&sys.constraint_dq(q, v), &central_jacobian(q, m, |x| sys.constraint(x, v))),
        relative_gap(&sys.constraint_dv(q, v), &central_jacobian(v, m, |w| sys.constraint(q, w))),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// As [`derivative_defect`] for the Hamiltonian side, including the check
/// that `H(q, ∂L/∂v) = E(q, v)`.
pub fn hamiltonian_defect(sys: &dyn HamiltonianSystem, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let p = legendre(sys, q, v);
    let n = sys.dim();
    let as_col = |x: DVector<f64>| DMatrix::from_column_slice(x.len(), 1, x.as_slice());
    let e = energy(sys, q, v);
    [
        relative_gap(&as_col(sys.dq_hamiltonian(q, &p)), &gradient(q, |x| sys.hamiltonian(x, &p))),
        relative_gap(&as_col(sys.dp_hamiltonian(q, &p)), &gradient(&p, |w| sys.hamiltonian(q, w))),
        relative_gap(&sys.momentum_hessian(q, &p), &central_jacobian(&p, n, |w| sys.dp_hamiltonian(q, w))),
        (sys.hamiltonian(q, &p) - e).abs() / e.abs().max(1.0),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// As [`derivative_defect`] for position constraints.
pub fn position_constraint_defect(sys: &dyn HolonomicSystem, q: &DVector<f64>) -> f64 {
    relative_gap(
        &sys.position_constraint_jacobian(q),
        &central_jacobian(q, sys.n_position_constraints(), |x| sys.position_constraint(x)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    /// `L = ½ vᵀ M v − ½ k |q|²` with diagonal `M` and the constraint `v_last = q_0 v_0`.
    struct Toy {
        mass: Vec<f64>,
    }

    impl VecSystem for Toy {
        fn dim(&self) -> usize {
            self.mass.len()
        }
        fn n_constraints(&self) -> usize {
            1
        }
        fn lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
            let kin: f64 = (0..self.dim()).map(|i| 0.5 * self.mass[i] * v[i] * v[i]).sum();
            kin - 0.5 * q.norm_squared()
        }
        fn dq_lagrangian(&self, q: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
            -q
        }
        fn dv_lagrangian(&self, _q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
            DVector::from_fn(self.dim(), |i, _| self.mass[i] * v[i])
        }
        fn constraint(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
            dvector![v[self.dim() - 1] - q[0] * v[0]]
        }
        fn constraint_dq(&self, _q: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
            let mut d = DMatrix::zeros(1, self.dim());
            d[(0, 0)] = -v[0];
            d
        }
        fn constraint_dv(&self, q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
            let mut d = DMatrix::zeros(1, self.dim());
            d[(0, 0)] = -q[0];
            d[(0, self.dim() - 1)] = 1.0;
            d
        }
    }

    #[test]
    fn legendre_round_trip_with_mass() {
        let sys = Toy { mass: vec![2.0, 2.0, 3.0] };
        let (q, v) = (dvector![0.1, 0.2, 0.3], dvector![1.0, 1.0, 1.0]);
        let p = legendre(&sys, &q, &v);
        assert_eq!(p, dvector![2.0, 2.0, 3.0]);
        let back = legendre_inverse(&sys, &q, &p).unwrap();
        assert!((back - v).amax() < 1e-14);
    }

    #[test]
    fn energy_of_unit_oscillator() {
        let sys = Toy { mass: vec![1.0] };
        assert!((energy(&sys, &dvector![1.0], &dvector![1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn multiplier_with_diagonal_compatibility() {
        // Constraint v_1 − q_0 v_0 at q_0 = 0: C = 1/m_1, drift = −v_0² − 0.
        let sys = Toy { mass: vec![1.0, 4.0] };
        let (q, v) = (dvector![0.0, 0.5], dvector![2.0, 0.0]);
        let lambda = consistent_multiplier(&sys, &q, &v).unwrap();
        let drift = -v[0] * v[0] + (-q[1] / 4.0);
        assert!((lambda[0] - (-drift / 0.25)).abs() < 1e-8, "{lambda}");
    }
}
