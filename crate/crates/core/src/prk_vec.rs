//! Partitioned Runge-Kutta steppers on vector spaces.
//!
//! All steppers eliminate the stage positions `Q^i = q_k + h Σ_j a_ij V^j`
//! and the stage forces `W^i` functionally, so Newton only sees the stage
//! velocities plus whatever multipliers the constraint type needs.
//!
//! For the velocity-constrained steppers the first stage multiplier is the
//! incoming `λ_k` rather than an unknown. With `c_1 = 0` and a zero first row
//! in `a`, stage one sits at `(q_k, p_k)` and its constraint is already met, so
//! `Λ^1` would have no equation of its own.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, SolveError};
use crate::mechanics::{legendre_inverse, HamiltonianSystem, HolonomicSystem, VecState, VecSystem};
use crate::nlsolve::{invert, newton_solve, SolveReport, SolverConfig};
use crate::tableau::PartitionedTableau;

/// Largest constraint violation accepted at the start of a step.
pub const INITIAL_CONSTRAINT_TOL: f64 = 1e-8;

/// Converged stage quantities of one step.
#[derive(Debug, Clone, Default)]
pub struct StageWork {
    /// Stage positions `Q^i` (equal to `q^i`).
    pub positions: Vec<DVector<f64>>,
    /// Stage velocities `V^i`.
    pub velocities: Vec<DVector<f64>>,
    /// Stage momenta `P^i` from the conjugate sums.
    pub momenta: Vec<DVector<f64>>,
    /// Stage forces `W^i`.
    pub forces: Vec<DVector<f64>>,
    pub multipliers: Vec<DVector<f64>>,
    /// Stage momenta `p^i` from the primal sums.
    pub stage_momenta: Vec<DVector<f64>>,
    /// Velocities `v^i` recovered from `p^i`.
    pub stage_velocities: Vec<DVector<f64>>,
}

/// Per-step diagnostics.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub solve: SolveReport,
    /// Largest constraint violation over all stages, zero when unconstrained.
    pub constraint_residual: f64,
    pub work: StageWork,
}

/// A partitioned tableau plus solver settings.
#[derive(Debug, Clone)]
pub struct VecIntegrator {
    pub tableau: PartitionedTableau,
    pub solver: SolverConfig,
}

fn blocks(x: &DVector<f64>, offset: usize, count: usize, len: usize) -> Vec<DVector<f64>> {
    (0..count)
        .map(|i| x.rows(offset + i * len, len).into_owned())
        .collect()
}

fn weighted(coeffs: impl Iterator<Item = f64>, items: &[DVector<f64>], base: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut out = base.clone();
    for (c, item) in coeffs.zip(items) {
        if c != 0.0 {
            out.axpy(h * c, item, 1.0);
        }
    }
    out
}

fn concat(parts: &[DVector<f64>]) -> DVector<f64> {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(len);
    let mut at = 0;
    for p in parts {
        out.rows_mut(at, p.len()).copy_from(p);
        at += p.len();
    }
    out
}

fn finish(x: DVector<f64>, rep: SolveReport) -> Result<(DVector<f64>, SolveReport)> {
    if rep.converged {
        Ok((x, rep))
    } else {
        Err(SolveError::NotConverged {
            iterations: rep.iterations,
            residual: rep.residual_norm,
        }
        .into())
    }
}

/// How the Lagrangian steppers treat constraints.
#[derive(Clone, Copy)]
enum Constraints<'a> {
    Free,
    Velocity,
    Position(&'a dyn HolonomicSystem),
}

impl VecIntegrator {
    pub fn new(tableau: PartitionedTableau, solver: SolverConfig) -> Self {
        Self { tableau, solver }
    }

    pub fn lobatto(s: usize) -> Result<Self> {
        Ok(Self::new(PartitionedTableau::lobatto(s)?, SolverConfig::default()))
    }

    fn a(&self, i: usize, j: usize) -> f64 {
        self.tableau.primal.a()[(i, j)]
    }

    fn a_hat(&self, i: usize, j: usize) -> f64 {
        self.tableau.dual.a()[(i, j)]
    }

    fn stage_positions(&self, q: &DVector<f64>, vel: &[DVector<f64>], h: f64) -> Vec<DVector<f64>> {
        let s = self.tableau.stages();
        (0..s)
            .map(|i| weighted((0..s).map(|j| self.a(i, j)), vel, q, h))
            .collect()
    }

    /// Unconstrained variational partitioned Runge-Kutta step.
    pub fn step_vprk(&self, sys: &dyn VecSystem, state: &VecState, h: f64) -> Result<(VecState, StepReport)> {
        self.lagrangian_step(sys, Constraints::Free, state, h)
    }

    /// Step with position constraints, closed by the tangency condition at the
    /// new point.
    pub fn step_holonomic(&self, sys: &dyn HolonomicSystem, state: &VecState, h: f64) -> Result<(VecState, StepReport)> {
        self.tableau.require_lobatto_type()?;
        let violation = sys.position_constraint(&state.q).amax_or_zero();
        if violation > INITIAL_CONSTRAINT_TOL {
            return Err(Error::InconsistentInitialState(violation));
        }
        self.lagrangian_step(sys, Constraints::Position(sys), state, h)
    }

    /// Nonholonomic step in Lagrangian form.
    pub fn step_nh_lagrangian(&self, sys: &dyn VecSystem, state: &VecState, h: f64) -> Result<(VecState, StepReport)> {
        self.tableau.require_lobatto_type()?;
        let violation = sys.constraint(&state.q, &state.v).amax_or_zero();
        if violation > INITIAL_CONSTRAINT_TOL {
            return Err(Error::InconsistentInitialState(violation));
        }
        let mode = if sys.n_constraints() == 0 {
            Constraints::Free
        } else {
            Constraints::Velocity
        };
        self.lagrangian_step(sys, mode, state, h)
    }

    fn lagrangian_step(
        &self,
        sys: &dyn VecSystem,
        mode: Constraints<'_>,
        state: &VecState,
        h: f64,
    ) -> Result<(VecState, StepReport)> {
        let s = self.tableau.stages();
        let n = sys.dim();
        let (m, free_multipliers) = match mode {
            Constraints::Free => (0, 0),
            Constraints::Velocity => (sys.n_constraints(), s - 1),
            Constraints::Position(hs) => (hs.n_position_constraints(), s),
        };
        let (qk, pk) = (&state.q, &state.p);
        let b = self.tableau.primal.b();
        let b_hat = self.tableau.dual.b();

        let multipliers = |x: &DVector<f64>| -> Vec<DVector<f64>> {
            match mode {
                Constraints::Free => vec![DVector::zeros(0); s],
                Constraints::Velocity => {
                    let mut out = vec![state.lambda.clone()];
                    out.extend(blocks(x, s * n, s - 1, m));
                    out
                }
                Constraints::Position(_) => blocks(x, s * n, s, m),
            }
        };
        let forces = |qs: &[DVector<f64>], vs: &[DVector<f64>], lams: &[DVector<f64>]| -> Vec<DVector<f64>> {
            (0..s)
                .map(|i| {
                    let mut w = sys.dq_lagrangian(&qs[i], &vs[i]);
                    match mode {
                        Constraints::Free => {}
                        Constraints::Velocity => w += sys.constraint_dv(&qs[i], &vs[i]).tr_mul(&lams[i]),
                        Constraints::Position(hs) => {
                            w += hs.position_constraint_jacobian(&qs[i]).tr_mul(&lams[i])
                        }
                    }
                    w
                })
                .collect()
        };

        let residual = |x: &DVector<f64>| -> Result<DVector<f64>> {
            let vs = blocks(x, 0, s, n);
            let lams = multipliers(x);
            let qs = self.stage_positions(qk, &vs, h);
            let ws = forces(&qs, &vs, &lams);
            let mut parts = Vec::with_capacity(2 * s + 1);
            for i in 0..s {
                let target = weighted((0..s).map(|j| self.a_hat(i, j)), &ws, pk, h);
                parts.push(sys.dv_lagrangian(&qs[i], &vs[i]) - target);
            }
            match mode {
                Constraints::Free => {}
                Constraints::Velocity => {
                    for i in 1..s {
                        let p_i = weighted((0..s).map(|j| self.a(i, j)), &ws, pk, h);
                        let v_i = legendre_inverse(sys, &qs[i], &p_i)?;
                        parts.push(sys.constraint(&qs[i], &v_i));
                    }
                }
                Constraints::Position(hs) => {
                    for q in qs.iter().skip(1) {
                        parts.push(hs.position_constraint(q));
                    }
                    let q1 = weighted(b.iter().copied(), &vs, qk, h);
                    let p1 = weighted(b_hat.iter().copied(), &ws, pk, h);
                    let v1 = legendre_inverse(sys, &q1, &p1)?;
                    parts.push(hs.position_constraint_jacobian(&q1) * v1);
                }
            }
            Ok(concat(&parts))
        };

        let mut x0 = DVector::zeros(s * n + free_multipliers * m);
        for i in 0..s {
            x0.rows_mut(i * n, n).copy_from(&state.v);
        }
        if state.lambda.len() == m {
            for i in 0..free_multipliers {
                x0.rows_mut(s * n + i * m, m).copy_from(&state.lambda);
            }
        }
        let (x, solve) = newton_solve(residual, x0, &self.solver)?;
        let (x, solve) = finish(x, solve)?;

        let vs = blocks(&x, 0, s, n);
        let lams = multipliers(&x);
        let qs = self.stage_positions(qk, &vs, h);
        let ws = forces(&qs, &vs, &lams);
        let q1 = weighted(b.iter().copied(), &vs, qk, h);
        let p1 = weighted(b_hat.iter().copied(), &ws, pk, h);
        let v1 = legendre_inverse(sys, &q1, &p1)?;
        let momenta: Vec<_> = (0..s)
            .map(|i| weighted((0..s).map(|j| self.a_hat(i, j)), &ws, pk, h))
            .collect();
        let stage_momenta: Vec<_> = (0..s)
            .map(|i| weighted((0..s).map(|j| self.a(i, j)), &ws, pk, h))
            .collect();
        let stage_velocities = (0..s)
            .map(|i| legendre_inverse(sys, &qs[i], &stage_momenta[i]))
            .collect::<Result<Vec<_>>>()?;
        let constraint_residual = match mode {
            Constraints::Free => 0.0,
            Constraints::Velocity => (0..s)
                .map(|i| sys.constraint(&qs[i], &stage_velocities[i]).amax())
                .fold(0.0, f64::max),
            Constraints::Position(hs) => qs
                .iter()
                .map(|q| hs.position_constraint(q).amax())
                .fold(0.0, f64::max),
        };
        let lambda = if m == 0 { DVector::zeros(0) } else { lams[s - 1].clone() };
        let next = VecState {
            t: state.t + h,
            q: q1,
            p: p1,
            v: v1,
            lambda,
        };
        let work = StageWork {
            positions: qs,
            velocities: vs,
            momenta,
            forces: ws,
            multipliers: lams,
            stage_momenta,
            stage_velocities,
        };
        Ok((
            next,
            StepReport {
                solve,
                constraint_residual,
                work,
            },
        ))
    }

    /// Nonholonomic step in Hamiltonian form.
    ///
    /// The constraint force direction is `(∂²H/∂p²)^{-1} ∂Ψ/∂p`, where
    /// `Ψ(q, p) = Φ(q, ∂H/∂p)`. By the chain rule `∂Ψ/∂p = D2Φ g_L^{-1}`, and
    /// the whole direction collapses to `D2Φ` evaluated at the stage velocity.
    pub fn step_nh_hamiltonian(
        &self,
        sys: &dyn HamiltonianSystem,
        state: &VecState,
        h: f64,
    ) -> Result<(VecState, StepReport)> {
        self.tableau.require_lobatto_type()?;
        let violation = sys.constraint(&state.q, &state.v).amax_or_zero();
        if violation > INITIAL_CONSTRAINT_TOL {
            return Err(Error::InconsistentInitialState(violation));
        }
        let s = self.tableau.stages();
        let n = sys.dim();
        let m = sys.n_constraints();
        let (qk, pk) = (&state.q, &state.p);
        let b = self.tableau.primal.b();
        let b_hat = self.tableau.dual.b();

        let constraint_direction = |q: &DVector<f64>, p: &DVector<f64>| -> Result<DMatrix<f64>> {
            if m == 0 {
                return Ok(DMatrix::zeros(n, 0));
            }
            let v = sys.dp_hamiltonian(q, p);
            let g_l = sys.velocity_hessian(q, &v);
            let g_l_inv = invert(&g_l).map_err(Error::Regularity)?;
            let dpsi = sys.constraint_dv(q, &v) * g_l_inv;
            let g_h_inv = invert(&sys.momentum_hessian(q, p)).map_err(Error::Regularity)?;
            Ok(g_h_inv * dpsi.transpose())
        };
        let unpack = |x: &DVector<f64>| {
            let vs = blocks(x, 0, s, n);
            let ps = blocks(x, s * n, s, n);
            let mut lams = vec![state.lambda.clone()];
            lams.extend(blocks(x, 2 * s * n, s - 1, m));
            (vs, ps, lams)
        };
        let forces = |qs: &[DVector<f64>], ps: &[DVector<f64>], lams: &[DVector<f64>]| -> Result<Vec<DVector<f64>>> {
            (0..s)
                .map(|i| Ok(sys.dq_hamiltonian(&qs[i], &ps[i]) - constraint_direction(&qs[i], &ps[i])? * &lams[i]))
                .collect()
        };
        let residual = |x: &DVector<f64>| -> Result<DVector<f64>> {
            let (vs, ps, lams) = unpack(x);
            let qs = self.stage_positions(qk, &vs, h);
            let ws = forces(&qs, &ps, &lams)?;
            let mut parts = Vec::with_capacity(3 * s);
            for i in 0..s {
                parts.push(&vs[i] - sys.dp_hamiltonian(&qs[i], &ps[i]));
            }
            for i in 0..s {
                let target = weighted((0..s).map(|j| self.a_hat(i, j)), &ws, pk, -h);
                parts.push(&ps[i] - target);
            }
            for i in 1..s {
                let p_i = weighted((0..s).map(|j| self.a(i, j)), &ws, pk, -h);
                let v_i = legendre_inverse(sys, &qs[i], &p_i)?;
                parts.push(sys.constraint(&qs[i], &v_i));
            }
            Ok(concat(&parts))
        };

        let mut x0 = DVector::zeros(2 * s * n + (s - 1) * m);
        for i in 0..s {
            x0.rows_mut(i * n, n).copy_from(&state.v);
            x0.rows_mut((s + i) * n, n).copy_from(pk);
        }
        if state.lambda.len() == m {
            for i in 0..s - 1 {
                x0.rows_mut(2 * s * n + i * m, m).copy_from(&state.lambda);
            }
        }
        let (x, solve) = newton_solve(residual, x0, &self.solver)?;
        let (x, solve) = finish(x, solve)?;

        let (vs, ps, lams) = unpack(&x);
        let qs = self.stage_positions(qk, &vs, h);
        let ws = forces(&qs, &ps, &lams)?;
        let q1 = weighted(b.iter().copied(), &vs, qk, h);
        let p1 = weighted(b_hat.iter().copied(), &ws, pk, -h);
        let v1 = legendre_inverse(sys, &q1, &p1)?;
        let stage_momenta: Vec<_> = (0..s)
            .map(|i| weighted((0..s).map(|j| self.a(i, j)), &ws, pk, -h))
            .collect();
        let stage_velocities = (0..s)
            .map(|i| legendre_inverse(sys, &qs[i], &stage_momenta[i]))
            .collect::<Result<Vec<_>>>()?;
        let constraint_residual = (0..s)
            .map(|i| sys.constraint(&qs[i], &stage_velocities[i]).amax_or_zero())
            .fold(0.0, f64::max);
        let lambda = lams[s - 1].clone();
        let next = VecState {
            t: state.t + h,
            q: q1,
            p: p1,
            v: v1,
            lambda,
        };
        let work = StageWork {
            positions: qs,
            velocities: vs,
            momenta: ps,
            forces: ws,
            multipliers: lams,
            stage_momenta,
            stage_velocities,
        };
        Ok((
            next,
            StepReport {
                solve,
                constraint_residual,
                work,
            },
        ))
    }
}

/// `amax` that tolerates empty vectors.
pub(crate) trait AmaxOrZero {
    fn amax_or_zero(&self) -> f64;
}

impl AmaxOrZero for DVector<f64> {
    fn amax_or_zero(&self) -> f64 {
        self.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}
