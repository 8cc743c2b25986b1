//! Partitioned Runge-Kutta-Munthe-Kaas steppers on matrix Lie groups.
//!
//! The unknowns are the algebra stage velocities `H^i` plus multipliers.
//! Stage increments `Ξ^i = h Σ_j a_ij H^j` and the step increment
//! `ξ = h Σ_j b_j H^j` are eliminated, and the stage points are
//! `G^i = g_k τ(Ξ^i)`.
//!
//! The momentum balance is imposed as `M^i` computed two ways: once from the
//! stage momenta `Π^i` and the `ddτ` corrections, once from the coadjoint
//! transport of `μ_k` and the stage forces `N^i`. On an abelian group both
//! reduce to the conjugate-tableau sums of the vector-space steppers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lie_mechanics::{lie_legendre_inverse, LieHamiltonian, LieHolonomic, LieState, LieSystem};
use crate::liegroup::{adjoint, MatrixGroup, Retraction, RETRACTION_RADIUS};
use crate::nlsolve::{invert, newton_solve, SolveReport, SolverConfig};
use crate::prk_vec::{AmaxOrZero, INITIAL_CONSTRAINT_TOL};
use crate::tableau::PartitionedTableau;

/// Converged stage quantities of one Lie-group step.
#[derive(Debug, Clone, Default)]
pub struct LieStageWork {
    /// Stage increments `Ξ^i`.
    pub increments: Vec<DVector<f64>>,
    /// Stage velocities `H^i`.
    pub velocities: Vec<DVector<f64>>,
    /// Forces `N^i`, including constraint forcing.
    pub forces: Vec<DVector<f64>>,
    /// `Π^i = (d^Lτ_{Ξ^i})* D2ℓ`.
    pub momenta: Vec<DVector<f64>>,
    /// `M^i`, from the transport side of the balance.
    pub balance: Vec<DVector<f64>>,
    pub multipliers: Vec<DVector<f64>>,
    /// Stage momenta `μ^i`, empty for the unconstrained and holonomic steppers.
    pub stage_momenta: Vec<DVector<f64>>,
    /// Step increment `ξ_{k,k+1}`.
    pub increment: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct LieStepReport {
    pub solve: SolveReport,
    /// Largest constraint violation over all stages, zero when unconstrained.
    pub constraint_residual: f64,
    pub work: LieStageWork,
}

/// A partitioned tableau, solver settings and a retraction.
#[derive(Debug, Clone)]
pub struct LieIntegrator {
    pub tableau: PartitionedTableau,
    pub solver: SolverConfig,
    pub retraction: Retraction,
}

/// Everything that depends only on `g_k` and the stage velocities.
struct Kinematics {
    increments: Vec<DVector<f64>>,
    points: Vec<DMatrix<f64>>,
    /// `d^Lτ_{Ξ^i}`.
    tangents: Vec<DMatrix<f64>>,
    /// `d^Lτ^{-1}_{−Ξ^i}`.
    pullbacks: Vec<DMatrix<f64>>,
    /// `δ ↦ dd^Lτ_{Ξ^i}(H^i, δ)`.
    curvatures: Vec<DMatrix<f64>>,
    /// Trivialized stage velocities `d^Lτ_{Ξ^i} H^i`.
    velocities: Vec<DVector<f64>>,
    step: DVector<f64>,
    /// `τ(ξ)`.
    shift: DMatrix<f64>,
    /// `d^Lτ^{-1}_{ξ}`.
    step_inverse: DMatrix<f64>,
    /// `d^Lτ^{-1}_{−ξ}`.
    step_pullback: DMatrix<f64>,
    /// `Ad_{τ(ξ)}`.
    step_adjoint: DMatrix<f64>,
}

#[derive(Clone, Copy)]
enum Constraints<'a> {
    Free,
    Velocity,
    Position(&'a dyn LieHolonomic),
}

fn blocks(x: &DVector<f64>, offset: usize, count: usize, len: usize) -> Vec<DVector<f64>> {
    (0..count)
        .map(|i| x.rows(offset + i * len, len).into_owned())
        .collect()
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

fn converged(x: DVector<f64>, rep: SolveReport) -> Result<(DVector<f64>, SolveReport)> {
    if rep.converged {
        Ok((x, rep))
    } else {
        Err(crate::error::SolveError::NotConverged {
            iterations: rep.iterations,
            residual: rep.residual_norm,
        }
        .into())
    }
}

impl LieIntegrator {
    pub fn new(tableau: PartitionedTableau, solver: SolverConfig, retraction: Retraction) -> Self {
        Self {
            tableau,
            solver,
            retraction,
        }
    }

    pub fn lobatto(s: usize, retraction: Retraction) -> Result<Self> {
        Ok(Self::new(PartitionedTableau::lobatto(s)?, SolverConfig::default(), retraction))
    }

    fn a(&self, i: usize, j: usize) -> f64 {
        self.tableau.primal.a()[(i, j)]
    }

    fn b(&self, i: usize) -> f64 {
        self.tableau.primal.b()[i]
    }

    fn kinematics(&self, group: &dyn MatrixGroup, gk: &DMatrix<f64>, hs: &[DVector<f64>], h: f64) -> Result<Kinematics> {
        let s = self.tableau.stages();
        let k = group.algebra_dim();
        let tau = self.retraction;
        let combine = |coeff: &dyn Fn(usize) -> f64| {
            let mut out = DVector::zeros(k);
            for (j, hj) in hs.iter().enumerate() {
                let c = coeff(j);
                if c != 0.0 {
                    out.axpy(h * c, hj, 1.0);
                }
            }
            out
        };
        let increments: Vec<_> = (0..s).map(|i| combine(&|j| self.a(i, j))).collect();
        let step = combine(&|j| self.b(j));
        let mut points = Vec::with_capacity(s);
        let mut tangents = Vec::with_capacity(s);
        let mut pullbacks = Vec::with_capacity(s);
        let mut curvatures = Vec::with_capacity(s);
        let mut velocities = Vec::with_capacity(s);
        for (xi, hi) in increments.iter().zip(hs) {
            points.push(gk * tau.forward(group, xi)?);
            let dt = tau.dtau(group, xi)?;
            velocities.push(&dt * hi);
            tangents.push(dt);
            pullbacks.push(tau.dtau_inv(group, &-xi)?);
            curvatures.push(tau.ddtau(group, xi, hi)?);
        }
        let shift = tau.forward(group, &step)?;
        Ok(Kinematics {
            increments,
            points,
            tangents,
            pullbacks,
            curvatures,
            velocities,
            step_inverse: tau.dtau_inv(group, &step)?,
            step_pullback: tau.dtau_inv(group, &-&step)?,
            step_adjoint: adjoint(group, &shift),
            shift,
            step,
        })
    }

    /// `μ_{k+1} = Ad*_{τ(ξ)}[μ_k + σh Σ_j b_j (d^Lτ^{-1}_{−Ξ^j})* N^j]`.
    fn next_momentum(&self, kin: &Kinematics, mu: &DVector<f64>, forces: &[DVector<f64>], sigma: f64, h: f64) -> DVector<f64> {
        let mut inner = mu.clone();
        for (j, n) in forces.iter().enumerate() {
            inner += kin.pullbacks[j].tr_mul(n) * (sigma * h * self.b(j));
        }
        kin.step_adjoint.tr_mul(&inner)
    }

    /// `μ^i = Ad*_{τ(Ξ^i)}[μ_k + σh Σ_j a_ij (d^Lτ^{-1}_{−Ξ^j})* N^j]`.
    fn stage_momentum(
        &self,
        group: &dyn MatrixGroup,
        kin: &Kinematics,
        i: usize,
        mu: &DVector<f64>,
        forces: &[DVector<f64>],
        sigma: f64,
        h: f64,
    ) -> Result<DVector<f64>> {
        let mut inner = mu.clone();
        for (j, n) in forces.iter().enumerate() {
            let c = self.a(i, j);
            if c != 0.0 {
                inner += kin.pullbacks[j].tr_mul(n) * (sigma * h * c);
            }
        }
        let g = self.retraction.forward(group, &kin.increments[i])?;
        Ok(adjoint(group, &g).tr_mul(&inner))
    }

    /// The two sides of the `M^i` balance.
    fn balance(
        &self,
        kin: &Kinematics,
        mu: &DVector<f64>,
        momenta: &[DVector<f64>],
        forces: &[DVector<f64>],
        sigma: f64,
        h: f64,
    ) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let s = self.tableau.stages();
        let corrections: Vec<_> = (0..s).map(|j| kin.curvatures[j].tr_mul(&momenta[j])).collect();
        let transported: Vec<_> = (0..s).map(|j| kin.pullbacks[j].tr_mul(&forces[j])).collect();
        let step_transported: Vec<_> = (0..s).map(|j| kin.step_pullback.tr_mul(&forces[j])).collect();
        let mut from_momenta = Vec::with_capacity(s);
        let mut from_transport = Vec::with_capacity(s);
        for i in 0..s {
            let bi = self.b(i);
            let mut left = momenta[i].clone();
            let mut right = mu.clone();
            for j in 0..s {
                let ratio = self.a(j, i) / bi;
                let bj = self.b(j);
                if ratio != 0.0 {
                    left += &corrections[j] * (h * bj * ratio);
                    right -= &step_transported[j] * (sigma * h * bj * ratio);
                }
                right += &transported[j] * (sigma * h * bj);
            }
            from_momenta.push(kin.step_inverse.tr_mul(&left));
            from_transport.push(kin.step_adjoint.tr_mul(&right));
        }
        (from_momenta, from_transport)
    }

    fn guard(&self, step: &DVector<f64>) -> Result<()> {
        let norm = step.norm();
        if norm > RETRACTION_RADIUS {
            Err(Error::StepTooLarge(norm))
        } else {
            Ok(())
        }
    }

    /// Unconstrained variational RKMK step.
    pub fn step_vprkmk(&self, sys: &dyn LieSystem, state: &LieState, h: f64) -> Result<(LieState, LieStepReport)> {
        self.lagrangian_step(sys, Constraints::Free, state, h)
    }

    /// Step with position constraints `Φ(g) = 0`, closed by tangency at the
    /// new point.
    pub fn step_lie_holonomic(
        &self,
        sys: &dyn LieHolonomic,
        state: &LieState,
        h: f64,
    ) -> Result<(LieState, LieStepReport)> {
        self.tableau.require_lobatto_type()?;
        let violation = sys.position_constraint(&state.g).amax_or_zero();
        if violation > INITIAL_CONSTRAINT_TOL {
            return Err(Error::InconsistentInitialState(violation));
        }
        self.lagrangian_step(sys, Constraints::Position(sys), state, h)
    }

    /// Nonholonomic step in Lagrangian form.
    pub fn step_nh_lie(&self, sys: &dyn LieSystem, state: &LieState, h: f64) -> Result<(LieState, LieStepReport)> {
        self.tableau.require_lobatto_type()?;
        let violation = sys.constraint(&state.g, &state.eta).amax_or_zero();
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
        sys: &dyn LieSystem,
        mode: Constraints<'_>,
        state: &LieState,
        h: f64,
    ) -> Result<(LieState, LieStepReport)> {
        let group = sys.group();
        let s = self.tableau.stages();
        let k = group.algebra_dim();
        let (m, free_multipliers) = match mode {
            Constraints::Free => (0, 0),
            Constraints::Velocity => (sys.n_constraints(), s - 1),
            Constraints::Position(hs) => (hs.n_position_constraints(), s),
        };
        let (gk, muk) = (&state.g, &state.mu);

        let multipliers = |x: &DVector<f64>| -> Vec<DVector<f64>> {
            match mode {
                Constraints::Free => vec![DVector::zeros(0); s],
                Constraints::Velocity => {
                    let mut out = vec![state.lambda.clone()];
                    out.extend(blocks(x, s * k, s - 1, m));
                    out
                }
                Constraints::Position(_) => blocks(x, s * k, s, m),
            }
        };
        let stage_terms = |kin: &Kinematics, lams: &[DVector<f64>]| -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
            let mut forces = Vec::with_capacity(s);
            let mut momenta = Vec::with_capacity(s);
            for i in 0..s {
                let (g, eta) = (&kin.points[i], &kin.velocities[i]);
                let mut f = sys.dg_lagrangian(g, eta);
                match mode {
                    Constraints::Free => {}
                    Constraints::Velocity => f += sys.constraint_deta(g, eta).tr_mul(&lams[i]),
                    Constraints::Position(hs) => f += hs.position_constraint_gradient(g).tr_mul(&lams[i]),
                }
                forces.push(kin.tangents[i].tr_mul(&f));
                momenta.push(kin.tangents[i].tr_mul(&sys.deta_lagrangian(g, eta)));
            }
            (forces, momenta)
        };

        let residual = |x: &DVector<f64>| -> Result<DVector<f64>> {
            let hs = blocks(x, 0, s, k);
            let lams = multipliers(x);
            let kin = self.kinematics(group, gk, &hs, h)?;
            let (forces, momenta) = stage_terms(&kin, &lams);
            let (left, right) = self.balance(&kin, muk, &momenta, &forces, 1.0, h);
            let mut parts: Vec<_> = left.iter().zip(&right).map(|(l, r)| l - r).collect();
            match mode {
                Constraints::Free => {}
                Constraints::Velocity => {
                    for i in 1..s {
                        let mu_i = self.stage_momentum(group, &kin, i, muk, &forces, 1.0, h)?;
                        let eta_i = lie_legendre_inverse(sys, &kin.points[i], &mu_i)?;
                        parts.push(sys.constraint(&kin.points[i], &eta_i));
                    }
                }
                Constraints::Position(hs) => {
                    for g in kin.points.iter().skip(1) {
                        parts.push(hs.position_constraint(g));
                    }
                    let g1 = gk * &kin.shift;
                    let mu1 = self.next_momentum(&kin, muk, &forces, 1.0, h);
                    let eta1 = lie_legendre_inverse(sys, &g1, &mu1)?;
                    parts.push(hs.position_constraint_gradient(&g1) * eta1);
                }
            }
            Ok(concat(&parts))
        };

        let mut x0 = DVector::zeros(s * k + free_multipliers * m);
        for i in 0..s {
            x0.rows_mut(i * k, k).copy_from(&state.eta);
        }
        if state.lambda.len() == m {
            for i in 0..free_multipliers {
                x0.rows_mut(s * k + i * m, m).copy_from(&state.lambda);
            }
        }
        let (x, solve) = newton_solve(residual, x0, &self.solver)?;
        let (x, solve) = converged(x, solve)?;

        let hs = blocks(&x, 0, s, k);
        let lams = multipliers(&x);
        let kin = self.kinematics(group, gk, &hs, h)?;
        self.guard(&kin.step)?;
        let (forces, momenta) = stage_terms(&kin, &lams);
        let (_, balance) = self.balance(&kin, muk, &momenta, &forces, 1.0, h);
        let g1 = gk * &kin.shift;
        let mu1 = self.next_momentum(&kin, muk, &forces, 1.0, h);
        let eta1 = lie_legendre_inverse(sys, &g1, &mu1)?;
        let (stage_momenta, constraint_residual) = match mode {
            Constraints::Free => (Vec::new(), 0.0),
            Constraints::Velocity => {
                let mus = (0..s)
                    .map(|i| self.stage_momentum(group, &kin, i, muk, &forces, 1.0, h))
                    .collect::<Result<Vec<_>>>()?;
                let mut worst: f64 = 0.0;
                for (g, mu_i) in kin.points.iter().zip(&mus) {
                    let eta_i = lie_legendre_inverse(sys, g, mu_i)?;
                    worst = worst.max(sys.constraint(g, &eta_i).amax_or_zero());
                }
                (mus, worst)
            }
            Constraints::Position(hs) => (
                Vec::new(),
                kin.points
                    .iter()
                    .map(|g| hs.position_constraint(g).amax_or_zero())
                    .fold(0.0, f64::max),
            ),
        };
        let lambda = if m == 0 { DVector::zeros(0) } else { lams[s - 1].clone() };
        let next = LieState {
            t: state.t + h,
            g: g1,
            eta: eta1,
            mu: mu1,
            lambda,
        };
        let work = LieStageWork {
            increments: kin.increments,
            velocities: hs,
            forces,
            momenta,
            balance,
            multipliers: lams,
            stage_momenta,
            increment: kin.step,
        };
        Ok((
            next,
            LieStepReport {
                solve,
                constraint_residual,
                work,
            },
        ))
    }

    /// Nonholonomic step in Hamiltonian form.
    ///
    /// Besides `H^i` and the multipliers, the unknowns include the trivialized
    /// stage momenta `P^i`, tied to the velocities by
    /// `d^Lτ_{Ξ^i} H^i = D2𝒽(G^i, P^i)`. The constraint force direction is
    /// `g_𝒽^{-1} D2ψᵀ` with `ψ(g, μ) = φ(g, D2𝒽(g, μ))`.
    pub fn step_nh_lie_hamiltonian(
        &self,
        sys: &dyn LieHamiltonian,
        state: &LieState,
        h: f64,
    ) -> Result<(LieState, LieStepReport)> {
        self.tableau.require_lobatto_type()?;
        let violation = sys.constraint(&state.g, &state.eta).amax_or_zero();
        if violation > INITIAL_CONSTRAINT_TOL {
            return Err(Error::InconsistentInitialState(violation));
        }
        let group = sys.group();
        let s = self.tableau.stages();
        let k = group.algebra_dim();
        let m = sys.n_constraints();
        let (gk, muk) = (&state.g, &state.mu);
        let psi = |g: &DMatrix<f64>, mu: &DVector<f64>| sys.constraint(g, &sys.dmu_hamiltonian(g, mu));

        let constraint_direction = |g: &DMatrix<f64>, mu: &DVector<f64>| -> Result<DMatrix<f64>> {
            if m == 0 {
                return Ok(DMatrix::zeros(k, 0));
            }
            let g_h = sys.momentum_hessian(g, mu);
            let dpsi = sys.constraint_deta(g, &sys.dmu_hamiltonian(g, mu)) * &g_h;
            let g_h_inv = invert(&g_h).map_err(Error::Regularity)?;
            Ok(g_h_inv * dpsi.transpose())
        };
        let unpack = |x: &DVector<f64>| {
            let hs = blocks(x, 0, s, k);
            let ps = blocks(x, s * k, s, k);
            let mut lams = vec![state.lambda.clone()];
            lams.extend(blocks(x, 2 * s * k, s - 1, m));
            (hs, ps, lams)
        };
        let stage_terms = |kin: &Kinematics, ps: &[DVector<f64>], lams: &[DVector<f64>]| -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
            let mut forces = Vec::with_capacity(s);
            let mut momenta = Vec::with_capacity(s);
            for i in 0..s {
                let (g, p) = (&kin.points[i], &ps[i]);
                let f = sys.dg_hamiltonian(g, p) - constraint_direction(g, p)? * &lams[i];
                forces.push(kin.tangents[i].tr_mul(&f));
                momenta.push(kin.tangents[i].tr_mul(p));
            }
            Ok((forces, momenta))
        };

        let residual = |x: &DVector<f64>| -> Result<DVector<f64>> {
            let (hs, ps, lams) = unpack(x);
            let kin = self.kinematics(group, gk, &hs, h)?;
            let (forces, momenta) = stage_terms(&kin, &ps, &lams)?;
            let mut parts = Vec::with_capacity(3 * s);
            for i in 0..s {
                parts.push(&kin.velocities[i] - sys.dmu_hamiltonian(&kin.points[i], &ps[i]));
            }
            let (left, right) = self.balance(&kin, muk, &momenta, &forces, -1.0, h);
            parts.extend(left.iter().zip(&right).map(|(l, r)| l - r));
            for i in 1..s {
                let mu_i = self.stage_momentum(group, &kin, i, muk, &forces, -1.0, h)?;
                parts.push(psi(&kin.points[i], &mu_i));
            }
            Ok(concat(&parts))
        };

        let mut x0 = DVector::zeros(2 * s * k + (s - 1) * m);
        for i in 0..s {
            x0.rows_mut(i * k, k).copy_from(&state.eta);
            x0.rows_mut((s + i) * k, k).copy_from(muk);
        }
        if state.lambda.len() == m {
            for i in 0..s - 1 {
                x0.rows_mut(2 * s * k + i * m, m).copy_from(&state.lambda);
            }
        }
        let (x, solve) = newton_solve(residual, x0, &self.solver)?;
        let (x, solve) = converged(x, solve)?;

        let (hs, ps, lams) = unpack(&x);
        let kin = self.kinematics(group, gk, &hs, h)?;
        self.guard(&kin.step)?;
        let (forces, momenta) = stage_terms(&kin, &ps, &lams)?;
        let (_, balance) = self.balance(&kin, muk, &momenta, &forces, -1.0, h);
        let g1 = gk * &kin.shift;
        let mu1 = self.next_momentum(&kin, muk, &forces, -1.0, h);
        let eta1 = sys.dmu_hamiltonian(&g1, &mu1);
        let stage_momenta = (0..s)
            .map(|i| self.stage_momentum(group, &kin, i, muk, &forces, -1.0, h))
            .collect::<Result<Vec<_>>>()?;
        let constraint_residual = kin
            .points
            .iter()
            .zip(&stage_momenta)
            .map(|(g, mu)| psi(g, mu).amax_or_zero())
            .fold(0.0, f64::max);
        let next = LieState {
            t: state.t + h,
            g: g1,
            eta: eta1,
            mu: mu1,
            lambda: lams[s - 1].clone(),
        };
        let work = LieStageWork {
            increments: kin.increments,
            velocities: hs,
            forces,
            momenta,
            balance,
            multipliers: lams,
            stage_momenta,
            increment: kin.step,
        };
        Ok((
            next,
            LieStepReport {
                solve,
                constraint_residual,
                work,
            },
        ))
    }
}
