//! Left-trivialized mechanical systems on matrix Lie groups.
//!
//! A state is `(g, η)` with `ġ = g η`. Derivatives with respect to `g` are
//! always left-trivialized: `D1ℓ` is the covector `ζ ↦ d/dε ℓ(g exp(εζ), η)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::liegroup::{ad, MatrixGroup, Translations};
use crate::mechanics::{central_jacobian, invert_fibre, relative_gap, HamiltonianSystem, HolonomicSystem, VecSystem};
use crate::nlsolve::{invert, Lu};

const GROUP_STEP: f64 = 1e-6;

/// Central-difference left-trivialized derivative of `f: G → ℝ^rows`,
/// returned as a `rows × k` matrix.
pub fn trivialized_jacobian(
    group: &dyn MatrixGroup,
    g: &DMatrix<f64>,
    rows: usize,
    f: impl Fn(&DMatrix<f64>) -> DVector<f64>,
) -> DMatrix<f64> {
    let k = group.algebra_dim();
    let mut jac = DMatrix::zeros(rows, k);
    for j in 0..k {
        let mut e = DVector::zeros(k);
        e[j] = GROUP_STEP;
        let plus = f(&(g * group.exp(&e)));
        let minus = f(&(g * group.exp(&-e)));
        jac.set_column(j, &((plus - minus) / (2.0 * GROUP_STEP)));
    }
    jac
}

/// A reduced Lagrangian `ℓ(g, η)` with trivialized constraints `φ(g, η)`.
///
/// Constraint forces enter the trivialized equations as `+ D2φᵀ λ`.
pub trait LieSystem: Send + Sync {
    fn group(&self) -> &dyn MatrixGroup;

    fn n_constraints(&self) -> usize {
        0
    }

    fn lagrangian(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> f64;

    /// Left-trivialized `D1ℓ`.
    fn dg_lagrangian(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> DVector<f64>;

    /// `D2ℓ`, the trivialized Legendre transform.
    fn deta_lagrangian(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> DVector<f64>;

    /// `∂²ℓ/∂η²`, central differences by default.
    fn velocity_hessian(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> DMatrix<f64> {
        let k = self.group().algebra_dim();
        central_jacobian(eta, k, |w| self.deta_lagrangian(g, w))
    }

    fn constraint(&self, _g: &DMatrix<f64>, _eta: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }

    /// `D2φ`, an `m × k` matrix.
    fn constraint_deta(&self, _g: &DMatrix<f64>, _eta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(0, self.group().algebra_dim())
    }

    /// Left-trivialized `D1φ`, central differences by default.
    fn constraint_dg(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> DMatrix<f64> {
        trivialized_jacobian(self.group(), g, self.n_constraints(), |x| self.constraint(x, eta))
    }
}

/// The reduced Hamiltonian `𝒽(g, μ)` of a regular [`LieSystem`].
pub trait LieHamiltonian: LieSystem {
    fn hamiltonian(&self, g: &DMatrix<f64>, mu: &DVector<f64>) -> f64;
    /// Left-trivialized `D1𝒽`.
    fn dg_hamiltonian(&self, g: &DMatrix<f64>, mu: &DVector<f64>) -> DVector<f64>;
    fn dmu_hamiltonian(&self, g: &DMatrix<f64>, mu: &DVector<f64>) -> DVector<f64>;

    /// `∂²𝒽/∂μ²`, central differences by default.
    fn momentum_hessian(&self, g: &DMatrix<f64>, mu: &DVector<f64>) -> DMatrix<f64> {
        let k = self.group().algebra_dim();
        central_jacobian(mu, k, |w| self.dmu_hamiltonian(g, w))
    }
}

/// Position constraints `Φ(g) = 0` on the group.
pub trait LieHolonomic: LieSystem {
    fn n_position_constraints(&self) -> usize;
    fn position_constraint(&self, g: &DMatrix<f64>) -> DVector<f64>;

    /// `L*_g DΦ(g)`, an `m × k` matrix; central differences by default.
    fn position_constraint_gradient(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        trivialized_jacobian(self.group(), g, self.n_position_constraints(), |x| self.position_constraint(x))
    }
}

/// One point of a discrete flow on a Lie group.
#[derive(Debug, Clone, PartialEq)]
pub struct LieState {
    pub t: f64,
    pub g: DMatrix<f64>,
    /// Trivialized velocity.
    pub eta: DVector<f64>,
    /// Trivialized momentum `D2ℓ(g, η)`.
    pub mu: DVector<f64>,
    pub lambda: DVector<f64>,
}

impl LieState {
    /// Builds a state from `(g, η)` with `λ = 0`.
    pub fn from_velocity(sys: &dyn LieSystem, t: f64, g: DMatrix<f64>, eta: DVector<f64>) -> Self {
        let mu = sys.deta_lagrangian(&g, &eta);
        Self {
            t,
            g,
            eta,
            mu,
            lambda: DVector::zeros(sys.n_constraints()),
        }
    }

    /// Like [`Self::from_velocity`], with `λ` from [`lie_consistent_multiplier`].
    pub fn consistent(sys: &dyn LieSystem, t: f64, g: DMatrix<f64>, eta: DVector<f64>) -> Result<Self> {
        let lambda = lie_consistent_multiplier(sys, &g, &eta)?;
        Ok(Self {
            lambda,
            ..Self::from_velocity(sys, t, g, eta)
        })
    }
}

/// Solves `D2ℓ(g, η) = μ` for `η`, starting from `guess`.
pub fn lie_legendre_inverse_from(
    sys: &dyn LieSystem,
    g: &DMatrix<f64>,
    mu: &DVector<f64>,
    guess: DVector<f64>,
) -> Result<DVector<f64>> {
    invert_fibre(mu, guess, |w| sys.deta_lagrangian(g, w), |w| sys.velocity_hessian(g, w))
}

pub fn lie_legendre_inverse(sys: &dyn LieSystem, g: &DMatrix<f64>, mu: &DVector<f64>) -> Result<DVector<f64>> {
    lie_legendre_inverse_from(sys, g, mu, mu.clone())
}

/// `E = ⟨D2ℓ, η⟩ − ℓ`.
pub fn lie_energy(sys: &dyn LieSystem, g: &DMatrix<f64>, eta: &DVector<f64>) -> f64 {
    sys.deta_lagrangian(g, eta).dot(eta) - sys.lagrangian(g, eta)
}

/// The multiplier of the continuous trivialized equations
/// `d/dt D2ℓ = ad*_η D2ℓ + D1ℓ + D2φᵀ λ`, `ġ = g η`, at a consistent state.
pub fn lie_consistent_multiplier(sys: &dyn LieSystem, g: &DMatrix<f64>, eta: &DVector<f64>) -> Result<DVector<f64>> {
    let m = sys.n_constraints();
    if m == 0 {
        return Ok(DVector::zeros(0));
    }
    let group = sys.group();
    let mu = sys.deta_lagrangian(g, eta);
    let hess = Lu::new(&sys.velocity_hessian(g, eta)).map_err(Error::Regularity)?;
    // Change of D2ℓ along the flow of g at frozen η.
    let drift_g = trivialized_jacobian(group, g, group.algebra_dim(), |x| sys.deta_lagrangian(x, eta)) * eta;
    let force = ad(group, eta).tr_mul(&mu) + sys.dg_lagrangian(g, eta) - drift_g;
    let d2phi = sys.constraint_deta(g, eta);
    let drift = sys.constraint_dg(g, eta) * eta + &d2phi * hess.solve(&force);
    let c = &d2phi * hess.solve_matrix(&d2phi.transpose());
    let inv = invert(&c).map_err(|_| Error::Compatibility)?;
    Ok(-(inv * drift))
}

fn trivialized_gradient(group: &dyn MatrixGroup, g: &DMatrix<f64>, f: impl Fn(&DMatrix<f64>) -> f64) -> DMatrix<f64> {
    trivialized_jacobian(group, g, 1, |x| DVector::from_element(1, f(x))).transpose()
}

fn column(x: DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(x.len(), 1, x.as_slice())
}

/// Largest relative disagreement between the analytic derivatives of `ℓ`
/// and `φ` and central differences, along `g exp(εe_j)` for the group slot.
pub fn lie_derivative_defect(sys: &dyn LieSystem, g: &DMatrix<f64>, eta: &DVector<f64>) -> f64 {
    let group = sys.group();
    let (k, m) = (group.algebra_dim(), sys.n_constraints());
    let scalar = |x: &DVector<f64>| DVector::from_element(1, sys.lagrangian(g, x));
    [
        relative_gap(&column(sys.dg_lagrangian(g, eta)), &trivialized_gradient(group, g, |x| sys.lagrangian(x, eta))),
        relative_gap(&column(sys.deta_lagrangian(g, eta)), &central_jacobian(eta, 1, scalar).transpose()),
        relative_gap(&sys.velocity_hessian(g, eta), &central_jacobian(eta, k, |w| sys.deta_lagrangian(g, w))),
        relative_gap(&sys.constraint_deta(g, eta), &central_jacobian(eta, m, |w| sys.constraint(g, w))),
        relative_gap(&sys.constraint_dg(g, eta), &trivialized_jacobian(group, g, m, |x| sys.constraint(x, eta))),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// As [`lie_derivative_defect`] for the reduced Hamiltonian, including the
/// check that `𝒽(g, D2ℓ) = E(g, η)`.
pub fn lie_hamiltonian_defect(sys: &dyn LieHamiltonian, g: &DMatrix<f64>, eta: &DVector<f64>) -> f64 {
    let group = sys.group();
    let k = group.algebra_dim();
    let mu = sys.deta_lagrangian(g, eta);
    let e = lie_energy(sys, g, eta);
    let scalar = |x: &DVector<f64>| DVector::from_element(1, sys.hamiltonian(g, x));
    [
        relative_gap(&column(sys.dg_hamiltonian(g, &mu)), &trivialized_gradient(group, g, |x| sys.hamiltonian(x, &mu))),
        relative_gap(&column(sys.dmu_hamiltonian(g, &mu)), &central_jacobian(&mu, 1, scalar).transpose()),
        relative_gap(&sys.momentum_hessian(g, &mu), &central_jacobian(&mu, k, |w| sys.dmu_hamiltonian(g, w))),
        (sys.hamiltonian(g, &mu) - e).abs() / e.abs().max(1.0),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// As [`lie_derivative_defect`] for position constraints.
pub fn lie_position_constraint_defect(sys: &dyn LieHolonomic, g: &DMatrix<f64>) -> f64 {
    let numeric = trivialized_jacobian(sys.group(), g, sys.n_position_constraints(), |x| sys.position_constraint(x));
    relative_gap(&sys.position_constraint_gradient(g), &numeric)
}

/// A vector-space system viewed on the abelian group of translations.
///
/// Every retraction on this group is the identity in coordinates, so the
/// Lie steppers applied to a `FlatLie` reproduce the vector-space steppers.
#[derive(Debug, Clone)]
pub struct FlatLie<S> {
    pub inner: S,
    group: Translations,
}

impl<S: VecSystem> FlatLie<S> {
    pub fn new(inner: S) -> Self {
        let group = Translations { k: inner.dim() };
        Self { inner, group }
    }

    /// The translation vector of a group element.
    pub fn position(&self, g: &DMatrix<f64>) -> DVector<f64> {
        let n = self.group.k;
        g.view((0, n), (n, 1)).column(0).into_owned()
    }

    /// The group element translating by `q`.
    pub fn element(&self, q: &DVector<f64>) -> DMatrix<f64> {
        self.group.exp(q)
    }
}

impl<S: VecSystem> LieSystem for FlatLie<S> {
    fn group(&self) -> &dyn MatrixGroup {
        &self.group
    }
    fn n_constraints(&self) -> usize {
        self.inner.n_constraints()
    }
    fn lagrangian(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> f64 {
        self.inner.lagrangian(&self.position(g), eta)
    }
    fn dg_lagrangian(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> DVector<f64> {
        self.inner.dq_lagrangian(&self.position(g), eta)
    }
    fn deta_lagrangian(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> DVector<f64> {
        self.inner.dv_lagrangian(&self.position(g), eta)
    }
    fn velocity_hessian(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> DMatrix<f64> {
        self.inner.velocity_hessian(&self.position(g), eta)
    }
    fn constraint(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> DVector<f64> {
        self.inner.constraint(&self.position(g), eta)
    }
    fn constraint_deta(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> DMatrix<f64> {
        self.inner.constraint_dv(&self.position(g), eta)
    }
    fn constraint_dg(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> DMatrix<f64> {
        self.inner.constraint_dq(&self.position(g), eta)
    }
}

impl<S: HamiltonianSystem> LieHamiltonian for FlatLie<S> {
    fn hamiltonian(&self, g: &DMatrix<f64>, mu: &DVector<f64>) -> f64 {
        self.inner.hamiltonian(&self.position(g), mu)
    }
    fn dg_hamiltonian(&self, g: &DMatrix<f64>, mu: &DVector<f64>) -> DVector<f64> {
        self.inner.dq_hamiltonian(&self.position(g), mu)
    }
    fn dmu_hamiltonian(&self, g: &DMatrix<f64>, mu: &DVector<f64>) -> DVector<f64> {
        self.inner.dp_hamiltonian(&self.position(g), mu)
    }
    fn momentum_hessian(&self, g: &DMatrix<f64>, mu: &DVector<f64>) -> DMatrix<f64> {
        self.inner.momentum_hessian(&self.position(g), mu)
    }
}

impl<S: HolonomicSystem> LieHolonomic for FlatLie<S> {
    fn n_position_constraints(&self) -> usize {
        self.inner.n_position_constraints()
    }
    fn position_constraint(&self, g: &DMatrix<f64>) -> DVector<f64> {
        self.inner.position_constraint(&self.position(g))
    }
    fn position_constraint_gradient(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        self.inner.position_constraint_jacobian(&self.position(g))
    }
}
