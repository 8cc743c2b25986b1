use nalgebra::{dvector, DMatrix, DVector, Vector3};

use crate::lie_mechanics::{LieHamiltonian, LieSystem};
use crate::liegroup::{MatrixGroup, ProductGroup, Se2, So3};

/// Vertical disc on `SE(2)` tied to the origin by a spring, rolling without
/// sideways slip: `φ = v₂` in body coordinates `(v₁, v₂, ω)`.
#[derive(Debug, Clone, Copy)]
pub struct Unicycle {
    pub mass: f64,
    pub inertia: f64,
}

impl Default for Unicycle {
    fn default() -> Self {
        Self { mass: 1.0, inertia: 1.0 }
    }
}

fn planar_pose(g: &DMatrix<f64>) -> (f64, f64, f64, f64) {
    (g[(0, 2)], g[(1, 2)], g[(0, 0)], g[(1, 0)])
}

impl Unicycle {
    /// `(x, y, θ)` and body velocity `(v₁, v₂, ω)`.
    pub fn initial_state() -> (DMatrix<f64>, DVector<f64>) {
        (Self::pose(1.0, 0.5, 0.3), dvector![0.5, 0.0, 1.0])
    }

    pub fn pose(x: f64, y: f64, theta: f64) -> DMatrix<f64> {
        let (c, s) = (theta.cos(), theta.sin());
        DMatrix::from_row_slice(3, 3, &[c, -s, x, s, c, y, 0.0, 0.0, 1.0])
    }

    /// Body velocity of a spatial velocity `(v_x, v_y, v_θ)` at heading `θ`.
    pub fn body_velocity(theta: f64, spatial: &DVector<f64>) -> DVector<f64> {
        let (c, s) = (theta.cos(), theta.sin());
        dvector![c * spatial[0] + s * spatial[1], -s * spatial[0] + c * spatial[1], spatial[2]]
    }

    /// The untrivialized constraint `v_y cos θ − v_x sin θ`.
    pub fn spatial_constraint(theta: f64, spatial: &DVector<f64>) -> f64 {
        spatial[1] * theta.cos() - spatial[0] * theta.sin()
    }

    fn masses(&self) -> [f64; 3] {
        [self.mass, self.mass, self.inertia]
    }

    /// Gradient of `½(x² + y²)` pulled back to the body frame.
    fn spring_force(g: &DMatrix<f64>) -> DVector<f64> {
        let (x, y, c, s) = planar_pose(g);
        dvector![c * x + s * y, -s * x + c * y, 0.0]
    }
}

impl LieSystem for Unicycle {
    fn group(&self) -> &dyn MatrixGroup {
        &Se2
    }
    fn n_constraints(&self) -> usize {
        1
    }
    fn lagrangian(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> f64 {
        let (x, y, _, _) = planar_pose(g);
        let m = self.masses();
        0.5 * (0..3).map(|i| m[i] * eta[i] * eta[i]).sum::<f64>() - 0.5 * (x * x + y * y)
    }
    fn dg_lagrangian(&self, g: &DMatrix<f64>, _eta: &DVector<f64>) -> DVector<f64> {
        -Self::spring_force(g)
    }
    fn deta_lagrangian(&self, _g: &DMatrix<f64>, eta: &DVector<f64>) -> DVector<f64> {
        let m = self.masses();
        DVector::from_fn(3, |i, _| m[i] * eta[i])
    }
    fn velocity_hessian(&self, _g: &DMatrix<f64>, _eta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(&self.masses()))
    }
    fn constraint(&self, _g: &DMatrix<f64>, eta: &DVector<f64>) -> DVector<f64> {
        dvector![eta[1]]
    }
    fn constraint_deta(&self, _g: &DMatrix<f64>, _eta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0])
    }
    fn constraint_dg(&self, _g: &DMatrix<f64>, _eta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(1, 3)
    }
}

impl LieHamiltonian for Unicycle {
    fn hamiltonian(&self, g: &DMatrix<f64>, mu: &DVector<f64>) -> f64 {
        let (x, y, _, _) = planar_pose(g);
        let m = self.masses();
        0.5 * (0..3).map(|i| mu[i] * mu[i] / m[i]).sum::<f64>() + 0.5 * (x * x + y * y)
    }
    fn dg_hamiltonian(&self, g: &DMatrix<f64>, _mu: &DVector<f64>) -> DVector<f64> {
        Self::spring_force(g)
    }
    fn dmu_hamiltonian(&self, _g: &DMatrix<f64>, mu: &DVector<f64>) -> DVector<f64> {
        let m = self.masses();
        DVector::from_fn(3, |i, _| mu[i] / m[i])
    }
    fn momentum_hessian(&self, _g: &DMatrix<f64>, _mu: &DVector<f64>) -> DMatrix<f64> {
        let m = self.masses();
        DMatrix::from_diagonal(&DVector::from_fn(3, |i, _| 1.0 / m[i]))
    }
}

/// A ball of radius `r` rolling on a table turning at rate `Ω`.
///
/// The configuration is `(R, x, y) ∈ SO(3) × ℝ²` with algebra coordinates
/// `(ω_ξ, ω_η, ω_ζ, v_x, v_y)`, the angular velocity in the body frame.
/// `a`, `b`, `c` are the moments of inertia divided by `m r²`.
#[derive(Debug)]
pub struct BallOnTurntable {
    pub radius: f64,
    pub spin: f64,
    pub inertia: [f64; 3],
    /// Coefficient of the `Ω²(x² + y²)` term of the moving energy.
    pub moving_energy_factor: f64,
    group: ProductGroup,
}

impl Default for BallOnTurntable {
    fn default() -> Self {
        Self::new(1.0, 1.0, [0.4; 3])
    }
}

impl BallOnTurntable {
    pub fn new(radius: f64, spin: f64, inertia: [f64; 3]) -> Self {
        Self {
            radius,
            spin,
            inertia,
            moving_energy_factor: 1.0,
            group: ProductGroup::so3_r2(),
        }
    }

    /// Element of `SO(3) × ℝ²` with the given rotation and table position.
    pub fn element(&self, rotation: &DMatrix<f64>, x: f64, y: f64) -> DMatrix<f64> {
        let mut g = DMatrix::identity(6, 6);
        g.view_mut((0, 0), (3, 3)).copy_from(rotation);
        g[(3, 5)] = x;
        g[(4, 5)] = y;
        g
    }

    pub fn position(g: &DMatrix<f64>) -> (f64, f64) {
        (g[(3, 5)], g[(4, 5)])
    }

    /// Identity rotation at `(0.5, 0.2)`, `ω = (0.3, −0.2, 0.5)`, with the
    /// linear velocity fixed by the constraints.
    pub fn initial_state(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (x, y) = (0.5, 0.2);
        let w = [0.3, -0.2, 0.5];
        let vx = self.radius * w[1] - self.spin * y;
        let vy = self.spin * x - self.radius * w[0];
        (self.element(&DMatrix::identity(3, 3), x, y), dvector![w[0], w[1], w[2], vx, vy])
    }

    fn weights(&self) -> [f64; 5] {
        let r2 = self.radius * self.radius;
        let [a, b, c] = self.inertia;
        [r2 * a, r2 * b, r2 * c, 1.0, 1.0]
    }

    /// `ω_ζ`, `r ω_ξ − Ω x / (1 + a)` and `r ω_η − Ω y / (1 + a)`.
    ///
    /// These are conserved when `a = b = c`.
    pub fn linear_integrals(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> [f64; 3] {
        let (x, y) = Self::position(g);
        let k = self.spin / (1.0 + self.inertia[0]);
        [eta[2], self.radius * eta[0] - k * x, self.radius * eta[1] - k * y]
    }

    pub fn moving_energy(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> f64 {
        let (x, y) = Self::position(g);
        let (r, w) = (self.radius, self.spin);
        let a = self.inertia[0];
        0.5 * (eta[3] * eta[3] + eta[4] * eta[4])
            + 0.5 * a * r * r * (eta[0] * eta[0] + eta[1] * eta[1] + eta[2] * eta[2])
            + r * w * (x * eta[0] + y * eta[1])
            - self.moving_energy_factor * w * w * (x * x + y * y)
    }
}

impl LieSystem for BallOnTurntable {
    fn group(&self) -> &dyn MatrixGroup {
        &self.group
    }
    fn n_constraints(&self) -> usize {
        2
    }
    fn lagrangian(&self, _g: &DMatrix<f64>, eta: &DVector<f64>) -> f64 {
        let w = self.weights();
        0.5 * (0..5).map(|i| w[i] * eta[i] * eta[i]).sum::<f64>()
    }
    fn dg_lagrangian(&self, _g: &DMatrix<f64>, _eta: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(5)
    }
    fn deta_lagrangian(&self, _g: &DMatrix<f64>, eta: &DVector<f64>) -> DVector<f64> {
        let w = self.weights();
        DVector::from_fn(5, |i, _| w[i] * eta[i])
    }
    fn velocity_hessian(&self, _g: &DMatrix<f64>, _eta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(&self.weights()))
    }
    fn constraint(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> DVector<f64> {
        let (x, y) = Self::position(g);
        let (r, w) = (self.radius, self.spin);
        dvector![eta[3] + w * y - r * eta[1], eta[4] - w * x + r * eta[0]]
    }
    fn constraint_deta(&self, _g: &DMatrix<f64>, _eta: &DVector<f64>) -> DMatrix<f64> {
        let r = self.radius;
        DMatrix::from_row_slice(2, 5, &[0.0, -r, 0.0, 1.0, 0.0, r, 0.0, 0.0, 0.0, 1.0])
    }
    fn constraint_dg(&self, _g: &DMatrix<f64>, _eta: &DVector<f64>) -> DMatrix<f64> {
        let w = self.spin;
        DMatrix::from_row_slice(2, 5, &[0.0, 0.0, 0.0, 0.0, w, 0.0, 0.0, 0.0, -w, 0.0])
    }
}

impl LieHamiltonian for BallOnTurntable {
    fn hamiltonian(&self, _g: &DMatrix<f64>, mu: &DVector<f64>) -> f64 {
        let w = self.weights();
        0.5 * (0..5).map(|i| mu[i] * mu[i] / w[i]).sum::<f64>()
    }
    fn dg_hamiltonian(&self, _g: &DMatrix<f64>, _mu: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(5)
    }
    fn dmu_hamiltonian(&self, _g: &DMatrix<f64>, mu: &DVector<f64>) -> DVector<f64> {
        let w = self.weights();
        DVector::from_fn(5, |i, _| mu[i] / w[i])
    }
    fn momentum_hessian(&self, _g: &DMatrix<f64>, _mu: &DVector<f64>) -> DMatrix<f64> {
        let w = self.weights();
        DMatrix::from_diagonal(&DVector::from_fn(5, |i, _| 1.0 / w[i]))
    }
}

/// A rigid body on `SO(3)` with principal inertia `I` and potential
/// `weight · e₃ᵀ R χ`, where `χ` is the body-frame centre of mass.
///
/// `weight = 0` gives the free rigid body.
#[derive(Debug, Clone, Copy)]
pub struct HeavyTop {
    pub inertia: [f64; 3],
    pub weight: f64,
    pub centre: [f64; 3],
}

impl Default for HeavyTop {
    fn default() -> Self {
        Self {
            inertia: [1.0, 2.0, 3.0],
            weight: 1.0,
            centre: [0.0, 0.0, 1.0],
        }
    }
}

impl HeavyTop {
    pub fn free(inertia: [f64; 3]) -> Self {
        Self {
            inertia,
            weight: 0.0,
            centre: [0.0; 3],
        }
    }

    /// Gradient of the potential, left-trivialized: `weight · χ × Rᵀe₃`.
    fn torque(&self, g: &DMatrix<f64>) -> DVector<f64> {
        let up = Vector3::new(g[(2, 0)], g[(2, 1)], g[(2, 2)]);
        let chi = Vector3::from(self.centre);
        let t = chi.cross(&up) * self.weight;
        dvector![t[0], t[1], t[2]]
    }

    fn potential(&self, g: &DMatrix<f64>) -> f64 {
        self.weight * (0..3).map(|j| g[(2, j)] * self.centre[j]).sum::<f64>()
    }
}

impl LieSystem for HeavyTop {
    fn group(&self) -> &dyn MatrixGroup {
        &So3
    }
    fn lagrangian(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> f64 {
        0.5 * (0..3).map(|i| self.inertia[i] * eta[i] * eta[i]).sum::<f64>() - self.potential(g)
    }
    fn dg_lagrangian(&self, g: &DMatrix<f64>, _eta: &DVector<f64>) -> DVector<f64> {
        -self.torque(g)
    }
    fn deta_lagrangian(&self, _g: &DMatrix<f64>, eta: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(3, |i, _| self.inertia[i] * eta[i])
    }
    fn velocity_hessian(&self, _g: &DMatrix<f64>, _eta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(&self.inertia))
    }
}

impl LieHamiltonian for HeavyTop {
    fn hamiltonian(&self, g: &DMatrix<f64>, mu: &DVector<f64>) -> f64 {
        0.5 * (0..3).map(|i| mu[i] * mu[i] / self.inertia[i]).sum::<f64>() + self.potential(g)
    }
    fn dg_hamiltonian(&self, g: &DMatrix<f64>, _mu: &DVector<f64>) -> DVector<f64> {
        self.torque(g)
    }
    fn dmu_hamiltonian(&self, _g: &DMatrix<f64>, mu: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(3, |i, _| mu[i] / self.inertia[i])
    }
}
