use nalgebra::{dvector, DMatrix, DVector};

use crate::mechanics::{HamiltonianSystem, HolonomicSystem, VecSystem};

fn row(entries: &[(usize, f64)], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(1, n);
    for &(j, x) in entries {
        m[(0, j)] = x;
    }
    m
}

/// A unit-mass particle in `ℝ³` in the potential `½(x² + y²)` with the
/// constraint `v_z = y v_x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonholonomicParticle;

impl NonholonomicParticle {
    pub fn initial_state() -> (DVector<f64>, DVector<f64>) {
        (dvector![0.0, 1.0, 0.0], dvector![1.0, 0.0, 1.0])
    }
}

impl VecSystem for NonholonomicParticle {
    fn dim(&self) -> usize {
        3
    }
    fn n_constraints(&self) -> usize {
        1
    }
    fn lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        0.5 * v.norm_squared() - 0.5 * (q[0] * q[0] + q[1] * q[1])
    }
    fn dq_lagrangian(&self, q: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
        dvector![-q[0], -q[1], 0.0]
    }
    fn dv_lagrangian(&self, _q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        v.clone()
    }
    fn velocity_hessian(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(3, 3)
    }
    fn mixed_hessian(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(3, 3)
    }
    fn constraint(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        dvector![v[2] - q[1] * v[0]]
    }
    fn constraint_dq(&self, _q: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
        row(&[(1, -v[0])], 3)
    }
    fn constraint_dv(&self, q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        row(&[(0, -q[1]), (2, 1.0)], 3)
    }
}

impl HamiltonianSystem for NonholonomicParticle {
    fn hamiltonian(&self, q: &DVector<f64>, p: &DVector<f64>) -> f64 {
        0.5 * p.norm_squared() + 0.5 * (q[0] * q[0] + q[1] * q[1])
    }
    fn dq_hamiltonian(&self, q: &DVector<f64>, _p: &DVector<f64>) -> DVector<f64> {
        dvector![q[0], q[1], 0.0]
    }
    fn dp_hamiltonian(&self, _q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        p.clone()
    }
    fn momentum_hessian(&self, _q: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(3, 3)
    }
}

/// Pendulum-driven continuous variable transmission.
///
/// Coordinates `(x, y, z)`: `y` is the driving pendulum angle, `x` and `z`
/// are the passenger oscillators coupled through `v_z + sin(y) v_x = 0`.
#[derive(Debug, Clone, Copy)]
pub struct Cvt {
    pub eps: f64,
}

impl Default for Cvt {
    fn default() -> Self {
        Self { eps: 0.5 }
    }
}

impl Cvt {
    pub fn low_energy_state() -> (DVector<f64>, DVector<f64>) {
        (dvector![1.0, 0.0, 1.0], dvector![0.0, 3.0 * 10f64.sqrt() / 5.0, 0.0])
    }

    pub fn high_energy_state() -> (DVector<f64>, DVector<f64>) {
        (dvector![1.0, 0.0, 1.0], dvector![0.0, 8f64.sqrt(), 0.0])
    }

    /// Energy of the driver: `½v_y² − cos y + ½ε sin 2y`.
    pub fn driver_energy(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        0.5 * v[1] * v[1] - q[1].cos() + 0.5 * self.eps * (2.0 * q[1]).sin()
    }

    /// Energy of the passenger: `½(v_x² + v_z²) + ½(x² + z²)`.
    pub fn passenger_energy(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        0.5 * (v[0] * v[0] + v[2] * v[2]) + 0.5 * (q[0] * q[0] + q[2] * q[2])
    }
}

impl VecSystem for Cvt {
    fn dim(&self) -> usize {
        3
    }
    fn n_constraints(&self) -> usize {
        1
    }
    fn lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let pot = q[0] * q[0] + q[2] * q[2] - 2.0 * q[1].cos() + self.eps * (2.0 * q[1]).sin();
        0.5 * v.norm_squared() - 0.5 * pot
    }
    fn dq_lagrangian(&self, q: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
        dvector![-q[0], -(q[1].sin() + self.eps * (2.0 * q[1]).cos()), -q[2]]
    }
    fn dv_lagrangian(&self, _q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        v.clone()
    }
    fn velocity_hessian(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(3, 3)
    }
    fn mixed_hessian(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(3, 3)
    }
    fn constraint(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        dvector![v[2] + q[1].sin() * v[0]]
    }
    fn constraint_dq(&self, q: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
        row(&[(1, q[1].cos() * v[0])], 3)
    }
    fn constraint_dv(&self, q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        row(&[(0, q[1].sin()), (2, 1.0)], 3)
    }
}

impl HamiltonianSystem for Cvt {
    fn hamiltonian(&self, q: &DVector<f64>, p: &DVector<f64>) -> f64 {
        0.5 * p.norm_squared() - self.lagrangian(q, &DVector::zeros(3))
    }
    fn dq_hamiltonian(&self, q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        -self.dq_lagrangian(q, p)
    }
    fn dp_hamiltonian(&self, _q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        p.clone()
    }
}

/// The chaotic nonholonomic system in `ℝ^{2m+1}`:
/// `L = ½|v|² − ½(|q|² + q_{m+2}² q_{m+3}² + Σ_{i=1}^m q_{1+i}² q_{m+1+i}²)`,
/// `Φ = v_1 + Σ_{i=m+2}^{n} q_i v_i` (indices one-based).
#[derive(Debug, Clone, Copy)]
pub struct ChaoticSystem {
    pub m: usize,
}

/// Energy level shared by every member of the ensemble with `m = 3`.
pub const CHAOTIC_ENERGY: f64 = 3.06;

impl Default for ChaoticSystem {
    fn default() -> Self {
        Self { m: 3 }
    }
}

impl ChaoticSystem {
    fn coupled_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.m;
        std::iter::once((m + 1, m + 2)).chain((1..=m).map(move |i| (i, m + i)))
    }

    /// Ensemble member `j` of `J`, only meaningful for `m = 3`.
    pub fn ensemble_state(j: usize, big_j: usize) -> (DVector<f64>, DVector<f64>) {
        let angle = j as f64 * std::f64::consts::PI / (2.0 * big_j as f64);
        let q = dvector![angle.cos(), 0.6, 0.4, 0.2, 1.0, 1.0, 1.0];
        let mut v = DVector::zeros(7);
        v[1] = angle.sin();
        (q, v)
    }
}

impl VecSystem for ChaoticSystem {
    fn dim(&self) -> usize {
        2 * self.m + 1
    }
    fn n_constraints(&self) -> usize {
        1
    }
    fn lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let coupling: f64 = self.coupled_pairs().map(|(a, b)| q[a] * q[a] * q[b] * q[b]).sum();
        0.5 * v.norm_squared() - 0.5 * (q.norm_squared() + coupling)
    }
    fn dq_lagrangian(&self, q: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
        let mut g = -q;
        for (a, b) in self.coupled_pairs() {
            g[a] -= q[a] * q[b] * q[b];
            g[b] -= q[a] * q[a] * q[b];
        }
        g
    }
    fn dv_lagrangian(&self, _q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        v.clone()
    }
    fn velocity_hessian(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim())
    }
    fn mixed_hessian(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.dim(), self.dim())
    }
    fn constraint(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let tail: f64 = (self.m + 1..self.dim()).map(|i| q[i] * v[i]).sum();
        dvector![v[0] + tail]
    }
    fn constraint_dq(&self, _q: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
        let entries: Vec<_> = (self.m + 1..self.dim()).map(|i| (i, v[i])).collect();
        row(&entries, self.dim())
    }
    fn constraint_dv(&self, q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        let mut entries = vec![(0, 1.0)];
        entries.extend((self.m + 1..self.dim()).map(|i| (i, q[i])));
        row(&entries, self.dim())
    }
}

impl HamiltonianSystem for ChaoticSystem {
    fn hamiltonian(&self, q: &DVector<f64>, p: &DVector<f64>) -> f64 {
        0.5 * p.norm_squared() - self.lagrangian(q, &DVector::zeros(self.dim()))
    }
    fn dq_hamiltonian(&self, q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        -self.dq_lagrangian(q, p)
    }
    fn dp_hamiltonian(&self, _q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        p.clone()
    }
}

/// Unit harmonic oscillator `L = ½|v|² − ½|q|²` in `ℝⁿ`, unconstrained.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicOscillator {
    pub n: usize,
}

impl VecSystem for HarmonicOscillator {
    fn dim(&self) -> usize {
        self.n
    }
    fn lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        0.5 * v.norm_squared() - 0.5 * q.norm_squared()
    }
    fn dq_lagrangian(&self, q: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
        -q
    }
    fn dv_lagrangian(&self, _q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        v.clone()
    }
    fn velocity_hessian(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n)
    }
}

impl HamiltonianSystem for HarmonicOscillator {
    fn hamiltonian(&self, q: &DVector<f64>, p: &DVector<f64>) -> f64 {
        0.5 * (p.norm_squared() + q.norm_squared())
    }
    fn dq_hamiltonian(&self, q: &DVector<f64>, _p: &DVector<f64>) -> DVector<f64> {
        q.clone()
    }
    fn dp_hamiltonian(&self, _q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        p.clone()
    }
}

/// Unit planar pendulum: `L = ½|v|² − g q_y` on the circle `|q|² = 1`.
#[derive(Debug, Clone, Copy)]
pub struct PlanarPendulum {
    pub gravity: f64,
}

impl Default for PlanarPendulum {
    fn default() -> Self {
        Self { gravity: 1.0 }
    }
}

impl PlanarPendulum {
    /// Multiplier of `½|v|² − g q_y + λ(|q|² − 1)` along the exact flow.
    pub fn exact_multiplier(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (self.gravity * q[1] - v.norm_squared()) / (2.0 * q.norm_squared())
    }
}

impl VecSystem for PlanarPendulum {
    fn dim(&self) -> usize {
        2
    }
    fn lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        0.5 * v.norm_squared() - self.gravity * q[1]
    }
    fn dq_lagrangian(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
        dvector![0.0, -self.gravity]
    }
    fn dv_lagrangian(&self, _q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        v.clone()
    }
    fn velocity_hessian(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }
}

impl HolonomicSystem for PlanarPendulum {
    fn n_position_constraints(&self) -> usize {
        1
    }
    fn position_constraint(&self, q: &DVector<f64>) -> DVector<f64> {
        dvector![q.norm_squared() - 1.0]
    }
    fn position_constraint_jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        row(&[(0, 2.0 * q[0]), (1, 2.0 * q[1])], 2)
    }
}
