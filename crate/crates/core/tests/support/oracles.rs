//! Independent reference computations shared by the oracle tests.

use nalgebra::{dvector, DMatrix, DVector};
use nhprk::lie_mechanics::{FlatLie, LieState};
use nhprk::liegroup::Retraction;
use nhprk::mechanics::{VecState, VecSystem};
use nhprk::nlsolve::SolverConfig;
use nhprk::prk_lie::LieIntegrator;
use nhprk::prk_vec::VecIntegrator;
use nhprk::systems::HarmonicOscillator;
use nhprk::tableau::PartitionedTableau;

/// `‖JᵀΩJ − Ω‖` for a central-difference Jacobian of one oscillator step.
pub fn symplecticity_defect(s: usize) -> f64 {
    let int = VecIntegrator::lobatto(s).unwrap();
    let sys = HarmonicOscillator { n: 2 };
    let base = [0.3, -0.8, 0.5, 0.1];
    let flow = |z: &[f64]| {
        let st = VecState::from_velocity(&sys, 0.0, dvector![z[0], z[1]], dvector![z[2], z[3]]);
        let (n, _) = int.step_vprk(&sys, &st, 0.1).unwrap();
        [n.q[0], n.q[1], n.p[0], n.p[1]]
    };
    let eps = 1e-5;
    let mut jac = DMatrix::zeros(4, 4);
    for j in 0..4 {
        let (mut zp, mut zm) = (base, base);
        zp[j] += eps;
        zm[j] -= eps;
        let (fp, fm) = (flow(&zp), flow(&zm));
        for i in 0..4 {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * eps);
        }
    }
    let mut omega = DMatrix::zeros(4, 4);
    omega[(0, 2)] = 1.0;
    omega[(1, 3)] = 1.0;
    omega[(2, 0)] = -1.0;
    omega[(3, 1)] = -1.0;
    (jac.transpose() * &omega * &jac - omega).amax()
}

/// Independent RATTLE step for the unit pendulum, returning
/// `(q1, p1, position multiplier, tangency multiplier)`.
pub fn rattle(g: f64, q: &DVector<f64>, p: &DVector<f64>, h: f64) -> (DVector<f64>, DVector<f64>, f64, f64) {
    let grad = dvector![0.0, g];
    let a = p - &grad * (0.5 * h);
    // q1 = u q + h a with u = 1 + h²Λ, and |q1|² = 1.
    let (qq, qa, aa) = (q.norm_squared(), q.dot(&a), a.norm_squared());
    let disc = (h * qa).powi(2) - qq * (h * h * aa - 1.0);
    let u = (-h * qa + disc.sqrt()) / qq;
    let lam1 = (u - 1.0) / (h * h);
    let half = &a + q * (h * lam1);
    let q1 = q + &half * h;
    let pre = &half - &grad * (0.5 * h);
    let lam2 = -q1.dot(&pre) / (h * q1.norm_squared());
    let p1 = pre + &q1 * (h * lam2);
    (q1, p1, lam1, lam2)
}

pub fn flat_state<S: VecSystem>(flat: &FlatLie<S>, st: &VecState) -> LieState {
    LieState {
        t: st.t,
        g: flat.element(&st.q),
        eta: st.v.clone(),
        mu: st.p.clone(),
        lambda: st.lambda.clone(),
    }
}

/// Largest difference in `(q, p, v)` and, separately, in `λ`.
pub fn flat_gap<S: VecSystem>(flat: &FlatLie<S>, lie: &LieState, vec: &VecState) -> (f64, f64) {
    let state = (flat.position(&lie.g) - &vec.q)
        .amax()
        .max((&lie.mu - &vec.p).amax())
        .max((&lie.eta - &vec.v).amax());
    let lambda = if vec.lambda.is_empty() { 0.0 } else { (&lie.lambda - &vec.lambda).amax() };
    (state, lambda)
}

/// Both sides solved well past the default tolerance, so that the comparison
/// sees the stepper algebra rather than where Newton happened to stop.
pub fn tight(s: usize, retraction: Retraction) -> (VecIntegrator, LieIntegrator) {
    let solver = SolverConfig::default().with_tol(1e-14);
    let tableau = PartitionedTableau::lobatto(s).unwrap();
    (
        VecIntegrator::new(tableau.clone(), solver.clone()),
        LieIntegrator::new(tableau, solver, retraction),
    )
}

pub fn assert_flat(gap: (f64, f64), what: &str) {
    assert!(gap.0 <= 1e-13, "{what}: state gap {:e}", gap.0);
    assert!(gap.1 <= 1e-10, "{what}: multiplier gap {:e}", gap.1);
}
