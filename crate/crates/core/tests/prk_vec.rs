mod support;

use nalgebra::{dvector, DMatrix, DVector};
use nhprk::mechanics::{consistent_multiplier, VecState, VecSystem};
use nhprk::prk_vec::VecIntegrator;
use nhprk::systems::{HarmonicOscillator, NonholonomicParticle, PlanarPendulum};

struct FreeParticle;

impl VecSystem for FreeParticle {
    fn dim(&self) -> usize {
        2
    }
    fn lagrangian(&self, _q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        0.5 * v.norm_squared()
    }
    fn dq_lagrangian(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(2)
    }
    fn dv_lagrangian(&self, _q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        v.clone()
    }
}

/// Harmonic potential in the plane plus a free vertical direction with the
/// integrable constraint `v_z = 0`.
struct FrozenHeight;

impl VecSystem for FrozenHeight {
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
    fn constraint(&self, _q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        dvector![v[2]]
    }
    fn constraint_dq(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(1, 3)
    }
    fn constraint_dv(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 1.0])
    }
}

fn oscillator_state(q: f64, v: f64) -> VecState {
    VecState::from_velocity(&HarmonicOscillator { n: 1 }, 0.0, dvector![q], dvector![v])
}

#[test]
fn free_flow_is_exact() {
    for s in 2..=4 {
        let int = VecIntegrator::lobatto(s).unwrap();
        let state = VecState::from_velocity(&FreeParticle, 0.0, dvector![1.0, -2.0], dvector![0.5, 0.25]);
        let (next, _) = int.step_vprk(&FreeParticle, &state, 0.1).unwrap();
        assert!((next.q - dvector![1.05, -1.975]).amax() < 1e-14);
        assert!((next.p - &state.p).amax() < 1e-14);
    }
}

#[test]
fn two_stage_oscillator_is_stormer_verlet() {
    let int = VecIntegrator::lobatto(2).unwrap();
    let h = 0.1;
    let (q, p) = (0.7, -0.3);
    let (next, _) = int.step_vprk(&HarmonicOscillator { n: 1 }, &oscillator_state(q, p), h).unwrap();
    let half = p - 0.5 * h * q;
    let q1 = q + h * half;
    let p1 = half - 0.5 * h * q1;
    assert!((next.q[0] - q1).abs() < 1e-14);
    assert!((next.p[0] - p1).abs() < 1e-14);
}

#[test]
fn three_stage_oscillator_is_fourth_order() {
    let int = VecIntegrator::lobatto(3).unwrap();
    let sys = HarmonicOscillator { n: 1 };
    let t_end = 2.0;
    let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&h| {
            let mut st = oscillator_state(1.0, 0.0);
            for _ in 0..(t_end / h as f64).round() as usize {
                st = int.step_vprk(&sys, &st, h).unwrap().0;
            }
            let err = (st.q[0] - t_end.cos()).abs().max((st.p[0] + t_end.sin()).abs());
            (h.ln(), err.ln())
        })
        .collect();
    let slope = support::slope(&pts);
    assert!((slope - 4.0).abs() < 0.3, "slope {slope}");
}

#[test]
fn vprk_is_symplectic() {
    for s in 2..=4 {
        let d = support::oracles::symplecticity_defect(s);
        assert!(d <= 1e-6, "s={s}: {d:e}");
    }
}

#[test]
fn unconstrained_nonholonomic_step_is_vprk() {
    let int = VecIntegrator::lobatto(3).unwrap();
    let sys = HarmonicOscillator { n: 1 };
    let st = oscillator_state(0.4, 0.9);
    let a = int.step_vprk(&sys, &st, 0.1).unwrap().0;
    let b = int.step_nh_lagrangian(&sys, &st, 0.1).unwrap().0;
    assert!((a.q - b.q).amax() <= 1e-14 && (a.p - b.p).amax() <= 1e-14);
}

#[test]
fn two_stage_holonomic_step_is_rattle() {
    let sys = PlanarPendulum::default();
    let int = VecIntegrator::lobatto(2).unwrap();
    let th: f64 = 0.9;
    let mut st = VecState::from_velocity(&sys, 0.0, dvector![th.sin(), -th.cos()], dvector![0.4 * th.cos(), 0.4 * th.sin()]);
    for _ in 0..50 {
        let (next, rep) = int.step_holonomic(&sys, &st, 0.05).unwrap();
        let (q1, p1, l1, l2) = support::oracles::rattle(1.0, &st.q, &st.p, 0.05);
        assert!((&next.q - q1).amax() < 1e-10);
        assert!((&next.p - p1).amax() < 1e-10);
        let lams = &rep.work.multipliers;
        assert!((lams[0][0] - l1).abs() < 1e-10 && (lams[1][0] - l2).abs() < 1e-10);
        st = next;
    }
}

#[test]
fn pendulum_multipliers_approach_the_exact_one() {
    let sys = PlanarPendulum::default();
    let th: f64 = 0.9;
    let (q, v) = (dvector![th.sin(), -th.cos()], dvector![0.4 * th.cos(), 0.4 * th.sin()]);
    let exact = sys.exact_multiplier(&q, &v);
    for s in 2..=3 {
        let int = VecIntegrator::lobatto(s).unwrap();
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| {
                let st = VecState::from_velocity(&sys, 0.0, q.clone(), v.clone());
                let (_, rep) = int.step_holonomic(&sys, &st, h).unwrap();
                (rep.work.multipliers[0][0] - exact).abs()
            })
            .collect();
        assert!(errs[2] < errs[0] / 3.0, "s={s}: {errs:?}");
    }
}

#[test]
fn particle_stage_constraints_hold() {
    let sys = NonholonomicParticle;
    let (q, v) = NonholonomicParticle::initial_state();
    for s in 2..=4 {
        let int = VecIntegrator::lobatto(s).unwrap();
        let st = VecState::consistent(&sys, 0.0, q.clone(), v.clone()).unwrap();
        let (next, rep) = int.step_nh_lagrangian(&sys, &st, 0.1).unwrap();
        assert!(rep.constraint_residual <= 1e-10, "s={s}");
        assert!(sys.constraint(&next.q, &next.v)[0].abs() <= 1e-10);
        let work = &rep.work;
        for i in 0..s {
            let sum = (0..s).fold(st.q.clone(), |acc, j| acc + &work.velocities[j] * (0.1 * int.tableau.primal.a()[(i, j)]));
            assert!((sum - &work.positions[i]).amax() < 1e-12);
        }
    }
}

#[test]
fn integrable_constraint_freezes_height() {
    let sys = FrozenHeight;
    let int = VecIntegrator::lobatto(3).unwrap();
    let mut st = VecState::consistent(&sys, 0.0, dvector![1.0, 0.0, 0.7], dvector![0.0, 1.0, 0.0]).unwrap();
    assert_eq!(st.lambda[0], 0.0);
    for _ in 0..20 {
        st = int.step_nh_lagrangian(&sys, &st, 0.1).unwrap().0;
        assert!((st.q[2] - 0.7).abs() < 1e-14);
        assert!(st.lambda[0].abs() < 1e-12);
    }
}

#[test]
fn particle_multiplier_oracle() {
    // dΦ/dt along the free flow is x y − v_x v_y; C = 1 + y².
    let (q, v) = (dvector![2.0, 1.0, 0.0], dvector![1.0, 1.0, 1.0]);
    let lambda = consistent_multiplier(&NonholonomicParticle, &q, &v).unwrap();
    assert!((lambda[0] + 0.5).abs() < 1e-8, "{lambda}");
    let (q0, v0) = NonholonomicParticle::initial_state();
    assert!(consistent_multiplier(&NonholonomicParticle, &q0, &v0).unwrap()[0].abs() < 1e-12);
}

#[test]
fn lagrangian_and_hamiltonian_forms_agree() {
    let sys = NonholonomicParticle;
    let (q, v) = NonholonomicParticle::initial_state();
    for s in 2..=4 {
        let int = VecIntegrator::lobatto(s).unwrap();
        let mut st = VecState::consistent(&sys, 0.0, q.clone(), v.clone()).unwrap();
        for _ in 0..10 {
            let (a, _) = int.step_nh_lagrangian(&sys, &st, 0.1).unwrap();
            let (b, rep) = int.step_nh_hamiltonian(&sys, &st, 0.1).unwrap();
            assert!(rep.constraint_residual <= 1e-10);
            let diff = (&a.q - &b.q).amax().max((&a.p - &b.p).amax()).max((&a.lambda - &b.lambda).amax());
            assert!(diff <= 1e-10, "s={s}: {diff:e}");
            st = a;
        }
    }
}

#[test]
fn inconsistent_start_is_rejected() {
    let sys = NonholonomicParticle;
    let int = VecIntegrator::lobatto(2).unwrap();
    let st = VecState::from_velocity(&sys, 0.0, dvector![0.0, 1.0, 0.0], dvector![1.0, 0.0, 0.0]);
    assert!(matches!(
        int.step_nh_lagrangian(&sys, &st, 0.1),
        Err(nhprk::error::Error::InconsistentInitialState(_))
    ));
}
