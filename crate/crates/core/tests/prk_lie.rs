mod support;

use support::oracles::{assert_flat, flat_gap, flat_state, tight};

use nalgebra::{dvector, DMatrix, DVector, Vector3};
use nhprk::lie_mechanics::{lie_consistent_multiplier, FlatLie, LieHolonomic, LieState, LieSystem};
use nhprk::liegroup::{MatrixGroup, Retraction, So3};
use nhprk::mechanics::{HolonomicSystem, VecState};
use nhprk::prk_lie::LieIntegrator;
use nhprk::prk_vec::VecIntegrator;
use nhprk::systems::{BallOnTurntable, HarmonicOscillator, HeavyTop, NonholonomicParticle, PlanarPendulum, Unicycle};

#[test]
fn free_rigid_body_keeps_momentum_norm() {
    let body = HeavyTop::free([1.0, 2.0, 3.0]);
    for retraction in [Retraction::Cay, Retraction::Exp] {
        for s in 2..=3 {
            let int = LieIntegrator::lobatto(s, retraction).unwrap();
            let mut st = LieState::from_velocity(&body, 0.0, DMatrix::identity(3, 3), dvector![0.3, 1.0, -0.4]);
            let norm0 = st.mu.norm();
            for _ in 0..200 {
                let next = int.step_vprkmk(&body, &st, 0.05).unwrap().0;
                assert!((next.mu.norm() - st.mu.norm()).abs() <= 1e-12);
                st = next;
            }
            assert!((st.mu.norm() - norm0).abs() <= 1e-11);
        }
    }
}

#[test]
fn flat_vprkmk_matches_vprk() {
    let flat = FlatLie::new(HarmonicOscillator { n: 2 });
    for s in 2..=4 {
        let (vec_int, lie_int) = tight(s, Retraction::Cay);
        let st = VecState::from_velocity(&flat.inner, 0.0, dvector![0.3, -0.7], dvector![1.0, 0.2]);
        let (a, _) = vec_int.step_vprk(&flat.inner, &st, 0.1).unwrap();
        let (b, _) = lie_int.step_vprkmk(&flat, &flat_state(&flat, &st), 0.1).unwrap();
        assert_flat(flat_gap(&flat, &b, &a), &format!("s={s}"));
    }
}

#[test]
fn flat_nonholonomic_steps_match_vector_steps() {
    let flat = FlatLie::new(NonholonomicParticle);
    let (q, v) = NonholonomicParticle::initial_state();
    for s in 2..=4 {
        for retraction in [Retraction::Cay, Retraction::Exp] {
            let (vec_int, lie_int) = tight(s, retraction);
            let mut st = VecState::consistent(&flat.inner, 0.0, q.clone(), v.clone()).unwrap();
            for _ in 0..10 {
                let lie_st = flat_state(&flat, &st);
                let (a, _) = vec_int.step_nh_lagrangian(&flat.inner, &st, 0.1).unwrap();
                let (b, _) = lie_int.step_nh_lie(&flat, &lie_st, 0.1).unwrap();
                assert_flat(flat_gap(&flat, &b, &a), &format!("lagrangian s={s}"));
                let (c, _) = vec_int.step_nh_hamiltonian(&flat.inner, &st, 0.1).unwrap();
                let (d, _) = lie_int.step_nh_lie_hamiltonian(&flat, &lie_st, 0.1).unwrap();
                assert_flat(flat_gap(&flat, &d, &c), &format!("hamiltonian s={s}"));
                st = a;
            }
        }
    }
}

#[test]
fn flat_holonomic_step_matches_vector_step() {
    let flat = FlatLie::new(PlanarPendulum::default());
    let th: f64 = 0.9;
    let st = VecState::from_velocity(&flat.inner, 0.0, dvector![th.sin(), -th.cos()], dvector![0.4 * th.cos(), 0.4 * th.sin()]);
    for s in 2..=3 {
        let (vec_int, lie_int) = tight(s, Retraction::Cay);
        let mut st = st.clone();
        for _ in 0..20 {
            let (a, _) = vec_int.step_holonomic(&flat.inner, &st, 0.05).unwrap();
            let (b, _) = lie_int.step_lie_holonomic(&flat, &flat_state(&flat, &st), 0.05).unwrap();
            assert_flat(flat_gap(&flat, &b, &a), &format!("s={s}"));
            st = a;
        }
    }
}

#[test]
fn flat_multiplier_matches_vector_multiplier() {
    let flat = FlatLie::new(NonholonomicParticle);
    let (q, v) = (dvector![2.0, 1.0, 0.0], dvector![1.0, 1.0, 1.0]);
    let lambda = lie_consistent_multiplier(&flat, &flat.element(&q), &v).unwrap();
    assert!((lambda[0] + 0.5).abs() < 1e-8);
}

#[test]
fn ball_multiplier_oracle() {
    let ball = BallOnTurntable::default();
    let (g, eta) = ball.initial_state();
    let lambda = lie_consistent_multiplier(&ball, &g, &eta).unwrap();
    let a = ball.inertia[0];
    let k = a * ball.spin / (1.0 + a);
    assert!((lambda[0] + k * eta[4]).abs() < 1e-8, "{lambda}");
    assert!((lambda[1] - k * eta[3]).abs() < 1e-8, "{lambda}");
}

fn heavy_top_error(s: usize, retraction: Retraction, hs: &[f64], h_ref: f64) -> Vec<(f64, f64)> {
    let top = HeavyTop::default();
    let int = LieIntegrator::lobatto(s, retraction).unwrap();
    let run = |h: f64| {
        let mut st = LieState::from_velocity(&top, 0.0, So3.exp(&dvector![0.3, 0.1, 0.0]), dvector![0.5, -0.3, 0.8]);
        for _ in 0..(1.0 / h).round() as usize {
            st = int.step_vprkmk(&top, &st, h).unwrap().0;
        }
        st
    };
    let reference = run(h_ref);
    hs.iter()
        .map(|&h| {
            let st = run(h);
            let err = (&st.g - &reference.g).amax().max((&st.mu - &reference.mu).amax());
            (h.ln(), err.ln())
        })
        .collect()
}

#[test]
fn heavy_top_converges_at_quadrature_order() {
    for retraction in [Retraction::Cay, Retraction::Exp] {
        let slope = support::slope(&heavy_top_error(2, retraction, &[0.1, 0.05, 0.025], 0.0025));
        assert!((slope - 2.0).abs() < 0.3, "s=2: {slope}");
        let slope = support::slope(&heavy_top_error(3, retraction, &[0.2, 0.1, 0.05], 0.005));
        assert!((slope - 4.0).abs() < 0.3, "s=3: {slope}");
    }
}

/// A top with its symmetry axis forced into the `xz` plane, which makes the
/// tip of `−Re₃` a planar pendulum.
struct ConfinedTop(HeavyTop);

impl ConfinedTop {
    fn new() -> Self {
        Self(HeavyTop {
            inertia: [1.0, 1.0, 0.5],
            weight: 1.0,
            centre: [0.0, 0.0, -1.0],
        })
    }

    fn bob(g: &DMatrix<f64>) -> DVector<f64> {
        dvector![-g[(0, 2)], -g[(2, 2)]]
    }
}

impl LieSystem for ConfinedTop {
    fn group(&self) -> &dyn MatrixGroup {
        &So3
    }
    fn lagrangian(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> f64 {
        self.0.lagrangian(g, eta)
    }
    fn dg_lagrangian(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> DVector<f64> {
        self.0.dg_lagrangian(g, eta)
    }
    fn deta_lagrangian(&self, g: &DMatrix<f64>, eta: &DVector<f64>) -> DVector<f64> {
        self.0.deta_lagrangian(g, eta)
    }
}

impl LieHolonomic for ConfinedTop {
    fn n_position_constraints(&self) -> usize {
        1
    }
    fn position_constraint(&self, g: &DMatrix<f64>) -> DVector<f64> {
        dvector![g[(1, 2)]]
    }
    fn position_constraint_gradient(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        // d/dε e₂ᵀ R exp(εζ) e₃ = ζ · (e₃ × Rᵀe₂).
        let back = Vector3::new(g[(1, 0)], g[(1, 1)], g[(1, 2)]);
        let grad = Vector3::z().cross(&back);
        DMatrix::from_row_slice(1, 3, grad.as_slice())
    }
}

#[test]
fn confined_top_tracks_the_planar_pendulum() {
    let top = ConfinedTop::new();
    let pendulum = PlanarPendulum::default();
    let (th, rate): (f64, f64) = (0.9, 0.4);
    let rotation = So3.exp(&dvector![0.0, -th, 0.0]);
    for s in 2..=3 {
        let lie_int = LieIntegrator::lobatto(s, Retraction::Cay).unwrap();
        let vec_int = VecIntegrator::lobatto(s).unwrap();
        let gap = |h: f64| {
            let mut a = LieState::from_velocity(&top, 0.0, rotation.clone(), dvector![0.0, -rate, 0.0]);
            let mut b = VecState::from_velocity(&pendulum, 0.0, dvector![th.sin(), -th.cos()], dvector![rate * th.cos(), rate * th.sin()]);
            assert!((ConfinedTop::bob(&a.g) - &b.q).amax() < 1e-14);
            for _ in 0..(1.0 / h).round() as usize {
                let (next, rep) = lie_int.step_lie_holonomic(&top, &a, h).unwrap();
                assert!(rep.constraint_residual <= 1e-10);
                a = next;
                b = vec_int.step_holonomic(&pendulum, &b, h).unwrap().0;
            }
            assert!(pendulum.position_constraint(&b.q)[0].abs() < 1e-10);
            (ConfinedTop::bob(&a.g) - &b.q).amax()
        };
        let (coarse, fine) = (gap(0.1), gap(0.05));
        let order = (coarse / fine).log2();
        assert!(order > (2 * s - 2) as f64 - 0.5, "s={s}: {coarse:e} {fine:e}");
    }
}

#[test]
fn unicycle_steps_hold_the_constraint_and_forms_agree() {
    let sys = Unicycle::default();
    let (g, eta) = Unicycle::initial_state();
    for s in 2..=4 {
        let int = LieIntegrator::lobatto(s, Retraction::Cay).unwrap();
        let mut st = LieState::consistent(&sys, 0.0, g.clone(), eta.clone()).unwrap();
        for _ in 0..20 {
            let (a, rep) = int.step_nh_lie(&sys, &st, 0.1).unwrap();
            assert!(rep.constraint_residual <= 1e-10);
            let (b, rep) = int.step_nh_lie_hamiltonian(&sys, &st, 0.1).unwrap();
            assert!(rep.constraint_residual <= 1e-10);
            let gap = (&a.g - &b.g).amax().max((&a.mu - &b.mu).amax()).max((&a.lambda - &b.lambda).amax());
            assert!(gap <= 1e-10, "s={s}: {gap:e}");
            st = a;
        }
    }
}

#[test]
fn unicycle_trivialization() {
    let spatial = dvector![0.7, -0.2, 0.4];
    let body = Unicycle::body_velocity(std::f64::consts::FRAC_PI_2, &spatial);
    assert!((body - dvector![-0.2, -0.7, 0.4]).amax() < 1e-15);
    for th in [0.0, 0.4, 2.0, -1.3] {
        let body = Unicycle::body_velocity(th, &spatial);
        assert!((Unicycle::spatial_constraint(th, &spatial) - body[1]).abs() < 1e-12);
    }
}

#[test]
fn ball_linear_integrals_hold() {
    let ball = BallOnTurntable::default();
    let (g, eta) = ball.initial_state();
    let int = LieIntegrator::lobatto(3, Retraction::Cay).unwrap();
    let mut st = LieState::consistent(&ball, 0.0, g, eta).unwrap();
    let start = ball.linear_integrals(&st.g, &st.eta);
    for _ in 0..500 {
        let (next, rep) = int.step_nh_lie(&ball, &st, 0.05).unwrap();
        assert!(rep.constraint_residual <= 1e-10);
        st = next;
    }
    let end = ball.linear_integrals(&st.g, &st.eta);
    for (a, b) in start.iter().zip(&end) {
        assert!((a - b).abs() <= 1e-10, "{start:?} {end:?}");
    }
    let r = st.g.view((0, 0), (3, 3)).into_owned();
    assert!((r.transpose() * &r - DMatrix::identity(3, 3)).amax() <= 1e-12);
}
