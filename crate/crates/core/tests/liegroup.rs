mod support;

use nalgebra::dvector;
use nhprk::liegroup::{coadjoint, MatrixGroup, Retraction, So3};
use support::lie_identities::{all_pass, check, groups};

#[test]
fn identities_hold_at_random_points() {
    for group in groups() {
        for kind in [Retraction::Cay, Retraction::Exp] {
            for (name, err, tol) in check(group.as_ref(), kind, 100, 11) {
                assert!(err <= tol, "{} {kind:?} {name}: {err:e}", group.name());
            }
        }
    }
}

#[test]
fn cayley_and_exponential_agree_to_third_order() {
    all_pass(5).unwrap();
}

#[test]
fn so3_coadjoint_is_transpose_action() {
    let r = So3.exp(&dvector![0.3, -0.5, 0.2]);
    let mu = dvector![1.0, 2.0, -0.5];
    let out = coadjoint(&So3, &r, &mu);
    assert!((&out - r.transpose() * &mu).amax() < 1e-14);
    assert!((out.norm() - mu.norm()).abs() < 1e-14);
}

#[test]
fn inverse_retraction_guards_its_domain() {
    let g = Retraction::Cay.forward(&So3, &dvector![2.0, 0.0, 0.0]).unwrap();
    assert!(Retraction::Cay.inverse(&So3, &g).is_err());
}
