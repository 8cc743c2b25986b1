//! Randomized checks of the retraction identities.

use nalgebra::{DMatrix, DVector};
use nhprk::liegroup::{adjoint, coadjoint, identity, MatrixGroup, ProductGroup, Retraction, Se2, So3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn groups() -> Vec<Box<dyn MatrixGroup>> {
    vec![Box::new(Se2), Box::new(So3), Box::new(ProductGroup::so3_r2())]
}

fn random_algebra(rng: &mut ChaCha8Rng, k: usize, radius: f64) -> DVector<f64> {
    let v = DVector::from_fn(k, |_, _| rng.gen_range(-1.0..1.0));
    v.normalize() * radius * rng.gen_range(0.05..1.0)
}

/// Worst violation of each identity over `samples` random points, with the
/// tolerance it must meet.
pub fn check(group: &dyn MatrixGroup, kind: Retraction, samples: usize, seed: u64) -> Vec<(&'static str, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = group.algebra_dim();
    let e = identity(group);
    let eps = 1e-5;
    let mut worst = [0.0_f64; 9];
    let zero = DVector::zeros(k);
    worst[0] = (kind.forward(group, &zero).unwrap() - &e).amax()
        + (kind.dtau(group, &zero).unwrap() - DMatrix::identity(k, k)).amax();
    for _ in 0..samples {
        let xi = random_algebra(&mut rng, k, 0.5);
        let eta = random_algebra(&mut rng, k, 1.0);
        let delta = random_algebra(&mut rng, k, 1.0);
        let mu = random_algebra(&mut rng, k, 1.0);
        let g = kind.forward(group, &xi).unwrap();
        let gi = group.inverse(&g);

        worst[1] = worst[1].max((group.vee(&group.hat(&eta)) - &eta).amax());
        worst[2] = worst[2].max((adjoint(group, &g) * adjoint(group, &gi) - DMatrix::identity(k, k)).amax());
        worst[3] = worst[3].max((kind.inverse(group, &g).unwrap() - &xi).amax());

        let lhs = kind.dtau_inv(group, &(-&xi)).unwrap();
        let rhs = kind.dtau_inv(group, &xi).unwrap() * adjoint(group, &gi);
        worst[4] = worst[4].max((lhs - rhs).amax());

        let dtau = kind.dtau(group, &xi).unwrap();
        let fd = (kind.forward(group, &(&xi + &eta * eps)).unwrap() - kind.forward(group, &(&xi - &eta * eps)).unwrap())
            / (2.0 * eps);
        worst[5] = worst[5].max((fd - &g * group.hat(&(&dtau * &eta))).amax());

        worst[6] = worst[6].max((kind.dtau_inv(group, &xi).unwrap() * (&dtau * &eta) - &eta).amax());

        let plus = kind.dtau(group, &(&xi + &delta * eps)).unwrap() * &eta;
        let minus = kind.dtau(group, &(&xi - &delta * eps)).unwrap() * &eta;
        let fd2 = (plus - minus) / (2.0 * eps);
        let analytic = &dtau * (kind.ddtau(group, &xi, &eta).unwrap() * &delta);
        worst[7] = worst[7].max((fd2 - analytic).amax());

        let pairing = coadjoint(group, &g, &mu).dot(&eta) - mu.dot(&(adjoint(group, &g) * &eta));
        worst[8] = worst[8].max(pairing.abs());
    }
    vec![
        ("retraction axioms", worst[0], 1e-14),
        ("vee of hat", worst[1], 1e-14),
        ("Ad inverse", worst[2], 1e-12),
        ("inverse retraction round trip", worst[3], 1e-12),
        ("dtau_inv(-xi) = dtau_inv(xi) Ad^-1", worst[4], 1e-12),
        ("dtau vs finite differences", worst[5], 1e-6),
        ("dtau_inv of dtau", worst[6], 1e-12),
        ("ddtau vs finite differences", worst[7], 1e-6),
        ("coadjoint pairing", worst[8], 1e-12),
    ]
}

/// Least-squares slope of `log ‖cay(ξ) − exp(ξ)‖` against `log ‖ξ‖`.
pub fn cay_exp_slope(group: &dyn MatrixGroup) -> f64 {
    let dir = DVector::from_fn(group.algebra_dim(), |i, _| 0.3 + 0.1 * i as f64).normalize();
    let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&r| {
            let xi = &dir * r;
            let d = (Retraction::Cay.forward(group, &xi).unwrap() - Retraction::Exp.forward(group, &xi).unwrap()).amax();
            (r.ln(), d.ln())
        })
        .collect();
    crate::support::slope(&pts)
}

pub fn all_pass(samples: usize) -> Result<(), String> {
    for (gi, group) in groups().iter().enumerate() {
        for kind in [Retraction::Cay, Retraction::Exp] {
            for (name, err, tol) in check(group.as_ref(), kind, samples, 7 + gi as u64) {
                if !(err <= tol) {
                    return Err(format!("{} {kind:?}: {name} error {err:.2e} > {tol:.0e}", group.name()));
                }
            }
        }
        let slope = cay_exp_slope(group.as_ref());
        if (slope - 3.0).abs() > 0.3 {
            return Err(format!("{}: cay vs exp slope {slope:.2}", group.name()));
        }
    }
    Ok(())
}
