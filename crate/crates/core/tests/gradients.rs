mod common;

use common::{gradient_suite, gradient_triple, LossKind};
use deepcent::losses::{cr_censored_mse, cr_censored_mse_grad, censored_mse, censored_mse_grad, CrLossParams};

#[test]
fn suite_matches_finite_differences() {
    let checks = gradient_suite(20);
    for (i, c) in checks.iter().enumerate() {
        assert!(c.max_rel_error < 1e-4, "triple {i} ({:?}): {c:?}", c.kind);
    }
    for kind in [LossKind::Deepcent, LossKind::Rankdeepsurv, LossKind::Competing] {
        assert!(checks.iter().any(|c| c.kind == kind));
    }
}

#[test]
fn individual_triples_are_deterministic() {
    let a = gradient_triple(5, LossKind::Competing);
    let b = gradient_triple(5, LossKind::Competing);
    assert_eq!(a.max_rel_error, b.max_rel_error);
    assert_eq!(a.n_parameters, b.n_parameters);
}

/// Loss gradients with respect to predictions alone.
#[test]
fn loss_output_gradients() {
    let y = [1.0, 2.0, 3.0, 4.0];
    let d = [1u8, 0, 1, 0];
    let yhat = [1.3, 1.5, 2.2, 4.4];
    let (v, g) = censored_mse_grad(&y, &d, &yhat, 0.7).unwrap();
    assert_eq!(v, censored_mse(&y, &d, &yhat, 0.7).unwrap());
    for i in 0..4 {
        let mut up = yhat;
        let mut dn = yhat;
        up[i] += 1e-6;
        dn[i] -= 1e-6;
        let fd = (censored_mse(&y, &d, &up, 0.7).unwrap() - censored_mse(&y, &d, &dn, 0.7).unwrap()) / 2e-6;
        assert!((fd - g[i]).abs() < 1e-6, "{i}: {fd} vs {}", g[i]);
    }

    let d2 = [1u8, 2, 0, 1];
    let a = [1.5, 2.5, 2.0, 3.0];
    let b = [1.2, 2.9, 3.5, 4.6];
    let p = CrLossParams {
        lambda0: 0.5,
        lambda1: 1.5,
        lambda2: 2.0,
        lambda3: 1.0,
        lambda4: 1.0,
    };
    let (_, g1, g2) = cr_censored_mse_grad(&y, &d2, &a, &b, &p).unwrap();
    for i in 0..4 {
        for (which, g) in [(0, &g1), (1, &g2)] {
            let (mut ua, mut ub, mut da, mut db) = (a, b, a, b);
            if which == 0 {
                ua[i] += 1e-6;
                da[i] -= 1e-6;
            } else {
                ub[i] += 1e-6;
                db[i] -= 1e-6;
            }
            let fd = (cr_censored_mse(&y, &d2, &ua, &ub, &p).unwrap() - cr_censored_mse(&y, &d2, &da, &db, &p).unwrap())
                / 2e-6;
            assert!((fd - g[i]).abs() < 1e-6, "cause {which} record {i}: {fd} vs {}", g[i]);
        }
    }
}
