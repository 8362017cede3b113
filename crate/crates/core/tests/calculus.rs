//! Cross-cutting properties of the fibred calculus: exactness of d_p on both
//! backends, naturality under restriction and pullback, the flow-derivative
//! identity, and grid convergence of the discrete derivative.

use proptest::prelude::*;
use std::sync::Arc;
use weinfib_core::{
    contract, fibred_d, lie_derivative, pullback, restrict, sample_to_cochain, BaseGrid,
    CochainForm, Components, FibreComplex, FibredForm, FieldForm, FormSlice, VerticalField,
    VerticalMap,
};

fn circle_base(m: usize) -> Arc<BaseGrid> {
    Arc::new(BaseGrid::circle(m).unwrap())
}

/// d∘d vanishes bit-exactly on dyadic inputs: every intermediate sum is
/// exact in f64, so the integer cancellation of the incidence tables
/// survives the float evaluation.
#[test]
fn d_squared_is_bit_zero_on_dyadic_cochains() {
    let complexes = vec![
        FibreComplex::torus(&[8]).unwrap(),
        FibreComplex::torus(&[8, 6]).unwrap(),
        FibreComplex::torus(&[4, 4, 4]).unwrap(),
        FibreComplex::torus(&[3, 4, 3, 4]).unwrap(),
        FibreComplex::cylinder(8, 5, 1.0).unwrap(),
    ];
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next_dyadic = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 40) as i64 - (1 << 23)) as f64 / 1024.0
    };
    for cx in complexes {
        let cx = Arc::new(cx);
        for k in 0..cx.dim().saturating_sub(1) {
            for _ in 0..5 {
                let v: Vec<f64> = (0..cx.cell_count(k)).map(|_| next_dyadic()).collect();
                let d1 = cx.apply_d(k, &v).unwrap();
                let d2 = cx.apply_d(k + 1, &d1).unwrap();
                assert!(
                    d2.iter().all(|&x| x == 0.0),
                    "d∘d != 0 bitwise at degree {k}, dim {}",
                    cx.dim()
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn d_squared_is_negligible_on_float_cochains(seed in 0u64..10_000) {
        let cx = Arc::new(FibreComplex::torus(&[8, 6]).unwrap());
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).max(1);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let v: Vec<f64> = (0..cx.cell_count(0)).map(|_| next()).collect();
        let d1 = cx.apply_d(0, &v).unwrap();
        let d2 = cx.apply_d(1, &d1).unwrap();
        prop_assert!(d2.iter().all(|&x| x.abs() < 1e-12));
    }
}

#[test]
fn field_d_squared_small_under_finite_differences() {
    let cx = FibreComplex::torus(&[8, 8]).unwrap();
    // no exact jet: both derivatives go through central differences
    let alpha = FieldForm::new(
        2,
        0,
        cx.domain(),
        Arc::new(|_, x: &[f64]| {
            let mut c = Components::new();
            c.push((x[0].sin() * x[1].cos()).exp());
            c
        }),
    );
    let dd = alpha.d().unwrap().d().unwrap();
    let h_fd = alpha.fd_step;
    for (t1, t2) in [(0.3, 1.2), (2.0, 4.4), (5.9, 0.1)] {
        let c = dd.components(0.0, &[t1, t2]);
        assert!(
            c[0].abs() <= 10.0 * h_fd,
            "dd = {} exceeds 10 h_fd",
            c[0]
        );
    }
}

#[test]
fn restriction_commutes_with_field_operations() {
    let base = circle_base(5);
    let cx = FibreComplex::cylinder(8, 7, 2.0).unwrap();
    let alpha = FibredForm::field(
        base.clone(),
        FieldForm::new(
            2,
            2,
            cx.domain(),
            Arc::new(|b, x: &[f64]| {
                let mut c = Components::new();
                c.push((1.0 + 0.5 * b.sin()) * (1.0 + 0.2 * x[0].cos()));
                c
            }),
        ),
    );
    let z = VerticalField::new(
        2,
        cx.domain(),
        Arc::new(|_, x: &[f64]| {
            let mut v = weinfib_core::FibrePoint::new();
            v.push(0.3);
            v.push(x[1]);
            v
        }),
    );
    let contracted = contract(&z, &alpha).unwrap();
    for s in [0usize, 2, 4] {
        let b = base.samples()[s];
        let restricted = match restrict(&contracted, s).unwrap() {
            FormSlice::Field { eval, .. } => eval,
            _ => unreachable!(),
        };
        let direct = contracted.as_field().unwrap();
        for x in [[0.4, 0.3], [3.0, -1.2]] {
            let a = restricted(&x);
            let bv = direct.components(b, &x);
            for (u, v) in a.iter().zip(bv.iter()) {
                assert!((u - v).abs() <= 1e-14);
            }
        }
    }
}

#[test]
fn restriction_of_b_dependent_form_evaluates_the_sample() {
    // omega_b = (1 + 0.5 sin b) dtheta ^ dr at b = 0 is dtheta ^ dr
    let base = circle_base(8);
    let cx = FibreComplex::cylinder(8, 7, 2.0).unwrap();
    let omega = FibredForm::field(
        base,
        FieldForm::new(
            2,
            2,
            cx.domain(),
            Arc::new(|b, _x: &[f64]| {
                let mut c = Components::new();
                c.push(1.0 + 0.5 * b.sin());
                c
            }),
        ),
    );
    match restrict(&omega, 0).unwrap() {
        FormSlice::Field { eval, .. } => {
            let c = eval(&[1.0, 0.5]);
            assert_eq!(c[0], 1.0);
        }
        _ => unreachable!(),
    }
}

#[test]
fn pullback_functoriality() {
    let cx = FibreComplex::cylinder(8, 7, 4.0).unwrap();
    let base = circle_base(4);
    let alpha = FibredForm::field(
        base.clone(),
        FieldForm::new(
            2,
            1,
            cx.domain(),
            Arc::new(|_, x: &[f64]| {
                let mut c = Components::new();
                c.push(x[1]);
                c.push(x[0].sin());
                c
            }),
        ),
    );
    let phi = VerticalMap::new(
        2,
        cx.domain(),
        Arc::new(|_, x: &[f64]| {
            let mut y = weinfib_core::FibrePoint::new();
            y.push(x[0]);
            y.push(2.0 * x[1]);
            y
        }),
    );
    let psi = VerticalMap::new(
        2,
        cx.domain(),
        Arc::new(|b, x: &[f64]| {
            let mut y = weinfib_core::FibrePoint::new();
            y.push(x[0] + 0.3 * b.cos());
            y.push(x[1] + 0.1 * x[0].sin());
            y
        }),
    );
    let composed = pullback(&phi.compose(&psi), &alpha).unwrap();
    let staged = pullback(&psi, &pullback(&phi, &alpha).unwrap()).unwrap();
    for (b, x) in [(0.0, [0.5, 0.2]), (1.3, [2.0, -0.4])] {
        let a = composed.as_field().unwrap().components(b, &x);
        let bv = staged.as_field().unwrap().components(b, &x);
        for (u, v) in a.iter().zip(bv.iter()) {
            assert!((u - v).abs() < 1e-6, "functoriality: {u} vs {v}");
        }
    }
}

#[test]
fn pullback_commutes_with_fibred_d() {
    let cx = FibreComplex::cylinder(8, 7, 4.0).unwrap();
    let base = circle_base(4);
    let alpha = FibredForm::field(
        base,
        FieldForm::new(
            2,
            1,
            cx.domain(),
            Arc::new(|_, x: &[f64]| {
                let mut c = Components::new();
                c.push(x[1] * x[0].cos());
                c.push(0.2 * x[1]);
                c
            }),
        ),
    );
    let phi = VerticalMap::new(
        2,
        cx.domain(),
        Arc::new(|_, x: &[f64]| {
            let mut y = weinfib_core::FibrePoint::new();
            y.push(x[0] + 0.2 * x[1].sin());
            y.push(1.5 * x[1]);
            y
        }),
    );
    let d_then_pull = pullback(&phi, &fibred_d(&alpha).unwrap()).unwrap();
    let pull_then_d = fibred_d(&pullback(&phi, &alpha).unwrap()).unwrap();
    for (b, x) in [(0.0, [0.5, 0.2]), (2.0, [3.1, -0.3])] {
        let a = d_then_pull.as_field().unwrap().components(b, &x);
        let bv = pull_then_d.as_field().unwrap().components(b, &x);
        for (u, v) in a.iter().zip(bv.iter()) {
            assert!((u - v).abs() < 1e-6, "naturality of d: {u} vs {v}");
        }
    }
}

#[test]
fn flow_derivative_matches_lie_derivative() {
    // Z = r d/dr with flow (theta, e^t r) against the Cartan formula
    let cx = FibreComplex::cylinder(8, 7, 4.0).unwrap();
    let base = circle_base(4);
    let omega = FibredForm::field(
        base.clone(),
        FieldForm::constant(2, 2, cx.domain(), vec![1.0]),
    );
    let z = VerticalField::new(
        2,
        cx.domain(),
        Arc::new(|_, x: &[f64]| {
            let mut v = weinfib_core::FibrePoint::new();
            v.push(0.0);
            v.push(x[1]);
            v
        }),
    );
    let lie = lie_derivative(&z, &omega).unwrap();
    let h = 1e-3;
    let flow = |t: f64| {
        VerticalMap::new(
            2,
            cx.domain(),
            Arc::new(move |_, x: &[f64]| {
                let mut y = weinfib_core::FibrePoint::new();
                y.push(x[0]);
                y.push(t.exp() * x[1]);
                y
            }),
        )
    };
    let plus = pullback(&flow(h), &omega).unwrap();
    let minus = pullback(&flow(-h), &omega).unwrap();
    for (b, x) in [(0.0, [0.7, 0.4]), (1.1, [2.2, -0.8])] {
        let lv = lie.as_field().unwrap().components(b, &x);
        let p = plus.as_field().unwrap().components(b, &x);
        let m = minus.as_field().unwrap().components(b, &x);
        for i in 0..lv.len() {
            let fd = (p[i] - m[i]) / (2.0 * h);
            assert!((fd - lv[i]).abs() < 1e-5, "flow derivative {fd} vs lie {}", lv[i]);
        }
    }
}

#[test]
fn discrete_d_converges_at_second_order() {
    let base = circle_base(3);
    let analytic = |n: usize| -> (CochainForm, CochainForm) {
        let cx = Arc::new(FibreComplex::torus(&[n, n]).unwrap());
        let alpha = FieldForm::new(
            2,
            1,
            cx.domain(),
            Arc::new(|_, x: &[f64]| {
                let mut c = Components::new();
                c.push(x[1].sin());
                c.push(0.3 * x[0].cos());
                c
            }),
        );
        let d_alpha = FieldForm::new(
            2,
            2,
            cx.domain(),
            Arc::new(|_, x: &[f64]| {
                let mut c = Components::new();
                c.push(-0.3 * x[0].sin() - x[1].cos());
                c
            }),
        );
        let sampled = sample_to_cochain(&alpha, &base, &cx).unwrap();
        let expected = sample_to_cochain(&d_alpha, &base, &cx).unwrap();
        (sampled.d().unwrap(), expected)
    };
    let mut errs = Vec::new();
    for n in [8usize, 16, 32] {
        let (got, expected) = analytic(n);
        errs.push(got.add_scaled(&expected, -1.0).unwrap().sup_norm());
    }
    assert!(errs[0] / errs[1] > 3.2 && errs[0] / errs[1] < 4.8, "{errs:?}");
    assert!(errs[1] / errs[2] > 3.2 && errs[1] / errs[2] < 4.8, "{errs:?}");
}

#[test]
fn field_without_derivatives_refuses_d_when_fd_disabled() {
    let cx = FibreComplex::torus(&[8]).unwrap();
    let alpha = FieldForm::new(
        1,
        0,
        cx.domain(),
        Arc::new(|_, x: &[f64]| {
            let mut c = Components::new();
            c.push(x[0].sin());
            c
        }),
    )
    .without_fd();
    assert!(matches!(
        alpha.d(),
        Err(weinfib_core::Error::MissingDerivative)
    ));
}

#[test]
fn contract_refuses_scalars() {
    let cx = FibreComplex::torus(&[8]).unwrap();
    let f = FieldForm::constant(1, 0, cx.domain(), vec![2.0]);
    let z = VerticalField::new(
        1,
        cx.domain(),
        Arc::new(|_, _| {
            let mut v = weinfib_core::FibrePoint::new();
            v.push(1.0);
            v
        }),
    );
    assert!(matches!(
        f.contract(&z),
        Err(weinfib_core::Error::ContractDegreeZero)
    ));
}
