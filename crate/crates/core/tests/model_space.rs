use mtto_core::fourier::circle_grid;
use mtto_core::model_space::{project_model, project_theta_h2};
use mtto_core::{MatrixInner, ScalarInner, TrigPoly, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Naive DFT coefficients `0..=n` of grid values on `M` circle points.
fn naive_coefficients(values: &[C64], n: usize) -> Vec<C64> {
    let m = values.len();
    let nodes = circle_grid(m);
    (0..=n)
        .map(|k| {
            values
                .iter()
                .zip(&nodes)
                .map(|(v, z)| v * z.powi(-(k as i32)))
                .sum::<C64>()
                / m as f64
        })
        .collect()
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

#[test]
fn single_zero_basis_matches_transform_of_closed_form() {
    let a = c(0.5, 0.0);
    let n = 60;
    let closed: Vec<C64> = circle_grid(256)
        .iter()
        .map(|z| (1.0 - a.norm_sqr()).sqrt() / (1.0 - a.conj() * z))
        .collect();
    let expected = naive_coefficients(&closed, n);
    let (basis, tail) = ScalarInner::blaschke(vec![a]).model_basis(n);
    assert_eq!(basis.len(), 1);
    assert!(tail < 1e-15);
    for (x, y) in basis[0].iter().zip(&expected) {
        assert!((x - y).norm() < 1e-13);
    }
}

#[test]
fn takenaka_basis_spans_szego_kernels() {
    let zeros = vec![c(0.3, 0.2), c(-0.4, 0.1), c(0.0, -0.6)];
    let n = 120;
    let (tm, tail) = ScalarInner::blaschke(zeros.clone()).model_basis(n);
    assert!(tail < 1e-12);
    // Gram–Schmidt on the kernels 1/(1 − ā z), coefficients ā^k.
    let mut gs: Vec<Vec<C64>> = Vec::new();
    for a in &zeros {
        let mut v: Vec<C64> = (0..=n).map(|k| a.conj().powi(k as i32)).collect();
        for q in &gs {
            let p = inner(&v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
        }
        let norm = inner(&v, &v).re.sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        gs.push(v);
    }
    for (i, u) in tm.iter().enumerate() {
        let mut r = u.clone();
        r.resize(n + 1, c(0.0, 0.0));
        for q in &gs {
            let p = inner(&r, q);
            r.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
        }
        assert!(
            inner(&r, &r).re.sqrt() < 1e-10,
            "basis vector {i} leaves the span"
        );
        for (j, w) in tm.iter().enumerate() {
            let g = inner(u, w);
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((g - c(expect, 0.0)).norm() < 1e-10);
        }
    }
}

#[test]
fn monomial_basis_is_unit_vectors() {
    let theta = MatrixInner::monomial(&[2, 0, 3]).unwrap();
    let b = theta.model_basis(4).unwrap();
    assert_eq!(b.len(), 5);
    let mut expected = Vec::new();
    for (i, k) in [2, 0, 3].iter().enumerate() {
        for j in 0..*k {
            expected.push(TrigPoly::unit(3, i, j));
        }
    }
    for e in &expected {
        assert!(b
            .vectors
            .iter()
            .any(|v| v.sub(e).unwrap().l2_norm() < 1e-15));
    }
}

fn mixed_inner() -> MatrixInner {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let left = DMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(0.0, s), c(0.0, s), c(s, 0.0)]);
    let right =
        DMatrix::from_row_slice(2, 2, &[c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    MatrixInner::new(
        left,
        vec![
            ScalarInner::blaschke(vec![c(0.5, 0.0), c(-0.2, 0.3)]),
            ScalarInner::monomial(2),
        ],
        right,
    )
    .unwrap()
}

#[test]
fn expanded_symbol_is_unitary_on_the_circle() {
    let theta = mixed_inner();
    let n = theta.default_truncation();
    let (sym, tail) = theta.symbol(n).unwrap();
    for z in circle_grid(32) {
        let v = sym.eval(z);
        let dev = (v.adjoint() * &v - DMatrix::<C64>::identity(2, 2)).norm();
        assert!(dev < 1e-10 + 4.0 * tail, "deviation {dev}");
        assert!((v - theta.eval(z)).norm() < 1e-10);
    }
}

#[test]
fn reproducing_property_at_interior_points() {
    let theta = ScalarInner::blaschke(vec![c(0.4, 0.0), c(0.0, 0.5)]);
    let n = 80;
    let (basis, _) = theta.model_basis(n);
    for zeta in [c(0.1, 0.2), c(-0.5, 0.3), c(0.0, 0.0)] {
        let (k, tail) = theta.reproducing_kernel(zeta, n).unwrap();
        assert!(tail < 1e-10);
        for (b, val) in basis.iter().zip(theta.basis_values(zeta)) {
            let f = TrigPoly::scalar(0, b);
            let ip = f.inner_product(&k).unwrap();
            assert!((ip - val).norm() < 1e-10);
        }
    }
}

#[test]
fn inner_function_json_round_trip() {
    let theta = mixed_inner();
    let s = serde_json::to_string(&theta).unwrap();
    let back: MatrixInner = serde_json::from_str(&s).unwrap();
    assert_eq!(back, theta);
    let bad = s.replace("\"n\":2", "\"n\":2,\"extra\":1");
    assert!(serde_json::from_str::<MatrixInner>(&bad).is_err());
}

fn analytic_poly(dim: usize, hi: usize) -> impl Strategy<Value = TrigPoly> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * (hi + 1)).prop_map(move |v| {
        TrigPoly::from_flat(dim, 0, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projections_are_complementary_and_orthogonal(f in analytic_poly(2, 8), g in analytic_poly(2, 8)) {
        let theta = mixed_inner();
        let n = theta.default_truncation();
        let pf = project_model(&theta, &f, n).unwrap();
        let qf = project_theta_h2(&theta, &f, n).unwrap();
        let tol = 1e-9 * (1.0 + f.l2_norm());
        prop_assert!(pf.add(&qf).unwrap().sub(&f).unwrap().l2_norm() < tol);
        prop_assert!(project_model(&theta, &pf, n).unwrap().sub(&pf).unwrap().l2_norm() < tol);
        prop_assert!(project_model(&theta, &qf, n).unwrap().l2_norm() < tol);
        prop_assert!(pf.inner_product(&qf).unwrap().norm() < tol * (1.0 + f.l2_norm()));
        let pg = project_model(&theta, &g, n).unwrap();
        let lhs = pf.inner_product(&g).unwrap();
        let rhs = f.inner_product(&pg).unwrap();
        prop_assert!((lhs - rhs).norm() < tol * (1.0 + g.l2_norm()));
    }

    #[test]
    fn projection_lands_in_the_model_space(f in analytic_poly(2, 6)) {
        let theta = mixed_inner();
        let n = theta.default_truncation();
        let basis = theta.model_basis(n).unwrap();
        let pf = project_model(&theta, &f, n).unwrap();
        let x = basis.coordinates(&pf).unwrap();
        let back = basis.synthesize(x.as_slice()).unwrap();
        prop_assert!(back.sub(&pf).unwrap().l2_norm() < 1e-9 * (1.0 + f.l2_norm()));
    }
}
