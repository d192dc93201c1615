use mtto_core::model_space::project_model;
use mtto_core::mtto::{self, GrowthVerdict};
use mtto_core::sweep;
use mtto_core::{Error, MatrixInner, MatrixSymbol, ScalarInner, TrigPoly, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Rank of an integer matrix by fraction-free elimination.
fn integer_rank(mut m: Vec<Vec<i128>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..rows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, p);
        for r in 0..rows {
            if r != rank && m[r][col] != 0 {
                let (a, b) = (m[rank][col], m[r][col]);
                let pivot = m[rank].clone();
                for (x, p) in m[r].iter_mut().zip(&pivot) {
                    *x = a * *x - b * p;
                }
                let g = m[r].iter().fold(0i128, |g, &x| gcd(g, x.abs()));
                if g > 1 {
                    m[r].iter_mut().for_each(|x| *x /= g);
                }
            }
        }
        rank += 1;
    }
    rank
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Integer symbol with coefficient `k` at `coeffs[k − lo]`, entries row-major.
fn int_symbol(n: usize, lo: i64, coeffs: &[Vec<i64>]) -> MatrixSymbol {
    let ms = coeffs
        .iter()
        .map(|v| DMatrix::from_row_slice(n, n, &v.iter().map(|&x| c(x as f64)).collect::<Vec<_>>()))
        .collect();
    MatrixSymbol::from_matrices(lo, ms).unwrap()
}

/// Index pairs `(i, p)` of the unit vectors `z^p e_i` spanning `K_{diag(z^k_i)}`.
/// The compression has entries `⟨P(G z^q e_j), z^p e_i⟩ = (C_{p−q})_{ij}`.
fn unit_indices(degrees: &[usize]) -> Vec<(usize, usize)> {
    degrees
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| (0..k).map(move |p| (i, p)))
        .collect()
}

#[test]
fn scalar_compression_is_toeplitz_section() {
    let theta = MatrixInner::monomial(&[5]).unwrap();
    let g = int_symbol(1, -2, &[vec![3], vec![-1], vec![2], vec![0], vec![1]]);
    let op = mtto::assemble_mtto(&theta, &g, 5).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let expect = g.coeff(i as i64 - j as i64)[(0, 0)];
            assert!((op.matrix[(i, j)] - expect).norm() < 1e-14);
        }
    }
}

#[test]
fn block_compression_entries() {
    let degrees = [2usize, 3];
    let theta = MatrixInner::monomial(&degrees).unwrap();
    let g = int_symbol(
        2,
        -1,
        &[vec![1, 0, 2, -1], vec![0, 3, 1, 1], vec![2, -2, 0, 1]],
    );
    let op = mtto::assemble_mtto(&theta, &g, 4).unwrap();
    let basis = theta.model_basis(4).unwrap();
    let idx = unit_indices(&degrees);
    // Locate each unit vector z^p e_i in the model basis.
    let pos = |i: usize, p: usize| {
        let u = TrigPoly::unit(2, i, p as i64);
        basis
            .vectors
            .iter()
            .position(|v| v.sub(&u).unwrap().l2_norm() < 1e-15)
            .unwrap()
    };
    for &(i, p) in &idx {
        for &(j, q) in &idx {
            let expect = g.coeff(p as i64 - q as i64)[(i, j)];
            assert!((op.matrix[(pos(i, p), pos(j, q))] - expect).norm() < 1e-14);
        }
    }
}

#[test]
fn kernel_dimension_matches_integer_rank() {
    let cases: Vec<(Vec<usize>, MatrixSymbol)> = vec![
        (vec![3, 3], int_symbol(2, 1, &[vec![1, 1, 1, 1]])),
        (
            vec![4, 2],
            int_symbol(2, 0, &[vec![1, 2, 2, 4], vec![0, 1, 0, 2]]),
        ),
        (vec![3], int_symbol(1, 2, &[vec![1]])),
        (
            vec![2, 3, 1],
            int_symbol(
                3,
                -1,
                &[
                    vec![1, 0, 0, 0, 0, 0, 0, 0, 1],
                    vec![0, 1, 1, 0, 1, 1, 0, 0, 0],
                ],
            ),
        ),
    ];
    for (degrees, g) in cases {
        let theta = MatrixInner::monomial(&degrees).unwrap();
        let op = mtto::assemble_mtto(&theta, &g, theta.default_truncation()).unwrap();
        let int_matrix: Vec<Vec<i128>> = (0..op.matrix.nrows())
            .map(|i| {
                (0..op.matrix.ncols())
                    .map(|j| op.matrix[(i, j)].re.round() as i128)
                    .collect()
            })
            .collect();
        let expected = op.matrix.ncols() - integer_rank(int_matrix);
        let ker = mtto::kernel(&op, None).unwrap();
        assert_eq!(ker.len(), expected, "degrees {degrees:?}");
        for v in &ker.vectors {
            let image =
                project_model(&theta, &g.apply(v).unwrap(), theta.default_truncation()).unwrap();
            assert!(image.l2_norm() < 1e-12);
        }
    }
}

#[test]
fn rank_one_operator_has_kernel_norm() {
    let zeta = C64::new(0.3, -0.4);
    let op = mtto::rank_one_tto(&ScalarInner::monomial(4), zeta, 4).unwrap();
    let expected: f64 = (0..4).map(|j| zeta.norm_sqr().powi(j)).sum();
    let s = op.singular_values().unwrap();
    assert!((s[0] - expected).abs() < 1e-13);
    assert!(s[1..].iter().all(|&x| x < 1e-14));

    let zeros = vec![C64::new(0.5, 0.0), C64::new(0.0, 0.5)];
    let theta = ScalarInner::blaschke(zeros.clone());
    let op = mtto::rank_one_tto(&theta, zeta, 80).unwrap();
    let closed: f64 = (1.0 - theta.eval(zeta).norm_sqr()) / (1.0 - zeta.norm_sqr());
    assert!((op.norm() - closed).abs() < 1e-10);
}

#[test]
fn boundary_rank_one_norms_follow_closed_form() {
    let zeros: Vec<C64> = (1..=6)
        .map(|k| C64::from_polar(1.0 - 0.5f64.powi(k), 0.3 * k as f64))
        .collect();
    let profile = mtto::rank_one_growth(&zeros, C64::new(1.0, 0.0), &[2, 4, 6]).unwrap();
    for s in &profile.steps {
        assert!(
            (s.norm - s.closed_form).abs() < 1e-8 * s.closed_form,
            "{s:?}"
        );
    }
    assert!(matches!(
        profile.verdict,
        GrowthVerdict::BoundedAtThisScale | GrowthVerdict::NoBoundedExtensionAtThisScale
    ));
}

#[test]
fn hankel_relation_rejects_coanalytic_symbols() {
    let theta = MatrixInner::monomial(&[2]).unwrap();
    let g = int_symbol(1, -1, &[vec![1]]);
    assert!(matches!(
        mtto::hankel_relation_check(&theta, &g, 2),
        Err(Error::NotAnalytic { .. })
    ));
}

#[test]
fn witness_rejects_non_kernel_vectors() {
    let theta = MatrixInner::monomial(&[2]).unwrap();
    let g = MatrixSymbol::identity(1);
    let f = TrigPoly::unit(1, 0, 0);
    assert!(matches!(
        mtto::lift_kernel_witness(&theta, &g, &f, 2, mtto::KERNEL_MEMBERSHIP_TOL),
        Err(Error::NotInKernel { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn kernel_vectors_lift_to_witnesses(seed in 0u64..10_000) {
        let inst = sweep::random_instance(seed).unwrap();
        let n = inst.theta.default_truncation();
        let op = mtto::assemble_mtto(&inst.theta, &inst.g, n).unwrap();
        for f1 in &mtto::kernel(&op, None).unwrap().vectors {
            let w = mtto::lift_kernel_witness(&inst.theta, &inst.g, f1, n, mtto::KERNEL_MEMBERSHIP_TOL).unwrap();
            prop_assert!(w.holds(f1.l2_norm()), "{w:?}");
        }
    }

    #[test]
    fn compression_agrees_with_projection(seed in 0u64..10_000) {
        let inst = sweep::random_instance(seed).unwrap();
        let n = inst.theta.default_truncation();
        let op = mtto::assemble_mtto(&inst.theta, &inst.g, n).unwrap();
        let basis = inst.theta.model_basis(n).unwrap();
        let x: Vec<C64> = (0..basis.len()).map(|i| C64::new((i as f64).sin(), (i as f64).cos())).collect();
        let f = basis.synthesize(&x).unwrap();
        let direct = project_model(&inst.theta, &inst.g.apply(&f).unwrap(), n).unwrap();
        prop_assert!(op.apply(&f).unwrap().sub(&direct).unwrap().l2_norm() < 1e-11 * (1.0 + direct.l2_norm()));
    }

    #[test]
    fn hankel_relation_holds_for_analytic_symbols(seed in 0u64..10_000) {
        let inst = sweep::random_instance(seed).unwrap();
        let hi = inst.g.hi().max(0);
        let psi = MatrixSymbol::from_matrices(0, (0..=hi).map(|k| inst.g.coeff(k)).collect()).unwrap();
        let r = mtto::hankel_relation_check(&inst.theta, &psi, inst.theta.default_truncation()).unwrap();
        prop_assert!(r.residual < 1e-9 + r.tail);
    }
}
