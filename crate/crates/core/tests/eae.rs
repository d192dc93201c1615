use mtto_core::eae;
use mtto_core::{mtto, sweep, ExponentPair, MatrixInner, MatrixSymbol};
use proptest::prelude::*;

#[test]
fn shift_kernels_have_closed_form_dimension() {
    // A_{z^s} on K_{z^k} kills z^{k−s}, …, z^{k−1}.
    for k in 1..=4usize {
        for s in 0..=5i64 {
            let theta = MatrixInner::monomial(&[k]).unwrap();
            let g = MatrixSymbol::identity(1).shift(s);
            let r = eae::verify_kernel_projection(&theta, &g, 0, None).unwrap();
            assert_eq!(r.dim_ker_a, (s as usize).min(k));
            assert_eq!(r.dim_ker_t_g, r.dim_ker_a);
            assert!(r.pass);
        }
    }
}

#[test]
fn eae_report_on_block_shift() {
    let theta = MatrixInner::monomial(&[2, 2]).unwrap();
    let g = MatrixSymbol::identity(2).shift(1);
    let r = eae::eae_consequences_report(&theta, &g, 0, 6, 5, ExponentPair::default()).unwrap();
    assert!(r.kernel_dims_equal);
    assert_eq!(r.dim_ker_a, 2);
    assert!(r.pass, "{r:#?}");
}

#[test]
fn unbounded_exponents_are_accepted() {
    let theta = MatrixInner::monomial(&[3]).unwrap();
    let g = MatrixSymbol::identity(1).shift(-1);
    let ex = ExponentPair::new(4.0).unwrap();
    let r = eae::eae_consequences_report(&theta, &g, 2, 3, 1, ex).unwrap();
    assert!(r.pass, "{r:#?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn first_coordinates_of_block_kernel_give_the_compression_kernel(seed in 0u64..1_000_000) {
        let inst = sweep::random_instance(seed).unwrap();
        let r = eae::verify_kernel_projection(&inst.theta, &inst.g, 0, None).unwrap();
        prop_assert!(r.pass, "{r:?}");
    }

    #[test]
    fn factorisation_holds(seed in 0u64..1_000_000) {
        let inst = sweep::random_instance(seed).unwrap();
        let f = eae::factor_operators(&inst.theta, &inst.g, eae::kernel_window(&inst.theta, &inst.g), None).unwrap();
        prop_assert!(f.report.pass, "{:?}", f.report);
    }

    #[test]
    fn codomain_splits_reassemble(seed in 0u64..1_000_000) {
        let inst = sweep::random_instance(seed).unwrap();
        let r = eae::eae_consequences_report(&inst.theta, &inst.g, 0, 3, seed, ExponentPair::default()).unwrap();
        prop_assert!(r.max_reassembly_residual < 1e-9, "{r:?}");
        let a = mtto::assemble_mtto(&inst.theta, &inst.g, inst.theta.default_truncation()).unwrap();
        prop_assert_eq!(r.dim_ker_a, mtto::kernel(&a, None).unwrap().len());
    }
}
