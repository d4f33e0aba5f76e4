mod common;

use cmvlab::coefficients::CoefficientSequence;
use cmvlab::operator::{assemble_cmv, cmv_lipschitz_constant, norm_diff, verify_sieve_square, Boundary};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn windows_are_unitary(
        table in prop::collection::vec(common::alpha(0.95), 1..7),
        half in 1usize..96,
        offset in -20i64..20,
    ) {
        let s = CoefficientSequence::periodic_table(table).unwrap();
        let dim = 2 * half;
        let w = assemble_cmv(&s, 2 * offset, dim, Boundary::PeriodicWrap).unwrap();
        prop_assert!(w.unitarity_residual() < 1e-12);
        let h = assemble_cmv(&s, 0, dim, Boundary::HalfLineLeft).unwrap();
        prop_assert!(h.unitarity_residual() < 1e-12);
    }

    #[test]
    fn interior_rows_follow_the_display(
        table in prop::collection::vec(common::alpha(0.95), 1..7),
        j in 2i64..10,
    ) {
        let s = CoefficientSequence::periodic_table(table).unwrap();
        let e = assemble_cmv(&s, 0, 32, Boundary::PeriodicWrap).unwrap();
        let a = |n: i64| s.eval(n);
        let r = |n: i64| s.rho(n);
        let even = [
            (2 * j - 1, a(2 * j).conj() * r(2 * j - 1)),
            (2 * j, -a(2 * j).conj() * a(2 * j - 1)),
            (2 * j + 1, a(2 * j + 1).conj() * r(2 * j)),
            (2 * j + 2, (r(2 * j + 1) * r(2 * j)).into()),
        ];
        let odd = [
            (2 * j - 1, (r(2 * j) * r(2 * j - 1)).into()),
            (2 * j, -r(2 * j) * a(2 * j - 1)),
            (2 * j + 1, -a(2 * j + 1).conj() * a(2 * j)),
            (2 * j + 2, -r(2 * j + 1) * a(2 * j)),
        ];
        for (row, cells) in [(2 * j, even), (2 * j + 1, odd)] {
            for col in 0..32 {
                let want = cells.iter().find(|c| c.0 == col).map(|c| c.1).unwrap_or_default();
                prop_assert!((e.get(row, col).unwrap() - want).norm() < 1e-14, "({}, {})", row, col);
            }
        }
    }

    #[test]
    fn sieved_norm_diff_lower_and_upper_bounds(
        t1 in prop::collection::vec(common::alpha(0.9), 4),
        t2 in prop::collection::vec(common::alpha(0.9), 4),
    ) {
        let (s1, s2) = (
            CoefficientSequence::periodic_table(t1).unwrap().sieve(),
            CoefficientSequence::periodic_table(t2).unwrap().sieve(),
        );
        let sup = s1.sup_distance(&s2, 0, 8);
        let nd = norm_diff(&s1, &s2, 16, Boundary::PeriodicWrap).unwrap();
        prop_assert!(sup <= nd + 1e-12, "{} > {}", sup, nd);
        prop_assert!(nd <= cmv_lipschitz_constant(0.9) * sup + 1e-12);
    }

    #[test]
    fn sieve_square_residuals(table in prop::collection::vec(common::alpha(0.95), 1..5)) {
        let p = table.len();
        let s = CoefficientSequence::periodic_table(table).unwrap();
        let half = 2 * p * 4;
        let rep = verify_sieve_square(&s, 2 * half).unwrap();
        prop_assert!(rep.x_invariant_residual < 1e-12);
        prop_assert!(rep.y_invariant_residual < 1e-12);
        prop_assert!(rep.similarity_residual < 1e-12);
    }
}

#[test]
fn large_window_unitary() {
    let s = CoefficientSequence::quasiperiodic(0.8, 0.618, 0.0).unwrap();
    let w = assemble_cmv(&s, 0, 2048, Boundary::HalfLineLeft).unwrap();
    assert!(w.unitarity_residual() < 1e-12);
    let p = s.periodize(2048).unwrap();
    let w = assemble_cmv(&p, 0, 2048, Boundary::PeriodicWrap).unwrap();
    assert!(w.unitarity_residual() < 1e-12);
}
