use ilploss::polytope::IntBox;
use ilploss::solver::simplex::{solve_lp, LpOutcome, LpProblem};
use ilploss::solver::{
    parse_lp_file, solve_bnb, solve_exhaustive, write_lp_file, BnbOptions, IlpInstance, SolveStatus,
};
use proptest::prelude::*;

/// Random instance over `{0,1}^n` or `[-2,2]^n`. Integer costs make ties common.
fn instance() -> impl Strategy<Value = IlpInstance> {
    (any::<bool>(), 1usize..=10)
        .prop_map(|(binary, n)| if binary { (n, 0i64, 1i64) } else { (n.min(8), -2, 2) })
        .prop_flat_map(|(n, lo, hi)| {
            (
                prop::collection::vec(-3i32..=3, n),
                prop::collection::vec((prop::collection::vec(-2.0f64..2.0, n), -1.5f64..3.0), 0..6),
                Just((lo, hi)),
            )
        })
        .prop_map(|(c, rows, (lo, hi))| {
            let n = c.len();
            let c = c.into_iter().map(f64::from).collect();
            let (a, b) = rows.into_iter().unzip();
            IlpInstance::new(c, a, b, IntBox::uniform(lo, hi, n).unwrap()).unwrap()
        })
}

fn lp_root(inst: &IlpInstance) -> LpOutcome {
    let lo: Vec<f64> = inst.bounds.lo.iter().map(|&v| v as f64).collect();
    let hi: Vec<f64> = inst.bounds.hi.iter().map(|&v| v as f64).collect();
    solve_lp(&LpProblem { c: &inst.c, a: &inst.a, b: &inst.b, lo: &lo, hi: &hi })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bnb_matches_enumeration(inst in instance()) {
        let ex = solve_exhaustive(&inst).unwrap();
        let bb = solve_bnb(&inst, None, &BnbOptions::default()).unwrap();
        prop_assert_eq!(ex.status, bb.status);
        prop_assert_eq!(&ex.z, &bb.z);
        if ex.status == SolveStatus::Optimal {
            prop_assert!((ex.objective - bb.objective).abs() < 1e-9);
            let z = bb.z.as_ref().unwrap();
            prop_assert!(inst.is_feasible(z));
            if let LpOutcome::Optimal { objective, .. } = lp_root(&inst) {
                prop_assert!(objective <= bb.objective + 1e-7, "root bound {} above {}", objective, bb.objective);
            }
        }
    }

    #[test]
    fn warm_start_keeps_the_objective(inst in instance(), pick in any::<prop::sample::Index>()) {
        let cold = solve_bnb(&inst, None, &BnbOptions::default()).unwrap();
        prop_assume!(cold.status == SolveStatus::Optimal);
        let best = cold.z.clone().unwrap();
        let warm = solve_bnb(&inst, Some(&best), &BnbOptions::default()).unwrap();
        prop_assert_eq!(warm.status, SolveStatus::Optimal);
        prop_assert!((warm.objective - cold.objective).abs() < 1e-9);
        prop_assert_eq!(&warm.z, &cold.z);
        prop_assert!(warm.nodes_explored <= cold.nodes_explored);

        // any other warm start, feasible or not, leaves the objective alone
        let n = inst.num_vars();
        let other: Vec<i64> = (0..n).map(|i| {
            let span = inst.bounds.hi[i] - inst.bounds.lo[i] + 1;
            inst.bounds.lo[i] + ((pick.index(1 << 20) >> i) as i64 % span)
        }).collect();
        let w2 = solve_bnb(&inst, Some(&other), &BnbOptions::default()).unwrap();
        prop_assert!((w2.objective - cold.objective).abs() < 1e-9);
        prop_assert_eq!(&w2.z, &cold.z);
    }

    #[test]
    fn lp_file_round_trip(inst in instance()) {
        let text = write_lp_file(&inst);
        let back = parse_lp_file(&text).unwrap();
        prop_assert_eq!(back.num_vars(), inst.num_vars());
        prop_assert_eq!(back.num_rows(), inst.num_rows());
        prop_assert_eq!(&back.bounds, &inst.bounds);
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(1.0);
        for (x, y) in back.c.iter().zip(&inst.c) {
            prop_assert!(close(*x, *y));
        }
        for (ra, rb) in back.a.iter().zip(&inst.a) {
            for (x, y) in ra.iter().zip(rb) {
                prop_assert!(close(*x, *y));
            }
        }
        for (x, y) in back.b.iter().zip(&inst.b) {
            prop_assert!(close(*x, *y));
        }
    }
}
