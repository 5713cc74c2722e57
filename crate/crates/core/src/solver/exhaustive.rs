use super::{tie_tol, IlpInstance, SolveResult, SolveStatus};
use crate::error::{Error, Result};

/// Largest number of box points [`solve_exhaustive`] will enumerate.
pub const ENUMERATION_BUDGET: u64 = 1 << 20;

/// Visits every box point in ascending lexicographic order.
fn for_each_point(inst: &IlpInstance, mut f: impl FnMut(&[i64])) {
    let n = inst.num_vars();
    let mut z = inst.bounds.lo.clone();
    loop {
        f(&z);
        let mut k = n;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if z[k] < inst.bounds.hi[k] {
                z[k] += 1;
                break;
            }
            z[k] = inst.bounds.lo[k];
        }
    }
}

/// Exact optimum by full enumeration. Ties within `1e-9` (relative) go to
/// the lexicographically smallest point.
pub fn solve_exhaustive(inst: &IlpInstance) -> Result<SolveResult> {
    inst.validate()?;
    let points = inst.bounds.num_points();
    if points > ENUMERATION_BUDGET as f64 {
        return Err(Error::BudgetExceeded { points, budget: ENUMERATION_BUDGET });
    }
    let mut best = f64::INFINITY;
    let mut visited = 0usize;
    for_each_point(inst, |z| {
        visited += 1;
        if inst.is_feasible(z) {
            best = best.min(inst.objective(z));
        }
    });
    if best == f64::INFINITY {
        return Ok(SolveResult::infeasible(visited));
    }
    let threshold = best + tie_tol(best);
    let mut found: Option<Vec<i64>> = None;
    for_each_point(inst, |z| {
        if found.is_none() && inst.objective(z) <= threshold && inst.is_feasible(z) {
            found = Some(z.to_vec());
        }
    });
    let z = found.expect("optimum point revisited");
    Ok(SolveResult { status: SolveStatus::Optimal, objective: inst.objective(&z), z: Some(z), nodes_explored: visited })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::IntBox;

    #[test]
    fn lex_tie_break() {
        let inst = IlpInstance::new(vec![1.0, 1.0], vec![vec![1.0, 1.0]], vec![-1.0], IntBox::binary(2)).unwrap();
        let r = solve_exhaustive(&inst).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, 1.0);
        assert_eq!(r.z, Some(vec![0, 1]));
    }

    #[test]
    fn infeasible_toy() {
        let inst = IlpInstance::new(vec![1.0], vec![vec![1.0]], vec![-2.0], IntBox::binary(1)).unwrap();
        assert_eq!(solve_exhaustive(&inst).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn unconstrained_positive_cost() {
        let inst = IlpInstance::new(vec![1.0; 6], vec![], vec![], IntBox::binary(6)).unwrap();
        assert_eq!(solve_exhaustive(&inst).unwrap().z, Some(vec![0; 6]));
    }

    #[test]
    fn budget() {
        let inst = IlpInstance::new(vec![1.0; 21], vec![], vec![], IntBox::binary(21)).unwrap();
        assert!(matches!(solve_exhaustive(&inst), Err(Error::BudgetExceeded { .. })));
    }
}
