use checkpoint_core::assignment::{k_best, solve, Assignment, CostMatrix};
use proptest::prelude::*;

/// Every injective row-to-column map over finite entries, as (pairs, cost).
fn all_matchings(c: &CostMatrix) -> Vec<(Vec<(usize, usize)>, f64)> {
    fn go(
        c: &CostMatrix,
        row: usize,
        used: &mut [bool],
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<(Vec<(usize, usize)>, f64)>,
    ) {
        if row == c.rows() {
            let cost = cur.iter().map(|&(r, k)| c.get(r, k)).sum();
            out.push((cur.clone(), cost));
            return;
        }
        go(c, row + 1, used, cur, out);
        for k in 0..c.cols() {
            if !used[k] && c.get(row, k).is_finite() {
                used[k] = true;
                cur.push((row, k));
                go(c, row + 1, used, cur, out);
                cur.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(c, 0, &mut vec![false; c.cols()], &mut Vec::new(), &mut out);
    out
}

fn matrix() -> impl Strategy<Value = CostMatrix> {
    (0usize..=5, 0usize..=5).prop_flat_map(|(r, c)| {
        proptest::collection::vec(prop_oneof![3 => 0.0f64..50.0, 1 => Just(f64::INFINITY)], r * c)
            .prop_map(move |v| CostMatrix::new(r, c, v).expect("valid costs"))
    })
}

fn is_matching(a: &Assignment, c: &CostMatrix) -> bool {
    let mut rows = std::collections::BTreeSet::new();
    let mut cols = std::collections::BTreeSet::new();
    a.pairs
        .iter()
        .all(|&(r, k)| r < c.rows() && k < c.cols() && c.get(r, k).is_finite() && rows.insert(r) && cols.insert(k))
}

proptest! {
    #[test]
    fn solve_matches_brute_force(c in matrix()) {
        let a = solve(&c);
        prop_assert!(is_matching(&a, &c));
        let all = all_matchings(&c);
        let best_len = all.iter().map(|m| m.0.len()).max().unwrap_or(0);
        let best_cost = all
            .iter()
            .filter(|m| m.0.len() == best_len)
            .map(|m| m.1)
            .fold(f64::INFINITY, f64::min);
        prop_assert_eq!(a.len(), best_len);
        if best_len > 0 {
            prop_assert!((a.total(&c) - best_cost).abs() < 1e-9);
        }
    }

    #[test]
    fn transpose_keeps_the_optimum(c in matrix()) {
        let a = solve(&c);
        let b = solve(&c.transpose());
        prop_assert_eq!(a.len(), b.len());
        prop_assert!((a.total(&c) - b.total(&c.transpose())).abs() < 1e-9);
    }

    #[test]
    fn k_best_enumerates_complete_assignments_in_order(c in matrix(), k in 1usize..8) {
        let got = k_best(&c, k);
        let mut complete: Vec<f64> = all_matchings(&c)
            .into_iter()
            .filter(|m| c.rows() > 0 && m.0.len() == c.rows())
            .map(|m| m.1)
            .collect();
        complete.sort_by(f64::total_cmp);
        if c.rows() == 0 {
            return Ok(());
        }
        prop_assert_eq!(got.len(), complete.len().min(k));
        for (a, want) in got.iter().zip(&complete) {
            prop_assert!(is_matching(a, &c));
            prop_assert_eq!(a.len(), c.rows());
            prop_assert!((a.total(&c) - want).abs() < 1e-9);
        }
        let distinct: std::collections::BTreeSet<_> = got.iter().map(|a| a.pairs.clone()).collect();
        prop_assert_eq!(distinct.len(), got.len());
    }
}

#[test]
fn cardinality_beats_cost() {
    // one cheap pair blocks two expensive ones; the larger matching wins
    let inf = f64::INFINITY;
    let c = CostMatrix::new(2, 2, vec![0.0, 100.0, 100.0, inf]).unwrap();
    let a = solve(&c);
    assert_eq!(a.pairs, vec![(0, 1), (1, 0)]);
}

#[test]
fn all_forbidden_gives_empty_assignment() {
    assert!(solve(&CostMatrix::forbidden(3, 4)).is_empty());
    assert!(k_best(&CostMatrix::forbidden(3, 4), 5).is_empty());
}
