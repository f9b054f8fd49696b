//! Optimal linear assignment on rectangular cost matrices.
//!
//! `+∞` entries are forbidden pairs. [`solve`] returns a matching of maximum
//! cardinality among finite pairs and, among those, one of minimum total
//! cost. The solver runs the shortest-augmenting-path Hungarian method over
//! lexicographic costs `(forbidden count, finite sum)`, so forbidden entries
//! are excluded exactly instead of being replaced by a large constant.
//!
//! [`MurtyNode`] partitions the solution space for k-best enumeration, which
//! the multiple-hypothesis tracker uses to branch global hypotheses.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    cost: Vec<f64>,
}

impl CostMatrix {
    /// Row-major entries, each `>= 0` or `+∞`.
    pub fn new(rows: usize, cols: usize, cost: Vec<f64>) -> Result<Self> {
        if cost.len() != rows * cols {
            return Err(Error::param(
                "cost",
                format!("expected {} entries, got {}", rows * cols, cost.len()),
            ));
        }
        if let Some(bad) = cost.iter().find(|c| c.is_nan() || **c < 0.0) {
            return Err(Error::param("cost", format!("entry {bad} is not in [0, +inf]")));
        }
        Ok(Self { rows, cols, cost })
    }

    /// All-forbidden matrix.
    pub fn forbidden(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cost: vec![f64::INFINITY; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut cost = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                cost.push(f(r, c));
            }
        }
        Self::new(rows, cols, cost)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.cost[r * self.cols + c]
    }

    /// Overwrite one entry. Negative or NaN values are stored as `+∞`.
    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.cost[r * self.cols + c] = if v.is_nan() || v < 0.0 { f64::INFINITY } else { v };
    }

    pub fn forbid_row(&mut self, r: usize) {
        for c in 0..self.cols {
            self.set(r, c, f64::INFINITY);
        }
    }

    pub fn forbid_col(&mut self, c: usize) {
        for r in 0..self.rows {
            self.set(r, c, f64::INFINITY);
        }
    }

    pub fn transpose(&self) -> CostMatrix {
        let mut cost = Vec::with_capacity(self.cost.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                cost.push(self.get(r, c));
            }
        }
        CostMatrix {
            rows: self.cols,
            cols: self.rows,
            cost,
        }
    }

    pub fn has_finite(&self) -> bool {
        self.cost.iter().any(|c| c.is_finite())
    }

    pub fn min_finite(&self) -> Option<f64> {
        self.cost
            .iter()
            .copied()
            .filter(|c| c.is_finite())
            .min_by(f64::total_cmp)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
}

impl Assignment {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn total(&self, c: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(r, col)| c.get(r, col)).sum()
    }

    pub fn col_of(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }

    pub fn row_of(&self, col: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.1 == col).map(|p| p.0)
    }
}

/// Lexicographic cost: number of forbidden pairs first, then the finite sum.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Lex {
    forbidden: i64,
    value: f64,
}

impl Lex {
    const ZERO: Lex = Lex {
        forbidden: 0,
        value: 0.0,
    };
    const MAX: Lex = Lex {
        forbidden: i64::MAX / 4,
        value: 0.0,
    };

    fn of(c: f64) -> Lex {
        if c.is_finite() {
            Lex { forbidden: 0, value: c }
        } else {
            Lex {
                forbidden: 1,
                value: 0.0,
            }
        }
    }

    fn add(self, o: Lex) -> Lex {
        Lex {
            forbidden: self.forbidden + o.forbidden,
            value: self.value + o.value,
        }
    }

    fn sub(self, o: Lex) -> Lex {
        Lex {
            forbidden: self.forbidden - o.forbidden,
            value: self.value - o.value,
        }
    }

    fn lt(self, o: Lex) -> bool {
        match self.forbidden.cmp(&o.forbidden) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.value < o.value,
        }
    }
}

/// Hungarian method for `n <= m` (rows <= cols); returns the column of each
/// row under the lexicographic objective.
fn hungarian(n: usize, m: usize, a: impl Fn(usize, usize) -> Lex) -> Vec<usize> {
    debug_assert!(n <= m);
    // 1-based indexing with a virtual column 0, as in the classic formulation
    let mut u = vec![Lex::ZERO; n + 1];
    let mut v = vec![Lex::ZERO; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![Lex::MAX; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = Lex::MAX);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = Lex::MAX;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1).sub(u[i0]).sub(v[j]);
                if cur.lt(minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j].lt(delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] = u[p[j]].add(delta);
                    v[j] = v[j].sub(delta);
                } else {
                    minv[j] = minv[j].sub(delta);
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] != 0 {
            col_of_row[p[j] - 1] = j - 1;
        }
    }
    col_of_row
}

/// Maximum-cardinality, minimum-cost assignment over finite entries.
pub fn solve(c: &CostMatrix) -> Assignment {
    if c.rows == 0 || c.cols == 0 {
        return Assignment::default();
    }
    let mut pairs: Vec<(usize, usize)> = if c.rows <= c.cols {
        hungarian(c.rows, c.cols, |r, k| Lex::of(c.get(r, k)))
            .into_iter()
            .enumerate()
            .collect()
    } else {
        hungarian(c.cols, c.rows, |r, k| Lex::of(c.get(k, r)))
            .into_iter()
            .enumerate()
            .map(|(col, row)| (row, col))
            .collect()
    };
    pairs.retain(|&(r, k)| k != usize::MAX && r != usize::MAX && c.get(r, k).is_finite());
    pairs.sort_unstable();
    Assignment { pairs }
}

/// One cell of a Murty partition: a constrained cost matrix and its optimal
/// complete assignment (every row matched to a finite entry).
#[derive(Debug, Clone)]
pub struct MurtyNode {
    pub costs: CostMatrix,
    pub assignment: Assignment,
    pub total: f64,
    /// Number of leading rows whose pairs are forced in this cell.
    fixed: usize,
}

impl MurtyNode {
    /// Best complete assignment of `costs`, or `None` when some row cannot
    /// be matched to a finite entry.
    pub fn root(costs: CostMatrix) -> Option<Self> {
        Self::solved(costs, 0)
    }

    fn solved(costs: CostMatrix, fixed: usize) -> Option<Self> {
        if costs.rows > costs.cols {
            return None;
        }
        let assignment = solve(&costs);
        if assignment.len() != costs.rows {
            return None;
        }
        let total = assignment.total(&costs);
        Some(Self {
            costs,
            assignment,
            total,
            fixed,
        })
    }

    /// Disjoint sub-cells covering every complete assignment of this cell
    /// except its own optimum.
    pub fn partition(&self) -> Vec<MurtyNode> {
        let pairs = &self.assignment.pairs;
        let mut out = Vec::new();
        let mut base = self.costs.clone();
        for (i, &(r, c)) in pairs.iter().enumerate().skip(self.fixed) {
            let mut child = base.clone();
            child.set(r, c, f64::INFINITY);
            if let Some(node) = Self::solved(child, i) {
                out.push(node);
            }
            // force (r, c) for the following cells
            let keep = base.get(r, c);
            base.forbid_row(r);
            base.forbid_col(c);
            base.set(r, c, keep);
        }
        out
    }
}

struct Ranked(MurtyNode, usize);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on total, then insertion order
        other
            .0
            .total
            .total_cmp(&self.0.total)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// Up to `k` complete assignments (every row matched) in non-decreasing
/// cost order.
pub fn k_best(costs: &CostMatrix, k: usize) -> Vec<Assignment> {
    let mut out = Vec::new();
    let Some(root) = MurtyNode::root(costs.clone()) else {
        return out;
    };
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Ranked(root, seq));
    while let Some(Ranked(node, _)) = heap.pop() {
        if out.len() >= k {
            break;
        }
        if out.len() + 1 < k {
            for child in node.partition() {
                seq += 1;
                heap.push(Ranked(child, seq));
            }
        }
        out.push(node.assignment);
    }
    out
}
