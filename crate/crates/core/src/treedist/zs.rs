//! Zhang-Shasha ordered tree edit distance.

use std::ops::Add;

use num_traits::Zero;

use super::tree::LabeledTree;

/// Edit costs over node labels.
pub trait CostModel<L> {
    type Cost: Copy + Ord + Add<Output = Self::Cost> + Zero;

    fn delete(&self, a: &L) -> Self::Cost;
    fn insert(&self, b: &L) -> Self::Cost;
    fn relabel(&self, a: &L, b: &L) -> Self::Cost;
}

/// One step of an optimal edit script; indices are postorder positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EditOp {
    Delete(usize),
    Insert(usize),
    /// Map a node of the first tree onto a node of the second (possibly at zero cost).
    Relabel(usize, usize),
}

struct Dp<'a, L, C: CostModel<L>> {
    a: &'a LabeledTree<L>,
    b: &'a LabeledTree<L>,
    costs: &'a C,
    /// Tree distances, row-major `m x n`.
    td: Vec<C::Cost>,
    /// Forest distance scratch, `(m + 1) x (n + 1)`, reused for every keyroot pair.
    fd: Vec<C::Cost>,
}

impl<'a, L, C: CostModel<L>> Dp<'a, L, C> {
    fn new(a: &'a LabeledTree<L>, b: &'a LabeledTree<L>, costs: &'a C) -> Self {
        let (m, n) = (a.len(), b.len());
        Dp {
            a,
            b,
            costs,
            td: vec![C::Cost::zero(); m * n],
            fd: vec![C::Cost::zero(); (m + 1) * (n + 1)],
        }
    }

    fn run(&mut self) {
        let (ka, kb) = (self.a.keyroots(), self.b.keyroots());
        for &i in &ka {
            for &j in &kb {
                self.forest(i, j);
            }
        }
    }

    /// Fill the forest table for the subtrees rooted at `i` and `j`.
    ///
    /// Cell `(x, y)` holds the distance between forests `l(i)..x` and
    /// `l(j)..y`, offset by one so row and column 0 are the empty forest.
    fn forest(&mut self, i: usize, j: usize) {
        let (a, b) = (self.a, self.b);
        let n = b.len();
        let (li, lj) = (a.leftmost(i), b.leftmost(j));
        let w = n + 1;
        let at = |x: usize, y: usize| x * w + y;
        self.fd[at(0, 0)] = C::Cost::zero();
        for x in li..=i {
            let r = x - li + 1;
            self.fd[at(r, 0)] = self.fd[at(r - 1, 0)] + self.costs.delete(a.label(x));
        }
        for y in lj..=j {
            let c = y - lj + 1;
            self.fd[at(0, c)] = self.fd[at(0, c - 1)] + self.costs.insert(b.label(y));
        }
        for x in li..=i {
            let r = x - li + 1;
            let del = self.costs.delete(a.label(x));
            let lx = a.leftmost(x);
            for y in lj..=j {
                let c = y - lj + 1;
                let ins = self.costs.insert(b.label(y));
                let ly = b.leftmost(y);
                let d = self.fd[at(r - 1, c)] + del;
                let e = self.fd[at(r, c - 1)] + ins;
                let v = if lx == li && ly == lj {
                    let s = self.fd[at(r - 1, c - 1)] + self.costs.relabel(a.label(x), b.label(y));
                    let v = d.min(e).min(s);
                    self.td[x * n + y] = v;
                    v
                } else {
                    let s = self.fd[at(lx - li, ly - lj)] + self.td[x * n + y];
                    d.min(e).min(s)
                };
                self.fd[at(r, c)] = v;
            }
        }
    }

    fn distance(&self) -> C::Cost {
        let (m, n) = (self.a.len(), self.b.len());
        self.td[(m - 1) * n + (n - 1)]
    }

    /// Walk back through the subtree pair `(i, j)` after its tree distance is known.
    fn backtrack(&mut self, i: usize, j: usize, ops: &mut Vec<EditOp>) {
        let (a, b) = (self.a, self.b);
        let w = b.len() + 1;
        let at = |x: usize, y: usize| x * w + y;
        self.forest(i, j);
        let (li, lj) = (a.leftmost(i), b.leftmost(j));
        // Rows and columns are offsets: r = x - li + 1.
        let (mut r, mut c) = (i - li + 1, j - lj + 1);
        let mut pending: Vec<(usize, usize)> = Vec::new();
        while r > 0 || c > 0 {
            let here = self.fd[at(r, c)];
            if r > 0 && here == self.fd[at(r - 1, c)] + self.costs.delete(a.label(li + r - 1)) {
                ops.push(EditOp::Delete(li + r - 1));
                r -= 1;
                continue;
            }
            if c > 0 && here == self.fd[at(r, c - 1)] + self.costs.insert(b.label(lj + c - 1)) {
                ops.push(EditOp::Insert(lj + c - 1));
                c -= 1;
                continue;
            }
            let (x, y) = (li + r - 1, lj + c - 1);
            if a.leftmost(x) == li && b.leftmost(y) == lj {
                ops.push(EditOp::Relabel(x, y));
                r -= 1;
                c -= 1;
            } else {
                pending.push((x, y));
                r = a.leftmost(x) - li;
                c = b.leftmost(y) - lj;
            }
        }
        // Nested pairs overwrite the scratch table, so visit them after this walk.
        for (x, y) in pending {
            self.backtrack(x, y, ops);
        }
    }
}

/// Minimal edit cost turning `a` into `b`.
pub fn zhang_shasha<L, C: CostModel<L>>(a: &LabeledTree<L>, b: &LabeledTree<L>, costs: &C) -> C::Cost {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.labels().iter().fold(C::Cost::zero(), |s, l| s + costs.insert(l)),
        (_, true) => a.labels().iter().fold(C::Cost::zero(), |s, l| s + costs.delete(l)),
        _ => {
            let mut dp = Dp::new(a, b, costs);
            dp.run();
            dp.distance()
        }
    }
}

/// Distance plus one optimal edit script, sorted by operation.
pub fn edit_script<L, C: CostModel<L>>(a: &LabeledTree<L>, b: &LabeledTree<L>, costs: &C) -> (C::Cost, Vec<EditOp>) {
    if a.is_empty() || b.is_empty() {
        let mut ops: Vec<EditOp> = (0..a.len()).map(EditOp::Delete).collect();
        ops.extend((0..b.len()).map(EditOp::Insert));
        return (zhang_shasha(a, b, costs), ops);
    }
    let mut dp = Dp::new(a, b, costs);
    dp.run();
    let d = dp.distance();
    let mut ops = Vec::new();
    dp.backtrack(a.len() - 1, b.len() - 1, &mut ops);
    ops.sort();
    (d, ops)
}
