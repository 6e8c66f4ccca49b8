/// Nested form used to build trees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node<L> {
    pub label: L,
    pub children: Vec<Node<L>>,
}

impl<L> Node<L> {
    pub fn new(label: L, children: Vec<Node<L>>) -> Self {
        Node { label, children }
    }

    pub fn leaf(label: L) -> Self {
        Node::new(label, Vec::new())
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Node::size).sum::<usize>()
    }
}

/// Ordered labeled tree stored in postorder, with leftmost-leaf indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTree<L> {
    labels: Vec<L>,
    leftmost: Vec<usize>,
    parent: Vec<Option<usize>>,
}

impl<L> LabeledTree<L> {
    pub fn empty() -> Self {
        LabeledTree {
            labels: Vec::new(),
            leftmost: Vec::new(),
            parent: Vec::new(),
        }
    }

    pub fn from_root(root: Node<L>) -> Self {
        let mut t = LabeledTree::empty();
        enum Step<L> {
            Enter(Node<L>),
            Exit(L, usize),
        }
        let mut stack = vec![Step::Enter(root)];
        let mut child_roots: Vec<Vec<usize>> = Vec::new();
        while let Some(s) = stack.pop() {
            match s {
                Step::Enter(n) => {
                    let first = t.labels.len();
                    child_roots.push(Vec::new());
                    stack.push(Step::Exit(n.label, first));
                    for c in n.children.into_iter().rev() {
                        stack.push(Step::Enter(c));
                    }
                }
                Step::Exit(label, first) => {
                    let kids = child_roots.pop().unwrap();
                    let idx = t.labels.len();
                    t.labels.push(label);
                    t.leftmost.push(if kids.is_empty() { idx } else { first });
                    t.parent.push(None);
                    for k in kids {
                        t.parent[k] = Some(idx);
                    }
                    if let Some(p) = child_roots.last_mut() {
                        p.push(idx);
                    }
                }
            }
        }
        t
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: usize) -> &L {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[L] {
        &self.labels
    }

    /// Postorder index of the leftmost leaf under node `i`.
    pub fn leftmost(&self, i: usize) -> usize {
        self.leftmost[i]
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    /// Nodes with no later node sharing their leftmost leaf, ascending.
    pub fn keyroots(&self) -> Vec<usize> {
        let mut highest: Vec<Option<usize>> = vec![None; self.len()];
        for i in 0..self.len() {
            highest[self.leftmost[i]] = Some(i);
        }
        let mut k: Vec<usize> = highest.into_iter().flatten().collect();
        k.sort_unstable();
        k
    }

    /// Check postorder and leftmost-leaf tables against the parent links.
    pub fn is_consistent(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return true;
        }
        if self.parent[n - 1].is_some() || (0..n - 1).any(|i| self.parent[i].map_or(true, |p| p <= i)) {
            return false;
        }
        (0..n).all(|i| {
            let kids: Vec<usize> = (0..i).filter(|k| self.parent[*k] == Some(i)).collect();
            let expect = kids.first().map_or(i, |k| self.leftmost[*k]);
            self.leftmost[i] == expect
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn postorder_tables() {
        let t = LabeledTree::from_root(Node::new(
            'r',
            vec![Node::new('a', vec![Node::leaf('b'), Node::leaf('c')]), Node::leaf('d')],
        ));
        assert_eq!(t.labels(), &['b', 'c', 'a', 'd', 'r']);
        assert_eq!(t.leftmost, vec![0, 1, 0, 3, 0]);
        assert_eq!(t.keyroots(), vec![1, 3, 4]);
        assert!(t.is_consistent());
    }
}
