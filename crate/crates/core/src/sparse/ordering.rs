//! Fill-reducing orderings on the symmetrized adjacency graph.

use super::CsrMatrix;
use crate::scalar::Field;

const LEAF_SIZE: usize = 64;

/// Undirected graph of a square sparse matrix (pattern of `A + Aᵀ`, no loops).
#[derive(Debug, Clone)]
pub struct Graph {
    ptr: Vec<usize>,
    adj: Vec<usize>,
}

impl Graph {
    pub fn from_matrix<E: Field>(m: &CsrMatrix<E>) -> Self {
        let n = m.nrows();
        let mut deg = vec![0usize; n];
        let t = m.transpose();
        let mut mark = vec![usize::MAX; n];
        for r in 0..n {
            mark[r] = r;
            for c in m.col_idx()[m.row_ptr()[r]..m.row_ptr()[r + 1]]
                .iter()
                .chain(&t.col_idx()[t.row_ptr()[r]..t.row_ptr()[r + 1]])
            {
                if mark[*c] != r {
                    mark[*c] = r;
                    deg[r] += 1;
                }
            }
        }
        let mut ptr = vec![0usize; n + 1];
        for r in 0..n {
            ptr[r + 1] = ptr[r] + deg[r];
        }
        let mut adj = vec![0usize; ptr[n]];
        mark.iter_mut().for_each(|x| *x = usize::MAX);
        for r in 0..n {
            mark[r] = r;
            let mut k = ptr[r];
            for c in m.col_idx()[m.row_ptr()[r]..m.row_ptr()[r + 1]]
                .iter()
                .chain(&t.col_idx()[t.row_ptr()[r]..t.row_ptr()[r + 1]])
            {
                if mark[*c] != r {
                    mark[*c] = r;
                    adj[k] = *c;
                    k += 1;
                }
            }
        }
        Graph { ptr, adj }
    }

    pub fn len(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.ptr[v]..self.ptr[v + 1]]
    }
}

/// Nested dissection by breadth-first level-set bisection. Returns `perm`
/// with `perm[new] = old`.
pub fn nested_dissection(g: &Graph) -> Vec<usize> {
    let n = g.len();
    let mut st = Dissect {
        g,
        owner: vec![usize::MAX; n],
        level: vec![usize::MAX; n],
        next_tag: 0,
        out: Vec::with_capacity(n),
    };
    st.recurse((0..n).collect());
    debug_assert_eq!(st.out.len(), n);
    st.out
}

struct Dissect<'a> {
    g: &'a Graph,
    owner: Vec<usize>,
    level: Vec<usize>,
    next_tag: usize,
    out: Vec<usize>,
}

impl Dissect<'_> {
    fn tag(&mut self, nodes: &[usize]) -> usize {
        let t = self.next_tag;
        self.next_tag += 1;
        for &v in nodes {
            self.owner[v] = t;
        }
        t
    }

    /// BFS restricted to nodes owned by `tag`; returns the nodes reached in
    /// BFS order with `self.level` filled in.
    fn bfs(&mut self, tag: usize, start: usize) -> Vec<usize> {
        let visit = self.next_tag;
        self.next_tag += 1;
        self.owner[start] = visit;
        self.level[start] = 0;
        let mut order = vec![start];
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &w in self.g.neighbors(v) {
                if self.owner[w] == tag {
                    self.owner[w] = visit;
                    self.level[w] = self.level[v] + 1;
                    order.push(w);
                }
            }
        }
        for &v in &order {
            self.owner[v] = tag;
        }
        order
    }

    fn recurse(&mut self, nodes: Vec<usize>) {
        if nodes.len() <= LEAF_SIZE {
            self.out.extend(nodes);
            return;
        }
        let tag = self.tag(&nodes);
        // Pseudo-peripheral start: two sweeps from the farthest node.
        let mut order = self.bfs(tag, nodes[0]);
        if order.len() < nodes.len() {
            let reached = order;
            let tag2 = self.tag(&reached);
            let rest: Vec<usize> = nodes.into_iter().filter(|&v| self.owner[v] != tag2).collect();
            self.recurse(reached);
            self.recurse(rest);
            return;
        }
        for _ in 0..2 {
            let far = *order.last().unwrap();
            order = self.bfs(tag, far);
        }
        let depth = self.level[*order.last().unwrap()] + 1;
        if depth < 3 {
            self.out.extend(order);
            return;
        }
        let mut counts = vec![0usize; depth];
        for &v in &order {
            counts[self.level[v]] += 1;
        }
        let half = nodes.len() / 2;
        let mut acc = 0;
        let mut sep_level = 1;
        for (l, &c) in counts.iter().enumerate() {
            if acc + c > half {
                sep_level = l.clamp(1, depth - 2);
                break;
            }
            acc += c;
        }
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut sep = Vec::new();
        for &v in &order {
            let l = self.level[v];
            if l < sep_level {
                left.push(v);
            } else if l > sep_level {
                right.push(v);
            } else {
                sep.push(v);
            }
        }
        // Separator nodes not touching the right part can join the left part.
        let right_tag = self.tag(&right);
        let (mut thin, mut moved) = (Vec::with_capacity(sep.len()), Vec::new());
        for v in sep {
            if self.g.neighbors(v).iter().any(|&w| self.owner[w] == right_tag) {
                thin.push(v);
            } else {
                moved.push(v);
            }
        }
        left.extend(moved);
        self.recurse(left);
        self.recurse(right);
        self.out.extend(thin);
    }
}

/// Reorders so that every constrained unknown (`is_multiplier[v]`) comes after
/// all of its unconstrained neighbours, otherwise preserving `perm`.
/// Returns `None` if some multiplier has no unconstrained neighbour.
pub fn postpone_multipliers(g: &Graph, perm: &[usize], is_multiplier: &[bool]) -> Option<Vec<usize>> {
    let n = g.len();
    let mut remaining = vec![0usize; n];
    for v in 0..n {
        if is_multiplier[v] {
            remaining[v] = g.neighbors(v).iter().filter(|&&w| !is_multiplier[w]).count();
            if remaining[v] == 0 {
                return None;
            }
        }
    }
    let mut deferred = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for &v in perm {
        if is_multiplier[v] {
            if remaining[v] == 0 {
                out.push(v);
            } else {
                deferred[v] = true;
            }
        } else {
            out.push(v);
            for &q in g.neighbors(v) {
                if is_multiplier[q] {
                    remaining[q] -= 1;
                    if remaining[q] == 0 && deferred[q] {
                        out.push(q);
                    }
                }
            }
        }
    }
    debug_assert_eq!(out.len(), n);
    Some(out)
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}
