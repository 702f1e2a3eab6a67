//! Undirected graph algorithms for commutation structure: chordality
//! recognition via maximum cardinality search, maximal clique enumeration,
//! reduced clique graphs, and maximal clique trees.
//!
//! Vertex sets are stored as `u64` bitmasks; graphs are capped at 64
//! vertices, far above anything arising from a measurement scenario here.

use crate::Error;

/// Maximum number of vertices supported by the bitmask representation.
pub const MAX_VERTICES: usize = 64;

/// A finite, simple, undirected graph with labelled vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    labels: Vec<String>,
    adj: Vec<u64>,
}

/// A candidate elimination ordering produced by maximum cardinality search.
/// `order[0]` is eliminated first. `perfect` holds exactly when every
/// vertex's later neighbors form a clique, which happens iff the graph is
/// chordal.
#[derive(Debug, Clone)]
pub struct EliminationOrdering {
    pub order: Vec<usize>,
    pub perfect: bool,
}

/// The reduced clique graph: maximal cliques joined when their intersection
/// separates them, edges labelled by the intersection.
#[derive(Debug, Clone)]
pub struct ReducedCliqueGraph {
    pub cliques: Vec<Vec<usize>>,
    /// `(i, j, separator)` with `i < j` indexing into `cliques`.
    pub edges: Vec<(usize, usize, Vec<usize>)>,
}

/// A maximal clique tree (forest for disconnected graphs). Edge `k` joins
/// `edges[k].0` and `edges[k].1` and carries separator `separators[k]`,
/// always equal to the intersection of its endpoint cliques.
#[derive(Debug, Clone)]
pub struct CliqueTree {
    pub cliques: Vec<Vec<usize>>,
    pub edges: Vec<(usize, usize)>,
    pub separators: Vec<Vec<usize>>,
}

fn bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let v = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(v)
        }
    })
}

fn mask_of(vs: &[usize]) -> u64 {
    vs.iter().fold(0u64, |m, &v| m | 1 << v)
}

impl UndirectedGraph {
    pub fn new(labels: Vec<String>, edges: &[(usize, usize)]) -> Result<Self, Error> {
        let n = labels.len();
        if n > MAX_VERTICES {
            return Err(Error::TooManyVertices { max: MAX_VERTICES, got: n });
        }
        let mut adj = vec![0u64; n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::BadInput(format!("edge ({u},{v}) out of range")));
            }
            if u == v {
                return Err(Error::SelfLoop(labels[u].clone()));
            }
            adj[u] |= 1 << v;
            adj[v] |= 1 << u;
        }
        Ok(UndirectedGraph { labels, adj })
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u] >> v & 1 == 1
    }

    pub fn neighbors_mask(&self, v: usize) -> u64 {
        self.adj[v]
    }

    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.vertex_count() {
            for v in bits(self.adj[u]) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    fn all_mask(&self) -> u64 {
        if self.vertex_count() == 64 {
            u64::MAX
        } else {
            (1u64 << self.vertex_count()) - 1
        }
    }

    /// Maximum cardinality search. Ties broken toward the smallest vertex
    /// index, so the ordering is deterministic.
    pub fn mcs_ordering(&self) -> EliminationOrdering {
        let n = self.vertex_count();
        let mut visited = 0u64;
        let mut weight = vec![0usize; n];
        let mut visit = Vec::with_capacity(n);
        for _ in 0..n {
            let v = (0..n)
                .filter(|&v| visited >> v & 1 == 0)
                .max_by(|&a, &b| weight[a].cmp(&weight[b]).then(b.cmp(&a)))
                .unwrap();
            visited |= 1 << v;
            visit.push(v);
            for u in bits(self.adj[v] & !visited) {
                weight[u] += 1;
            }
        }
        visit.reverse();
        let order = visit;
        let perfect = self.is_perfect_elimination(&order);
        EliminationOrdering { order, perfect }
    }

    /// Checks the defining property: for each vertex, the neighbors that come
    /// later in the ordering form a clique.
    pub fn is_perfect_elimination(&self, order: &[usize]) -> bool {
        let n = self.vertex_count();
        let mut pos = vec![0usize; n];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        for &v in order {
            let later: u64 = bits(self.adj[v]).filter(|&u| pos[u] > pos[v]).fold(0, |m, u| m | 1 << u);
            for u in bits(later) {
                if later & !self.adj[u] & !(1 << u) != 0 {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_chordal(&self) -> bool {
        self.mcs_ordering().perfect
    }

    /// A chordless cycle of length at least four, if one exists. The cycle is
    /// returned as a vertex sequence without repeating the start.
    pub fn chordless_cycle(&self) -> Option<Vec<usize>> {
        if self.is_chordal() {
            return None;
        }
        let n = self.vertex_count();
        for v in 0..n {
            let nbrs: Vec<usize> = bits(self.adj[v]).collect();
            for (ai, &x) in nbrs.iter().enumerate() {
                for &y in &nbrs[ai + 1..] {
                    if self.has_edge(x, y) {
                        continue;
                    }
                    // Shortest x-y path avoiding v and v's other neighbors:
                    // the cycle through v it closes has no chord.
                    let forbidden = (self.adj[v] | 1 << v) & !(1 << x) & !(1 << y);
                    if let Some(path) = self.shortest_path_avoiding(x, y, forbidden) {
                        let mut cycle = vec![v];
                        cycle.extend(path);
                        return Some(cycle);
                    }
                }
            }
        }
        None
    }

    fn shortest_path_avoiding(&self, from: usize, to: usize, forbidden: u64) -> Option<Vec<usize>> {
        let n = self.vertex_count();
        let mut prev = vec![usize::MAX; n];
        let mut seen = forbidden | 1 << from;
        let mut queue = std::collections::VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            if u == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for w in bits(self.adj[u] & !seen) {
                seen |= 1 << w;
                prev[w] = u;
                queue.push_back(w);
            }
        }
        None
    }

    /// Inclusion-maximal cliques, each sorted, list sorted lexicographically.
    /// Chordal graphs use the perfect elimination scan; everything else falls
    /// back to Bron-Kerbosch with pivoting.
    pub fn maximal_cliques(&self) -> Vec<Vec<usize>> {
        let masks = self.maximal_clique_masks();
        let mut cliques: Vec<Vec<usize>> = masks.iter().map(|&m| bits(m).collect()).collect();
        cliques.sort();
        cliques
    }

    pub(crate) fn maximal_clique_masks(&self) -> Vec<u64> {
        if self.vertex_count() == 0 {
            return Vec::new();
        }
        let ordering = self.mcs_ordering();
        let mut masks = if ordering.perfect {
            let n = self.vertex_count();
            let mut pos = vec![0usize; n];
            for (i, &v) in ordering.order.iter().enumerate() {
                pos[v] = i;
            }
            ordering
                .order
                .iter()
                .map(|&v| {
                    let later: u64 =
                        bits(self.adj[v]).filter(|&u| pos[u] > pos[v]).fold(0, |m, u| m | 1 << u);
                    later | 1 << v
                })
                .collect::<Vec<u64>>()
        } else {
            let mut out = Vec::new();
            self.bron_kerbosch(0, self.all_mask(), 0, &mut out);
            out
        };
        // Keep inclusion-maximal masks only, deduplicated.
        masks.sort_unstable();
        masks.dedup();
        let kept: Vec<u64> = masks
            .iter()
            .filter(|&&m| !masks.iter().any(|&other| other != m && other & m == m))
            .copied()
            .collect();
        kept
    }

    fn bron_kerbosch(&self, r: u64, mut p: u64, mut x: u64, out: &mut Vec<u64>) {
        if p == 0 && x == 0 {
            out.push(r);
            return;
        }
        let pivot = bits(p | x).max_by_key(|&u| (self.adj[u] & p).count_ones()).unwrap();
        let candidates: Vec<usize> = bits(p & !self.adj[pivot]).collect();
        for v in candidates {
            self.bron_kerbosch(r | 1 << v, p & self.adj[v], x & self.adj[v], out);
            p &= !(1 << v);
            x |= 1 << v;
        }
    }

    /// All vertex subsets that induce a complete subgraph, nonempty.
    pub(crate) fn for_each_clique(&self, mut f: impl FnMut(u64)) {
        fn extend(g: &UndirectedGraph, current: u64, candidates: u64, f: &mut impl FnMut(u64)) {
            let mut cands = candidates;
            while cands != 0 {
                let v = cands.trailing_zeros() as usize;
                cands &= cands - 1;
                let next = current | 1 << v;
                f(next);
                extend(g, next, cands & g.adj[v], f);
            }
        }
        extend(self, 0, self.all_mask(), &mut f);
    }

    /// The subgraph induced by `vertices`: all edges internal to the subset
    /// are kept. Vertices keep their labels; the result's vertex `i`
    /// corresponds to the `i`-th smallest index in `vertices`.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> Result<UndirectedGraph, Error> {
        let mut vs: Vec<usize> = vertices.to_vec();
        vs.sort_unstable();
        vs.dedup();
        for &v in &vs {
            if v >= self.vertex_count() {
                return Err(Error::BadInput(format!("vertex {v} out of range")));
            }
        }
        let labels = vs.iter().map(|&v| self.labels[v].clone()).collect();
        let mut edges = Vec::new();
        for (i, &u) in vs.iter().enumerate() {
            for (j, &v) in vs.iter().enumerate().skip(i + 1) {
                if self.has_edge(u, v) {
                    edges.push((i, j));
                }
            }
        }
        UndirectedGraph::new(labels, &edges)
    }

    pub(crate) fn is_subset_chordal(&self, mask: u64) -> bool {
        let vs: Vec<usize> = bits(mask).collect();
        self.induced_subgraph(&vs).expect("mask within range").is_chordal()
    }

    /// Reduced clique graph: maximal cliques joined iff their intersection
    /// separates them in the whole graph.
    pub fn reduced_clique_graph(&self) -> Result<ReducedCliqueGraph, Error> {
        if !self.is_chordal() {
            return Err(Error::NotChordal);
        }
        let masks = self.maximal_clique_masks();
        let mut sorted: Vec<u64> = masks;
        sorted.sort_by_key(|&m| bits(m).collect::<Vec<_>>());
        let mut edges = Vec::new();
        for i in 0..sorted.len() {
            for j in i + 1..sorted.len() {
                let s = sorted[i] & sorted[j];
                if s == 0 {
                    continue;
                }
                if self.separates(s, sorted[i] & !s, sorted[j] & !s) {
                    edges.push((i, j, bits(s).collect()));
                }
            }
        }
        Ok(ReducedCliqueGraph {
            cliques: sorted.iter().map(|&m| bits(m).collect()).collect(),
            edges,
        })
    }

    /// Does deleting `sep` disconnect every vertex of `a` from every vertex
    /// of `b`? `a` and `b` are cliques minus the separator, hence connected,
    /// so one representative suffices per side.
    fn separates(&self, sep: u64, a: u64, b: u64) -> bool {
        debug_assert!(a != 0 && b != 0);
        let start = a.trailing_zeros() as usize;
        let mut seen = sep | 1 << start;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            if 1u64 << u & b != 0 {
                return false;
            }
            for w in bits(self.adj[u] & !seen) {
                seen |= 1 << w;
                stack.push(w);
            }
        }
        seen & b == 0
    }

    /// A maximal clique tree: maximum-weight spanning forest of the reduced
    /// clique graph under separator-size weights, ties broken
    /// lexicographically so the output is reproducible. The multiset of edge
    /// labels is independent of the tie-breaking.
    pub fn clique_tree(&self) -> Result<CliqueTree, Error> {
        let rcg = self.reduced_clique_graph()?;
        let mut order: Vec<usize> = (0..rcg.edges.len()).collect();
        order.sort_by(|&a, &b| {
            let (ia, ja, sa) = &rcg.edges[a];
            let (ib, jb, sb) = &rcg.edges[b];
            sb.len().cmp(&sa.len()).then(ia.cmp(ib)).then(ja.cmp(jb))
        });
        let mut parent: Vec<usize> = (0..rcg.cliques.len()).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut edges = Vec::new();
        let mut separators = Vec::new();
        for k in order {
            let (i, j, s) = &rcg.edges[k];
            let (ri, rj) = (find(&mut parent, *i), find(&mut parent, *j));
            if ri != rj {
                parent[ri] = rj;
                edges.push((*i, *j));
                separators.push(s.clone());
            }
        }
        Ok(CliqueTree { cliques: rcg.cliques, edges, separators })
    }
}

impl CliqueTree {
    /// Running-intersection property: for every graph vertex, the tree nodes
    /// containing it induce a connected subtree.
    pub fn has_running_intersection(&self) -> bool {
        let vertices: std::collections::BTreeSet<usize> =
            self.cliques.iter().flatten().copied().collect();
        for v in vertices {
            let holder: Vec<usize> = (0..self.cliques.len())
                .filter(|&i| self.cliques[i].contains(&v))
                .collect();
            if holder.is_empty() {
                continue;
            }
            // BFS within holder nodes over tree edges whose both ends hold v.
            let mut seen = vec![false; self.cliques.len()];
            seen[holder[0]] = true;
            let mut stack = vec![holder[0]];
            while let Some(u) = stack.pop() {
                for &(a, b) in &self.edges {
                    let w = if a == u { b } else if b == u { a } else { continue };
                    if self.cliques[w].contains(&v) && !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            if holder.iter().any(|&i| !seen[i]) {
                return false;
            }
        }
        true
    }

    /// The multiset of separator labels, sorted for comparison.
    pub fn separator_multiset(&self) -> Vec<Vec<usize>> {
        let mut seps = self.separators.clone();
        seps.sort();
        seps
    }
}

pub(crate) fn iter_bits(mask: u64) -> impl Iterator<Item = usize> {
    bits(mask)
}

pub(crate) fn vertex_mask(vs: &[usize]) -> u64 {
    mask_of(vs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    fn cycle_edges(n: usize) -> Vec<(usize, usize)> {
        (0..n).map(|i| (i, (i + 1) % n)).collect()
    }

    /// The ten-vertex chordal graph assembled from its seven maximal cliques.
    fn ten_vertex_chordal() -> UndirectedGraph {
        // cliques: {1,3,5} {3,5,7} {3,6,7,8} {3,4,6,8} {2,4,6} {7,9} {6,10},
        // shifted to zero-based indices.
        let cliques: Vec<Vec<usize>> = vec![
            vec![0, 2, 4],
            vec![2, 4, 6],
            vec![2, 5, 6, 7],
            vec![2, 3, 5, 7],
            vec![1, 3, 5],
            vec![6, 8],
            vec![5, 9],
        ];
        let mut edges = Vec::new();
        for c in &cliques {
            for i in 0..c.len() {
                for j in i + 1..c.len() {
                    edges.push((c[i], c[j]));
                }
            }
        }
        UndirectedGraph::new(labels(10), &edges).unwrap()
    }

    #[test]
    fn triangle_is_chordal() {
        let g = UndirectedGraph::new(labels(3), &cycle_edges(3)).unwrap();
        assert!(g.mcs_ordering().perfect);
        assert!(g.is_chordal());
        assert_eq!(g.maximal_cliques(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn four_cycle_is_not_chordal() {
        let g = UndirectedGraph::new(labels(4), &cycle_edges(4)).unwrap();
        assert!(!g.mcs_ordering().perfect);
        assert!(!g.is_chordal());
        let hole = g.chordless_cycle().unwrap();
        assert_eq!(hole.len(), 4);
        // the witness really is a chordless cycle
        for i in 0..4 {
            assert!(g.has_edge(hole[i], hole[(i + 1) % 4]));
            assert!(!g.has_edge(hole[i], hole[(i + 2) % 4]));
        }
    }

    #[test]
    fn four_cycle_with_chord_is_chordal() {
        let mut edges = cycle_edges(4);
        edges.push((0, 2));
        let g = UndirectedGraph::new(labels(4), &edges).unwrap();
        assert!(g.is_chordal());
        assert!(g.chordless_cycle().is_none());
    }

    #[test]
    fn five_cycle_is_not_chordal() {
        let g = UndirectedGraph::new(labels(5), &cycle_edges(5)).unwrap();
        assert!(!g.is_chordal());
        assert_eq!(g.chordless_cycle().unwrap().len(), 5);
        // C5 maximal cliques are its five edges
        assert_eq!(g.maximal_cliques().len(), 5);
    }

    #[test]
    fn complete_graph_single_clique() {
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                edges.push((i, j));
            }
        }
        let g = UndirectedGraph::new(labels(4), &edges).unwrap();
        assert_eq!(g.maximal_cliques(), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn ten_vertex_graph_is_chordal_with_expected_cliques() {
        let g = ten_vertex_chordal();
        assert!(g.mcs_ordering().perfect);
        let cliques = g.maximal_cliques();
        assert_eq!(cliques.len(), 7);
        assert!(cliques.contains(&vec![2, 5, 6, 7]));
        assert!(cliques.contains(&vec![5, 9]));
    }

    #[test]
    fn reduced_clique_graph_of_path() {
        // path a-b-c: cliques {a,b},{b,c}, one edge labelled {b}
        let g = UndirectedGraph::new(labels(3), &[(0, 1), (1, 2)]).unwrap();
        let rcg = g.reduced_clique_graph().unwrap();
        assert_eq!(rcg.cliques, vec![vec![0, 1], vec![1, 2]]);
        assert_eq!(rcg.edges, vec![(0, 1, vec![1])]);
    }

    #[test]
    fn reduced_clique_graph_disjoint_edges() {
        let g = UndirectedGraph::new(labels(4), &[(0, 1), (2, 3)]).unwrap();
        let rcg = g.reduced_clique_graph().unwrap();
        assert!(rcg.edges.is_empty());
    }

    #[test]
    fn reduced_clique_graph_ten_vertex() {
        let g = ten_vertex_chordal();
        let rcg = g.reduced_clique_graph().unwrap();
        // 9 edges including the label-sharing triangles
        assert_eq!(rcg.edges.len(), 9);
        let find = |a: &[usize], b: &[usize]| {
            let (ia, _) = rcg.cliques.iter().enumerate().find(|(_, c)| c.as_slice() == a).unwrap();
            let (ib, _) = rcg.cliques.iter().enumerate().find(|(_, c)| c.as_slice() == b).unwrap();
            rcg.edges
                .iter()
                .find(|(i, j, _)| (*i == ia && *j == ib) || (*i == ib && *j == ia))
                .map(|(_, _, s)| s.clone())
        };
        assert_eq!(find(&[0, 2, 4], &[2, 4, 6]), Some(vec![2, 4]));
        assert_eq!(find(&[2, 4, 6], &[6, 8]), Some(vec![6]));
        assert_eq!(find(&[2, 5, 6, 7], &[6, 8]), Some(vec![6]));
        assert_eq!(find(&[0, 2, 4], &[2, 5, 6, 7]), None);
    }

    #[test]
    fn clique_tree_ten_vertex_separator_multiset() {
        let g = ten_vertex_chordal();
        let tree = g.clique_tree().unwrap();
        assert_eq!(tree.edges.len(), 6);
        assert!(tree.has_running_intersection());
        let mut seps = tree.separator_multiset();
        let mut expected = vec![vec![2, 4], vec![2, 6], vec![2, 5, 7], vec![3, 5], vec![6], vec![5]];
        expected.sort();
        seps.sort();
        assert_eq!(seps, expected);
    }

    #[test]
    fn clique_tree_trivial_cases() {
        let single = UndirectedGraph::new(labels(3), &cycle_edges(3)).unwrap();
        let t = single.clique_tree().unwrap();
        assert_eq!(t.cliques.len(), 1);
        assert!(t.edges.is_empty());

        let path = UndirectedGraph::new(labels(5), &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let t = path.clique_tree().unwrap();
        assert_eq!(t.cliques.len(), 4);
        assert_eq!(t.edges.len(), 3);
        assert!(t.separators.iter().all(|s| s.len() == 1));
        assert!(t.has_running_intersection());
    }

    #[test]
    fn clique_tree_rejects_non_chordal() {
        let g = UndirectedGraph::new(labels(4), &cycle_edges(4)).unwrap();
        assert!(matches!(g.clique_tree(), Err(Error::NotChordal)));
        assert!(matches!(g.reduced_clique_graph(), Err(Error::NotChordal)));
    }

    #[test]
    fn induced_subgraph_of_cycle() {
        let g = UndirectedGraph::new(labels(5), &cycle_edges(5)).unwrap();
        let sub = g.induced_subgraph(&[0, 1, 2]).unwrap();
        assert_eq!(sub.edge_list(), vec![(0, 1), (1, 2)]);
        let full = g.induced_subgraph(&[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(full, g);
    }

    #[test]
    fn separator_multiset_invariant_under_relabeling() {
        let g = ten_vertex_chordal();
        let base: Vec<usize> = {
            let mut s: Vec<usize> = g.clique_tree().unwrap().separator_multiset().iter().map(|x| x.len()).collect();
            s.sort();
            s
        };
        // permute vertices and rebuild
        let perm: Vec<usize> = vec![3, 1, 4, 0, 9, 2, 8, 7, 5, 6];
        let edges: Vec<(usize, usize)> =
            g.edge_list().iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let h = UndirectedGraph::new(labels(10), &edges).unwrap();
        let mut permuted: Vec<usize> =
            h.clique_tree().unwrap().separator_multiset().iter().map(|x| x.len()).collect();
        permuted.sort();
        assert_eq!(base, permuted);
    }

    #[test]
    fn empty_graph() {
        let g = UndirectedGraph::new(Vec::new(), &[]).unwrap();
        assert!(g.is_chordal());
        assert!(g.maximal_cliques().is_empty());
    }
}
