//! Labelled binary tree skeletons ("m-shapes").
//!
//! An m-shape has external vertices `0..m` of degree one and `m - 2`
//! internal vertices of degree three, so `2m - 3` edges. Edges are
//! oriented away from external vertex 0 and labelled `1..=2m-3` by a
//! canonical rule: depth-first from vertex 0, children visited in order of
//! the smallest external label they reach, labels handed out in discovery
//! order. Internal vertices are named `i1, i2, ...` in the same order.
//!
//! Under this rule the shape in which leaf 1 splits off first from `{2, 3}`
//! has edges `0->i1, i1->1, i1->i2, i2->2, i2->3`, so a frequency vector
//! `(k1, k2, k3)` on the external vertices routes to
//! `(k1+k2+k3, k1, k2+k3, k2, k3)` on the edges.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest m accepted by [`enumerate_shapes`].
pub const MAX_ENUMERATED_M: usize = 10;

/// A vertex of a shape. Internal vertices are numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Vertex {
    External(usize),
    Internal(usize),
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::External(i) => write!(f, "{i}"),
            Vertex::Internal(i) => write!(f, "i{i}"),
        }
    }
}

/// A labelled edge, oriented away from external vertex 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub label: usize,
    pub tail: Vertex,
    pub head: Vertex,
}

/// An m-shape in canonical form. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    m: usize,
    // indexed by label - 1
    edges: Vec<Edge>,
    canonical: String,
}

// Vertex ids used internally: externals are 0..m, internal `ik` is m + k - 1.
fn vertex_id(m: usize, v: Vertex) -> usize {
    match v {
        Vertex::External(i) => i,
        Vertex::Internal(k) => m + k - 1,
    }
}

impl Shape {
    /// Builds the canonical shape from an unrooted tree given as an edge
    /// list. Vertices `0..m` are the external vertices; any other id is
    /// internal.
    pub fn from_tree(m: usize, edges: &[(usize, usize)]) -> Result<Shape> {
        if m < 2 {
            return Err(invalid(format!("shape needs m >= 2, got {m}")));
        }
        if edges.len() != 2 * m - 3 {
            return Err(invalid(format!(
                "an {m}-shape has {} edges, got {}",
                2 * m - 3,
                edges.len()
            )));
        }
        let n_vertices = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0).max(m);
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_vertices];
        for &(a, b) in edges {
            if a == b {
                return Err(invalid("self-loop in shape"));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut internal_count = 0;
        for (v, nbrs) in adj.iter().enumerate() {
            match (v < m, nbrs.len()) {
                (true, 1) => {}
                (false, 3) => internal_count += 1,
                (false, 0) => {}
                (true, d) => {
                    return Err(invalid(format!("external vertex {v} has degree {d}")));
                }
                (false, d) => {
                    return Err(invalid(format!("internal vertex {v} has degree {d}")));
                }
            }
        }
        if internal_count != m - 2 {
            return Err(invalid(format!(
                "expected {} internal vertices, found {internal_count}",
                m - 2
            )));
        }

        // smallest external label in the subtree hanging below each vertex
        // when rooted at 0; also checks connectivity and acyclicity.
        let mut parent = vec![usize::MAX; n_vertices];
        let mut order = Vec::with_capacity(n_vertices);
        let mut stack = vec![0usize];
        parent[0] = 0;
        while let Some(v) = stack.pop() {
            order.push(v);
            for &w in &adj[v] {
                if w == parent[v] && v != 0 {
                    continue;
                }
                if parent[w] != usize::MAX {
                    return Err(invalid("shape graph contains a cycle"));
                }
                parent[w] = v;
                stack.push(w);
            }
        }
        if order.len() != m + internal_count {
            return Err(invalid("shape graph is disconnected"));
        }
        let mut min_label = vec![usize::MAX; n_vertices];
        for &v in order.iter().rev() {
            if v < m {
                min_label[v] = v;
            }
            if v != 0 {
                let p = parent[v];
                min_label[p] = min_label[p].min(min_label[v]);
            }
        }
        let children = |v: usize| -> Vec<usize> {
            let mut c: Vec<usize> =
                adj[v].iter().copied().filter(|&w| v == 0 || w != parent[v]).collect();
            c.sort_by_key(|&w| min_label[w]);
            c
        };

        let mut names = vec![None; n_vertices];
        let mut next_internal = 1;
        let mut canon_edges = Vec::with_capacity(2 * m - 3);
        // iterative preorder so labels follow discovery order
        let mut stack: Vec<usize> = children(0).into_iter().rev().collect();
        names[0] = Some(Vertex::External(0));
        while let Some(v) = stack.pop() {
            let name = if v < m {
                Vertex::External(v)
            } else {
                let n = Vertex::Internal(next_internal);
                next_internal += 1;
                n
            };
            names[v] = Some(name);
            let tail = names[parent[v]].expect("parent named before child");
            canon_edges.push(Edge {
                label: canon_edges.len() + 1,
                tail,
                head: name,
            });
            for w in children(v).into_iter().rev() {
                stack.push(w);
            }
        }

        fn encode(v: usize, m: usize, children: &dyn Fn(usize) -> Vec<usize>) -> String {
            if v < m {
                v.to_string()
            } else {
                let parts: Vec<String> =
                    children(v).into_iter().map(|w| encode(w, m, children)).collect();
                format!("({})", parts.join(","))
            }
        }
        let root_child = adj[0][0];
        let canonical = encode(root_child, m, &children);

        Ok(Shape {
            m,
            edges: canon_edges,
            canonical,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in label order (`edges()[j]` has label `j + 1`).
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, label: usize) -> Option<&Edge> {
        label.checked_sub(1).and_then(|i| self.edges.get(i))
    }

    /// Nested-parenthesis encoding of the tree rooted at vertex 0, children
    /// ordered by smallest external label. Two shapes are equal iff their
    /// canonical strings agree.
    pub fn canonical_string(&self) -> &str {
        &self.canonical
    }

    /// `(tail, head)` vertex ids in label order; the sort key for enumeration.
    pub fn adjacency_encoding(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .map(|e| (vertex_id(self.m, e.tail), vertex_id(self.m, e.head)))
            .collect()
    }

    fn parent_edge(&self, v: Vertex) -> Option<&Edge> {
        self.edges.iter().find(|e| e.head == v)
    }

    fn check_external(&self, label: usize) -> Result<()> {
        if label >= self.m {
            Err(invalid(format!(
                "external label {label} out of range for an {}-shape",
                self.m
            )))
        } else {
            Ok(())
        }
    }

    fn edges_to_root(&self, v: Vertex) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = v;
        while let Some(e) = self.parent_edge(cur) {
            out.push(e.label);
            cur = e.tail;
        }
        out
    }

    /// Edge labels along the tree path between two external vertices, in
    /// traversal order.
    pub fn edges_on_path(&self, from: usize, to: usize) -> Result<Vec<usize>> {
        self.check_external(from)?;
        self.check_external(to)?;
        let mut up = self.edges_to_root(Vertex::External(from));
        let mut down = self.edges_to_root(Vertex::External(to));
        while let (Some(a), Some(b)) = (up.last(), down.last()) {
            if a != b {
                break;
            }
            up.pop();
            down.pop();
        }
        down.reverse();
        up.extend(down);
        Ok(up)
    }

    /// Edges whose head is an internal vertex. Their displacements are the
    /// integration variables of the moment-measure densities; the remaining
    /// displacements are fixed by the external positions.
    pub fn internal_edge_set(&self) -> BTreeSet<usize> {
        self.edges
            .iter()
            .filter(|e| matches!(e.head, Vertex::Internal(_)))
            .map(|e| e.label)
            .collect()
    }

    /// External vertices `i >= 1` whose path from vertex 0 uses `label`.
    pub fn externals_below(&self, label: usize) -> Vec<usize> {
        (1..self.m)
            .filter(|&i| self.edges_to_root(Vertex::External(i)).contains(&label))
            .collect()
    }

    /// For each edge (label order), the externals below it. Frequency
    /// routing: edge `j` carries `sum_{i in routing[j]} k_i`.
    pub fn frequency_routing(&self) -> Vec<Vec<usize>> {
        (1..=self.edges.len()).map(|l| self.externals_below(l)).collect()
    }

    pub fn to_record(&self) -> ShapeRecord {
        ShapeRecord {
            m: self.m,
            edges: self
                .edges
                .iter()
                .map(|e| (VertexName::from(e.tail), VertexName::from(e.head), e.label))
                .collect(),
        }
    }

    pub fn from_record(rec: &ShapeRecord) -> Result<Shape> {
        let m = rec.m;
        let id = |v: &VertexName| -> Result<usize> {
            match v {
                VertexName::External(i) => Ok(*i),
                VertexName::Internal(s) => s
                    .strip_prefix('i')
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k >= 1)
                    .map(|k| m + k - 1)
                    .ok_or_else(|| invalid(format!("bad internal vertex name {s:?}"))),
            }
        };
        let edges = rec
            .edges
            .iter()
            .map(|(u, v, _)| Ok((id(u)?, id(v)?)))
            .collect::<Result<Vec<_>>>()?;
        let shape = Shape::from_tree(m, &edges)?;
        if shape.to_record() != *rec {
            return Err(invalid("shape record is not in canonical form"));
        }
        Ok(shape)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-shape 0-{}", self.m, self.canonical)
    }
}

/// JSON form: `{"m": 4, "edges": [[0, "i1", 1], ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeRecord {
    pub m: usize,
    pub edges: Vec<(VertexName, VertexName, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VertexName {
    External(usize),
    Internal(String),
}

impl From<Vertex> for VertexName {
    fn from(v: Vertex) -> Self {
        match v {
            Vertex::External(i) => VertexName::External(i),
            Vertex::Internal(k) => VertexName::Internal(format!("i{k}")),
        }
    }
}

/// `(2m - 5)!!`, the number of m-shapes, with `(-1)!! = 1`.
pub fn double_factorial_count(m: usize) -> Result<u64> {
    if m < 2 {
        return Err(invalid(format!("shape count needs m >= 2, got {m}")));
    }
    let mut acc: u64 = 1;
    let mut k = 2 * m as i64 - 5;
    while k > 1 {
        acc = acc
            .checked_mul(k as u64)
            .ok_or_else(|| Error::ResourceLimit(format!("(2m-5)!! overflows u64 at m = {m}")))?;
        k -= 2;
    }
    Ok(acc)
}

/// All m-shapes in canonical form, sorted by adjacency encoding.
pub fn enumerate_shapes(m: usize) -> Result<Vec<Shape>> {
    if m < 2 {
        return Err(invalid(format!("shape enumeration needs m >= 2, got {m}")));
    }
    if m > MAX_ENUMERATED_M {
        return Err(Error::Unsupported(format!(
            "shape enumeration is limited to m <= {MAX_ENUMERATED_M}"
        )));
    }
    // leaf insertion: every m-shape arises exactly once by subdividing an
    // edge of an (m-1)-shape and hanging leaf m-1 off the new vertex.
    let mut trees: Vec<Vec<(usize, usize)>> = vec![vec![(0, 1)]];
    for leaf in 2..m {
        let mut next = Vec::with_capacity(trees.len() * (2 * leaf - 3));
        for t in &trees {
            let fresh = m + leaf - 2;
            for i in 0..t.len() {
                let (a, b) = t[i];
                let mut nt = t.clone();
                nt[i] = (a, fresh);
                nt.push((fresh, b));
                nt.push((fresh, leaf));
                next.push(nt);
            }
        }
        trees = next;
    }
    let mut shapes = trees
        .iter()
        .map(|t| Shape::from_tree(m, t))
        .collect::<Result<Vec<_>>>()?;
    shapes.sort_by_cached_key(|s| s.adjacency_encoding());
    Ok(shapes)
}

/// Position of a shape in the enumeration order for its m.
pub fn shape_index(shapes: &[Shape], shape: &Shape) -> Option<usize> {
    shapes.iter().position(|s| s.canonical == shape.canonical)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn small_counts() {
        let counts: Vec<usize> = (2..=8).map(|m| enumerate_shapes(m).unwrap().len()).collect();
        assert_eq!(counts, vec![1, 1, 3, 15, 105, 945, 10395]);
        for m in 2..=8 {
            assert_eq!(
                enumerate_shapes(m).unwrap().len() as u64,
                double_factorial_count(m).unwrap()
            );
        }
    }

    #[test]
    fn double_factorial_values() {
        assert_eq!(double_factorial_count(2).unwrap(), 1);
        assert_eq!(double_factorial_count(3).unwrap(), 1);
        assert_eq!(double_factorial_count(4).unwrap(), 3);
        assert_eq!(double_factorial_count(6).unwrap(), 105);
        assert!(double_factorial_count(1).is_err());
        assert!(double_factorial_count(0).is_err());
    }

    #[test]
    fn rejects_bad_m() {
        assert!(matches!(enumerate_shapes(1), Err(Error::InvalidArgument(_))));
        assert!(matches!(enumerate_shapes(11), Err(Error::Unsupported(_))));
    }

    #[test]
    fn shape_invariants_hold() {
        for m in 2..=7 {
            for s in enumerate_shapes(m).unwrap() {
                assert_eq!(s.edge_count(), 2 * m - 3);
                let mut degree = std::collections::HashMap::new();
                for e in s.edges() {
                    *degree.entry(e.tail).or_insert(0) += 1;
                    *degree.entry(e.head).or_insert(0) += 1;
                }
                let ext = degree.iter().filter(|(v, _)| matches!(v, Vertex::External(_)));
                assert!(ext.clone().all(|(_, &d)| d == 1));
                assert_eq!(ext.count(), m);
                let int = degree.iter().filter(|(v, _)| matches!(v, Vertex::Internal(_)));
                assert!(int.clone().all(|(_, &d)| d == 3));
                assert_eq!(int.count(), m - 2);
                // labels are 1..=2m-3 in order
                for (i, e) in s.edges().iter().enumerate() {
                    assert_eq!(e.label, i + 1);
                }
                // re-canonicalising is a fixed point
                let again = Shape::from_record(&s.to_record()).unwrap();
                assert_eq!(again, s);
            }
        }
    }

    #[test]
    fn shapes_pairwise_distinct() {
        for m in 2..=6 {
            let shapes = enumerate_shapes(m).unwrap();
            let set: HashSet<&str> = shapes.iter().map(|s| s.canonical_string()).collect();
            assert_eq!(set.len(), shapes.len());
        }
    }

    #[test]
    fn deterministic_enumeration() {
        assert_eq!(enumerate_shapes(6).unwrap(), enumerate_shapes(6).unwrap());
    }

    #[test]
    fn four_shapes_in_order() {
        let s = enumerate_shapes(4).unwrap();
        let c: Vec<&str> = s.iter().map(|s| s.canonical_string()).collect();
        assert_eq!(c, vec!["(1,(2,3))", "((1,2),3)", "((1,3),2)"]);
    }

    #[test]
    fn path_two_and_three() {
        let s2 = &enumerate_shapes(2).unwrap()[0];
        assert_eq!(s2.edges_on_path(0, 1).unwrap(), vec![1]);
        let s3 = &enumerate_shapes(3).unwrap()[0];
        let p = s3.edges_on_path(0, 2).unwrap();
        assert_eq!(p.len(), 2);
        let at0 = s3.edges().iter().find(|e| e.tail == Vertex::External(0)).unwrap();
        let at2 = s3.edges().iter().find(|e| e.head == Vertex::External(2)).unwrap();
        assert_eq!(p, vec![at0.label, at2.label]);
        assert!(s3.edges_on_path(0, 3).is_err());
    }

    // Oracle: breadth-first search over an undirected adjacency built from
    // the edge list, independent of the parent-pointer walk.
    fn bfs_path(s: &Shape, from: Vertex, to: Vertex) -> Vec<usize> {
        use std::collections::{HashMap, VecDeque};
        let mut adj: HashMap<Vertex, Vec<(Vertex, usize)>> = HashMap::new();
        for e in s.edges() {
            adj.entry(e.tail).or_default().push((e.head, e.label));
            adj.entry(e.head).or_default().push((e.tail, e.label));
        }
        let mut prev: HashMap<Vertex, (Vertex, usize)> = HashMap::new();
        let mut q = VecDeque::from([from]);
        let mut seen = HashSet::from([from]);
        while let Some(v) = q.pop_front() {
            for &(w, l) in &adj[&v] {
                if seen.insert(w) {
                    prev.insert(w, (v, l));
                    q.push_back(w);
                }
            }
        }
        let mut path = Vec::new();
        let mut cur = to;
        while cur != from {
            let (p, l) = prev[&cur];
            path.push(l);
            cur = p;
        }
        path.reverse();
        path
    }

    #[test]
    fn paths_match_bfs_and_reverse() {
        for m in 2..=6 {
            for s in enumerate_shapes(m).unwrap() {
                for i in 0..m {
                    for j in 0..m {
                        let p = s.edges_on_path(i, j).unwrap();
                        let q = bfs_path(&s, Vertex::External(i), Vertex::External(j));
                        assert_eq!(p, q);
                        let mut r = s.edges_on_path(j, i).unwrap();
                        r.reverse();
                        assert_eq!(p, r);
                    }
                }
            }
        }
    }

    #[test]
    fn first_four_shape_paths() {
        let s1 = &enumerate_shapes(4).unwrap()[0];
        assert_eq!(s1.canonical_string(), "(1,(2,3))");
        // 0 -> 2 runs through both internal vertices
        assert_eq!(s1.edges_on_path(0, 2).unwrap(), vec![1, 3, 4]);
        assert_eq!(s1.internal_edge_set(), BTreeSet::from([1, 3]));
        assert_eq!(
            s1.frequency_routing(),
            vec![vec![1, 2, 3], vec![1], vec![2, 3], vec![2], vec![3]]
        );
    }

    #[test]
    fn internal_edges_small() {
        let s2 = &enumerate_shapes(2).unwrap()[0];
        assert!(s2.internal_edge_set().is_empty());
        let s3 = &enumerate_shapes(3).unwrap()[0];
        assert_eq!(s3.internal_edge_set(), BTreeSet::from([1]));
        assert_eq!(s3.frequency_routing(), vec![vec![1, 2], vec![1], vec![2]]);
    }

    #[test]
    fn from_tree_validation() {
        assert!(Shape::from_tree(3, &[(0, 3), (3, 1), (3, 2)]).is_ok());
        // vertex 2 missing, internal of degree 2
        assert!(Shape::from_tree(3, &[(0, 3), (3, 1), (1, 2)]).is_err());
        assert!(Shape::from_tree(2, &[(0, 1), (0, 1)]).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let s = &enumerate_shapes(4).unwrap()[0];
        let json = serde_json::to_string(&s.to_record()).unwrap();
        assert_eq!(
            json,
            r#"{"m":4,"edges":[[0,"i1",1],["i1",1,2],["i1","i2",3],["i2",2,4],["i2",3,5]]}"#
        );
        let back: ShapeRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(&Shape::from_record(&back).unwrap(), s);
    }
}
