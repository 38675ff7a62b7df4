//! Backbones of marked lattice trees, shape compatibility, and the
//! m-point count tables built from exhaustive enumeration.
//!
//! A marked tree `(T; 0, x_1, ..., x_{m-1})` is compatible with a shape when
//! the shape's vertices can be placed on sites of `T` (externals on the
//! marks) so that the tree paths realizing the shape's edges are pairwise
//! bond-disjoint. Internal vertices are then forced to sit at medians: the
//! meeting point of the origin and one external from each child subtree.
//! Paths of length zero are allowed, which is how degenerate
//! configurations become compatible with several shapes.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ise;
use crate::lattice::{fold_trees, one_point, LatticeModel, LatticeTree, Site, TreeView};
use crate::quadrature::QuadratureSpec;
use crate::shapes::{double_factorial_count, enumerate_shapes, Shape, Vertex};

/// Largest number of marks `l = m - 1` in count tables.
pub const MAX_MARKS: usize = 5;
/// Edge count of the largest supported shape.
pub const MAX_EDGES: usize = 2 * (MAX_MARKS + 1) - 3;
/// Upper bound on (tree, mark tuple, shape) triples a table may scan.
pub const SCAN_BUDGET: u128 = 20_000_000_000;

fn vertex_id(m: usize, v: Vertex) -> usize {
    match v {
        Vertex::External(i) => i,
        Vertex::Internal(k) => m + k - 1,
    }
}

// Shape reduced to what the compatibility test needs.
#[derive(Clone, Debug)]
struct CompiledShape {
    m: usize,
    // (vertex id, three external representatives) per internal vertex
    internals: Vec<(usize, [usize; 3])>,
    // (tail id, head id) in label order
    edges: Vec<(usize, usize)>,
}

impl CompiledShape {
    fn new(shape: &Shape) -> Self {
        let m = shape.m();
        let mut internals = Vec::new();
        for e in shape.edges() {
            if let Vertex::Internal(_) = e.head {
                let kids: Vec<usize> = shape
                    .edges()
                    .iter()
                    .filter(|c| c.tail == e.head)
                    .map(|c| *shape.externals_below(c.label).iter().min().expect("leaf below"))
                    .collect();
                internals.push((vertex_id(m, e.head), [0, kids[0], kids[1]]));
            }
        }
        let edges = shape
            .edges()
            .iter()
            .map(|e| (vertex_id(m, e.tail), vertex_id(m, e.head)))
            .collect();
        CompiledShape {
            m,
            internals,
            edges,
        }
    }
}

/// One compatible shape with its backbone path lengths and displacements.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compatibility {
    /// Index into `enumerate_shapes(m)`.
    pub shape_index: usize,
    pub y: Vec<Vec<i64>>,
    pub s: Vec<usize>,
}

/// Backbone of a marked tree and every shape it is compatible with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneRecord {
    pub marks: Vec<Vec<i64>>,
    /// Bonds of the minimal subtree spanning the origin and the marks.
    pub bonds: Vec<(Vec<i64>, Vec<i64>)>,
    pub compatible: Vec<Compatibility>,
}

struct Rooted<'a> {
    sites: &'a [Site],
    parent: &'a [usize],
    depth: Vec<usize>,
}

impl<'a> Rooted<'a> {
    fn new(sites: &'a [Site], parent: &'a [usize]) -> Self {
        let mut depth = vec![0; sites.len()];
        for i in 1..sites.len() {
            // parents precede children in both construction orders
            depth[i] = depth[parent[i]] + 1;
        }
        Rooted {
            sites,
            parent,
            depth,
        }
    }

    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b];
        }
        while a != b {
            a = self.parent[a];
            b = self.parent[b];
        }
        a
    }

    fn median(&self, a: usize, b: usize, c: usize) -> usize {
        [self.lca(a, b), self.lca(b, c), self.lca(a, c)]
            .into_iter()
            .max_by_key(|&v| self.depth[v])
            .expect("three candidates")
    }

    // Bond ids (child endpoint index) on the path between a and b.
    fn path(&self, a: usize, b: usize) -> Vec<usize> {
        let top = self.lca(a, b);
        let mut out = Vec::new();
        for mut v in [a, b] {
            while v != top {
                out.push(v);
                v = self.parent[v];
            }
        }
        out
    }
}

/// Backbone of `(T; 0, marks...)` in dimension `d`, with all compatible
/// shapes of `enumerate_shapes(marks.len() + 1)`.
pub fn backbone(tree: &LatticeTree, marks: &[Site], d: usize) -> Result<BackboneRecord> {
    if marks.is_empty() {
        return Err(invalid("at least one mark required"));
    }
    let mut idx = vec![0usize];
    for &x in marks {
        idx.push(
            tree.index_of(x)
                .ok_or_else(|| invalid(format!("mark {x} is not a site of the tree")))?,
        );
    }
    let rooted = Rooted::new(tree.sites(), tree.parents());
    let m = marks.len() + 1;
    let shapes = enumerate_shapes(m)?;
    let mut span = vec![false; tree.sites().len()];
    for &i in &idx[1..] {
        for b in rooted.path(0, i) {
            span[b] = true;
        }
    }
    let mut bonds: Vec<(Vec<i64>, Vec<i64>)> = (1..span.len())
        .filter(|&b| span[b])
        .map(|b| {
            let (x, y) = (tree.sites()[tree.parents()[b]], tree.sites()[b]);
            let (x, y) = if x < y { (x, y) } else { (y, x) };
            (x.coords(d), y.coords(d))
        })
        .collect();
    bonds.sort();
    let mut compatible = Vec::new();
    for (si, shape) in shapes.iter().enumerate() {
        let cs = CompiledShape::new(shape);
        let mut place = vec![usize::MAX; 2 * m - 2];
        place[..m].copy_from_slice(&idx);
        for &(v, [a, b, c]) in &cs.internals {
            place[v] = rooted.median(place[a], place[b], place[c]);
        }
        let mut used = vec![false; tree.sites().len()];
        let mut ok = true;
        let mut y = Vec::new();
        let mut s = Vec::new();
        'edges: for &(t, h) in &cs.edges {
            let p = rooted.path(place[t], place[h]);
            for &b in &p {
                if used[b] {
                    ok = false;
                    break 'edges;
                }
                used[b] = true;
            }
            s.push(p.len());
            y.push(rooted.sites[place[h]].sub(rooted.sites[place[t]]).coords(d));
        }
        if ok {
            compatible.push(Compatibility {
                shape_index: si,
                y,
                s,
            });
        }
    }
    if compatible.iter().any(|c| c.s.iter().all(|&b| b > 0)) && compatible.len() != 1 {
        return Err(Error::NumericalFailure {
            message: "nondegenerate backbone compatible with several shapes".into(),
            error_estimate: 0.0,
        });
    }
    Ok(BackboneRecord {
        marks: marks.iter().map(|x| x.coords(d)).collect(),
        bonds,
        compatible,
    })
}

/// Key of a count-table entry: shape index, per-edge displacements and
/// (optionally) per-edge path lengths. Unused slots are zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TableKey {
    pub sigma: u8,
    pub y: [Site; MAX_EDGES],
    pub s: [u8; MAX_EDGES],
}

/// Mark tuple `(x_1, ..., x_l)`; unused slots are the origin.
pub type MarkKey = [Site; MAX_MARKS];

/// Per-mark-tuple counts of the decomposition `s = u + e`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SueCounts {
    /// Trees containing all the marks.
    pub s: u64,
    /// Trees whose backbone paths are all nontrivial.
    pub u: u64,
    /// Trees with at least one trivial backbone path.
    pub e: u64,
    /// Sum over those trees of the number of compatible shapes.
    pub compatible: u64,
}

#[derive(Default)]
struct ScanOutput {
    counts: FxHashMap<TableKey, u64>,
    sue: FxHashMap<MarkKey, SueCounts>,
}

#[derive(Clone, Copy)]
struct ScanOptions {
    counts: bool,
    keep_s: bool,
    sue: bool,
}

fn check_marks(model: &LatticeModel, n: usize, l: usize) -> Result<u64> {
    if l == 0 {
        return Err(invalid("at least one mark required"));
    }
    if l > MAX_MARKS {
        return Err(Error::Unsupported(format!(
            "count tables support at most {MAX_MARKS} marks, got {l}"
        )));
    }
    let shapes = double_factorial_count(l + 1)? as u128;
    let per_tree = ((n + 1) as u128).pow(l as u32) * shapes;
    if per_tree > SCAN_BUDGET {
        return Err(Error::ResourceLimit(format!(
            "{per_tree} (marks, shape) pairs per tree exceed the budget {SCAN_BUDGET}"
        )));
    }
    let trees = one_point(model, n)?;
    let work = trees as u128 * per_tree;
    if work > SCAN_BUDGET {
        return Err(Error::ResourceLimit(format!(
            "{work} (tree, marks, shape) triples exceed the budget {SCAN_BUDGET}"
        )));
    }
    Ok(trees)
}

fn majority(a: u32, b: u32, c: u32) -> u32 {
    (a & b) | (b & c) | (a & c)
}

fn scan_tree(
    tree: TreeView<'_>,
    l: usize,
    shapes: &[CompiledShape],
    opts: ScanOptions,
    out: &mut ScanOutput,
) {
    let k = tree.sites.len();
    let mut masks = vec![0u32; k];
    for i in 1..k {
        masks[i] = masks[tree.parent[i]] | (1 << (i - 1));
    }
    let site_of = |mask: u32| -> usize {
        masks.iter().position(|&x| x == mask).expect("median is a site")
    };
    let m = l + 1;
    let mut tuple = [0usize; MAX_MARKS];
    let mut place = [0usize; 2 * MAX_MARKS];
    loop {
        let mut compat = 0u64;
        let mut nondegenerate = false;
        for (si, cs) in shapes.iter().enumerate() {
            place[0] = 0;
            place[1..m].copy_from_slice(&tuple[..l]);
            for &(v, [a, b, c]) in &cs.internals {
                place[v] = site_of(majority(masks[place[a]], masks[place[b]], masks[place[c]]));
            }
            let mut used = 0u32;
            let mut ok = true;
            let mut key = TableKey {
                sigma: si as u8,
                y: [Site::ORIGIN; MAX_EDGES],
                s: [0; MAX_EDGES],
            };
            let mut all_positive = true;
            for (j, &(t, h)) in cs.edges.iter().enumerate() {
                let path = masks[place[t]] ^ masks[place[h]];
                if used & path != 0 {
                    ok = false;
                    break;
                }
                used |= path;
                let len = path.count_ones();
                all_positive &= len > 0;
                if opts.keep_s {
                    key.s[j] = len as u8;
                }
                key.y[j] = tree.sites[place[h]].sub(tree.sites[place[t]]);
            }
            if !ok {
                continue;
            }
            debug_assert_eq!(cs.m, m);
            compat += 1;
            nondegenerate |= all_positive;
            if opts.counts {
                *out.counts.entry(key).or_insert(0) += 1;
            }
        }
        debug_assert!(compat >= 1);
        debug_assert!(!nondegenerate || compat == 1);
        if opts.sue {
            let mut mk: MarkKey = [Site::ORIGIN; MAX_MARKS];
            for i in 0..l {
                mk[i] = tree.sites[tuple[i]];
            }
            let entry = out.sue.entry(mk).or_default();
            entry.s += 1;
            if nondegenerate {
                entry.u += 1;
            } else {
                entry.e += 1;
            }
            entry.compatible += compat;
        }
        // odometer over ordered tuples with repetition
        let mut i = 0;
        loop {
            if i == l {
                return;
            }
            tuple[i] += 1;
            if tuple[i] < k {
                break;
            }
            tuple[i] = 0;
            i += 1;
        }
    }
}

fn scan(model: &LatticeModel, n: usize, l: usize, opts: ScanOptions) -> Result<(u64, ScanOutput)> {
    let trees = check_marks(model, n, l)?;
    let shapes: Vec<CompiledShape> = enumerate_shapes(l + 1)?.iter().map(CompiledShape::new).collect();
    let out = fold_trees(
        model,
        n,
        ScanOutput::default,
        |acc, t| scan_tree(t, l, &shapes, opts, acc),
        |a, b| {
            for (k, v) in b.counts {
                *a.counts.entry(k).or_insert(0) += v;
            }
            for (k, v) in b.sue {
                let e = a.sue.entry(k).or_default();
                e.s += v.s;
                e.u += v.u;
                e.e += v.e;
                e.compatible += v.compatible;
            }
        },
    )?;
    Ok((trees, out))
}

/// `t_n^(m)(sigma; y, s)` (or its s-marginal) for every shape.
#[derive(Clone, Debug)]
pub struct CountTable {
    pub model: LatticeModel,
    pub n: usize,
    pub m: usize,
    /// Whether keys carry path lengths; if not, entries are `t_n^(m)(sigma; y)`.
    pub keep_s: bool,
    /// `t_n^(1)`.
    pub one_point: u64,
    pub shapes: Vec<Shape>,
    /// Sorted entries with positive counts.
    pub entries: Vec<(TableKey, u64)>,
}

impl CountTable {
    pub fn edge_count(&self) -> usize {
        2 * self.m - 3
    }

    /// Sum of all entries for one shape (`hat t(sigma; 0)`).
    pub fn shape_total(&self, sigma: usize) -> u64 {
        self.entries
            .iter()
            .filter(|(k, _)| k.sigma as usize == sigma)
            .map(|(_, c)| c)
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|(_, c)| c).sum()
    }

    /// The s-marginal table `t_n^(m)(sigma; y)`.
    pub fn marginalize_s(&self) -> CountTable {
        let mut map: BTreeMap<TableKey, u64> = BTreeMap::new();
        for (k, c) in &self.entries {
            let mut key = *k;
            key.s = [0; MAX_EDGES];
            *map.entry(key).or_insert(0) += c;
        }
        CountTable {
            keep_s: false,
            entries: map.into_iter().collect(),
            shapes: self.shapes.clone(),
            ..*self
        }
    }

    /// Rows `(sigma_index, y-tuple, s-tuple, count)` as strings for CSV.
    pub fn rows(&self) -> Vec<[String; 4]> {
        let d = self.model.d;
        let e = self.edge_count();
        self.entries
            .iter()
            .map(|(k, c)| {
                let y: Vec<String> = k.y[..e]
                    .iter()
                    .map(|v| {
                        let c: Vec<String> = v.coords(d).iter().map(|x| x.to_string()).collect();
                        format!("({})", c.join(" "))
                    })
                    .collect();
                let s: Vec<String> = k.s[..e].iter().map(|x| x.to_string()).collect();
                [
                    k.sigma.to_string(),
                    y.join(" "),
                    if self.keep_s { s.join(" ") } else { String::new() },
                    c.to_string(),
                ]
            })
            .collect()
    }
}

fn sorted<K: Ord, V>(map: FxHashMap<K, V>) -> Vec<(K, V)> {
    let mut v: Vec<(K, V)> = map.into_iter().collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v
}

/// Count table over `(sigma, y, s)` (or `(sigma, y)` when `keep_s` is
/// false) for `m = 2..=MAX_MARKS + 1`. Each tree is counted once per
/// compatible `(sigma; y, s)`.
pub fn count_tm(model: &LatticeModel, n: usize, m: usize, keep_s: bool) -> Result<CountTable> {
    if m < 2 {
        return Err(invalid("m must be at least 2"));
    }
    let opts = ScanOptions {
        counts: true,
        keep_s,
        sue: false,
    };
    let (trees, out) = scan(model, n, m - 1, opts)?;
    Ok(CountTable {
        model: *model,
        n,
        m,
        keep_s,
        one_point: trees,
        shapes: enumerate_shapes(m)?,
        entries: sorted(out.counts),
    })
}

/// `hat t_n^(m)(sigma; k) = sum_y t(sigma; y) exp(i k . y)` with one
/// frequency per edge.
pub fn fourier_tm(table: &CountTable, sigma: usize, k: &[Vec<f64>]) -> Result<Complex64> {
    if sigma >= table.shapes.len() {
        return Err(invalid(format!("shape index {sigma} out of range")));
    }
    let e = table.edge_count();
    if k.len() != e {
        return Err(invalid(format!("expected {e} edge frequencies, got {}", k.len())));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (key, c) in table.entries.iter().filter(|(key, _)| key.sigma as usize == sigma) {
        let phase: f64 = (0..e).map(|j| key.y[j].dot(&k[j])).sum();
        acc += Complex64::from_polar(*c as f64, phase);
    }
    Ok(acc)
}

/// Exact probability table: numerators over a common denominator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PTable {
    pub denominator: u64,
    pub entries: Vec<(TableKey, u64)>,
}

impl PTable {
    pub fn probability(&self, key: &TableKey) -> num_rational::Ratio<u64> {
        let num = self
            .entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, c)| *c)
            .unwrap_or(0);
        num_rational::Ratio::new(num, self.denominator)
    }
}

/// Normalized tables `p_n^(m)(sigma; y)` and, when the count table keeps
/// path lengths, `p_n^(m)(sigma; y, s)`; both divide by the total count
/// `sum_sigma hat t(sigma; 0)`.
#[derive(Clone, Debug)]
pub struct PTables {
    pub by_y: PTable,
    pub by_ys: Option<PTable>,
}

pub fn p_tables(table: &CountTable) -> Result<PTables> {
    let total = table.total();
    if total == 0 {
        return Err(invalid("empty count table"));
    }
    let by_y = PTable {
        denominator: total,
        entries: table.marginalize_s().entries,
    };
    let by_ys = table.keep_s.then(|| PTable {
        denominator: total,
        entries: table.entries.clone(),
    });
    Ok(PTables { by_y, by_ys })
}

/// The decomposition `s = u + e` over mark tuples.
#[derive(Clone, Debug)]
pub struct SueTable {
    pub model: LatticeModel,
    pub n: usize,
    pub l: usize,
    pub one_point: u64,
    pub entries: Vec<(MarkKey, SueCounts)>,
}

impl SueTable {
    pub fn get(&self, marks: &[Site]) -> SueCounts {
        let mut key: MarkKey = [Site::ORIGIN; MAX_MARKS];
        key[..marks.len()].copy_from_slice(marks);
        self.entries
            .binary_search_by(|(k, _)| k.cmp(&key))
            .map(|i| self.entries[i].1)
            .unwrap_or_default()
    }

    pub fn totals(&self) -> SueCounts {
        let mut t = SueCounts::default();
        for (_, c) in &self.entries {
            t.s += c.s;
            t.u += c.u;
            t.e += c.e;
            t.compatible += c.compatible;
        }
        t
    }

    /// `hat s_n^(l+1)(k) = sum_x s(x) exp(i sum_i k_i . x_i)`.
    pub fn s_hat(&self, k: &[Vec<f64>]) -> Result<Complex64> {
        if k.len() != self.l {
            return Err(invalid(format!("expected {} frequencies", self.l)));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, c) in &self.entries {
            let phase: f64 = (0..self.l).map(|i| x[i].dot(&k[i])).sum();
            acc += Complex64::from_polar(c.s as f64, phase);
        }
        Ok(acc)
    }

    /// Empirical moment characteristic function
    /// `hat s(k / (scale n^{1/4})) / hat s(0)`.
    pub fn moment_characteristic(&self, k: &[Vec<f64>], scale: f64) -> Result<Complex64> {
        if !(scale > 0.0) {
            return Err(invalid("scale must be positive"));
        }
        let factor = 1.0 / (scale * (self.n.max(1) as f64).powf(0.25));
        let scaled: Vec<Vec<f64>> = k
            .iter()
            .map(|v| v.iter().map(|x| x * factor).collect())
            .collect();
        let zero = self.totals().s as f64;
        Ok(self.s_hat(&scaled)? / zero)
    }
}

/// Tables `s`, `u`, `e` over ordered mark tuples `(x_1..x_l)`.
pub fn s_u_e_decompose(model: &LatticeModel, n: usize, l: usize) -> Result<SueTable> {
    let opts = ScanOptions {
        counts: false,
        keep_s: false,
        sue: true,
    };
    let (trees, out) = scan(model, n, l, opts)?;
    Ok(SueTable {
        model: *model,
        n,
        l,
        one_point: trees,
        entries: sorted(out.sue),
    })
}

/// `moment_characteristic` of [`s_u_e_decompose`] in one call.
pub fn moment_char_mu_n(
    model: &LatticeModel,
    n: usize,
    l: usize,
    k: &[Vec<f64>],
    scale: f64,
) -> Result<Complex64> {
    s_u_e_decompose(model, n, l)?.moment_characteristic(k, scale)
}

/// Count and decomposition tables from a single enumeration pass.
pub fn count_and_decompose(
    model: &LatticeModel,
    n: usize,
    l: usize,
    keep_s: bool,
) -> Result<(CountTable, SueTable)> {
    let opts = ScanOptions {
        counts: true,
        keep_s,
        sue: true,
    };
    let (trees, out) = scan(model, n, l, opts)?;
    Ok((
        CountTable {
            model: *model,
            n,
            m: l + 1,
            keep_s,
            one_point: trees,
            shapes: enumerate_shapes(l + 1)?,
            entries: sorted(out.counts),
        },
        SueTable {
            model: *model,
            n,
            l,
            one_point: trees,
            entries: sorted(out.sue),
        },
    ))
}

/// Both sides of the degenerate-configuration bound
/// `|hat s(k) - sum_sigma hat t(sigma; k)| <= ((2l-3)!! - 1) hat e(0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A9Report {
    pub n: usize,
    pub l: usize,
    pub k: Vec<Vec<f64>>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// Exact integer sides at zero frequency.
    pub lhs_at_zero: u64,
    pub rhs_at_zero: u64,
    /// Mark tuples where the zero-frequency bound fails entrywise.
    pub pointwise_violations: usize,
    pub holds: bool,
}

// sum_sigma t(sigma; y) regrouped by the mark tuple that y determines
fn counts_by_marks(table: &CountTable) -> Result<FxHashMap<MarkKey, u64>> {
    let l = table.m - 1;
    let paths: Vec<Vec<Vec<usize>>> = table
        .shapes
        .iter()
        .map(|s| (1..=l).map(|i| s.edges_on_path(0, i)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let mut out: FxHashMap<MarkKey, u64> = FxHashMap::default();
    for (key, c) in &table.entries {
        let mut marks: MarkKey = [Site::ORIGIN; MAX_MARKS];
        for i in 0..l {
            let mut x = Site::ORIGIN;
            for &label in &paths[key.sigma as usize][i] {
                x = x.checked_add(key.y[label - 1]).expect("in range");
            }
            marks[i] = x;
        }
        *out.entry(marks).or_insert(0) += c;
    }
    Ok(out)
}

/// Enumerates `(n, l)` once and checks the over-counting bound at `k`.
pub fn verify_a9(model: &LatticeModel, n: usize, l: usize, k: &[Vec<f64>]) -> Result<A9Report> {
    let (table, sue) = count_and_decompose(model, n, l, false)?;
    a9_report(&table, &sue, k)
}

/// Checks the bound both exactly at zero frequency (globally and for every
/// mark tuple) and numerically at the mark frequencies `k`.
pub fn a9_report(table: &CountTable, sue: &SueTable, k: &[Vec<f64>]) -> Result<A9Report> {
    let l = sue.l;
    if table.m != l + 1 || table.n != sue.n {
        return Err(invalid("count and decomposition tables do not match"));
    }
    if k.len() != l {
        return Err(invalid(format!("expected {l} mark frequencies")));
    }
    let factor = double_factorial_count(l + 1)? - 1;
    let grouped = counts_by_marks(table)?;
    let mut violations = 0;
    for (x, c) in &sue.entries {
        let t = grouped.get(x).copied().unwrap_or(0);
        if t.abs_diff(c.s) > factor * c.e {
            violations += 1;
        }
    }
    // tuples that appear only on the count side
    for x in grouped.keys() {
        if sue.entries.binary_search_by(|(k, _)| k.cmp(x)).is_err() {
            violations += 1;
        }
    }
    let totals = sue.totals();
    let t_total = table.total();
    let lhs_at_zero = t_total.abs_diff(totals.s);
    let rhs_at_zero = factor * totals.e;

    let mut t_hat = Complex64::new(0.0, 0.0);
    for (sigma, shape) in table.shapes.iter().enumerate() {
        let routed = ise::route_frequencies(shape, k)?;
        t_hat += fourier_tm(table, sigma, &routed)?;
    }
    let lhs = (sue.s_hat(k)? - t_hat).norm();
    let rhs = rhs_at_zero as f64;
    let slack = rhs - lhs;
    Ok(A9Report {
        n: sue.n,
        l,
        k: k.to_vec(),
        lhs,
        rhs,
        slack,
        lhs_at_zero,
        rhs_at_zero,
        pointwise_violations: violations,
        holds: violations == 0 && lhs_at_zero <= rhs_at_zero && slack >= -1e-9 * rhs.max(1.0),
    })
}

/// Least-squares scale `D` matching the empirical first-moment
/// characteristic function `hat s_n^(2)(k e_1 / (D n^{1/4})) / hat s_n^(2)(0)`
/// to `hat A^(2)(k)` over `k_grid`, by golden-section search on `log D`.
pub fn fit_scale(sue: &SueTable, k_grid: &[f64], q: &QuadratureSpec) -> Result<f64> {
    if sue.l != 1 {
        return Err(invalid("scale fitting uses the one-mark table"));
    }
    let d = sue.model.d;
    let s2 = enumerate_shapes(2)?.remove(0);
    let targets: Vec<f64> = k_grid
        .iter()
        .map(|&k| ise::m_point_hat_sq(&s2, &[k * k], q).map(|v| v.value))
        .collect::<Result<_>>()?;
    let loss = |log_d: f64| -> Result<f64> {
        let mut acc = 0.0;
        for (&k, &t) in k_grid.iter().zip(&targets) {
            let mut kv = vec![0.0; d];
            kv[0] = k;
            let v = sue.moment_characteristic(&[kv], log_d.exp())?;
            acc += (v.re - t).powi(2);
        }
        Ok(acc)
    };
    let (mut a, mut b) = ((0.02f64).ln(), (50.0f64).ln());
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let (mut fc, mut fe) = (loss(c)?, loss(e)?);
    for _ in 0..100 {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = loss(c)?;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = loss(e)?;
        }
    }
    Ok(((a + b) / 2.0).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{enumerate_trees, one_point};

    fn nn(d: usize) -> LatticeModel {
        LatticeModel::nearest_neighbour(d).unwrap()
    }

    fn site(c: &[i64]) -> Site {
        Site::new(c).unwrap()
    }

    #[test]
    fn appendix_configuration() {
        let e1 = site(&[1, 0]);
        let tree = LatticeTree::from_bonds(&nn(2), &[(Site::ORIGIN, e1)]).unwrap();
        let rec = backbone(&tree, &[Site::ORIGIN, Site::ORIGIN, e1], 2).unwrap();
        assert_eq!(rec.compatible.len(), 3);
        let sue = s_u_e_decompose(&nn(2), 1, 3).unwrap();
        let c = sue.get(&[Site::ORIGIN, Site::ORIGIN, e1]);
        assert_eq!(c.s, 1);
        assert_eq!(c.e, 1);
        assert_eq!(c.compatible, 3);
        let r = verify_a9(&nn(2), 1, 3, &vec![vec![0.0, 0.0]; 3]).unwrap();
        assert_eq!(r.rhs_at_zero, 2 * sue.totals().e);
        assert!(r.holds);
    }

    #[test]
    fn two_point_single_shape() {
        let trees = enumerate_trees(&nn(2), 3).unwrap();
        for t in &trees {
            for &x in t.sites() {
                let rec = backbone(t, &[x], 2).unwrap();
                assert_eq!(rec.compatible.len(), 1);
                assert_eq!(rec.compatible[0].s[0], rec.bonds.len());
            }
        }
        assert!(backbone(&trees[0], &[site(&[9, 9])], 2).is_err());
    }

    // Oracle for the m = 2, n = 1, d = 1 table: hand-listed trees and marks.
    #[test]
    fn line_two_point_table() {
        let t = count_tm(&nn(1), 1, 2, true).unwrap();
        let key = |y: i64, s: u8| {
            let mut k = TableKey {
                sigma: 0,
                y: [Site::ORIGIN; MAX_EDGES],
                s: [0; MAX_EDGES],
            };
            k.y[0] = site(&[y]);
            k.s[0] = s;
            k
        };
        let get = |k: TableKey| t.entries.iter().find(|e| e.0 == k).map(|e| e.1);
        assert_eq!(get(key(0, 0)), Some(2));
        assert_eq!(get(key(1, 1)), Some(1));
        assert_eq!(get(key(-1, 1)), Some(1));
        assert_eq!(t.entries.len(), 3);
        let p = p_tables(&t).unwrap();
        assert_eq!(p.by_y.probability(&key(0, 0)), num_rational::Ratio::new(1, 2));
        assert_eq!(p.by_y.probability(&key(1, 0)), num_rational::Ratio::new(1, 4));
        let sum: u64 = p.by_ys.unwrap().entries.iter().map(|e| e.1).sum();
        assert_eq!(sum, p.by_y.denominator);
    }

    #[test]
    fn fast_scan_matches_general_backbone() {
        let model = nn(2);
        for n in 0..=3 {
            for l in 1..=3 {
                let table = count_tm(&model, n, l + 1, true).unwrap();
                let mut oracle: BTreeMap<TableKey, u64> = BTreeMap::new();
                let mut s_total = 0;
                for tree in enumerate_trees(&model, n).unwrap() {
                    let k = tree.sites().len();
                    let mut tuple = vec![0usize; l];
                    loop {
                        let marks: Vec<Site> = tuple.iter().map(|&i| tree.sites()[i]).collect();
                        let rec = backbone(&tree, &marks, 2).unwrap();
                        s_total += 1;
                        for c in rec.compatible {
                            let mut key = TableKey {
                                sigma: c.shape_index as u8,
                                y: [Site::ORIGIN; MAX_EDGES],
                                s: [0; MAX_EDGES],
                            };
                            for j in 0..c.s.len() {
                                key.y[j] = site(&c.y[j]);
                                key.s[j] = c.s[j] as u8;
                            }
                            *oracle.entry(key).or_insert(0) += 1;
                        }
                        let mut i = 0;
                        while i < l {
                            tuple[i] += 1;
                            if tuple[i] < k {
                                break;
                            }
                            tuple[i] = 0;
                            i += 1;
                        }
                        if i == l {
                            break;
                        }
                    }
                }
                let oracle: Vec<(TableKey, u64)> = oracle.into_iter().collect();
                assert_eq!(table.entries, oracle, "n={n} l={l}");
                let sue = s_u_e_decompose(&model, n, l).unwrap();
                assert_eq!(sue.totals().s, s_total);
            }
        }
    }

    #[test]
    fn identities_small() {
        let model = nn(2);
        for n in 0..=4 {
            let t1 = one_point(&model, n).unwrap();
            for l in 1..=3 {
                let (table, sue) = count_and_decompose(&model, n, l, false).unwrap();
                let totals = sue.totals();
                assert_eq!(totals.s, (n as u64 + 1).pow(l as u32) * t1);
                for (_, c) in &sue.entries {
                    assert_eq!(c.s, c.u + c.e);
                }
                let report = a9_report(&table, &sue, &vec![vec![0.3, -0.2]; l]).unwrap();
                assert!(report.holds, "{report:?}");
                if l <= 2 {
                    assert_eq!(report.lhs_at_zero, 0);
                }
                assert_eq!(report.lhs_at_zero, totals.compatible - totals.s);
            }
        }
    }

    #[test]
    fn inversion_symmetry_and_real_transform() {
        let table = count_tm(&nn(2), 4, 3, false).unwrap();
        let mut flipped: Vec<(TableKey, u64)> = table
            .entries
            .iter()
            .map(|(k, c)| {
                let mut k2 = *k;
                for j in 0..3 {
                    k2.y[j] = k.y[j].neg();
                }
                (k2, *c)
            })
            .collect();
        flipped.sort();
        assert_eq!(flipped, table.entries);
        let k = vec![vec![0.4, 0.1], vec![-0.3, 0.7], vec![1.1, -0.5]];
        let v = fourier_tm(&table, 0, &k).unwrap();
        assert!(v.im.abs() < 1e-9 * v.re.abs().max(1.0));
        let zero = fourier_tm(&table, 0, &vec![vec![0.0, 0.0]; 3]).unwrap();
        assert!(v.norm() <= zero.re + 1e-9);
        assert_eq!(zero.re as u64, table.shape_total(0));
    }

    #[test]
    fn two_point_marginal_and_moment_ratio() {
        let model = nn(2);
        let n = 4;
        let t = count_tm(&model, n, 2, true).unwrap();
        assert_eq!(t.total(), (n as u64 + 1) * one_point(&model, n).unwrap());
        let sue = s_u_e_decompose(&model, n, 1).unwrap();
        let k = vec![vec![0.9, -0.4]];
        let a = sue.moment_characteristic(&k, 1.0).unwrap();
        let scale = 1.0 / (n as f64).powf(0.25);
        let scaled = vec![vec![0.9 * scale, -0.4 * scale]];
        let b = fourier_tm(&t, 0, &scaled).unwrap() / t.total() as f64;
        assert!((a - b).norm() < 1e-12);
        assert_eq!(sue.moment_characteristic(&[vec![0.0, 0.0]], 2.0).unwrap().re, 1.0);
        // e^(2)(x) is nonzero only at x = 0, where it equals t_n^(1)
        for (x, c) in &sue.entries {
            if x[0] == Site::ORIGIN {
                assert_eq!(c.e, one_point(&model, n).unwrap());
            } else {
                assert_eq!(c.e, 0);
            }
        }
    }

    #[test]
    fn three_point_ratio_uses_routed_frequencies() {
        let model = nn(2);
        let (t, sue) = count_and_decompose(&model, 3, 2, false).unwrap();
        let k = vec![vec![0.3, 0.2], vec![-0.5, 0.1]];
        let lhs = sue.s_hat(&k).unwrap();
        let routed = ise::route_frequencies(&t.shapes[0], &k).unwrap();
        let rhs = fourier_tm(&t, 0, &routed).unwrap();
        assert!((lhs - rhs).norm() < 1e-9);
    }

    #[test]
    fn limits() {
        assert!(count_tm(&nn(2), 2, 1, false).is_err());
        assert!(s_u_e_decompose(&nn(2), 2, 6).is_err());
        assert!(s_u_e_decompose(&nn(1), 100, 5).is_err());
    }
}
