use std::collections::BTreeSet;
use std::fs;

use iselab::lattice::{LatticeModel, LatticeTree, Site};
use iselab::shapes::{enumerate_shapes, Shape};
use iselab::trees::backbone;
use serde::Deserialize;

fn golden(name: &str) -> String {
    fs::read_to_string(format!("{}/golden/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[derive(Deserialize)]
struct ShapeGolden {
    m: usize,
    count: usize,
    canonical: Vec<String>,
}

#[test]
fn shape_sets_match_golden_files() {
    for m in 2..=6 {
        let g: ShapeGolden = serde_json::from_str(&golden(&format!("shapes_m{m}.json"))).unwrap();
        assert_eq!(g.m, m);
        let shapes = enumerate_shapes(m).unwrap();
        assert_eq!(shapes.len(), g.count);
        let ours: BTreeSet<&str> = shapes.iter().map(Shape::canonical_string).collect();
        let theirs: BTreeSet<&str> = g.canonical.iter().map(String::as_str).collect();
        assert_eq!(ours, theirs, "m = {m}");
    }
}

#[test]
fn shape_records_round_trip() {
    for m in 2..=6 {
        for s in enumerate_shapes(m).unwrap() {
            let json = serde_json::to_string(&s.to_record()).unwrap();
            let back = Shape::from_record(&serde_json::from_str(&json).unwrap()).unwrap();
            assert_eq!(back.canonical_string(), s.canonical_string());
        }
    }
}

#[derive(Deserialize)]
struct TreeGolden {
    d: usize,
    bonds: Vec<[Vec<i64>; 2]>,
    marks: Vec<Vec<i64>>,
    shape: String,
    s: Vec<usize>,
    y: Vec<Vec<i64>>,
}

#[test]
fn figure_two_backbone() {
    let g: TreeGolden = serde_json::from_str(&golden("figure2_tree.json")).unwrap();
    let model = LatticeModel::nearest_neighbour(g.d).unwrap();
    let bonds: Vec<(Site, Site)> = g
        .bonds
        .iter()
        .map(|[a, b]| (Site::new(a).unwrap(), Site::new(b).unwrap()))
        .collect();
    let tree = LatticeTree::from_bonds(&model, &bonds).unwrap();
    assert_eq!(tree.bond_count(), 78);
    let marks: Vec<Site> = g.marks.iter().map(|x| Site::new(x).unwrap()).collect();
    let rec = backbone(&tree, &marks, g.d).unwrap();
    // every backbone path is nontrivial, so the shape is unique
    assert_eq!(rec.compatible.len(), 1);
    let c = &rec.compatible[0];
    let shapes = enumerate_shapes(4).unwrap();
    assert_eq!(shapes[c.shape_index].canonical_string(), g.shape);
    assert_eq!(c.s, g.s);
    assert_eq!(c.y, g.y);
    assert_eq!(rec.bonds.len(), g.s.iter().sum::<usize>());
    // displacements along each root-to-mark path add up to the mark
    let shape = &shapes[c.shape_index];
    for (i, x) in g.marks.iter().enumerate() {
        let mut acc = vec![0i64; g.d];
        for label in shape.edges_on_path(0, i + 1).unwrap() {
            for (a, b) in acc.iter_mut().zip(&c.y[label - 1]) {
                *a += b;
            }
        }
        assert_eq!(&acc, x);
    }
}
