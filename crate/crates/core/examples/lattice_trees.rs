//! Exact lattice-tree enumeration: counts, the critical point estimate,
//! the s = u + e decomposition, and the backbone of a large marked tree.

use iselab::lattice::{estimate_zc, one_point, LatticeModel, LatticeTree, Site};
use iselab::shapes::enumerate_shapes;
use iselab::trees::{backbone, count_and_decompose, verify_a9};
use serde_json::Value;

fn coords(v: &Value) -> Vec<i64> {
    v.as_array().unwrap().iter().map(|c| c.as_i64().unwrap()).collect()
}

fn main() -> iselab::error::Result<()> {
    let model = LatticeModel::nearest_neighbour(2)?;
    let counts: Vec<u64> = (0..=8).map(|n| one_point(&model, n)).collect::<Result<_, _>>()?;
    println!("t_n, d = 2: {counts:?}");

    let zc = estimate_zc(&model, 10)?;
    println!("z_c ~ {:.4} +- {:.4}", zc.zc, zc.band);

    let (n, l) = (4, 2);
    let (_, sue) = count_and_decompose(&model, n, l, false)?;
    let t = sue.totals();
    println!("\nn = {n}, l = {l}: s = {} = (n+1)^l t_n = {}, u = {}, e = {}", t.s, 25 * counts[n], t.u, t.e);
    let a9 = verify_a9(&model, n, l, &[vec![0.0, 0.0], vec![0.0, 0.0]])?;
    println!("over-counting bound at k = 0: {} <= {} ({})", a9.lhs_at_zero, a9.rhs_at_zero, a9.holds);

    let path = format!("{}/golden/figure2_tree.json", env!("CARGO_MANIFEST_DIR"));
    let g: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let site = |v: &Value| Site::new(&coords(v));
    let bonds: Vec<(Site, Site)> = g["bonds"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| Ok((site(&b[0])?, site(&b[1])?)))
        .collect::<iselab::error::Result<_>>()?;
    let tree = LatticeTree::from_bonds(&model, &bonds)?;
    let marks: Vec<Site> = g["marks"].as_array().unwrap().iter().map(site).collect::<Result<_, _>>()?;
    let rec = backbone(&tree, &marks, 2)?;
    let c = &rec.compatible[0];
    println!(
        "\n{}-bond tree with marks {:?}:\n  shape {}, path lengths {:?}, displacements {:?}",
        tree.bond_count(),
        rec.marks,
        enumerate_shapes(4)?[c.shape_index].canonical_string(),
        c.s,
        c.y
    );
    Ok(())
}
