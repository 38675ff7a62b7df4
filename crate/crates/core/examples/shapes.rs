//! Enumerates m-shapes and shows how external frequencies route onto edges.

use iselab::shapes::{double_factorial_count, enumerate_shapes};

fn main() -> iselab::error::Result<()> {
    for m in 2..=8 {
        let shapes = enumerate_shapes(m)?;
        println!("m = {m}: {:>5} shapes (expected {})", shapes.len(), double_factorial_count(m)?);
    }

    println!("\nthe three 4-shapes:");
    for s in enumerate_shapes(4)? {
        println!("  {}", s.canonical_string());
        for (label, externals) in s.frequency_routing().iter().enumerate() {
            println!("    edge {} carries k_i for i in {externals:?}", label + 1);
        }
    }
    Ok(())
}
