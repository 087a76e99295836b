//! NP-hardness in action: reduce a planted numerical 3-dimensional matching
//! instance to a supergeo design problem and recover the hidden matching as
//! the unique zero-loss partition into triples.
//!
//! Run with: cargo run --example hardness

use supergeo::design_search::{brute_force_partition, DesignConfig};
use supergeo::instance_gen::{break_instance, plant_n3dm, reduce_n3dm};

fn main() -> supergeo::error::Result<()> {
    let inst = plant_n3dm(4, 30, 17)?;
    println!("N3DM instance (bound {}):", inst.bound);
    println!("  W = {:?}", inst.w);
    println!("  X = {:?}", inst.x);
    println!("  Y = {:?}", inst.y);

    let reduced = reduce_n3dm(&inst)?;
    println!("reduced to {} geos with offset M = {}", reduced.z.len(), reduced.offset);

    let cfg = DesignConfig {
        min_size: 3,
        max_size: 3,
        ..DesignConfig::default()
    };
    let best = brute_force_partition(&reduced.z, &cfg)?;
    println!("optimal l=u=3 design loss: {}", best.loss);
    for pair in &best.pairs {
        let side = |s: &[supergeo::geo_data::GeoId]| {
            s.iter().map(|g| g.0.as_str()).collect::<Vec<_>>().join("+")
        };
        println!("  ({}) vs ({})", side(&pair.plus), side(&pair.minus));
    }

    let broken = break_instance(&inst);
    let best_no = brute_force_partition(&reduce_n3dm(&broken)?.z, &cfg)?;
    println!(
        "after perturbing one element (no-instance): optimal loss {} > 0",
        best_no.loss
    );
    Ok(())
}
