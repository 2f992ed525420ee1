//! Samples the two-colour superlattice along a line through one trimer and
//! prints the site positions of a 1x1 cell for both trimerizations.
//!
//! cargo run --example superlattice_potential

use kagome_bh::geometry::{build_cluster, potential, SuperlatticeSpec, Trimerization, Vec2};

fn main() -> kagome_bh::Result<()> {
    for trim in [Trimerization::Right, Trimerization::Left] {
        let spec = SuperlatticeSpec::standard(45e3, 15e3, trim)?;
        let graph = build_cluster(&spec, 1, 1, true)?;
        println!("{trim} trimerization, site spacing {:.3} nm", spec.site_spacing());
        for s in graph.sites() {
            println!(
                "  {} at ({:8.2}, {:8.2}) nm  V = {:9.1} Hz  trimer {:?}",
                s.label,
                s.position.x,
                s.position.y,
                potential(&spec, s.position),
                s.trimer
            );
        }
        let g = spec.reciprocal();
        println!("  |G| = {:.5} 1/nm", g[0].norm());
    }

    let spec = SuperlatticeSpec::standard(45e3, 15e3, Trimerization::Right)?;
    let (a1, _) = spec.sw_vectors();
    println!("\nV along a1 (x in units of the site spacing):");
    for i in 0..=16 {
        let t = -0.5 + 2.0 * i as f64 / 16.0;
        let r: Vec2 = a1 * t;
        println!("  {t:5.2}  {:9.1}", potential(&spec, r));
    }
    Ok(())
}
