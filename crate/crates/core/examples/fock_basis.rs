//! Enumerates a small bosonic Fock basis and shows ranking and a hop.
//!
//! cargo run --example fock_basis

use kagome_bh::fockspace::FockBasis;

fn main() -> kagome_bh::Result<()> {
    let basis = FockBasis::new(3, 3)?;
    println!("N = 3 bosons on M = 3 sites: dimension {}", basis.dimension());
    for i in 0..basis.dimension() {
        let occ = basis.state(i);
        assert_eq!(basis.rank(occ), Some(i));
        println!("  {i:2}  {occ:?}");
    }
    // b†_1 b_0 acting on |3,0,0⟩
    let from = basis.rank(&[3, 0, 0]).expect("state exists");
    if let Some((to, amp)) = basis.apply_hop(from, 1, 0)? {
        println!("b†_1 b_0 |3,0,0⟩ = {amp:.6} |{:?}⟩", basis.state(to));
    }
    for (n, m) in [(6, 6), (12, 12), (20, 27)] {
        match FockBasis::new(n, m) {
            Ok(b) => println!("N = {n}, M = {m}: dimension {}", b.dimension()),
            Err(e) => println!("N = {n}, M = {m}: {e}"),
        }
    }
    Ok(())
}
