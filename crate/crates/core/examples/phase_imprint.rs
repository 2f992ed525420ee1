//! Phase-imprint quench on one trimer in the deep lattice: alpha_AB(τ),
//! its dominant beat frequencies and the apparent decay of the envelope
//! within the first 150 μs.
//!
//! cargo run --example phase_imprint

use kagome_bh::experiments::{dominant_frequencies, imprint_series, ImprintConfig};

fn main() -> kagome_bh::Result<()> {
    let cfg = ImprintConfig::deep_lattice();
    let s = imprint_series(&cfg)?;
    println!("{:>8} {:>12} {:>12} {:>10}", "τ (μs)", "α_AB", "β_AB", "|α+iβ|");
    let env = s.envelope_ab();
    for i in (0..=75).step_by(5) {
        println!(
            "{:8.1} {:12.6} {:12.6} {:10.6}",
            s.tau[i] * 1e6,
            s.alpha_ab[i],
            s.beta_ab[i],
            env[i]
        );
    }
    let early = env[..=75].iter().cloned().fold(f64::INFINITY, f64::min);
    let late = env[75..].iter().cloned().fold(0.0, f64::max);
    println!("envelope: start {:.5}, min over 150 μs {early:.5}, max after {late:.5}", env[0]);
    for (f, p) in dominant_frequencies(&s.alpha_ab, 2e-6, 4)? {
        println!("peak {:7.3} kHz  power {p:.3e}", f / 1e3);
    }
    Ok(())
}
