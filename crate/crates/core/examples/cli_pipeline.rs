//! Drives the command-line front end in-process: synthesize an image, fit
//! it, and replay the synthesis from its manifest.
//!
//! cargo run --release --example cli_pipeline

fn main() {
    let dir = std::env::temp_dir().join("kagome-cli-pipeline");
    let out = |sub: &str| dir.join(sub).display().to_string();
    let synth = out("synth");
    let grid = format!("{synth}/grid.csv");
    let steps: Vec<Vec<String>> = vec![
        vec!["--out".into(), synth.clone(), "--seed".into(), "11".into(), "synth".into(), "--set".into(), "synth.noise=0.01".into()],
        vec!["--out".into(), out("fit"), "fit".into(), "--input".into(), grid],
        vec!["--out".into(), out("replay"), "synth".into(), "--manifest".into(), format!("{synth}/manifest.json")],
    ];
    for args in steps {
        println!("$ kagome {}", args.join(" "));
        let code = kagome_bh::cli::run(std::iter::once("kagome".to_string()).chain(args));
        assert_eq!(code, 0);
    }
    let a = std::fs::read(format!("{synth}/grid.csv")).expect("synth output");
    let b = std::fs::read(dir.join("replay/grid.csv")).expect("replay output");
    println!("replayed grid identical: {}", a == b);
}
