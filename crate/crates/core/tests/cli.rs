//! End-to-end runs of the `kagome` binary.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kagome_bh::cli::commands::schemas;
use kagome_bh::cli::manifest::RunManifest;
use kagome_bh::experiments::dominant_frequencies;
use kagome_bh::fit::{model_grid, FitModelParams};
use kagome_bh::geometry::{build_cluster, SuperlatticeSpec, Trimerization};
use kagome_bh::io::{read_grid, read_table};
use kagome_bh::observables::GridSpec;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn kagome(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kagome"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("KAGOME_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn value_after(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key))
        .and_then(|v| v.trim_start_matches([' ', '=']).split_whitespace().next())
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("'{key}' missing from:\n{stdout}"))
}

#[test]
fn imprint_config_reproduces_beat_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("imprint_deep_lattice.conf");
    ok(&kagome(dir.path(), &["imprint", "-c", c.to_str().unwrap()]));
    let (header, rows) = read_table(&dir.path().join("imprint.csv")).unwrap();
    assert_eq!(header[..3], ["tau_s", "alpha_ab", "beta_ab"]);
    assert_eq!(rows.len(), 501);
    let alpha: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let mut f: Vec<f64> = dominant_frequencies(&alpha, 2e-6, 2).unwrap().iter().map(|p| p.0).collect();
    f.sort_by(f64::total_cmp);
    assert!((f[0] / 11.0e3 - 1.0).abs() < 0.05 && (f[1] / 13.8e3 - 1.0).abs() < 0.05, "{f:?}");
}

#[test]
fn two_site_ed_prints_closed_form_energy() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("two_site_ed.conf");
    let stdout = ok(&kagome(dir.path(), &["ed", "-c", c.to_str().unwrap()]));
    let e = value_after(&stdout, "ground_energy_hz");
    let (u, j) = (10.0f64, 1.0f64);
    let closed = (u - (u * u + 16.0 * j * j).sqrt()) / 2.0;
    assert!((e - closed).abs() <= 1e-12 * closed.abs(), "{e} vs {closed}");
    assert!((value_after(&stdout, "closed_form_hz") - closed).abs() < 1e-15);
}

#[test]
fn synth_then_fit_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("synth");
    let c = config("synth_pattern.conf");
    ok(&kagome(&s, &["--seed", "21", "synth", "-c", c.to_str().unwrap()]));
    let stdout = ok(&kagome(
        &dir.path().join("fit"),
        &["fit", "--input", s.join("grid.csv").to_str().unwrap()],
    ));
    let alpha = value_after(&stdout, "alpha_mean");
    assert!((alpha - 1.0).abs() < 0.02, "{alpha}");
    let m = RunManifest::read(&dir.path().join("fit/manifest.json")).unwrap();
    assert_eq!(m.inputs.len(), 2);
    assert!(m.outputs.iter().any(|o| o.path == "fit.json"));
}

#[test]
fn noiseless_synth_matches_library_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    ok(&kagome(dir.path(), &["synth", "--set", "synth.alpha=0.3,0.4,0.5", "--set", "synth.noise=0"]));
    let got = read_grid(&dir.path().join("grid.csv")).unwrap();
    let spec = SuperlatticeSpec::standard(45e3, 15e3, Trimerization::Right).unwrap();
    let g = build_cluster(&spec, 1, 1, false).unwrap();
    let d = g.bond_directions();
    let p = FitModelParams {
        alpha: [0.3, 0.4, 0.5],
        beta: [0.0; 3],
        k_width: 0.011,
        bond_length: g.bond_length(),
        amplitude: 3.0,
        background: 0.0,
    };
    let want = model_grid(&p, &[d[0], d[1], d[2]], GridSpec::square(0.03, 81).unwrap()).unwrap();
    assert_eq!(got.values(), want.values());
}

#[test]
fn same_seed_same_bytes_and_manifest_replay() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, r) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("r"));
    let args = ["--seed", "99", "synth", "--set", "synth.noise=0.01", "--set", "synth.pgm=true"];
    ok(&kagome(&a, &args));
    ok(&kagome(&b, &args));
    let read = |p: &Path| fs::read(p.join("grid.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    ok(&kagome(&r, &["synth", "--manifest", a.join("manifest.json").to_str().unwrap()]));
    assert_eq!(read(&a), read(&r));
    let (ma, mr) = (
        RunManifest::read(&a.join("manifest.json")).unwrap(),
        RunManifest::read(&r.join("manifest.json")).unwrap(),
    );
    assert_eq!(ma.outputs, mr.outputs);
    assert_eq!(ma.config, mr.config);
    assert_eq!(mr.seed, 99);

    let other = dir.path().join("o");
    ok(&kagome(&other, &["--seed", "100", "synth", "--set", "synth.noise=0.01"]));
    assert_ne!(read(&a), read(&other));
}

#[test]
fn manifest_names_every_output() {
    let dir = tempfile::tempdir().unwrap();
    for (sub, args) in [
        ("ed", vec!["ed", "--set", "ed.write_hamiltonian=true"]),
        ("sweep", vec!["sweep", "--set", "sweep.points=3"]),
        ("potential", vec!["potential", "--set", "potential.points=21"]),
        (
            "diffract",
            vec!["diffract", "--set", "diffract.tau_max_s=4e-6", "--set", "diffract.write_grids=true", "--set", "diffract.grid_points=81"],
        ),
    ] {
        let out = dir.path().join(sub);
        ok(&kagome(&out, &args));
        let m = RunManifest::read(&out.join("manifest.json")).unwrap();
        let listed: BTreeSet<String> = m.outputs.iter().map(|o| o.path.clone()).collect();
        let present: BTreeSet<String> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n != "manifest.json")
            .collect();
        assert_eq!(listed, present, "{sub}");
        assert_eq!(m.subcommand, sub);
    }
}

#[test]
fn sweep_is_deterministic_with_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("mott_sweep_trimer.conf");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&kagome(&a, &["--jobs", "1", "sweep", "-c", c.to_str().unwrap()]));
    ok(&kagome(&b, &["--jobs", "3", "sweep", "-c", c.to_str().unwrap()]));
    assert_eq!(fs::read(a.join("sweep.csv")).unwrap(), fs::read(b.join("sweep.csv")).unwrap());
}

#[test]
fn error_categories_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = |args: &[&str]| kagome(d, args).status.code().unwrap();
    assert_eq!(code(&["ed", "--frobnicate"]), 2);
    assert_eq!(code(&["nosuchcommand"]), 2);
    assert_eq!(code(&["ed", "--set", "hubbard.nope=1"]), 2);
    assert_eq!(code(&["ed", "--set", "hubbard.u_hz=abc"]), 2);
    let bad = d.join("bad.conf");
    fs::write(&bad, "hubbard.u_hz 10\n").unwrap();
    assert_eq!(code(&["ed", "-c", bad.to_str().unwrap()]), 2);
    assert_eq!(code(&["ed", "-c", d.join("missing.conf").to_str().unwrap()]), 5);
    assert_eq!(code(&["fit", "--input", d.join("missing.csv").to_str().unwrap()]), 5);
    assert_eq!(code(&["fit"]), 2);
    assert_eq!(
        code(&["ed", "--set", "cluster.rows=3", "--set", "cluster.cols=3", "--set", "hubbard.n_particles=20"]),
        3
    );
    assert_eq!(
        code(&["ed", "--set", "solver.kind=dense", "--set", "cluster.cols=2", "--set", "cluster.rows=2", "--set", "hubbard.n_particles=6"]),
        3
    );
    let s = d.join("s");
    ok(&kagome(&s, &["synth"]));
    assert_eq!(
        code(&["fit", "--input", s.join("grid.csv").to_str().unwrap(), "--set", "fit.max_iter=2"]),
        4
    );
    let stderr = String::from_utf8(kagome(d, &["ed", "--set", "hubbard.nope=1"]).stderr).unwrap();
    assert!(stderr.contains("hubbard.nope") && stderr.contains("did you mean"), "{stderr}");
}

#[test]
fn help_documents_every_key() {
    for s in schemas() {
        let out = Command::new(env!("CARGO_BIN_EXE_kagome"))
            .args([s.command, "--help"])
            .output()
            .unwrap();
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        for k in &s.keys {
            assert!(text.contains(k.key), "`{} --help` misses {}", s.command, k.key);
        }
    }
}

#[test]
fn out_dir_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_kagome"))
        .args(["ed", "--set", "cluster.kind=dimer", "--set", "hubbard.n_particles=2"])
        .env("KAGOME_OUT_DIR", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    ok(&out);
    assert!(target.join("manifest.json").exists());
}
