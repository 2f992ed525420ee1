//! The seven pipelines behind the subcommands, each with its config schema.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::bosehubbard::{build_hamiltonian, ground_state_energy_perturbative_check, HubbardParams};
use crate::error::{Error, Result};
use crate::experiments::{
    coherence_sweep, diffraction_scan_with_grids, dominant_frequencies, harmonic_width_nm, imprint_mixture,
    imprint_series, log_log_slope, uniform_times, ClusterSpec, DiffractionConfig, ImprintConfig, ImprintSeries,
    Solver, SweepConfig, SweepPoint, SweepRow,
};
use crate::fit::{average_alpha, fit_coherence, model_grid, FitModelParams, FitOptions};
use crate::fockspace::FockBasis;
use crate::geometry::{self, build_cluster, BondClass, SuperlatticeSpec, Trimerization, Vec2};
use crate::io::{read_grid, sidecar_path, write_grid, write_pgm, write_table};
use crate::observables::{
    add_peak_noise, bond_coherences, momentum_nn, momentum_periodic, trimer_interference, CellCoherences,
    CoherenceRecord, GridSpec, WannierEnvelope,
};
use crate::spectral::{diagonalize_dense, ground_state_lanczos, LanczosOptions, DEFAULT_DENSE_CAP};
use crate::C64;

use super::config::{key, optional, Config, KeySpec, Kind, Schema};
use super::manifest::{digest, FileDigest};

const TRIM: Kind = Kind::Choice(&["right", "left"]);

const LATTICE: &[KeySpec] = &[
    key("lattice.v_sw_hz", Kind::Float, "45000", "short-wavelength lattice depth V_SW/h (Hz)"),
    key("lattice.v_lw_hz", Kind::Float, "15000", "long-wavelength lattice depth V_LW/h (Hz)"),
    key("lattice.trimerization", TRIM, "right", "which triangles form the trimers"),
    key("lattice.breathing", Kind::Float, "0", "breathing distortion of the SW lattice, in [0, 0.5)"),
];

const CLUSTER: &[KeySpec] = &[
    key("cluster.kind", Kind::Choice(&["lattice", "dimer"]), "lattice", "cluster geometry"),
    key("cluster.bond_length_nm", Kind::Float, "354.6666666666667", "dimer bond length (nm)"),
    key("cluster.rows", Kind::Int, "1", "superlattice cells along a2"),
    key("cluster.cols", Kind::Int, "1", "superlattice cells along a1"),
    key("cluster.include_d", Kind::Bool, "false", "include the fourth (D) site of each cell"),
];

const SOLVER: &[KeySpec] = &[
    key("solver.kind", Kind::Choice(&["auto", "dense", "lanczos"]), "auto", "eigensolver; auto is dense up to 5000 states"),
    key("solver.tol", Kind::Float, "1e-10", "Lanczos residual tolerance relative to |H|"),
    key("solver.max_iter", Kind::Int, "400", "Lanczos iteration cap"),
];

const POTENTIAL: &[KeySpec] = &[
    key("potential.half_width_nm", Kind::Float, "800", "half width of the square sampling window (nm)"),
    key("potential.points", Kind::Int, "161", "samples per axis"),
];

const ED: &[KeySpec] = &[
    key("hubbard.n_particles", Kind::Int, "3", "number of atoms"),
    key("hubbard.j_strong_hz", Kind::Float, "1", "intra-trimer tunnelling J/h (Hz)"),
    key("hubbard.j_weak_hz", Kind::Float, "1", "inter-trimer tunnelling J'/h (Hz)"),
    key("hubbard.u_hz", Kind::Float, "10", "on-site interaction U/h (Hz)"),
    key("hubbard.offsets_hz", Kind::FloatList, "", "per-site energy offsets (Hz); empty for none"),
    key("ed.levels", Kind::Int, "20", "lowest levels written to spectrum.csv (0 = all)"),
    key("ed.write_hamiltonian", Kind::Bool, "false", "also write the sparse Hamiltonian as hamiltonian.mtx"),
];

const IMPRINT: &[KeySpec] = &[
    key("hubbard.u_hz", Kind::Float, "1700", "on-site interaction U/h (Hz)"),
    key("hubbard.j_hz", Kind::Float, "3", "intra-trimer tunnelling J/h (Hz)"),
    key("imprint.delta_v_hz", Kind::Float, "12400", "energy offset on site A during the imprint (Hz)"),
    key("imprint.n_particles", Kind::Int, "3", "atoms in the trimer"),
    key("imprint.mixture", Kind::Text, "", "atom-number mixture 'N:weight, ...'; overrides n_particles"),
    key("imprint.dt_s", Kind::Float, "2e-6", "sampling step of the imprint time (s)"),
    key("imprint.samples", Kind::Int, "501", "number of imprint times, starting at 0"),
    key("imprint.scale", Kind::Float, "1", "overall factor applied to alpha and beta"),
    optional("imprint.evolve_u_hz", Kind::Float, "interaction during the imprint (default: hubbard.u_hz)"),
    optional("imprint.evolve_j_hz", Kind::Float, "tunnelling during the imprint (default: hubbard.j_hz)"),
    key("imprint.peaks", Kind::Int, "4", "spectral peaks of alpha_AB reported in peaks.csv"),
];

const SWEEP: &[KeySpec] = &[
    key("hubbard.n_particles", Kind::Int, "3", "number of atoms"),
    key("sweep.mode", Kind::Choice(&["uniform", "weak"]), "uniform", "uniform: J' = J, vary U/J; weak: fixed U/J, vary U/J'"),
    key("sweep.j_strong_hz", Kind::Float, "1", "intra-trimer tunnelling J/h (Hz)"),
    key("sweep.u_over_j_strong", Kind::Float, "5.9", "fixed U/J in weak mode"),
    key("sweep.ratio_min", Kind::Float, "50", "first swept ratio (U/J or U/J')"),
    key("sweep.ratio_max", Kind::Float, "500", "last swept ratio"),
    key("sweep.points", Kind::Int, "10", "log-spaced sweep points"),
];

const DIFFRACT: &[KeySpec] = &[
    key("diffract.tau_max_s", Kind::Float, "150e-6", "longest hold time in the LW lattice (s)"),
    key("diffract.tau_step_s", Kind::Float, "2e-6", "hold-time step (s)"),
    key("diffract.sigma_nm", Kind::Float, "0", "packet width (nm); 0 derives it from the SW site curvature"),
    key("diffract.mass_kg", Kind::Float, "1.4431606e-25", "atomic mass (kg)"),
    key("diffract.grid_half_width", Kind::Float, "1.6", "momentum window half width in units of |G|"),
    key("diffract.grid_points", Kind::Int, "161", "momentum samples per axis"),
    key("diffract.peak_radius", Kind::Float, "0.25", "peak disc radius in units of |G|"),
    key("diffract.window_nm", Kind::Float, "1000", "largest allowed packet excursion (nm)"),
    key("diffract.max_step_s", Kind::Float, "5e-8", "longest RK4 step (s)"),
    key("diffract.write_grids", Kind::Bool, "false", "write the momentum image at every hold time"),
];

const FIT: &[KeySpec] = &[
    key("fit.beta_zero", Kind::Bool, "false", "fix all beta to zero"),
    key("fit.background_zero", Kind::Bool, "false", "fix the additive background to zero"),
    key("fit.max_iter", Kind::Int, "2000", "Nelder-Mead iteration cap"),
    key("fit.x_tol", Kind::Float, "1e-8", "simplex size tolerance in (ln sigma, ln a)"),
    key("fit.grad_tol", Kind::Float, "1e-6", "relative gradient bound for a converged fit"),
    optional("fit.start_k_width", Kind::Float, "initial envelope width (1/nm)"),
    optional("fit.start_bond_length", Kind::Float, "initial bond length (nm)"),
];

const SYNTH: &[KeySpec] = &[
    key(
        "synth.model",
        Kind::Choice(&["pattern", "periodic", "nn", "trimer"]),
        "pattern",
        "pattern: the unclipped fit formula; periodic/nn: lattice coherences; trimer: one imprinted trimer",
    ),
    key("synth.alpha", Kind::FloatList, "0.5", "alpha per bond direction, one value or three (pattern model)"),
    key("synth.beta", Kind::FloatList, "0", "beta per bond direction, one value or three (pattern model)"),
    key("synth.background", Kind::Float, "0", "additive background (pattern model)"),
    key("synth.zeta_re", Kind::Float, "0.25", "Re of the intra-trimer coherence"),
    key("synth.zeta_im", Kind::Float, "0", "Im of the intra-trimer coherence"),
    key("synth.zeta_weak_re", Kind::Float, "0.25", "Re of the inter-trimer coherence"),
    key("synth.zeta_weak_im", Kind::Float, "0", "Im of the inter-trimer coherence"),
    key("synth.n_particles", Kind::Float, "3", "atom number normalizing the pattern"),
    key("synth.filling", Kind::Float, "1", "filling nu used by the nn model"),
    key("synth.phase_rad", Kind::Float, "0", "imprinted phase on site A (trimer model)"),
    key("synth.visibility", Kind::Float, "1", "coherent fraction (trimer model)"),
    key("synth.k_width", Kind::Float, "0.011", "Gaussian envelope width (1/nm)"),
    key("synth.amplitude", Kind::Float, "1", "envelope amplitude"),
    key("synth.noise", Kind::Float, "0", "Gaussian noise sd as a fraction of the grid maximum"),
    key("synth.half_width", Kind::Float, "0.03", "momentum window half width (1/nm)"),
    key("synth.points", Kind::Int, "81", "momentum samples per axis"),
    key("synth.pgm", Kind::Bool, "false", "also write an 8-bit PGM preview"),
];

/// Schema of every subcommand, in help order.
pub fn schemas() -> Vec<Schema> {
    vec![
        Schema::new("potential", &[LATTICE, POTENTIAL]),
        Schema::new("ed", &[CLUSTER, LATTICE, ED, SOLVER]),
        Schema::new("imprint", &[IMPRINT]),
        Schema::new("sweep", &[CLUSTER, LATTICE, SWEEP, SOLVER]),
        Schema::new("diffract", &[LATTICE, DIFFRACT]),
        Schema::new("fit", &[FIT]),
        Schema::new("synth", &[CLUSTER, LATTICE, SYNTH]),
    ]
}

pub fn schema(command: &str) -> Schema {
    schemas()
        .into_iter()
        .find(|s| s.command == command)
        .expect("every subcommand has a schema")
}

/// State shared by a pipeline run: output directory, seed, recorded files
/// and the summary printed on success.
#[derive(Debug)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub input: Option<PathBuf>,
    outputs: Vec<String>,
    inputs: Vec<FileDigest>,
    summary: Vec<String>,
}

impl RunContext {
    pub fn new(out_dir: PathBuf, seed: u64, input: Option<PathBuf>) -> Self {
        Self {
            out_dir,
            seed,
            input,
            outputs: Vec::new(),
            inputs: Vec::new(),
            summary: Vec::new(),
        }
    }

    fn output(&mut self, name: impl Into<String>) -> PathBuf {
        let name = name.into();
        let path = self.out_dir.join(&name);
        self.outputs.push(name);
        path
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(digest(path, path.display().to_string())?);
        Ok(())
    }

    fn say(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }

    pub fn summary(&self) -> &[String] {
        &self.summary
    }

    pub fn inputs(&self) -> &[FileDigest] {
        &self.inputs
    }

    pub fn output_digests(&self) -> Result<Vec<FileDigest>> {
        self.outputs
            .iter()
            .map(|n| digest(&self.out_dir.join(n), n.clone()))
            .collect()
    }
}

pub fn execute(cfg: &Config, ctx: &mut RunContext) -> Result<()> {
    match cfg.command() {
        "potential" => potential(cfg, ctx),
        "ed" => ed(cfg, ctx),
        "imprint" => imprint(cfg, ctx),
        "sweep" => sweep(cfg, ctx),
        "diffract" => diffract(cfg, ctx),
        "fit" => fit(cfg, ctx),
        "synth" => synth(cfg, ctx),
        other => Err(Error::Config(format!("unknown subcommand '{other}'"))),
    }
}

fn lattice(cfg: &Config) -> Result<SuperlatticeSpec> {
    let trim: Trimerization = cfg.text("lattice.trimerization").parse()?;
    SuperlatticeSpec::standard(cfg.f64("lattice.v_sw_hz"), cfg.f64("lattice.v_lw_hz"), trim)?
        .with_breathing(cfg.f64("lattice.breathing"))
}

fn cluster(cfg: &Config) -> Result<ClusterSpec> {
    Ok(match cfg.text("cluster.kind") {
        "dimer" => ClusterSpec::Dimer {
            bond_length: cfg.positive("cluster.bond_length_nm")?,
        },
        _ => ClusterSpec::Lattice {
            spec: lattice(cfg)?,
            rows: cfg.usize("cluster.rows"),
            cols: cfg.usize("cluster.cols"),
            include_d: cfg.bool("cluster.include_d"),
        },
    })
}

fn solver(cfg: &Config, seed: u64) -> Result<(Solver, LanczosOptions)> {
    Ok((
        cfg.text("solver.kind").parse()?,
        LanczosOptions {
            tol: cfg.positive("solver.tol")?,
            max_iter: cfg.usize("solver.max_iter"),
            seed,
        },
    ))
}

fn potential(cfg: &Config, ctx: &mut RunContext) -> Result<()> {
    let spec = lattice(cfg)?;
    let half = cfg.positive("potential.half_width_nm")?;
    let n = cfg.usize("potential.points");
    if n < 2 {
        return Err(Error::Config("potential.points must be >= 2".into()));
    }
    let step = 2.0 * half / (n - 1) as f64;
    let mut rows = Vec::with_capacity(n * n);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for iy in 0..n {
        for ix in 0..n {
            let r = Vec2::new(-half + ix as f64 * step, -half + iy as f64 * step);
            let (sw, lw) = (spec.sw().potential(r), spec.lw().potential(r));
            lo = lo.min(sw + lw);
            hi = hi.max(sw + lw);
            rows.push(vec![r.x, r.y, sw + lw, sw, lw]);
        }
    }
    let path = ctx.output("potential.csv");
    write_table(&path, &["x_nm", "y_nm", "v_hz", "v_sw_hz", "v_lw_hz"], &rows)?;

    let graph = build_cluster(&spec, 1, 1, true)?;
    let sites: Vec<Vec<f64>> = graph
        .sites()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let v = geometry::potential(&spec, s.position);
            vec![i as f64, s.label as usize as f64, s.position.x, s.position.y, v]
        })
        .collect();
    let path = ctx.output("sites.csv");
    write_table(&path, &["index", "label_abcd", "x_nm", "y_nm", "v_hz"], &sites)?;
    ctx.say(format!("potential range = [{lo:.6e}, {hi:.6e}] Hz"));
    ctx.say(format!("site spacing = {:.6} nm", spec.site_spacing()));
    Ok(())
}

fn ed(cfg: &Config, ctx: &mut RunContext) -> Result<()> {
    let graph = cluster(cfg)?.build()?;
    let n = cfg.usize("hubbard.n_particles");
    let mut params = HubbardParams::new(
        cfg.f64("hubbard.j_strong_hz"),
        cfg.f64("hubbard.j_weak_hz"),
        cfg.f64("hubbard.u_hz"),
    )?;
    let offsets = cfg.f64_list("hubbard.offsets_hz");
    if !offsets.is_empty() {
        params = params.with_offsets(offsets.clone())?;
    }
    let basis = Arc::new(FockBasis::new(n, graph.n_sites())?);
    let h = build_hamiltonian(&graph, basis, &params)?;
    ctx.say(format!("sites = {}, atoms = {n}, dimension = {}", graph.n_sites(), h.dimension()));
    if cfg.bool("ed.write_hamiltonian") {
        let path = ctx.output("hamiltonian.mtx");
        let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        h.write_coordinate(std::io::BufWriter::new(f)).map_err(|e| Error::io(&path, e))?;
    }

    let (kind, opts) = solver(cfg, ctx.seed)?;
    let dense = match kind {
        Solver::Dense => true,
        Solver::Lanczos => false,
        Solver::Auto => h.dimension() <= DEFAULT_DENSE_CAP,
    };
    let (energy, psi) = if dense {
        let spec = diagonalize_dense(&h)?;
        let levels = match cfg.usize("ed.levels") {
            0 => spec.len(),
            l => l.min(spec.len()),
        };
        let rows: Vec<Vec<f64>> = spec.eigenvalues()[..levels]
            .iter()
            .enumerate()
            .map(|(i, e)| vec![i as f64, *e])
            .collect();
        let path = ctx.output("spectrum.csv");
        write_table(&path, &["level", "energy_hz"], &rows)?;
        spec.ground_state()
    } else {
        ground_state_lanczos(&h, &opts)?
    };
    ctx.say(format!("ground_energy_hz = {energy:.16e}"));
    if graph.n_sites() == 2 && n == 2 && offsets.iter().all(|o| *o == 0.0) {
        let j = params.tunnelling(graph.bonds()[0].class);
        let closed = ground_state_energy_perturbative_check(params.u, j);
        ctx.say(format!("closed_form_hz = {closed:.16e}"));
    }

    let nu = n as f64 / graph.n_sites() as f64;
    let rec = bond_coherences(&psi, &graph, nu)?;
    let rows: Vec<Vec<f64>> = rec
        .bonds()
        .iter()
        .map(|b| {
            let class = if b.class == BondClass::Strong { 0.0 } else { 1.0 };
            vec![b.p as f64, b.q as f64, class, b.displacement.x, b.displacement.y, b.zeta.re, b.zeta.im]
        })
        .collect();
    let path = ctx.output("coherences.csv");
    write_table(&path, &["p", "q", "weak", "dx_nm", "dy_nm", "zeta_re", "zeta_im"], &rows)?;
    Ok(())
}

fn parse_mixture(text: &str) -> Result<Vec<(usize, f64)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let bad = || Error::Config(format!("imprint.mixture item '{item}': expected N:weight"));
            let (n, w) = item.split_once(':').ok_or_else(bad)?;
            Ok((n.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

fn imprint(cfg: &Config, ctx: &mut RunContext) -> Result<()> {
    let dt = cfg.positive("imprint.dt_s")?;
    let ic = ImprintConfig {
        u: cfg.f64("hubbard.u_hz"),
        j: cfg.f64("hubbard.j_hz"),
        delta_v: cfg.f64("imprint.delta_v_hz"),
        n_particles: cfg.usize("imprint.n_particles"),
        tau: uniform_times(dt, cfg.usize("imprint.samples")),
        overall_scale: cfg.f64("imprint.scale"),
        evolve_u: cfg.opt_f64("imprint.evolve_u_hz"),
        evolve_j: cfg.opt_f64("imprint.evolve_j_hz"),
    };
    let mixture = parse_mixture(cfg.text("imprint.mixture"))?;
    let series = if mixture.is_empty() {
        imprint_series(&ic)?
    } else {
        imprint_mixture(&ic, &mixture)?
    };
    let path = ctx.output("imprint.csv");
    write_table(&path, &ImprintSeries::columns(), &series.rows())?;

    let count = cfg.usize("imprint.peaks");
    if count > 0 && series.tau.len() >= 8 {
        let peaks = dominant_frequencies(&series.alpha_ab, dt, count)?;
        let rows: Vec<Vec<f64>> = peaks
            .iter()
            .enumerate()
            .map(|(i, (f, p))| vec![i as f64, *f, *p])
            .collect();
        let path = ctx.output("peaks.csv");
        write_table(&path, &["rank", "frequency_hz", "power"], &rows)?;
        for (f, _) in peaks {
            ctx.say(format!("alpha_AB peak at {:.4} kHz", f / 1e3));
        }
    }
    Ok(())
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn sweep(cfg: &Config, ctx: &mut RunContext) -> Result<()> {
    let lo = cfg.positive("sweep.ratio_min")?;
    let hi = cfg.positive("sweep.ratio_max")?;
    let n = cfg.usize("sweep.points");
    if n == 0 {
        return Err(Error::Config("sweep.points must be >= 1".into()));
    }
    let js = cfg.positive("sweep.j_strong_hz")?;
    let weak_mode = cfg.text("sweep.mode") == "weak";
    let u_fixed = cfg.f64("sweep.u_over_j_strong") * js;
    let ratios = log_space(lo, hi, n);
    let points: Vec<SweepPoint> = ratios
        .iter()
        .map(|r| {
            if weak_mode {
                SweepPoint {
                    j_strong: js,
                    j_weak: u_fixed / r,
                    u: u_fixed,
                }
            } else {
                SweepPoint {
                    j_strong: js,
                    j_weak: js,
                    u: r * js,
                }
            }
        })
        .collect();
    let (solver, lanczos) = solver(cfg, ctx.seed)?;
    let rows = coherence_sweep(&SweepConfig {
        cluster: cluster(cfg)?,
        n_particles: cfg.usize("hubbard.n_particles"),
        points,
        solver,
        lanczos,
    })?;
    let table: Vec<Vec<f64>> = rows.iter().map(SweepRow::to_row).collect();
    let path = ctx.output("sweep.csv");
    write_table(&path, &SweepRow::columns(), &table)?;
    let alpha: Vec<f64> = rows.iter().map(|r| r.alpha_mean).collect();
    if n >= 2 && alpha.iter().all(|a| *a > 0.0) {
        let slope = log_log_slope(&ratios, &alpha)?;
        ctx.say(format!("log-log slope of alpha vs ratio = {slope:.4}"));
    }
    Ok(())
}

fn diffract(cfg: &Config, ctx: &mut RunContext) -> Result<()> {
    let spec = lattice(cfg)?;
    let g = spec.reciprocal()[0].norm();
    let mut dc = DiffractionConfig::standard(spec.trimerization())?;
    let mass = cfg.positive("diffract.mass_kg")?;
    let sigma = match cfg.f64("diffract.sigma_nm") {
        s if s > 0.0 => s,
        _ => harmonic_width_nm(&spec, mass)?,
    };
    let step = cfg.positive("diffract.tau_step_s")?;
    let count = (cfg.f64("diffract.tau_max_s") / step + 1e-9).floor() as usize + 1;
    dc.spec = spec;
    dc.mass_kg = mass;
    dc.sigma_nm = sigma;
    dc.tau = uniform_times(step, count);
    dc.grid = GridSpec::square(cfg.positive("diffract.grid_half_width")? * g, cfg.usize("diffract.grid_points"))?;
    dc.peak_radius = Some(cfg.positive("diffract.peak_radius")? * g);
    dc.window_nm = cfg.positive("diffract.window_nm")?;
    dc.max_step = cfg.positive("diffract.max_step_s")?;

    let samples = diffraction_scan_with_grids(&dc)?;
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|(s, _)| {
            let mut r = vec![s.tau, s.asymmetry];
            r.extend(s.populations.all());
            r
        })
        .collect();
    let path = ctx.output("asymmetry.csv");
    write_table(
        &path,
        &["tau_s", "asymmetry", "p_plus_g1", "p_minus_g1", "p_plus_g2", "p_minus_g2", "p_plus_g3", "p_minus_g3"],
        &rows,
    )?;
    if cfg.bool("diffract.write_grids") {
        for (i, (_, grid)) in samples.iter().enumerate() {
            let name = format!("grid_{i:04}.csv");
            let path = ctx.output(name.clone());
            write_grid(&path, grid)?;
            let side = sidecar_path(Path::new(&name));
            ctx.outputs.push(side.display().to_string());
        }
    }
    let peak = samples.iter().map(|(s, _)| s.asymmetry.abs()).fold(0.0, f64::max);
    ctx.say(format!("packet width = {sigma:.3} nm, {} hold times", samples.len()));
    ctx.say(format!("max |asymmetry| = {peak:.6e}"));
    Ok(())
}

fn fit(cfg: &Config, ctx: &mut RunContext) -> Result<()> {
    let input = ctx
        .input
        .clone()
        .ok_or_else(|| Error::Config("fit needs an input grid: --input <grid.csv>".into()))?;
    ctx.record_input(&input)?;
    ctx.record_input(&sidecar_path(&input))?;
    let grid = read_grid(&input)?;
    let dirs = grid.meta().directions.clone();
    if dirs.len() != 3 {
        return Err(Error::Config(format!(
            "{}: sidecar lists {} bond directions, the fit needs 3",
            input.display(),
            dirs.len()
        )));
    }
    let start = match (cfg.opt_f64("fit.start_k_width"), cfg.opt_f64("fit.start_bond_length")) {
        (Some(s), Some(a)) => Some((s, a)),
        (None, None) => None,
        _ => {
            return Err(Error::Config(
                "fit.start_k_width and fit.start_bond_length must be given together".into(),
            ))
        }
    };
    let opts = FitOptions {
        beta_zero: cfg.bool("fit.beta_zero"),
        background_zero: cfg.bool("fit.background_zero"),
        max_iter: cfg.usize("fit.max_iter"),
        x_tol: cfg.positive("fit.x_tol")?,
        grad_tol: cfg.positive("fit.grad_tol")?,
        start,
    };
    let r = fit_coherence(&grid, &dirs, &opts)?;
    let path = ctx.output("fit.json");
    let json = serde_json::to_string_pretty(&r).expect("fit result serializes");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    let rows: Vec<Vec<f64>> = (0..3)
        .map(|d| {
            vec![
                d as f64,
                r.params.alpha[d],
                r.uncertainty.alpha[d],
                r.params.beta[d],
                r.uncertainty.beta[d],
            ]
        })
        .collect();
    let path = ctx.output("fit.csv");
    write_table(&path, &["direction", "alpha", "alpha_err", "beta", "beta_err"], &rows)?;
    ctx.say(format!("alpha_mean = {:.6}", average_alpha(&r)));
    ctx.say(format!(
        "k_width = {:.6e} 1/nm, bond_length = {:.4} nm, rms residual = {:.3e}, {} iterations",
        r.params.k_width, r.params.bond_length, r.residual_rms, r.iterations
    ));
    Ok(())
}

fn per_direction(cfg: &Config, key: &str) -> Result<[f64; 3]> {
    match cfg.f64_list(key)[..] {
        [v] => Ok([v; 3]),
        [a, b, c] => Ok([a, b, c]),
        _ => Err(Error::Config(format!("{key} takes one value or three"))),
    }
}

fn synth(cfg: &Config, ctx: &mut RunContext) -> Result<()> {
    let graph = cluster(cfg)?.build()?;
    let env = WannierEnvelope::new(cfg.positive("synth.k_width")?, cfg.positive("synth.amplitude")?)?;
    let spec = GridSpec::square(cfg.positive("synth.half_width")?, cfg.usize("synth.points"))?;
    let zeta = C64::new(cfg.f64("synth.zeta_re"), cfg.f64("synth.zeta_im"));
    let zeta_weak = C64::new(cfg.f64("synth.zeta_weak_re"), cfg.f64("synth.zeta_weak_im"));
    let n = cfg.positive("synth.n_particles")?;
    let mut grid = match cfg.text("synth.model") {
        "pattern" => {
            let dirs = graph.bond_directions();
            if dirs.len() != 3 {
                return Err(Error::Config("the pattern model needs a cluster with three bond directions".into()));
            }
            let params = FitModelParams {
                alpha: per_direction(cfg, "synth.alpha")?,
                beta: per_direction(cfg, "synth.beta")?,
                k_width: env.k_width(),
                bond_length: graph.bond_length(),
                amplitude: n * env.amplitude(),
                background: cfg.f64("synth.background"),
            };
            let mut g = model_grid(&params, &[dirs[0], dirs[1], dirs[2]], spec)?;
            g.meta_mut().n_particles = n;
            g
        }
        "nn" => {
            let rec = CoherenceRecord::uniform(&graph, zeta, zeta_weak, cfg.positive("synth.filling")?, n)?;
            momentum_nn(&rec, &graph, env, spec)?
        }
        "trimer" => trimer_interference(cfg.f64("synth.phase_rad"), env, cfg.f64("synth.visibility"), &graph, spec)?,
        _ => {
            let coh = CellCoherences {
                intra: [zeta; 3],
                inter: [zeta_weak; 3],
            };
            momentum_periodic(&coh, &graph, env, n, spec)?
        }
    };
    let sd = add_peak_noise(&mut grid, cfg.f64("synth.noise"), ctx.seed)?;
    let path = ctx.output("grid.csv");
    write_grid(&path, &grid)?;
    ctx.outputs.push("grid.json".into());
    if cfg.bool("synth.pgm") {
        let path = ctx.output("grid.pgm");
        write_pgm(&path, &grid)?;
    }
    for w in &grid.meta().warnings {
        ctx.say(format!("warning: {w}"));
    }
    ctx.say(format!("grid max = {:.6e}, noise sd = {sd:.6e}", grid.max_value()));
    Ok(())
}
