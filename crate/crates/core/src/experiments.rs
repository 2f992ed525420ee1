//! End-to-end numerical experiments: the phase-imprint quench on a single
//! trimer, the ground-state coherence sweep, and the semiclassical
//! diffraction-asymmetry scan.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bosehubbard::{build_hamiltonian, HubbardParams};
use crate::error::{invalid, Error, Result};
use crate::fockspace::FockBasis;
use crate::geometry::{build_cluster, ClusterGraph, SuperlatticeSpec, Trimerization, Vec2};
use crate::observables::{
    asymmetry, bond_coherences, peak_populations, GridMeta, GridSpec, MomentumGrid, PeakPopulations,
    WannierEnvelope,
};
use crate::spectral::{
    diagonalize_dense, evolve, ground_state_lanczos, project, LanczosOptions, DEFAULT_DENSE_CAP,
};
use crate::C64;

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = PLANCK / std::f64::consts::TAU;
/// Mass of one ⁸⁷Rb atom (kg).
pub const RB87_MASS_KG: f64 = 86.909_180_527 * 1.660_539_066_60e-27;

// ---------------------------------------------------------------- imprint

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprintConfig {
    /// On-site interaction (Hz).
    pub u: f64,
    /// Intra-trimer tunnelling (Hz).
    pub j: f64,
    /// Offset applied to site A during the imprint (Hz).
    pub delta_v: f64,
    /// Atoms in the trimer.
    pub n_particles: usize,
    /// Imprint durations (s), ascending.
    pub tau: Vec<f64>,
    pub overall_scale: f64,
    /// Interaction during the imprint if it differs from `u`.
    pub evolve_u: Option<f64>,
    /// Tunnelling during the imprint if it differs from `j`.
    pub evolve_j: Option<f64>,
}

impl ImprintConfig {
    /// Deep-lattice setting with a 12.4 kHz offset, three atoms, sampled every
    /// 2 μs for 1 ms.
    pub fn deep_lattice() -> Self {
        Self {
            u: 1700.0,
            j: 3.0,
            delta_v: 12.4e3,
            n_particles: 3,
            tau: uniform_times(2e-6, 501),
            overall_scale: 1.0,
            evolve_u: None,
            evolve_j: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(invalid("imprint needs at least one atom"));
        }
        if self.tau.iter().any(|t| !(*t >= 0.0)) || self.tau.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("imprint times must be nonnegative and ascending"));
        }
        if !self.overall_scale.is_finite() || !self.delta_v.is_finite() {
            return Err(invalid("imprint scale and offset must be finite"));
        }
        Ok(())
    }
}

/// `len` times `0, dt, 2dt, …`.
pub fn uniform_times(dt: f64, len: usize) -> Vec<f64> {
    (0..len).map(|i| i as f64 * dt).collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImprintSeries {
    pub tau: Vec<f64>,
    pub alpha_ab: Vec<f64>,
    pub beta_ab: Vec<f64>,
    pub alpha_ac: Vec<f64>,
    pub beta_ac: Vec<f64>,
    /// Norm of the evolved state at each time.
    pub norm: Vec<f64>,
}

impl ImprintSeries {
    /// `|α_AB + iβ_AB|` per sample.
    pub fn envelope_ab(&self) -> Vec<f64> {
        self.alpha_ab
            .iter()
            .zip(&self.beta_ab)
            .map(|(a, b)| a.hypot(*b))
            .collect()
    }

    pub fn columns() -> [&'static str; 6] {
        ["tau_s", "alpha_ab", "beta_ab", "alpha_ac", "beta_ac", "norm"]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.tau.len())
            .map(|i| {
                vec![
                    self.tau[i],
                    self.alpha_ab[i],
                    self.beta_ab[i],
                    self.alpha_ac[i],
                    self.beta_ac[i],
                    self.norm[i],
                ]
            })
            .collect()
    }
}

/// Isolated three-site trimer A, B, C.
pub fn single_trimer() -> ClusterGraph {
    let spec = SuperlatticeSpec::standard(1.0, 1.0, Trimerization::Right).expect("standard lattice");
    build_cluster(&spec, 1, 1, false).expect("1x1 cluster")
}

/// Ground state of the bare trimer, projected onto the spectrum with an
/// offset on A and evolved; returns `α = (2/ν)Re⟨b†_A b_q⟩·s`,
/// `β = −(2/ν)Im⟨b†_A b_q⟩·s` with `ν = N/3`.
pub fn imprint_series(cfg: &ImprintConfig) -> Result<ImprintSeries> {
    cfg.validate()?;
    let graph = single_trimer();
    let basis = Arc::new(FockBasis::with_cap(cfg.n_particles, 3, DEFAULT_DENSE_CAP)?);
    let h_i = build_hamiltonian(&graph, basis.clone(), &HubbardParams::uniform(cfg.j, cfg.u)?)?;
    let p_pi = HubbardParams::uniform(cfg.evolve_j.unwrap_or(cfg.j), cfg.evolve_u.unwrap_or(cfg.u))?
        .with_offset_on(3, 0, cfg.delta_v)?;
    let h_pi = build_hamiltonian(&graph, basis, &p_pi)?;
    let (_, psi0) = diagonalize_dense(&h_i)?.ground_state();
    let spec = diagonalize_dense(&h_pi)?;
    let table = project(&psi0, &spec)?;
    let nu = cfg.n_particles as f64 / 3.0;
    let f = 2.0 / nu * cfg.overall_scale;

    let samples: Vec<Result<[f64; 5]>> = cfg
        .tau
        .par_iter()
        .map(|&t| {
            let psi = evolve(&table, &spec, t)?;
            let ab = psi.correlator(0, 1)?;
            let ac = psi.correlator(0, 2)?;
            Ok([f * ab.re, -f * ab.im, f * ac.re, -f * ac.im, psi.norm_sqr().sqrt()])
        })
        .collect();
    let mut out = ImprintSeries {
        tau: cfg.tau.clone(),
        ..Default::default()
    };
    for s in samples {
        let [a, b, c, d, n] = s?;
        out.alpha_ab.push(a);
        out.beta_ab.push(b);
        out.alpha_ac.push(c);
        out.beta_ac.push(d);
        out.norm.push(n);
    }
    Ok(out)
}

/// Weighted average of imprint series over integer atom numbers, for
/// fractional mean fillings. Weights are normalized to sum to one.
pub fn imprint_mixture(cfg: &ImprintConfig, weights: &[(usize, f64)]) -> Result<ImprintSeries> {
    let total: f64 = weights.iter().map(|w| w.1).sum();
    if weights.is_empty() || weights.iter().any(|w| w.1 < 0.0) || !(total > 0.0) {
        return Err(invalid("mixture weights must be nonnegative with a positive sum"));
    }
    let mut out = ImprintSeries {
        tau: cfg.tau.clone(),
        alpha_ab: vec![0.0; cfg.tau.len()],
        beta_ab: vec![0.0; cfg.tau.len()],
        alpha_ac: vec![0.0; cfg.tau.len()],
        beta_ac: vec![0.0; cfg.tau.len()],
        norm: vec![0.0; cfg.tau.len()],
    };
    for &(n, w) in weights {
        let s = imprint_series(&ImprintConfig {
            n_particles: n,
            ..cfg.clone()
        })?;
        let c = w / total;
        for i in 0..out.tau.len() {
            out.alpha_ab[i] += c * s.alpha_ab[i];
            out.beta_ab[i] += c * s.beta_ab[i];
            out.alpha_ac[i] += c * s.alpha_ac[i];
            out.beta_ac[i] += c * s.beta_ac[i];
            out.norm[i] += c * s.norm[i];
        }
    }
    Ok(out)
}

/// Strongest local maxima of the Hann-windowed, zero-padded power spectrum
/// of a uniformly sampled series, excluding the zero-frequency lobe.
/// Returns `(frequency Hz, power)` sorted by decreasing power.
pub fn dominant_frequencies(series: &[f64], dt: f64, count: usize) -> Result<Vec<(f64, f64)>> {
    let n = series.len();
    if n < 8 || !(dt > 0.0) {
        return Err(invalid("spectrum needs at least 8 samples and a positive step"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let padded = (16 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); padded];
    for (i, x) in series.iter().enumerate() {
        let w = 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / (n - 1) as f64).cos();
        buf[i] = Complex::new((x - mean) * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let power: Vec<f64> = buf[..padded / 2].iter().map(|c| c.norm_sqr()).collect();
    let df = 1.0 / (padded as f64 * dt);
    // Hann main lobe half-width is 2 native bins
    let skip = (2 * padded).div_ceil(n);
    let mut peaks = Vec::new();
    for i in skip.max(1)..power.len() - 1 {
        if power[i] > power[i - 1] && power[i] >= power[i + 1] {
            let (a, b, c) = (power[i - 1], power[i], power[i + 1]);
            let den = a - 2.0 * b + c;
            let shift = if den != 0.0 { 0.5 * (a - c) / den } else { 0.0 };
            peaks.push(((i as f64 + shift) * df, b));
        }
    }
    peaks.sort_by(|x, y| y.1.total_cmp(&x.1));
    peaks.truncate(count);
    Ok(peaks)
}

// ------------------------------------------------------------------ sweep

#[derive(Debug, Clone, PartialEq)]
pub enum ClusterSpec {
    Dimer { bond_length: f64 },
    Lattice {
        spec: SuperlatticeSpec,
        rows: usize,
        cols: usize,
        include_d: bool,
    },
}

impl ClusterSpec {
    pub fn build(&self) -> Result<ClusterGraph> {
        match self {
            ClusterSpec::Dimer { bond_length } => {
                if !(*bond_length > 0.0) {
                    return Err(invalid("dimer bond length must be > 0"));
                }
                Ok(ClusterGraph::dimer(*bond_length))
            }
            ClusterSpec::Lattice {
                spec,
                rows,
                cols,
                include_d,
            } => build_cluster(spec, *rows, *cols, *include_d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Dense,
    Lanczos,
    /// Dense within the dense cap, Lanczos beyond.
    Auto,
}

impl std::str::FromStr for Solver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dense" => Ok(Solver::Dense),
            "lanczos" => Ok(Solver::Lanczos),
            "auto" => Ok(Solver::Auto),
            _ => Err(Error::Config(format!("unknown solver '{s}' (dense, lanczos, auto)"))),
        }
    }
}

/// One parameter point `(J, J′, U)` in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub j_strong: f64,
    pub j_weak: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub cluster: ClusterSpec,
    pub n_particles: usize,
    pub points: Vec<SweepPoint>,
    pub solver: Solver,
    pub lanczos: LanczosOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub u_over_j_weak: f64,
    pub u_over_j_strong: f64,
    /// Direction-averaged `α ≃ Re(ζ + ζ′)`.
    pub alpha_mean: f64,
    /// Mean `Re ζ` over intra-trimer bonds.
    pub zeta_strong_mean: f64,
    /// Mean `Re ζ′` over inter-trimer bonds (NaN without such bonds).
    pub zeta_weak_mean: f64,
    pub energy: f64,
}

impl SweepRow {
    pub fn columns() -> [&'static str; 9] {
        [
            "j_strong_hz",
            "j_weak_hz",
            "u_hz",
            "u_over_j_weak",
            "u_over_j_strong",
            "alpha_mean",
            "zeta_strong_mean",
            "zeta_weak_mean",
            "energy_hz",
        ]
    }

    pub fn to_row(&self) -> Vec<f64> {
        vec![
            self.point.j_strong,
            self.point.j_weak,
            self.point.u,
            self.u_over_j_weak,
            self.u_over_j_strong,
            self.alpha_mean,
            self.zeta_strong_mean,
            self.zeta_weak_mean,
            self.energy,
        ]
    }
}

/// Ground-state coherences at every parameter point, with `ν = N/M`.
pub fn coherence_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let graph = cfg.cluster.build()?;
    let m = graph.n_sites();
    let basis = Arc::new(FockBasis::new(cfg.n_particles, m)?);
    let nu = cfg.n_particles as f64 / m as f64;
    if !(nu > 0.0) {
        return Err(invalid("sweep needs at least one atom"));
    }
    let dirs = graph.bond_directions();
    cfg.points
        .par_iter()
        .map(|pt| {
            let tag = |e: Error| match e {
                Error::Capacity {
                    what,
                    dimension,
                    cap,
                } => Error::Capacity {
                    what: format!("{what} at J={}, J'={}, U={}", pt.j_strong, pt.j_weak, pt.u),
                    dimension,
                    cap,
                },
                other => other,
            };
            let params = HubbardParams::new(pt.j_strong, pt.j_weak, pt.u)?;
            let h = build_hamiltonian(&graph, basis.clone(), &params)?;
            let dense = match cfg.solver {
                Solver::Dense => true,
                Solver::Lanczos => h.dimension() < 2,
                Solver::Auto => h.dimension() <= DEFAULT_DENSE_CAP,
            };
            let (energy, psi) = if dense {
                diagonalize_dense(&h).map_err(tag)?.ground_state()
            } else {
                ground_state_lanczos(&h, &cfg.lanczos).map_err(tag)?
            };
            let rec = bond_coherences(&psi, &graph, nu)?;
            let obs = rec.direction_observables(&dirs);
            let alpha_mean = obs.iter().map(|o| o.alpha).sum::<f64>() / obs.len().max(1) as f64;
            Ok(SweepRow {
                point: *pt,
                u_over_j_weak: pt.u / pt.j_weak,
                u_over_j_strong: pt.u / pt.j_strong,
                alpha_mean,
                zeta_strong_mean: rec.class_mean(crate::geometry::BondClass::Strong).unwrap_or(f64::NAN),
                zeta_weak_mean: rec.class_mean(crate::geometry::BondClass::Weak).unwrap_or(f64::NAN),
                energy,
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(invalid("log-log slope needs >= 2 matching positive samples"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

// ------------------------------------------------------------ diffraction

#[derive(Debug, Clone, PartialEq)]
pub struct DiffractionConfig {
    /// Superlattice before the SW lattice is switched off; its
    /// trimerization selects the starting sites.
    pub spec: SuperlatticeSpec,
    /// Hold times in the LW lattice (s).
    pub tau: Vec<f64>,
    pub mass_kg: f64,
    /// Position-space width σ of each Gaussian packet (nm).
    pub sigma_nm: f64,
    pub grid: GridSpec,
    /// Peak-disc radius (1/nm); `None` uses a quarter of `|G|`.
    pub peak_radius: Option<f64>,
    /// Largest allowed packet excursion from its start (nm).
    pub window_nm: f64,
    /// Longest RK4 step (s).
    pub max_step: f64,
}

impl DiffractionConfig {
    /// ⁸⁷Rb at `V_SW = 45 kHz`, `V_LW = 15 kHz`, packet width from the
    /// harmonic approximation of the SW site, τ from 0 to 150 μs in 2 μs steps.
    pub fn standard(trimerization: Trimerization) -> Result<Self> {
        let spec = SuperlatticeSpec::standard(45e3, 15e3, trimerization)?;
        let g = spec.reciprocal()[0].norm();
        Ok(Self {
            sigma_nm: harmonic_width_nm(&spec, RB87_MASS_KG)?,
            spec,
            tau: uniform_times(2e-6, 76),
            mass_kg: RB87_MASS_KG,
            grid: GridSpec::square(1.6 * g, 161)?,
            peak_radius: None,
            window_nm: 1000.0,
            max_step: 5e-8,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau.iter().any(|t| !(*t >= 0.0)) {
            return Err(invalid("hold times must be >= 0"));
        }
        if !(self.mass_kg > 0.0 && self.sigma_nm > 0.0 && self.window_nm > 0.0 && self.max_step > 0.0) {
            return Err(invalid("mass, packet width, window and step must be > 0"));
        }
        Ok(())
    }
}

/// Harmonic-oscillator length (nm) of a SW lattice site.
pub fn harmonic_width_nm(spec: &SuperlatticeSpec, mass_kg: f64) -> Result<f64> {
    let r0 = spec.sw().origin();
    let h = 1e-3 * spec.site_spacing();
    let dx = Vec2::new(h, 0.0);
    let curv = (spec.sw().potential_gradient(r0 + dx).x - spec.sw().potential_gradient(r0 - dx).x) / (2.0 * h);
    if !(curv > 0.0) {
        return Err(invalid("SW lattice has no confining curvature (depth 0?)"));
    }
    // Hz/nm² → J/m²
    let k = PLANCK * curv * 1e18;
    let omega = (k / mass_kg).sqrt();
    Ok((HBAR / (mass_kg * omega)).sqrt() * 1e9)
}

/// Classical packet state: position (nm), wavevector (1/nm), action phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub r: Vec2,
    pub q: Vec2,
    pub phase: f64,
}

fn packet_rate(spec: &SuperlatticeSpec, mass: f64, s: &Packet) -> Packet {
    let vel = HBAR * 1e18 / mass;
    Packet {
        r: s.q * vel,
        q: -std::f64::consts::TAU * spec.lw().potential_gradient(s.r),
        phase: 0.5 * vel * s.q.norm_squared() - std::f64::consts::TAU * spec.lw().potential(s.r),
    }
}

/// RK4 integration of one packet in the LW potential for time `t` (may be
/// negative), with steps no longer than `max_step`.
pub fn propagate_packet(spec: &SuperlatticeSpec, mass: f64, start: Packet, t: f64, max_step: f64) -> Packet {
    let steps = ((t.abs() / max_step).ceil() as usize).max(1);
    let h = t / steps as f64;
    let add = |a: &Packet, b: &Packet, c: f64| Packet {
        r: a.r + b.r * c,
        q: a.q + b.q * c,
        phase: a.phase + b.phase * c,
    };
    let mut s = start;
    for _ in 0..steps {
        let k1 = packet_rate(spec, mass, &s);
        let k2 = packet_rate(spec, mass, &add(&s, &k1, h / 2.0));
        let k3 = packet_rate(spec, mass, &add(&s, &k2, h / 2.0));
        let k4 = packet_rate(spec, mass, &add(&s, &k3, h));
        s = Packet {
            r: s.r + (k1.r + k2.r * 2.0 + k3.r * 2.0 + k4.r) * (h / 6.0),
            q: s.q + (k1.q + k2.q * 2.0 + k3.q * 2.0 + k4.q) * (h / 6.0),
            phase: s.phase + (k1.phase + 2.0 * k2.phase + 2.0 * k3.phase + k4.phase) * (h / 6.0),
        };
    }
    s
}

/// Starting positions: the three SW sites of the trimer in cell (0, 0).
pub fn trimer_start(spec: &SuperlatticeSpec) -> [Vec2; 3] {
    let o = spec.sw().origin();
    spec.trimer_offsets().map(|(_, off)| o + off)
}

/// `n(k) = |Σ_j w̃(k − q_j) e^{−ik·r_j + iS_j}|²` for a set of packets.
pub fn packet_momentum(packets: &[Packet], env: WannierEnvelope, grid: GridSpec, meta: GridMeta) -> MomentumGrid {
    let kw = env.k_width();
    MomentumGrid::evaluate(grid, meta, |k| {
        let mut amp = C64::new(0.0, 0.0);
        for p in packets {
            // |w̃|² has width kw, so w̃ has width √2·kw
            let w = (-(k - p.q).norm_squared() / (4.0 * kw * kw)).exp();
            amp += C64::from_polar(w, p.phase - k.dot(&p.r));
        }
        env.amplitude() * amp.norm_sqr()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffractionSample {
    pub tau: f64,
    pub asymmetry: f64,
    pub populations: PeakPopulations,
    pub packets: [Packet; 3],
}

fn diffraction_sample(cfg: &DiffractionConfig, t: f64, keep_grid: bool) -> Result<(DiffractionSample, Option<MomentumGrid>)> {
    let starts = trimer_start(&cfg.spec);
    let mut packets = [Packet {
        r: Vec2::zeros(),
        q: Vec2::zeros(),
        phase: 0.0,
    }; 3];
    for (p, r0) in packets.iter_mut().zip(starts) {
        let start = Packet {
            r: r0,
            q: Vec2::zeros(),
            phase: 0.0,
        };
        *p = propagate_packet(&cfg.spec, cfg.mass_kg, start, t, cfg.max_step);
        if (p.r - r0).norm() > cfg.window_nm || !p.r.x.is_finite() {
            return Err(invalid(format!(
                "packet left the {} nm window at τ = {t:e} s",
                cfg.window_nm
            )));
        }
    }
    let env = WannierEnvelope::from_position_width(cfg.sigma_nm)?;
    let reciprocal = cfg.spec.reciprocal();
    let meta = GridMeta {
        envelope: env,
        n_particles: 3.0,
        reciprocal,
        directions: Vec::new(),
        clipped: 0,
        warnings: Vec::new(),
    };
    let grid = packet_momentum(&packets, env, cfg.grid, meta);
    let graph_radius = cfg.peak_radius.unwrap_or(0.25 * reciprocal[0].norm());
    let graph = reciprocal_only_graph(reciprocal);
    let populations = peak_populations(&grid, &graph, graph_radius)?;
    let a = asymmetry(&populations)?;
    Ok((
        DiffractionSample {
            tau: t,
            asymmetry: a,
            populations,
            packets,
        },
        keep_grid.then_some(grid),
    ))
}

fn reciprocal_only_graph(reciprocal: [Vec2; 3]) -> ClusterGraph {
    ClusterGraph::from_parts(Vec::new(), &[], reciprocal, 1.0, 1).expect("empty graph")
}

/// Asymmetry at every hold time (computed independently, in parallel).
pub fn diffraction_scan(cfg: &DiffractionConfig) -> Result<Vec<DiffractionSample>> {
    cfg.validate()?;
    cfg.tau
        .par_iter()
        .map(|&t| diffraction_sample(cfg, t, false).map(|s| s.0))
        .collect()
}

/// Like [`diffraction_scan`] but also returns each momentum grid.
pub fn diffraction_scan_with_grids(cfg: &DiffractionConfig) -> Result<Vec<(DiffractionSample, MomentumGrid)>> {
    cfg.validate()?;
    cfg.tau
        .par_iter()
        .map(|&t| diffraction_sample(cfg, t, true).map(|(s, g)| (s, g.expect("grid kept"))))
        .collect()
}

/// Asymmetry at a signed hold time; used to probe the small-τ expansion.
pub fn asymmetry_at(cfg: &DiffractionConfig, t: f64) -> Result<f64> {
    diffraction_sample(cfg, t, false).map(|s| s.0.asymmetry)
}
