//! Extraction of nearest-neighbour coherences from momentum images.
//!
//! Model, with `u_d` the three unit bond directions:
//!
//! ```text
//! n(k) = A·exp(−|k|²/(2σ²))·(1 + Σ_d [α_d cos(a k·u_d) + β_d sin(a k·u_d)]) + bg
//! ```
//!
//! For fixed `(σ, a)` the model is linear in `(A, Aα_d, Aβ_d, bg)`; those are
//! solved exactly and only `(ln σ, ln a)` are searched with Nelder-Mead.
//! All pixels are weighted equally.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Vec2;
use crate::observables::{GridMeta, GridSpec, MomentumGrid, WannierEnvelope};
use crate::optimize::{nelder_mead, NelderMeadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitModelParams {
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
    /// Gaussian standard deviation of the envelope (1/nm).
    pub k_width: f64,
    /// Bond length (nm).
    pub bond_length: f64,
    pub amplitude: f64,
    pub background: f64,
}

impl FitModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_width > 0.0) || !(self.bond_length > 0.0) || !(self.amplitude > 0.0) {
            return Err(invalid("k_width, bond_length and amplitude must all be > 0"));
        }
        Ok(())
    }

    /// Model value at `k`.
    pub fn eval(&self, directions: &[Vec2; 3], k: Vec2) -> f64 {
        let env = (-k.norm_squared() / (2.0 * self.k_width * self.k_width)).exp();
        let mut s = 1.0;
        for d in 0..3 {
            let (sn, cs) = (self.bond_length * k.dot(&directions[d])).sin_cos();
            s += self.alpha[d] * cs + self.beta[d] * sn;
        }
        self.amplitude * env * s + self.background
    }
}

/// Samples the model on a grid without clipping.
pub fn model_grid(params: &FitModelParams, directions: &[Vec2; 3], spec: GridSpec) -> Result<MomentumGrid> {
    params.validate()?;
    let nx = spec.kx.len;
    let values: Vec<f64> = (0..spec.len())
        .map(|i| params.eval(directions, spec.point(i % nx, i / nx)))
        .collect();
    let meta = GridMeta {
        envelope: WannierEnvelope::new(params.k_width, params.amplitude)?,
        n_particles: 1.0,
        reciprocal: crate::geometry::reciprocal_for_spacing(params.bond_length),
        directions: directions.to_vec(),
        clipped: 0,
        warnings: Vec::new(),
    };
    MomentumGrid::from_values(spec, values, meta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Fix every β to zero.
    pub beta_zero: bool,
    /// Fix the additive background to zero.
    pub background_zero: bool,
    pub max_iter: usize,
    /// Simplex size tolerance in `(ln σ, ln a)`.
    pub x_tol: f64,
    /// Bound on the relative gradient `|∇ SSR| / Σy²` for a converged fit.
    pub grad_tol: f64,
    /// Optional `(k_width, bond_length)` starting point.
    pub start: Option<(f64, f64)>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            beta_zero: false,
            background_zero: false,
            max_iter: 2000,
            x_tol: 1e-8,
            grad_tol: 1e-6,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: FitModelParams,
    /// One-sigma estimates from `s²(JᵀJ)⁻¹`; fixed parameters report 0.
    pub uncertainty: FitModelParams,
    pub residual_rms: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Best sum of squared residuals after each outer iteration.
    pub history: Vec<f64>,
    pub n_points: usize,
    pub beta_zero: bool,
    pub background_zero: bool,
}

struct Problem<'a> {
    y: &'a [f64],
    k2: Vec<f64>,
    proj: Vec<[f64; 3]>,
    beta: bool,
    background: bool,
}

impl Problem<'_> {
    fn n_basis(&self) -> usize {
        1 + 3 + if self.beta { 3 } else { 0 } + usize::from(self.background)
    }

    fn basis(&self, i: usize, sigma: f64, a: f64, out: &mut [f64]) {
        let g = (-self.k2[i] / (2.0 * sigma * sigma)).exp();
        out[0] = g;
        let mut j = 1;
        let mut sins = [0.0; 3];
        for d in 0..3 {
            let (s, c) = (a * self.proj[i][d]).sin_cos();
            out[j] = g * c;
            sins[d] = g * s;
            j += 1;
        }
        if self.beta {
            for s in sins {
                out[j] = s;
                j += 1;
            }
        }
        if self.background {
            out[j] = 1.0;
        }
    }

    /// Linear least squares at fixed `(σ, a)`: coefficients and SSR.
    fn solve(&self, sigma: f64, a: f64) -> Result<(Vec<f64>, f64)> {
        let m = self.n_basis();
        let n = self.y.len();
        let (ata, aty) = (0..n)
            .into_par_iter()
            .fold(
                || (vec![0.0; m * m], vec![0.0; m], vec![0.0; m]),
                |(mut ata, mut aty, mut row), i| {
                    self.basis(i, sigma, a, &mut row);
                    for r in 0..m {
                        aty[r] += row[r] * self.y[i];
                        for c in r..m {
                            ata[r * m + c] += row[r] * row[c];
                        }
                    }
                    (ata, aty, row)
                },
            )
            .map(|(a, b, _)| (a, b))
            .reduce(
                || (vec![0.0; m * m], vec![0.0; m]),
                |(mut a1, mut b1), (a2, b2)| {
                    a1.iter_mut().zip(&a2).for_each(|(x, y)| *x += y);
                    b1.iter_mut().zip(&b2).for_each(|(x, y)| *x += y);
                    (a1, b1)
                },
            );
        // equilibrate, then check conditioning before solving
        let mut mat = DMatrix::zeros(m, m);
        for r in 0..m {
            for c in r..m {
                mat[(r, c)] = ata[r * m + c];
                mat[(c, r)] = ata[r * m + c];
            }
        }
        let d: Vec<f64> = (0..m).map(|i| 1.0 / mat[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
        for r in 0..m {
            for c in 0..m {
                mat[(r, c)] *= d[r] * d[c];
            }
        }
        let ev = SymmetricEigen::new(mat.clone()).eigenvalues;
        if ev.min() <= 1e-12 * ev.max() {
            return Err(invalid(
                "degenerate fit design matrix; the grid window is too small to separate the model terms",
            ));
        }
        let rhs = DVector::from_iterator(m, (0..m).map(|i| aty[i] * d[i]));
        let sol = mat
            .cholesky()
            .ok_or_else(|| invalid("fit normal equations are not positive definite"))?
            .solve(&rhs);
        let coef: Vec<f64> = (0..m).map(|i| sol[i] * d[i]).collect();
        let ssr = (0..n)
            .into_par_iter()
            .map_init(
                || vec![0.0; m],
                |row, i| {
                    self.basis(i, sigma, a, row);
                    let f: f64 = row.iter().zip(&coef).map(|(x, c)| x * c).sum();
                    (self.y[i] - f).powi(2)
                },
            )
            .sum();
        Ok((coef, ssr))
    }

    fn params(&self, coef: &[f64], sigma: f64, a: f64) -> FitModelParams {
        let amp = coef[0];
        let mut alpha = [0.0; 3];
        let mut beta = [0.0; 3];
        for d in 0..3 {
            alpha[d] = coef[1 + d] / amp;
            if self.beta {
                beta[d] = coef[4 + d] / amp;
            }
        }
        FitModelParams {
            alpha,
            beta,
            k_width: sigma,
            bond_length: a,
            amplitude: amp,
            background: if self.background { coef[self.n_basis() - 1] } else { 0.0 },
        }
    }
}

/// Fits the model to `grid` along the given bond directions.
pub fn fit_coherence(grid: &MomentumGrid, directions: &[Vec2], opts: &FitOptions) -> Result<FitResult> {
    let dirs: [Vec2; 3] = match directions {
        [a, b, c] => [a.normalize(), b.normalize(), c.normalize()],
        _ => return Err(invalid(format!("need exactly 3 bond directions, got {}", directions.len()))),
    };
    let spec = *grid.spec();
    let nx = spec.kx.len;
    let pts: Vec<Vec2> = (0..spec.len()).map(|i| spec.point(i % nx, i / nx)).collect();
    let prob = Problem {
        y: grid.values(),
        k2: pts.iter().map(|k| k.norm_squared()).collect(),
        proj: pts.iter().map(|k| [k.dot(&dirs[0]), k.dot(&dirs[1]), k.dot(&dirs[2])]).collect(),
        beta: !opts.beta_zero,
        background: !opts.background_zero,
    };
    let (s0, a0) = match opts.start {
        Some(s) => s,
        None => initial_guess(grid, &dirs)?,
    };

    let objective = |x: &[f64]| match prob.solve(x[0].exp(), x[1].exp()) {
        Ok((c, ssr)) if c[0] > 0.0 => ssr,
        _ => f64::INFINITY,
    };
    let nm = nelder_mead(
        objective,
        &[s0.ln(), a0.ln()],
        &NelderMeadOptions {
            x_tol: opts.x_tol,
            f_tol: 1e-14,
            max_iter: opts.max_iter,
            initial_step: 0.05,
        },
    );
    if !nm.converged {
        return Err(Error::Convergence {
            iterations: nm.iterations,
            best_residual: (nm.f / prob.y.len() as f64).sqrt(),
        });
    }
    let (sigma, a) = (nm.x[0].exp(), nm.x[1].exp());
    let (coef, ssr) = prob.solve(sigma, a)?;
    if coef[0] <= 0.0 {
        return Err(invalid("fitted amplitude is not positive"));
    }
    let params = prob.params(&coef, sigma, a);

    let y2: f64 = prob.y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let h = 1e-5;
    let mut grad = [0.0; 2];
    for (i, g) in grad.iter_mut().enumerate() {
        let mut xp = nm.x.clone();
        let mut xm = nm.x.clone();
        xp[i] += h;
        xm[i] -= h;
        *g = (objective(&xp) - objective(&xm)) / (2.0 * h) / y2;
    }
    let gradient_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let n = prob.y.len();
    let uncertainty = uncertainties(&params, &dirs, &pts, ssr, opts);

    Ok(FitResult {
        params,
        uncertainty,
        residual_rms: (ssr / n as f64).sqrt(),
        iterations: nm.iterations,
        evaluations: nm.evaluations,
        converged: gradient_norm <= opts.grad_tol,
        gradient_norm,
        history: nm.history,
        n_points: n,
        beta_zero: opts.beta_zero,
        background_zero: opts.background_zero,
    })
}

fn initial_guess(grid: &MomentumGrid, dirs: &[Vec2; 3]) -> Result<(f64, f64)> {
    let spec = *grid.spec();
    let nx = spec.kx.len;
    let y = grid.values();
    let floor = y.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut w, mut m2) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let k = spec.point(i % nx, i / nx);
        let v = v - floor;
        w += v;
        m2 += v * k.norm_squared();
    }
    if !(w > 0.0) {
        return Err(invalid("image has no signal above its floor"));
    }
    let sigma = (m2 / w / 2.0).sqrt();

    // envelope-divided image inside the envelope core
    let env: Vec<f64> = (0..y.len())
        .map(|i| (-spec.point(i % nx, i / nx).norm_squared() / (2.0 * sigma * sigma)).exp())
        .collect();
    let scale = y.iter().zip(&env).map(|(v, g)| (v - floor) * g).sum::<f64>()
        / env.iter().map(|g| g * g).sum::<f64>();
    let mut samples = Vec::new();
    for i in 0..y.len() {
        if env[i] > 0.1 {
            let k = spec.point(i % nx, i / nx);
            samples.push((k, (y[i] - floor) / (scale * env[i]) - 1.0));
        }
    }
    let half = (spec.kx.max() - spec.kx.min()).min(spec.ky.max() - spec.ky.min()) / 2.0;
    let step = spec.kx.step.max(spec.ky.step);
    let a_min = std::f64::consts::TAU / half;
    let a_max = std::f64::consts::PI / (2.0 * step);
    if !(a_max > a_min) {
        return Err(invalid("grid is too coarse or too small to locate the bond length"));
    }
    let n_scan = 600;
    let mut best = (f64::NEG_INFINITY, a_min);
    for s in 0..n_scan {
        let a = a_min * (a_max / a_min).powf(s as f64 / (n_scan - 1) as f64);
        let mut p = 0.0;
        for d in dirs {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, r) in &samples {
                let (sn, cs) = (a * k.dot(d)).sin_cos();
                re += r * cs;
                im += r * sn;
            }
            p += re * re + im * im;
        }
        if p > best.0 {
            best = (p, a);
        }
    }
    Ok((sigma, best.1))
}

fn uncertainties(
    p: &FitModelParams,
    dirs: &[Vec2; 3],
    pts: &[Vec2],
    ssr: f64,
    opts: &FitOptions,
) -> FitModelParams {
    // free parameters in a fixed order: α(3) [β(3)] σ a A [bg]
    let mut free: Vec<usize> = (0..3).collect();
    if !opts.beta_zero {
        free.extend(3..6);
    }
    free.extend([6, 7, 8]);
    if !opts.background_zero {
        free.push(9);
    }
    let get = |q: &FitModelParams, i: usize| match i {
        0..=2 => q.alpha[i],
        3..=5 => q.beta[i - 3],
        6 => q.k_width,
        7 => q.bond_length,
        8 => q.amplitude,
        _ => q.background,
    };
    let set = |q: &mut FitModelParams, i: usize, v: f64| match i {
        0..=2 => q.alpha[i] = v,
        3..=5 => q.beta[i - 3] = v,
        6 => q.k_width = v,
        7 => q.bond_length = v,
        8 => q.amplitude = v,
        _ => q.background = v,
    };
    let np = free.len();
    let mut jtj = DMatrix::<f64>::zeros(np, np);
    let mut col = vec![0.0; np];
    let steps: Vec<f64> = free
        .iter()
        .map(|&i| 1e-6 * get(p, i).abs().max(if i >= 6 { 1e-12 } else { 1.0 }))
        .collect();
    for k in pts {
        for (c, (&i, h)) in free.iter().zip(&steps).enumerate() {
            let mut qp = *p;
            let mut qm = *p;
            set(&mut qp, i, get(p, i) + h);
            set(&mut qm, i, get(p, i) - h);
            col[c] = (qp.eval(dirs, *k) - qm.eval(dirs, *k)) / (2.0 * h);
        }
        for r in 0..np {
            for c in 0..np {
                jtj[(r, c)] += col[r] * col[c];
            }
        }
    }
    let dof = pts.len().saturating_sub(np).max(1) as f64;
    let s2 = ssr / dof;
    let mut out = FitModelParams {
        alpha: [0.0; 3],
        beta: [0.0; 3],
        k_width: 0.0,
        bond_length: 0.0,
        amplitude: 0.0,
        background: 0.0,
    };
    match jtj.try_inverse() {
        Some(inv) => {
            for (c, &i) in free.iter().enumerate() {
                set(&mut out, i, (s2 * inv[(c, c)]).max(0.0).sqrt());
            }
        }
        None => {
            for &i in &free {
                set(&mut out, i, f64::NAN);
            }
        }
    }
    out
}

/// Mean of the three fitted α.
pub fn average_alpha(result: &FitResult) -> f64 {
    result.params.alpha.iter().sum::<f64>() / 3.0
}

/// Fits many images concurrently; results keep the input order.
pub fn fit_batch(grids: &[MomentumGrid], directions: &[Vec2], opts: &FitOptions) -> Vec<Result<FitResult>> {
    grids.par_iter().map(|g| fit_coherence(g, directions, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cluster, SuperlatticeSpec, Trimerization};
    use crate::observables::trimer_interference;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn dirs() -> [Vec2; 3] {
        let g = build_cluster(
            &SuperlatticeSpec::standard(45e3, 15e3, Trimerization::Right).unwrap(),
            1,
            1,
            false,
        )
        .unwrap();
        let d = g.bond_directions();
        [d[0], d[1], d[2]]
    }

    fn truth(alpha: [f64; 3], beta: [f64; 3]) -> FitModelParams {
        FitModelParams {
            alpha,
            beta,
            k_width: 0.011,
            bond_length: 354.67,
            amplitude: 2.0,
            background: 0.0,
        }
    }

    fn grid_spec() -> GridSpec {
        GridSpec::square(0.03, 81).unwrap()
    }

    #[test]
    fn noiseless_round_trip() {
        let t = truth([0.5; 3], [0.0; 3]);
        let g = model_grid(&t, &dirs(), grid_spec()).unwrap();
        let r = fit_coherence(&g, &dirs(), &FitOptions::default()).unwrap();
        assert!(r.converged, "gradient {}", r.gradient_norm);
        for d in 0..3 {
            assert!((r.params.alpha[d] - 0.5).abs() < 1e-6, "{:?}", r.params);
            assert!(r.params.beta[d].abs() < 1e-6);
        }
        assert_relative_eq!(r.params.k_width, t.k_width, max_relative = 1e-4);
        assert_relative_eq!(r.params.bond_length, t.bond_length, max_relative = 1e-4);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        assert_relative_eq!(average_alpha(&r), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn noisy_fit_stays_within_tolerance() {
        let t = truth([0.5; 3], [0.0; 3]);
        let clean = model_grid(&t, &dirs(), grid_spec()).unwrap();
        let sd = 0.01 * clean.max_value();
        let normal = Normal::new(0.0, sd).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut g = clean.clone();
        g.values_mut().iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        let r = fit_coherence(&g, &dirs(), &FitOptions::default()).unwrap();
        for d in 0..3 {
            assert!((r.params.alpha[d] - 0.5).abs() < 0.02);
            assert!(r.uncertainty.alpha[d] > 0.0 && r.uncertainty.alpha[d] < 0.02);
        }
        // constraining β on β = 0 data changes α by less than its uncertainty
        let opts = FitOptions {
            beta_zero: true,
            ..Default::default()
        };
        let rb = fit_coherence(&g, &dirs(), &opts).unwrap();
        for d in 0..3 {
            assert!((rb.params.alpha[d] - r.params.alpha[d]).abs() < 3.0 * r.uncertainty.alpha[d]);
            assert_eq!(rb.params.beta[d], 0.0);
        }
    }

    #[test]
    fn imprinted_trimer_phase() {
        let spec = SuperlatticeSpec::standard(45e3, 15e3, Trimerization::Right).unwrap();
        let g = build_cluster(&spec, 1, 1, false).unwrap();
        let env = WannierEnvelope::new(0.011, 1.0).unwrap();
        for phi in [0.4, std::f64::consts::FRAC_PI_2, 1.1] {
            let img = trimer_interference(phi, env, 0.8, &g, grid_spec()).unwrap();
            let r = fit_coherence(&img, &g.bond_directions(), &FitOptions::default()).unwrap();
            // AB is the first direction
            let got = r.params.beta[0].atan2(r.params.alpha[0]);
            assert!((got - phi).abs() < 0.05 * phi, "φ = {phi}, fitted {got}");
        }
    }

    #[test]
    fn rescaled_grid_gives_same_coherences() {
        let t = truth([0.3, 0.6, 0.9], [0.1, -0.2, 0.05]);
        let g = model_grid(&t, &dirs(), grid_spec()).unwrap();
        let mut h = g.clone();
        h.values_mut().iter_mut().for_each(|v| *v *= 17.5);
        let a = fit_coherence(&g, &dirs(), &FitOptions::default()).unwrap();
        let b = fit_coherence(&h, &dirs(), &FitOptions::default()).unwrap();
        for d in 0..3 {
            assert!((a.params.alpha[d] - b.params.alpha[d]).abs() < 1e-6);
            assert!((a.params.beta[d] - b.params.beta[d]).abs() < 1e-6);
        }
        assert_relative_eq!(b.params.amplitude, 17.5 * a.params.amplitude, max_relative = 1e-6);
    }

    #[test]
    fn average_of_three() {
        let mut r = fit_coherence(
            &model_grid(&truth([0.3; 3], [0.0; 3]), &dirs(), grid_spec()).unwrap(),
            &dirs(),
            &FitOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(average_alpha(&r), 0.3, epsilon = 1e-6);
        r.params.alpha = [0.2, 0.4, 0.6];
        assert_relative_eq!(average_alpha(&r), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn tiny_window_is_rejected() {
        let t = truth([0.5; 3], [0.0; 3]);
        let g = model_grid(&t, &dirs(), GridSpec::square(0.001, 9).unwrap()).unwrap();
        assert!(fit_coherence(&g, &dirs(), &FitOptions::default()).is_err());
        assert!(fit_coherence(&g, &dirs()[..2], &FitOptions::default()).is_err());
    }

    #[test]
    fn batch_keeps_order() {
        let grids: Vec<_> = [0.2, 0.7]
            .iter()
            .map(|a| model_grid(&truth([*a; 3], [0.0; 3]), &dirs(), grid_spec()).unwrap())
            .collect();
        let out = fit_batch(&grids, &dirs(), &FitOptions::default());
        assert!((average_alpha(out[0].as_ref().unwrap()) - 0.2).abs() < 1e-6);
        assert!((average_alpha(out[1].as_ref().unwrap()) - 0.7).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn round_trip_family(
            alpha in proptest::array::uniform3(0.0f64..1.5),
            beta in proptest::array::uniform3(-0.5f64..0.5),
            width in 0.006f64..0.02,
        ) {
            let t = FitModelParams { k_width: width, ..truth(alpha, beta) };
            let g = model_grid(&t, &dirs(), GridSpec::square(0.035, 81).unwrap()).unwrap();
            let r = fit_coherence(&g, &dirs(), &FitOptions::default()).unwrap();
            for d in 0..3 {
                prop_assert!((r.params.alpha[d] - alpha[d]).abs() < 1e-5, "{:?}", r.params);
                prop_assert!((r.params.beta[d] - beta[d]).abs() < 1e-5);
            }
            prop_assert!((r.params.k_width / width - 1.0).abs() < 1e-4);
        }
    }
}
