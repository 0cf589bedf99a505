//! Newton continuation from the sampled continuum ground state to a discrete
//! breather on `{N_d = 1}`.
//!
//! The unknowns live on the active sub-box: the full box minus its boundary
//! ring, and on half-shifted axes also minus the last layer, so that the mode
//! reflection maps the sub-box onto itself by plain index reversal. The
//! bordered Newton system is solved by block elimination with two
//! preconditioned MINRES solves per step; the preconditioner is the shifted
//! Dirichlet Laplacian, inverted by sine transforms.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuum::{unit_mass_ground_state, ContinuumProfile};
use crate::error::{BreatherError, Result};
use crate::fem::project_profile;
use crate::grid::{axpy, dot, max_abs, Shape};
use crate::krylov::{lobpcg_lowest, minres, LobpcgOptions};
use crate::lattice::{norm_d, qmu_norm, validate_exponent, Dim, LatticeField, ModeSpec};
use crate::spectral::DirichletSpectrum;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 50;
/// Relative tail level that fixes the automatic truncation radius.
pub const TRUNCATION_LEVEL: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relative tolerance of the inner MINRES solves.
    pub inner_rtol: f64,
    pub inner_max_iter: usize,
    /// Bound on `|N_d - 1|` required together with `tol`.
    pub mass_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, inner_rtol: 1e-13, inner_max_iter: 4000, mass_tol: 1e-13 }
    }
}

#[derive(Clone, Debug)]
pub struct BreatherResult {
    pub field: LatticeField,
    pub mode: ModeSpec,
    pub p: f64,
    pub lambda: f64,
    pub residual_inf: f64,
    pub iterations: usize,
    pub coercivity_margin: Option<f64>,
    /// `residual_inf` before each Newton step and at the end.
    pub trace: Vec<f64>,
    /// MINRES steps summed over all Newton steps.
    pub inner_iterations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BreatherSummary {
    pub mode: String,
    pub p: f64,
    pub mu: f64,
    pub radius: usize,
    pub lambda: f64,
    pub residual_inf: f64,
    pub iterations: usize,
    pub coercivity_margin: Option<f64>,
}

impl BreatherResult {
    pub fn summary(&self) -> BreatherSummary {
        BreatherSummary {
            mode: self.mode.label().to_string(),
            p: self.p,
            mu: self.field.mesh(),
            radius: self.field.radius(),
            lambda: self.lambda,
            residual_inf: self.residual_inf,
            iterations: self.iterations,
            coercivity_margin: self.coercivity_margin,
        }
    }

    pub fn write_summary_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.summary())?;
        Ok(())
    }

    /// Breathing period `2 pi / |lambda|`.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.lambda.abs()
    }
}

/// Index map between a full field and its active sub-box.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ActiveBox {
    pub shape: Shape,
    lo: [i64; 2],
    radius: usize,
    dim: Dim,
    mesh: f64,
}

impl ActiveBox {
    pub fn new(dim: Dim, mesh: f64, radius: usize, mode: &ModeSpec) -> Self {
        let k = radius as i64;
        let extent = |axis: usize| -> usize {
            if axis >= dim.n() {
                1
            } else if mode.is_half(axis) {
                (2 * k - 2) as usize
            } else {
                (2 * k - 1) as usize
            }
        };
        let shape = Shape::new(dim.n(), extent(0), extent(1));
        let lo = [-k + 1, if dim == Dim::Two { -k + 1 } else { 0 }];
        Self { shape, lo, radius, dim, mesh }
    }

    pub fn for_field(f: &LatticeField, mode: &ModeSpec) -> Self {
        Self::new(f.dim(), f.mesh(), f.radius(), mode)
    }

    fn global(&self, k: usize) -> [i64; 2] {
        let n1 = self.shape.n[1];
        [self.lo[0] + (k / n1) as i64, self.lo[1] + (k % n1) as i64]
    }

    pub fn gather(&self, f: &LatticeField) -> Vec<f64> {
        (0..self.shape.len()).map(|k| f.get(self.global(k))).collect()
    }

    pub fn scatter(&self, v: &[f64]) -> Result<LatticeField> {
        let mut f = LatticeField::zeros(self.dim, self.mesh, self.radius)?;
        for (k, &x) in v.iter().enumerate() {
            f.set(self.global(k), x)?;
        }
        Ok(f)
    }
}

/// The stationarity operator and its linearisation on an active sub-box.
struct Problem {
    shape: Shape,
    spectrum: DirichletSpectrum,
    inv_mu2: f64,
    vol: f64,
    p: f64,
}

impl Problem {
    fn new(abox: &ActiveBox, p: f64) -> Self {
        Self {
            shape: abox.shape,
            spectrum: DirichletSpectrum::new(abox.shape),
            inv_mu2: 1.0 / (abox.mesh * abox.mesh),
            vol: abox.dim.cell_volume(abox.mesh),
            p,
        }
    }

    /// `F = -mu^-2 Delta psi - |psi|^(2p) psi - lambda psi`.
    fn residual(&self, psi: &[f64], lambda: f64) -> Vec<f64> {
        let mut out = vec![0.0; psi.len()];
        self.shape.laplacian(psi, &mut out);
        let tp = 2.0 * self.p;
        for (o, &v) in out.iter_mut().zip(psi) {
            *o = -self.inv_mu2 * *o - v.abs().powf(tp) * v - lambda * v;
        }
        out
    }

    fn rayleigh(&self, psi: &[f64]) -> f64 {
        let r = self.residual(psi, 0.0);
        dot(psi, &r) / dot(psi, psi)
    }

    /// `y = A x` with `A = -mu^-2 Delta - (2p+1) |psi|^(2p) - lambda`.
    fn jacobian(&self, potential: &[f64], lambda: f64, x: &[f64], y: &mut [f64]) {
        self.shape.laplacian(x, y);
        for ((yi, &xi), &w) in y.iter_mut().zip(x).zip(potential) {
            *yi = -self.inv_mu2 * *yi - (w + lambda) * xi;
        }
    }

    fn potential(&self, psi: &[f64]) -> Vec<f64> {
        let tp = 2.0 * self.p;
        psi.iter().map(|v| (tp + 1.0) * v.abs().powf(tp)).collect()
    }

    /// `(mu^-2 (-Delta) + sigma)^-1 r`.
    fn precondition(&self, sigma: f64, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        let inv_mu2 = self.inv_mu2;
        self.spectrum.apply(z, |ev| 1.0 / (inv_mu2 * ev + sigma));
    }

    fn mass(&self, psi: &[f64]) -> f64 {
        self.vol * dot(psi, psi)
    }
}

/// `K = ceil(R / mu)` with `R` the radius where the profile drops below
/// [`TRUNCATION_LEVEL`] of its peak; at least 2.
pub fn auto_radius(prof: &ContinuumProfile, mu: f64) -> Result<usize> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(BreatherError::InvalidMesh(mu));
    }
    let r = prof.decay_radius(TRUNCATION_LEVEL);
    Ok(((r / mu).ceil() as usize).max(2))
}

/// `nu * Pi_mu psi_c` with `nu` chosen so that `N_d = 1`.
pub fn initial_guess(prof: &ContinuumProfile, mode: &ModeSpec, mesh: f64, radius: usize) -> Result<LatticeField> {
    let sample = project_profile(prof, mesh, radius, mode)?;
    let n = norm_d(&sample);
    if !(n > 0.0) || !n.is_finite() {
        return Err(BreatherError::DegenerateSampling);
    }
    Ok(sample.scaled(n.powf(-0.5)))
}

/// Largest `|lambda f + mu^-2 Delta f + |f|^(2p) f|` over the active sub-box.
pub fn stationarity_residual(f: &LatticeField, lambda: f64, p: f64, mode: &ModeSpec) -> Result<f64> {
    validate_exponent(f.dim(), p)?;
    let abox = ActiveBox::for_field(f, mode);
    let full = crate::lattice::discrete_laplacian(f);
    let inv_mu2 = 1.0 / (f.mesh() * f.mesh());
    let worst = (0..abox.shape.len())
        .map(|k| {
            let l = abox.global(k);
            let v = f.get(l);
            (lambda * v + inv_mu2 * full.get(l) + v.abs().powf(2.0 * p) * v).abs()
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

pub fn solve_breather(
    guess: &LatticeField,
    mode: &ModeSpec,
    p: f64,
    tol: f64,
    max_iter: usize,
) -> Result<BreatherResult> {
    let opts = SolverOptions { tol, max_iter, ..SolverOptions::default() };
    solve_breather_with(guess, mode, p, &opts)
}

pub fn solve_breather_with(
    guess: &LatticeField,
    mode: &ModeSpec,
    p: f64,
    opts: &SolverOptions,
) -> Result<BreatherResult> {
    validate_exponent(guess.dim(), p)?;
    if guess.dim() != mode.dim() {
        return Err(BreatherError::DimensionMismatch { left: guess.dim().n(), right: mode.dim().n() });
    }
    if !(opts.tol > 0.0) {
        return Err(BreatherError::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let mesh = guess.mesh();
    let abox = ActiveBox::for_field(guess, mode);
    let prob = Problem::new(&abox, p);
    let shape = abox.shape;

    let mut psi = abox.gather(guess);
    shape.symmetrize(&mut psi);
    if max_abs(&psi) == 0.0 {
        return Err(BreatherError::DegenerateSampling);
    }
    let mut lambda = prob.rayleigh(&psi);
    let mut trace = Vec::new();
    let mut stalled = 0;
    let mut inner = 0;

    for iter in 0..=opts.max_iter {
        let f = prob.residual(&psi, lambda);
        let g = prob.mass(&psi) - 1.0;
        let res = max_abs(&f);
        if !res.is_finite() || !lambda.is_finite() {
            return Err(BreatherError::BasinFailure { iteration: iter, residual: res, mesh, trace });
        }
        if let Some(&prev) = trace.last() {
            stalled = if res >= prev { stalled + 1 } else { 0 };
        }
        let first = trace.first().copied().unwrap_or(res);
        trace.push(res);
        if res <= opts.tol && g.abs() <= opts.mass_tol {
            let field = abox.scatter(&psi)?;
            return Ok(BreatherResult {
                field,
                mode: *mode,
                p,
                lambda,
                residual_inf: res,
                iterations: iter,
                coercivity_margin: None,
                trace,
                inner_iterations: inner,
            });
        }
        if stalled >= 3 || res > 1e3 * first.max(opts.tol) {
            return Err(BreatherError::BasinFailure { iteration: iter, residual: res, mesh, trace });
        }
        if iter == opts.max_iter {
            break;
        }

        let pot = prob.potential(&psi);
        let sigma = (-lambda).max(0.0);
        // projecting the preconditioner output keeps every Krylov vector exactly
        // symmetric; projecting the operator instead would make it singular
        let apply = |x: &[f64], y: &mut [f64]| prob.jacobian(&pot, lambda, x, y);
        let prec = |r: &[f64], z: &mut [f64]| {
            prob.precondition(sigma, r, z);
            shape.symmetrize(z);
        };
        let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
        let (u, iu) = minres(apply, prec, &neg_f, opts.inner_rtol, opts.inner_max_iter);
        let (w, iw) = minres(apply, prec, &psi, opts.inner_rtol, opts.inner_max_iter);
        inner += iu + iw;
        let denom = 2.0 * prob.vol * dot(&psi, &w);
        if denom == 0.0 || !denom.is_finite() {
            return Err(BreatherError::SingularJacobian { iteration: iter });
        }
        let dl = (-g - 2.0 * prob.vol * dot(&psi, &u)) / denom;
        axpy(1.0, &u, &mut psi);
        axpy(dl, &w, &mut psi);
        shape.symmetrize(&mut psi);
        lambda += dl;
    }
    Err(BreatherError::MaxIterations {
        iterations: opts.max_iter,
        last: trace.last().copied().unwrap_or(f64::NAN),
        trace,
    })
}

/// Guess from `prof`, then Newton with the given options.
pub fn solve_from_profile(
    prof: &ContinuumProfile,
    mode: &ModeSpec,
    mesh: f64,
    radius: usize,
    opts: &SolverOptions,
) -> Result<BreatherResult> {
    let guess = initial_guess(prof, mode, mesh, radius)?;
    solve_breather_with(&guess, mode, prof.p(), opts)
}

/// Smallest eigenvalue of the constrained second variation
/// `L = 2 mu^n (-mu^-2 Delta - (2p+1)|psi|^(2p) - lambda)` on
/// `{h : <psi, h> = 0}`, restricted to mode-symmetric `h` when `symmetric`.
pub fn hessian_lowest_eigenvalue(res: &BreatherResult, symmetric: bool) -> Result<f64> {
    let abox = ActiveBox::for_field(&res.field, &res.mode);
    let prob = Problem::new(&abox, res.p);
    let shape = abox.shape;
    let psi = abox.gather(&res.field);
    let pot = prob.potential(&psi);
    let scale = 2.0 * prob.vol;
    let lambda = res.lambda;
    let sigma = (-lambda).max(0.0);
    let psi_sq = dot(&psi, &psi);
    let project = |v: &mut [f64]| {
        if symmetric {
            shape.symmetrize(v);
        }
        let c = dot(&psi, v) / psi_sq;
        axpy(-c, &psi, v);
    };
    let apply = |x: &[f64], y: &mut [f64]| {
        prob.jacobian(&pot, lambda, x, y);
        y.iter_mut().for_each(|v| *v *= scale);
    };
    let prec = |r: &[f64], z: &mut [f64]| {
        prob.precondition(sigma, r, z);
        z.iter_mut().for_each(|v| *v /= scale);
    };
    let n1 = shape.n[1];
    let c0 = [(shape.n[0] - 1) as f64 / 2.0, (n1 - 1) as f64 / 2.0];
    let amp = max_abs(&psi);
    let start: Vec<f64> = psi
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let x = (k / n1) as f64 - c0[0];
            let y = (k % n1) as f64 - c0[1];
            let noise = ((k as f64 * 12.9898).sin() * 43758.5453).fract();
            v * (x * x + y * y + x + 0.5 * y) + 1e-3 * noise * amp
        })
        .collect();
    // stop once the eigenvalue error (about residual^2 / gap) is negligible
    let opts = LobpcgOptions { rtol: 1e-9, atol: 1e-10 * scale * prob.inv_mu2, max_iter: 3000 };
    let (value, _) = lobpcg_lowest(apply, prec, project, start, opts)?;
    Ok(value)
}

/// Symmetry-restricted coercivity margin.
pub fn coercivity_check(res: &BreatherResult) -> Result<f64> {
    hessian_lowest_eigenvalue(res, true)
}

/// `(max |f|, 2 mu^(1/2 - n/2) ||f||_Q)`.
pub fn sup_bound_check(f: &LatticeField) -> (f64, f64) {
    let n = f.dim().n() as f64;
    (f.max_abs(), 2.0 * f.mesh().powf(0.5 - n / 2.0) * qmu_norm(f))
}

/// `phi = mu^(1/p) psi` on mesh 1, `lambda~ = mu^2 lambda`, `E = mu^(2/p - n)`.
pub fn rescale_to_mu_free(res: &BreatherResult) -> Result<(LatticeField, f64, f64)> {
    let mu = res.field.mesh();
    let n = res.field.dim().n() as f64;
    let c = mu.powf(1.0 / res.p);
    let values = res.field.values().iter().map(|v| c * v).collect();
    let phi = LatticeField::from_values(res.field.dim(), 1.0, res.field.radius(), values)?;
    Ok((phi, mu * mu * res.lambda, mu.powf(2.0 / res.p - n)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub mu: f64,
    pub radius: usize,
    pub qmu_error: f64,
    pub sup_error: f64,
    pub lambda: f64,
    pub iterations: usize,
    /// Solver failure for this row; the numeric fields are NaN when set.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub dim: usize,
    pub mode: String,
    pub p: f64,
    pub lambda_c: f64,
    pub rows: Vec<ConvergenceRow>,
    pub fitted_order_qmu: f64,
    pub fitted_order_sup: f64,
    pub partial: bool,
}

impl ConvergenceReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "mu,radius,qmu_error,sup_error,lambda,iterations,status")?;
        for r in &self.rows {
            let status = if r.failure.is_some() { "failed" } else { "ok" };
            writeln!(
                w,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{},{}",
                r.mu, r.radius, r.qmu_error, r.sup_error, r.lambda, r.iterations, status
            )?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(sx, sy), (a, b)| (sx + a, sy + b));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(n, d), (a, b)| (n + (a - mx) * (b - my), d + (a - mx) * (a - mx)));
    num / den
}

/// Study against the unit-mass ground state for `(dim, p)`.
pub fn convergence_study(mode: &ModeSpec, p: f64, mus: &[f64], tol: f64) -> Result<ConvergenceReport> {
    let prof = unit_mass_ground_state(mode.dim(), p)?;
    convergence_study_with(&prof, mode, mus, &SolverOptions { tol, ..SolverOptions::default() })
}

/// For each mesh: solve from the projected profile, then measure the distance
/// to the raw (unnormalised) samples of the profile in the `Q_mu` and sup norms.
pub fn convergence_study_with(
    prof: &ContinuumProfile,
    mode: &ModeSpec,
    mus: &[f64],
    opts: &SolverOptions,
) -> Result<ConvergenceReport> {
    if mus.len() < 3 {
        return Err(BreatherError::InvalidArgument(format!("need at least 3 mesh values, got {}", mus.len())));
    }
    if prof.dim() != mode.dim() {
        return Err(BreatherError::DimensionMismatch { left: prof.dim().n(), right: mode.dim().n() });
    }
    let mut mus = mus.to_vec();
    mus.sort_by(|a, b| b.total_cmp(a));
    let rows: Vec<ConvergenceRow> = mus
        .par_iter()
        .map(|&mu| -> Result<ConvergenceRow> {
            let radius = auto_radius(prof, mu)?;
            let outcome = solve_from_profile(prof, mode, mu, radius, opts).and_then(|res| {
                let sample = project_profile(prof, mu, radius, mode)?;
                let diff = res.field.sub(&sample)?;
                Ok((res, qmu_norm(&diff), diff.max_abs()))
            });
            Ok(match outcome {
                Ok((res, q, s)) => ConvergenceRow {
                    mu,
                    radius,
                    qmu_error: q,
                    sup_error: s,
                    lambda: res.lambda,
                    iterations: res.iterations,
                    failure: None,
                },
                Err(e) => ConvergenceRow {
                    mu,
                    radius,
                    qmu_error: f64::NAN,
                    sup_error: f64::NAN,
                    lambda: f64::NAN,
                    iterations: 0,
                    failure: Some(e.to_string()),
                },
            })
        })
        .collect::<Result<_>>()?;
    let ok: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.failure.is_none()).collect();
    let xs: Vec<f64> = ok.iter().map(|r| r.mu).collect();
    let fitted_order_qmu = fit_slope(&xs, &ok.iter().map(|r| r.qmu_error).collect::<Vec<_>>());
    let fitted_order_sup = fit_slope(&xs, &ok.iter().map(|r| r.sup_error).collect::<Vec<_>>());
    Ok(ConvergenceReport {
        dim: mode.dim().n(),
        mode: mode.label().to_string(),
        p: prof.p(),
        lambda_c: prof.lambda_c(),
        partial: ok.len() < rows.len(),
        rows,
        fitted_order_qmu,
        fitted_order_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ModeLabel;

    #[test]
    fn active_box_is_mirror_closed() {
        for label in [ModeLabel::SieversTakeno, ModeLabel::Page, ModeLabel::HybridX, ModeLabel::HybridY] {
            let mode = ModeSpec::new(Dim::Two, label).unwrap();
            let abox = ActiveBox::new(Dim::Two, 0.5, 5, &mode);
            for k in 0..abox.shape.len() {
                let l = abox.global(k);
                let m = abox.global(abox.shape.mirror(k));
                assert_eq!(m, [mode.reflect_index(0, l[0]), mode.reflect_index(1, l[1])]);
            }
        }
    }

    #[test]
    fn gather_scatter_round_trip_zeroes_the_ring() {
        let mode = ModeSpec::new(Dim::One, ModeLabel::Page).unwrap();
        let f = LatticeField::from_fn(Dim::One, 0.5, 4, |l| 1.0 + l[0] as f64).unwrap();
        let abox = ActiveBox::for_field(&f, &mode);
        let g = abox.scatter(&abox.gather(&f)).unwrap();
        assert_eq!(g.get([-4, 0]), 0.0);
        assert_eq!(g.get([3, 0]), 0.0);
        assert_eq!(g.get([4, 0]), 0.0);
        assert_eq!(g.get([2, 0]), 3.0);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.4, 0.2, 0.1];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.7)).collect();
        assert!((fit_slope(&x, &y) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn sup_bound_on_delta() {
        let d = LatticeField::delta(Dim::One, 1.0, 3).unwrap();
        let (l, r) = sup_bound_check(&d);
        assert_eq!(l, 1.0);
        assert!((r - 2.0 * 3f64.sqrt()).abs() < 1e-14);
    }
}
