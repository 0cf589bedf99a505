//! Continuum NLS ground states `lambda psi = -Delta psi - |psi|^(2p) psi`.
//!
//! Profiles are radial and stored as a uniform table of `(psi, psi')` with
//! cubic Hermite evaluation in between.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{BreatherError, Result};
use crate::lattice::{validate_exponent, Dim};
use crate::ode::Dopri5;

/// Table nodes per decay length `1/sqrt(-lambda)`.
const NODES_PER_DECAY_LENGTH: f64 = 500.0;
/// Default table extent in decay lengths.
const R_MAX_DECAY_LENGTHS: f64 = 40.0;
/// Shooting hands over to the asymptotic tail once `psi < TAIL_MATCH * psi(0)`.
const TAIL_MATCH: f64 = 1e-6;

/// Radial continuum profile with its eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuumProfile {
    dim: Dim,
    p: f64,
    lambda_c: f64,
    step: f64,
    psi: Vec<f64>,
    dpsi: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub dim: usize,
    pub p: f64,
    pub lambda_c: f64,
    pub amplitude: f64,
    pub mass: f64,
}

impl ContinuumProfile {
    /// Wraps a precomputed table `psi(i*step)`, `psi'(i*step)`.
    pub fn from_table(
        dim: Dim,
        p: f64,
        lambda_c: f64,
        step: f64,
        psi: Vec<f64>,
        dpsi: Vec<f64>,
    ) -> Result<Self> {
        validate_exponent(dim, p)?;
        if !(step.is_finite() && step > 0.0) {
            return Err(BreatherError::InvalidArgument(format!("table step {step}")));
        }
        if psi.len() != dpsi.len() || psi.len() < 5 {
            return Err(BreatherError::InvalidArgument("table needs >= 5 matching rows".into()));
        }
        if psi.iter().chain(&dpsi).any(|v| !v.is_finite()) || !lambda_c.is_finite() {
            return Err(BreatherError::NonFinite("profile table".into()));
        }
        Ok(Self { dim, p, lambda_c, step, psi, dpsi })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn lambda_c(&self) -> f64 {
        self.lambda_c
    }

    pub fn amplitude(&self) -> f64 {
        self.psi[0]
    }

    /// Asymptotic exponential decay rate `sqrt(-lambda_c)`.
    pub fn decay_rate(&self) -> f64 {
        (-self.lambda_c).max(0.0).sqrt()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn r_max(&self) -> f64 {
        self.step * (self.psi.len() - 1) as f64
    }

    /// `(r, psi(r))` table rows.
    pub fn radial_samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.psi.iter().enumerate().map(|(i, &v)| (i as f64 * self.step, v))
    }

    /// `psi(r)`; zero beyond the table.
    pub fn value_radial(&self, r: f64) -> f64 {
        self.hermite(r.abs()).0
    }

    /// `psi'(r)` for `r >= 0`; zero beyond the table.
    pub fn derivative_radial(&self, r: f64) -> f64 {
        self.hermite(r).1
    }

    fn hermite(&self, r: f64) -> (f64, f64) {
        let h = self.step;
        let x = r / h;
        let last = self.psi.len() - 1;
        if !(x >= 0.0) || x > last as f64 {
            return (0.0, 0.0);
        }
        let i = (x.floor() as usize).min(last - 1);
        let t = x - i as f64;
        let (y0, y1) = (self.psi[i], self.psi[i + 1]);
        let (m0, m1) = (self.dpsi[i], self.dpsi[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * m1;
        let d = (6.0 * t2 - 6.0 * t) / h * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) / h * y1
            + (3.0 * t2 - 2.0 * t) * m1;
        (v, d)
    }

    /// `psi(|z|)` for a point of `R^n` (only the first `n` coordinates are read).
    pub fn value(&self, z: &[f64]) -> f64 {
        self.value_radial(self.radius_of(z))
    }

    /// `grad psi(z) = psi'(|z|) z/|z|`.
    pub fn gradient(&self, z: &[f64]) -> [f64; 2] {
        let r = self.radius_of(z);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let d = self.derivative_radial(r) / r;
        match self.dim {
            Dim::One => [d * z[0], 0.0],
            Dim::Two => [d * z[0], d * z[1]],
        }
    }

    fn radius_of(&self, z: &[f64]) -> f64 {
        match self.dim {
            Dim::One => z[0].abs(),
            Dim::Two => z[0].hypot(z[1]),
        }
    }

    /// Smallest radius with `psi(r) <= rel * psi(0)`.
    pub fn decay_radius(&self, rel: f64) -> f64 {
        let target = rel * self.amplitude();
        let Some(i) = self.psi.iter().position(|&v| v <= target) else {
            return self.r_max();
        };
        if i == 0 {
            return 0.0;
        }
        let (mut lo, mut hi) = ((i - 1) as f64 * self.step, i as f64 * self.step);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.value_radial(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Absolute residual of `psi'' + (n-1)/r psi' + |psi|^(2p) psi + lambda psi`
    /// at table node `i` (`2 <= i < len-2`), with `psi''` taken from a
    /// fourth-order central difference of the stored `psi'`.
    pub fn ode_residual_at(&self, i: usize) -> f64 {
        let h = self.step;
        let d = &self.dpsi;
        let second = (d[i - 2] - 8.0 * d[i - 1] + 8.0 * d[i + 1] - d[i + 2]) / (12.0 * h);
        let r = i as f64 * h;
        let n = self.dim.n() as f64;
        let psi = self.psi[i];
        (second + (n - 1.0) / r * d[i] + psi.abs().powf(2.0 * self.p) * psi + self.lambda_c * psi)
            .abs()
    }

    /// Largest ODE residual over `count` table nodes spread across the table,
    /// relative to `psi(0)`.
    pub fn max_ode_residual(&self, count: usize) -> f64 {
        let last = self.psi.len() - 3;
        let count = count.max(2);
        (0..count)
            .map(|k| 2 + k * (last - 2) / (count - 1))
            .map(|i| self.ode_residual_at(i))
            .fold(0.0, f64::max)
            / self.amplitude().abs()
    }

    pub fn summary(&self) -> ProfileSummary {
        let (_, mass) = continuum_functionals(self, self.p);
        ProfileSummary {
            dim: self.dim.n(),
            p: self.p,
            lambda_c: self.lambda_c,
            amplitude: self.amplitude(),
            mass,
        }
    }

    /// `r,psi` table.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,psi")?;
        for (r, v) in self.radial_samples() {
            writeln!(w, "{:.16e},{:.16e}", r, v)?;
        }
        Ok(())
    }

    pub fn write_summary_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.summary())?;
        Ok(())
    }
}

fn table_len(r_max: f64, step: f64) -> usize {
    // (len - 1) divisible by 4 so that Simpson works at step and 2*step
    let intervals = (r_max / step).ceil() as usize;
    intervals.div_ceil(4) * 4 + 1
}

/// The explicit cubic 1D ground state `psi(x) = sech(x/2)/sqrt(2)`, `lambda = -1/4`.
pub fn explicit_ground_state_1d() -> ContinuumProfile {
    let lambda_c = -0.25;
    let kappa = 0.5;
    let step = 1.0 / (NODES_PER_DECAY_LENGTH * kappa);
    let len = table_len(R_MAX_DECAY_LENGTHS / kappa, step);
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = Vec::with_capacity(len);
    let mut dpsi = Vec::with_capacity(len);
    for i in 0..len {
        let u = 0.5 * i as f64 * step;
        let sech = 1.0 / u.cosh();
        psi.push(a * sech);
        dpsi.push(-0.5 * a * sech * u.tanh());
    }
    ContinuumProfile { dim: Dim::One, p: 1.0, lambda_c, step, psi, dpsi }
}

/// Controls for [`shoot_radial_ground_state_with`].
#[derive(Clone, Copy, Debug)]
pub struct ShootingOptions {
    /// Amplitude bracket `[lo, hi]`; defaults to `[0.01, 20] * |lambda|^(1/2p)`.
    pub bracket: Option<(f64, f64)>,
    /// Table extent; defaults to `40 / sqrt(-lambda)`.
    pub r_max: Option<f64>,
    pub max_bisections: usize,
    pub rtol: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { bracket: None, r_max: None, max_bisections: 200, rtol: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Outcome {
    /// psi crossed zero: amplitude too large.
    Crosses,
    /// psi' turned positive before decaying: amplitude too small.
    FailsToDecay,
    /// reached the end of the integration range without deciding.
    Undecided,
}

struct Shooter {
    dim: Dim,
    p: f64,
    lambda: f64,
    step: f64,
    ode: Dopri5,
}

impl Shooter {
    fn rhs(&self) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + '_ {
        let n = self.dim.n() as f64;
        move |r: f64, y: &[f64; 2]| {
            let source = y[0].abs().powf(2.0 * self.p) * y[0] + self.lambda * y[0];
            if r == 0.0 {
                [y[1], -source / n]
            } else {
                [y[1], -(n - 1.0) / r * y[1] - source]
            }
        }
    }

    /// Integrates node by node; `on_node` sees every accepted node and may stop early.
    fn run(
        &self,
        amplitude: f64,
        r_end: f64,
        mut on_node: impl FnMut(usize, [f64; 2]) -> bool,
    ) -> Outcome {
        let f = self.rhs();
        let mut y = [amplitude, 0.0];
        let nodes = (r_end / self.step).ceil() as usize;
        if !on_node(0, y) {
            return Outcome::Undecided;
        }
        for i in 0..nodes {
            let r0 = i as f64 * self.step;
            let Some(next) = self.ode.advance(&f, r0, y, r0 + self.step) else {
                return Outcome::Crosses;
            };
            y = next;
            if y[0] < 0.0 {
                return Outcome::Crosses;
            }
            if y[1] > 0.0 {
                return Outcome::FailsToDecay;
            }
            if !on_node(i + 1, y) {
                return Outcome::Undecided;
            }
        }
        Outcome::Undecided
    }

    fn classify(&self, amplitude: f64, r_end: f64) -> Outcome {
        self.run(amplitude, r_end, |_, _| true)
    }
}

/// `r^(-(n-1)/2) e^(-kappa r)` times the large-argument series of the
/// modified Bessel function of order `(n-2)/2`; the decaying solution of the
/// linearised radial equation. Returns the value and the `r` derivative.
fn linear_tail(dim: Dim, kappa: f64, r: f64) -> (f64, f64) {
    let nu = (dim.n() as f64 - 2.0) / 2.0;
    let four_nu2 = 4.0 * nu * nu;
    let z = kappa * r;
    let mut coef = 1.0;
    let mut s = 1.0;
    let mut ds = 0.0;
    for k in 1..=6 {
        let kf = k as f64;
        coef *= (four_nu2 - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0);
        s += coef * z.powi(-k);
        ds += -kf * coef * z.powi(-k - 1);
    }
    let pw = -(dim.n() as f64 - 1.0) / 2.0;
    let base = z.powf(pw) * (-z).exp();
    let dbase = base * (pw / z - 1.0);
    (base * s, kappa * (dbase * s + base * ds))
}

/// Positive decaying radial solution of
/// `psi'' + (n-1)/r psi' + |psi|^(2p) psi + lambda psi = 0`, `psi'(0) = 0`,
/// found by bisection on `psi(0)`.
pub fn shoot_radial_ground_state(dim: Dim, p: f64, lambda: f64) -> Result<ContinuumProfile> {
    shoot_radial_ground_state_with(dim, p, lambda, ShootingOptions::default())
}

pub fn shoot_radial_ground_state_with(
    dim: Dim,
    p: f64,
    lambda: f64,
    opts: ShootingOptions,
) -> Result<ContinuumProfile> {
    validate_exponent(dim, p)?;
    if !(lambda < 0.0 && lambda.is_finite()) {
        return Err(BreatherError::InvalidArgument(format!("lambda must be negative, got {lambda}")));
    }
    let kappa = (-lambda).sqrt();
    let step = 1.0 / (NODES_PER_DECAY_LENGTH * kappa);
    let r_max = opts.r_max.unwrap_or(R_MAX_DECAY_LENGTHS / kappa);
    let shooter = Shooter {
        dim,
        p,
        lambda,
        step,
        ode: Dopri5 { rtol: opts.rtol, atol: 1e-300, max_substeps: 10_000 },
    };

    let scale = (-lambda).powf(0.5 / p);
    let (mut lo, mut hi) = opts.bracket.unwrap_or((0.01 * scale, 20.0 * scale));
    let lo_out = shooter.classify(lo, r_max);
    let hi_out = shooter.classify(hi, r_max);
    if lo_out != Outcome::FailsToDecay || hi_out != Outcome::Crosses {
        return Err(BreatherError::NonBracketing {
            lo,
            hi,
            detail: format!("lower end {lo_out:?}, upper end {hi_out:?}"),
        });
    }

    let mut converged = false;
    for _ in 0..opts.max_bisections {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            converged = true;
            break;
        }
        match shooter.classify(mid, r_max) {
            Outcome::Crosses => hi = mid,
            Outcome::FailsToDecay => lo = mid,
            Outcome::Undecided => {
                lo = mid;
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(BreatherError::BisectionFailed {
            lo,
            hi,
            iterations: opts.max_bisections,
        });
    }

    let amplitude = lo;
    let threshold = TAIL_MATCH * amplitude;
    let mut psi = vec![];
    let mut dpsi = vec![];
    shooter.run(amplitude, r_max, |_, y| {
        psi.push(y[0]);
        dpsi.push(y[1]);
        y[0] > threshold
    });
    if psi.last().is_none_or(|&v| v > threshold) {
        return Err(BreatherError::BisectionFailed { lo, hi, iterations: opts.max_bisections });
    }

    let len = table_len(r_max, step);
    let match_idx = psi.len() - 1;
    let r_m = match_idx as f64 * step;
    let (t_m, _) = linear_tail(dim, kappa, r_m);
    let amp_tail = psi[match_idx] / t_m;
    for i in psi.len()..len {
        let (t, dt) = linear_tail(dim, kappa, i as f64 * step);
        psi.push(amp_tail * t);
        dpsi.push(amp_tail * dt);
    }
    ContinuumProfile::from_table(dim, p, lambda, step, psi, dpsi)
}

/// Scaling `psi_s(z) = s^(1/p) psi(s z)`, `lambda -> s^2 lambda`, with `s`
/// chosen so that the continuum mass is one.
pub fn rescale_to_unit_mass(prof: &ContinuumProfile) -> Result<ContinuumProfile> {
    let (_, mass) = continuum_functionals(prof, prof.p);
    if !(mass > 0.0) {
        return Err(BreatherError::ZeroMass);
    }
    let exponent = 2.0 / prof.p - prof.dim.n() as f64;
    let s = mass.powf(-1.0 / exponent);
    Ok(rescale(prof, s))
}

/// Member `s` of the scaling family of a profile.
pub fn rescale(prof: &ContinuumProfile, s: f64) -> ContinuumProfile {
    let amp = s.powf(1.0 / prof.p);
    ContinuumProfile {
        dim: prof.dim,
        p: prof.p,
        lambda_c: prof.lambda_c * s * s,
        step: prof.step / s,
        psi: prof.psi.iter().map(|v| amp * v).collect(),
        dpsi: prof.dpsi.iter().map(|v| amp * s * v).collect(),
    }
}

/// Unit-mass ground state for `(dim, p)`: shot at `lambda = -1`, then rescaled.
/// For `(1, 1)` the explicit sech profile is rescaled instead.
pub fn unit_mass_ground_state(dim: Dim, p: f64) -> Result<ContinuumProfile> {
    validate_exponent(dim, p)?;
    let base = if dim == Dim::One && p == 1.0 {
        explicit_ground_state_1d()
    } else {
        shoot_radial_ground_state(dim, p, -1.0)?
    };
    rescale_to_unit_mass(&base)
}

/// Composite Simpson over the radial table; `stride` 1 or 2.
fn radial_integral(prof: &ContinuumProfile, stride: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let h = prof.step * stride as f64;
    let idx: Vec<usize> = (0..prof.psi.len()).step_by(stride).collect();
    let usable = if idx.len() % 2 == 0 { idx.len() - 1 } else { idx.len() };
    let mut acc = 0.0;
    for (k, &i) in idx[..usable].iter().enumerate() {
        let r = i as f64 * prof.step;
        let w = if k == 0 || k == usable - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let jac = match prof.dim {
            Dim::One => 2.0,
            Dim::Two => 2.0 * std::f64::consts::PI * r,
        };
        acc += w * jac * f(prof.psi[i], prof.dpsi[i]);
    }
    acc * h / 3.0
}

/// `(H_c, N_c)` with `H_c = int |grad psi|^2 - 1/(p+1) |psi|^(2p+2)` and
/// `N_c = int psi^2`.
pub fn continuum_functionals(prof: &ContinuumProfile, p: f64) -> (f64, f64) {
    continuum_functionals_at(prof, p, 1)
}

/// Same as [`continuum_functionals`], plus the largest change when the
/// quadrature step is doubled.
pub fn continuum_functionals_checked(prof: &ContinuumProfile, p: f64) -> ((f64, f64), f64) {
    let fine = continuum_functionals_at(prof, p, 1);
    let coarse = continuum_functionals_at(prof, p, 2);
    let diff = (fine.0 - coarse.0).abs().max((fine.1 - coarse.1).abs());
    (fine, diff)
}

fn continuum_functionals_at(prof: &ContinuumProfile, p: f64, stride: usize) -> (f64, f64) {
    let grad = radial_integral(prof, stride, |_, d| d * d);
    let pot = radial_integral(prof, stride, |v, _| v.abs().powf(2.0 * p + 2.0));
    let mass = radial_integral(prof, stride, |v, _| v * v);
    (grad - pot / (p + 1.0), mass)
}
