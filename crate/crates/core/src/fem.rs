//! P1 finite elements on the lattice mesh.
//!
//! In 1D the basis is the hat function on nodes `mu (j + offset)`. In 2D each
//! cell `[j, j+1] x [k, k+1]` (in mesh units) is split by the anti-diagonal
//! from `(j+1, k)` to `(j, k+1)` into a lower triangle `T+` (`a + b <= 1`)
//! and an upper triangle `T-`; the interpolant is affine on each.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuum::ContinuumProfile;
use crate::error::{BreatherError, Result};
use crate::lattice::{Dim, LatticeField, ModeSpec};

/// Continuous piecewise-linear function with nodal values taken from a
/// lattice field, nodes shifted by the mode offset.
#[derive(Clone, Debug)]
pub struct FemFunction {
    base: LatticeField,
    mode: ModeSpec,
}

/// Both sides of an exact identity, as exported to JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: String,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

impl IdentityReport {
    pub fn new(identity: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let abs_err = (lhs - rhs).abs();
        let scale = lhs.abs().max(rhs.abs());
        let rel_err = if scale > 0.0 { abs_err / scale } else { 0.0 };
        Self { identity: identity.into(), lhs, rhs, abs_err, rel_err }
    }
}

/// One linear element, in mesh units relative to `corner`.
///
/// A point with local coordinates `(a, b)` sits at
/// `mu * (corner + dir * (a, b))` and carries the value
/// `v[0] + a (v[1] - v[0]) + b (v[2] - v[0])`. In 1D `b` and `v[2]` are unused.
#[derive(Clone, Copy, Debug)]
struct Element {
    corner: [f64; 2],
    dir: f64,
    v: [f64; 3],
}

/// Quadrature rule on the reference element (unit interval or the triangle
/// `a, b >= 0, a + b <= 1`), weights summing to its measure.
#[derive(Clone, Debug)]
pub(crate) struct Rule {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl Rule {
    fn simpson() -> Self {
        Self { points: vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]], weights: vec![1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0] }
    }

    /// Edge midpoints; exact for quadratics on triangles.
    fn edge_midpoints() -> Self {
        Self { points: vec![[0.5, 0.0], [0.0, 0.5], [0.5, 0.5]], weights: vec![1.0 / 6.0; 3] }
    }

    fn gauss_interval(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        Self { points: x.iter().map(|&t| [t, 0.0]).collect(), weights: w }
    }

    /// Collapsed (Duffy) tensor Gauss rule on the reference triangle.
    fn gauss_triangle(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (s, ws) in x.iter().zip(&w) {
            for (t, wt) in x.iter().zip(&w) {
                points.push([*s, (1.0 - s) * t]);
                weights.push(ws * wt * (1.0 - s));
            }
        }
        Self { points, weights }
    }

    fn gauss(dim: Dim, n: usize) -> Self {
        match dim {
            Dim::One => Self::gauss_interval(n),
            Dim::Two => Self::gauss_triangle(n),
        }
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[n - 1 - i] = 0.5 * (1.0 + t);
        w[n - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

impl FemFunction {
    pub fn new(base: LatticeField, mode: ModeSpec) -> Result<Self> {
        if base.dim() != mode.dim() {
            return Err(BreatherError::DimensionMismatch { left: base.dim().n(), right: mode.dim().n() });
        }
        Ok(Self { base, mode })
    }

    pub fn base(&self) -> &LatticeField {
        &self.base
    }

    pub fn mode(&self) -> &ModeSpec {
        &self.mode
    }

    pub fn mesh(&self) -> f64 {
        self.base.mesh()
    }

    fn dim(&self) -> Dim {
        self.base.dim()
    }

    /// Physical position of lattice node `l`.
    pub fn node(&self, l: [i64; 2]) -> [f64; 2] {
        let off = self.mode.offset();
        let mu = self.mesh();
        [mu * (l[0] as f64 + off[0]), mu * (l[1] as f64 + off[1])]
    }

    /// Cell index and local coordinates of `z`; points on the anti-diagonal
    /// have `a + b == 1` and are assigned to `T+`.
    fn locate(&self, z: &[f64]) -> ([i64; 2], [f64; 2]) {
        let off = self.mode.offset();
        let mu = self.mesh();
        let mut cell = [0i64; 2];
        let mut loc = [0.0; 2];
        for axis in 0..self.dim().n() {
            let u = z[axis] / mu - off[axis];
            let j = u.floor();
            cell[axis] = j as i64;
            loc[axis] = u - j;
        }
        (cell, loc)
    }

    fn element_at(&self, cell: [i64; 2], upper: bool) -> Element {
        let f = |a: i64, b: i64| self.base.get([cell[0] + a, cell[1] + b]);
        let (j, k) = (cell[0] as f64, cell[1] as f64);
        match self.dim() {
            Dim::One => Element { corner: [j, 0.0], dir: 1.0, v: [f(0, 0), f(1, 0), 0.0] },
            Dim::Two if !upper => Element { corner: [j, k], dir: 1.0, v: [f(0, 0), f(1, 0), f(0, 1)] },
            Dim::Two => Element { corner: [j + 1.0, k + 1.0], dir: -1.0, v: [f(1, 1), f(0, 1), f(1, 0)] },
        }
    }

    /// Value of the interpolant at a physical point.
    pub fn evaluate(&self, z: &[f64]) -> f64 {
        let (cell, [a, b]) = self.locate(z);
        match self.dim() {
            Dim::One => {
                let e = self.element_at(cell, false);
                e.v[0] + a * (e.v[1] - e.v[0])
            }
            Dim::Two => {
                if a + b <= 1.0 {
                    let e = self.element_at(cell, false);
                    e.v[0] + a * (e.v[1] - e.v[0]) + b * (e.v[2] - e.v[0])
                } else {
                    let e = self.element_at(cell, true);
                    let (a, b) = (1.0 - a, 1.0 - b);
                    e.v[0] + a * (e.v[1] - e.v[0]) + b * (e.v[2] - e.v[0])
                }
            }
        }
    }

    /// `int |grad Psi|^2` as the bond sum `mu^(n-2) sum_bonds (f_j - f_l)^2`.
    pub fn gradient_energy(&self) -> f64 {
        let n = self.dim().n() as i32;
        self.mesh().powi(n - 2) * crate::lattice::dirichlet_form(&self.base)
    }

    /// `int |grad Psi|^2` by one-point quadrature of the constant gradient on each element.
    pub fn gradient_energy_quadrature(&self) -> f64 {
        let rule = match self.dim() {
            Dim::One => Rule { points: vec![[0.5, 0.0]], weights: vec![1.0] },
            Dim::Two => Rule { points: vec![[1.0 / 3.0, 1.0 / 3.0]], weights: vec![0.5] },
        };
        self.integrate(&rule, |_, _, g| g[0] * g[0] + g[1] * g[1])
    }

    /// `int Psi^2`, exact up to roundoff.
    pub fn l2_squared(&self) -> f64 {
        self.integrate(&self.quadratic_rule(), |_, v, _| v * v)
    }

    fn quadratic_rule(&self) -> Rule {
        match self.dim() {
            Dim::One => Rule::simpson(),
            Dim::Two => Rule::edge_midpoints(),
        }
    }

    /// Both sides of `mu^n sum f^2 = int Psi^2 + (mu^2/6) int (|grad Psi|^2 - Psi_x Psi_y)`,
    /// the mixed term present only in 2D.
    pub fn l2_mass_identity_check(&self) -> (f64, f64) {
        let lhs = crate::lattice::norm_d(&self.base);
        let mu2 = self.mesh() * self.mesh();
        let rule = self.quadratic_rule();
        let two_d = self.dim() == Dim::Two;
        let rhs = self.integrate(&rule, |_, v, g| {
            let mixed = if two_d { g[0] * g[1] } else { 0.0 };
            v * v + mu2 / 6.0 * (g[0] * g[0] + g[1] * g[1] - mixed)
        });
        (lhs, rhs)
    }

    pub fn gradient_identity_report(&self) -> IdentityReport {
        IdentityReport::new("gradient_energy", self.gradient_energy(), self.gradient_energy_quadrature())
    }

    pub fn mass_identity_report(&self) -> IdentityReport {
        let (lhs, rhs) = self.l2_mass_identity_check();
        IdentityReport::new("l2_mass", lhs, rhs)
    }

    /// `int |Psi|^(q+2) - mu^n sum |f|^(q+2)`.
    pub fn euler_maclaurin_residual(&self, q: f64) -> Result<f64> {
        Ok(self.euler_maclaurin_residual_checked(q)?.0)
    }

    /// Residual together with the change of the integral between Gauss orders 8 and 12.
    pub fn euler_maclaurin_residual_checked(&self, q: f64) -> Result<(f64, f64)> {
        if !(q >= 1.0) || !q.is_finite() {
            return Err(BreatherError::InvalidArgument(format!("exponent q must be >= 1, got {q}")));
        }
        let e = q + 2.0;
        let coarse = self.integrate(&Rule::gauss(self.dim(), 8), |_, v, _| v.abs().powf(e));
        let fine = self.integrate(&Rule::gauss(self.dim(), 12), |_, v, _| v.abs().powf(e));
        let sum: f64 = self.base.values().iter().map(|v| v.abs().powf(e)).sum();
        let discrete = self.dim().cell_volume(self.mesh()) * sum;
        Ok((fine - discrete, (fine - coarse).abs()))
    }

    /// `|| Psi - g ||_{H^1}` for a smooth `g` given with its gradient.
    pub fn h1_error(&self, g: impl Fn(&[f64; 2]) -> (f64, [f64; 2]) + Sync) -> f64 {
        let rule = Rule::gauss(self.dim(), 8);
        self.integrate(&rule, |z, v, d| {
            let (gv, gd) = g(&z);
            let e0 = v - gv;
            let ex = d[0] - gd[0];
            let ey = d[1] - gd[1];
            e0 * e0 + ex * ex + ey * ey
        })
        .sqrt()
    }

    /// `|| Psi - psi ||_{H^1}` against a radial profile.
    pub fn h1_error_to_profile(&self, prof: &ContinuumProfile) -> f64 {
        let n = self.dim().n();
        self.h1_error(|z| (prof.value(&z[..n]), prof.gradient(&z[..n])))
    }

    /// Integrates `g(z, Psi, grad Psi)` over every element touching the box.
    /// Rows are summed in a fixed order, so the result does not depend on
    /// the thread count.
    fn integrate(&self, rule: &Rule, g: impl Fn([f64; 2], f64, [f64; 2]) -> f64 + Sync) -> f64 {
        let k = self.base.radius() as i64;
        let mu = self.mesh();
        let off = self.mode.offset();
        let jac = self.dim().cell_volume(mu);
        let dim = self.dim();
        let element_sum = |e: &Element| -> f64 {
            let inv = e.dir / mu;
            let grad = [(e.v[1] - e.v[0]) * inv, (e.v[2] - e.v[0]) * inv];
            let mut acc = 0.0;
            for (pt, w) in rule.points.iter().zip(&rule.weights) {
                let [a, b] = *pt;
                let v = e.v[0] + a * (e.v[1] - e.v[0]) + b * (e.v[2] - e.v[0]);
                let z = [
                    mu * (e.corner[0] + e.dir * a + off[0]),
                    if dim == Dim::Two { mu * (e.corner[1] + e.dir * b + off[1]) } else { 0.0 },
                ];
                let gr = if dim == Dim::Two { grad } else { [grad[0], 0.0] };
                acc += w * g(z, v, gr);
            }
            acc
        };
        let rows: Vec<f64> = (-k - 1..=k)
            .into_par_iter()
            .map(|j| match dim {
                Dim::One => element_sum(&self.element_at([j, 0], false)),
                Dim::Two => (-k - 1..=k)
                    .map(|c| {
                        element_sum(&self.element_at([j, c], false))
                            + element_sum(&self.element_at([j, c], true))
                    })
                    .sum(),
            })
            .collect();
        jac * rows.iter().sum::<f64>()
    }
}

/// Samples `g` at the mode-shifted nodes `mu (l + offset)`.
pub fn project(
    g: impl Fn(&[f64]) -> f64,
    dim: Dim,
    mesh: f64,
    radius: usize,
    mode: &ModeSpec,
) -> Result<LatticeField> {
    if dim != mode.dim() {
        return Err(BreatherError::DimensionMismatch { left: dim.n(), right: mode.dim().n() });
    }
    let off = mode.offset();
    let field = LatticeField::from_fn(dim, mesh, radius, |l| {
        let z = [mesh * (l[0] as f64 + off[0]), mesh * (l[1] as f64 + off[1])];
        g(&z[..dim.n()])
    })?;
    Ok(field)
}

/// Nodal projection of a continuum profile.
pub fn project_profile(prof: &ContinuumProfile, mesh: f64, radius: usize, mode: &ModeSpec) -> Result<LatticeField> {
    project(|z| prof.value(z), prof.dim(), mesh, radius, mode)
}
