//! Time integration of `i psi' = -mu^-2 Delta_1 psi - |psi|^(2p) psi` by
//! Strang splitting: the nonlinear flow is an exact pointwise phase rotation
//! and the linear flow is applied exactly in the sine basis of the box
//! interior. The boundary ring is held at zero.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{BreatherError, Result};
use crate::lattice::{validate_exponent, Dim, LatticeField, ModeLabel, ModeSpec};
use crate::solver::{ActiveBox, BreatherResult};
use crate::spectral::DirichletSpectrum;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexLatticeState {
    re: LatticeField,
    im: LatticeField,
    time: f64,
}

impl ComplexLatticeState {
    pub fn from_parts(re: LatticeField, im: LatticeField, time: f64) -> Result<Self> {
        re.check_compatible(&im)?;
        if !time.is_finite() {
            return Err(BreatherError::NonFinite("state time".into()));
        }
        Ok(Self { re, im, time })
    }

    pub fn from_real(f: &LatticeField) -> Self {
        Self { re: f.clone(), im: f.scaled(0.0), time: 0.0 }
    }

    pub fn zeros(dim: Dim, mesh: f64, radius: usize) -> Result<Self> {
        let z = LatticeField::zeros(dim, mesh, radius)?;
        Ok(Self { re: z.clone(), im: z, time: 0.0 })
    }

    pub fn re(&self) -> &LatticeField {
        &self.re
    }

    pub fn im(&self) -> &LatticeField {
        &self.im
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dim(&self) -> Dim {
        self.re.dim()
    }

    pub fn mesh(&self) -> f64 {
        self.re.mesh()
    }

    pub fn radius(&self) -> usize {
        self.re.radius()
    }

    /// Multiplies by `e^(i theta)`.
    pub fn rotated(&self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let mut out = self.clone();
        let re = out.re.values_mut();
        for (k, r) in re.iter_mut().enumerate() {
            *r = c * self.re.values()[k] - s * self.im.values()[k];
        }
        let im = out.im.values_mut();
        for (k, v) in im.iter_mut().enumerate() {
            *v = s * self.re.values()[k] + c * self.im.values()[k];
        }
        out
    }

    /// `max_l |a_l - b_l|`.
    pub fn max_distance(&self, other: &Self) -> Result<f64> {
        self.re.check_compatible(&other.re)?;
        let d = self
            .re
            .values()
            .iter()
            .zip(self.im.values())
            .zip(other.re.values().iter().zip(other.im.values()))
            .map(|((a, b), (c, d))| (a - c).hypot(b - d))
            .fold(0.0, f64::max);
        Ok(d)
    }

    /// `mu^n sum |psi|^2`.
    pub fn norm_d(&self) -> f64 {
        crate::lattice::norm_d(&self.re) + crate::lattice::norm_d(&self.im)
    }

    /// Complex extension of the lattice energy:
    /// `mu^n [ sum_bonds |psi_j - psi_l|^2 / mu^2 - 1/(p+1) sum |psi|^(2p+2) ]`.
    pub fn hamiltonian_d(&self, p: f64) -> Result<f64> {
        validate_exponent(self.dim(), p)?;
        let mu = self.mesh();
        let kinetic =
            (crate::lattice::dirichlet_form(&self.re) + crate::lattice::dirichlet_form(&self.im)) / (mu * mu);
        let potential: f64 = self
            .re
            .values()
            .iter()
            .zip(self.im.values())
            .map(|(a, b)| (a * a + b * b).powf(p + 1.0))
            .sum();
        Ok(self.dim().cell_volume(mu) * (kinetic - potential / (p + 1.0)))
    }

    /// `# dim=.. mu=.. radius=.. time=..` header, then `i[,j],re,im` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# dim={} mu={:.16e} radius={} time={:.16e}",
            self.dim().n(),
            self.mesh(),
            self.radius(),
            self.time
        )?;
        for (k, (a, b)) in self.re.values().iter().zip(self.im.values()).enumerate() {
            let l = self.re.multi_index(k);
            match self.dim() {
                Dim::One => writeln!(w, "{},{:.16e},{:.16e}", l[0], a, b)?,
                Dim::Two => writeln!(w, "{},{},{:.16e},{:.16e}", l[0], l[1], a, b)?,
            }
        }
        Ok(())
    }
}

/// Composition used for one time step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Splitting {
    /// Half nonlinear, full linear, half nonlinear: second order.
    #[default]
    Strang,
    /// Triple-jump composition of three Strang steps: fourth order.
    Yoshida4,
}

impl Splitting {
    /// Substep fractions of `dt`.
    fn fractions(self) -> Vec<f64> {
        match self {
            Splitting::Strang => vec![1.0],
            Splitting::Yoshida4 => {
                let c = 2f64.powf(1.0 / 3.0);
                let w1 = 1.0 / (2.0 - c);
                vec![w1, -c * w1, w1]
            }
        }
    }
}

/// Split-step propagator on one box; reusable across calls.
pub struct Propagator {
    abox: ActiveBox,
    geometry: (Dim, f64, usize),
    spectrum: DirichletSpectrum,
    p: f64,
    inv_mu2: f64,
    /// Whether the nonlinear phase is applied (off gives the free lattice flow).
    nonlinear: bool,
    splitting: Splitting,
}

impl Propagator {
    pub fn new(dim: Dim, mesh: f64, radius: usize, p: f64) -> Result<Self> {
        validate_exponent(dim, p)?;
        Self::build(dim, mesh, radius, p, true)
    }

    /// Same box with the nonlinear term switched off.
    pub fn linear(dim: Dim, mesh: f64, radius: usize) -> Result<Self> {
        Self::build(dim, mesh, radius, 0.0, false)
    }

    fn build(dim: Dim, mesh: f64, radius: usize, p: f64, nonlinear: bool) -> Result<Self> {
        LatticeField::zeros(dim, mesh, radius)?;
        let st = ModeSpec::new(dim, ModeLabel::SieversTakeno)?;
        let abox = ActiveBox::new(dim, mesh, radius, &st);
        Ok(Self {
            abox,
            geometry: (dim, mesh, radius),
            spectrum: DirichletSpectrum::new(abox.shape),
            p,
            inv_mu2: 1.0 / (mesh * mesh),
            nonlinear,
            splitting: Splitting::Strang,
        })
    }

    pub fn with_splitting(mut self, splitting: Splitting) -> Self {
        self.splitting = splitting;
        self
    }

    fn phase(&self, re: &mut [f64], im: &mut [f64], tau: f64) {
        if !self.nonlinear {
            return;
        }
        for (a, b) in re.iter_mut().zip(im.iter_mut()) {
            let m = (*a * *a + *b * *b).powf(self.p);
            let (s, c) = (tau * m).sin_cos();
            let (x, y) = (*a, *b);
            *a = c * x - s * y;
            *b = s * x + c * y;
        }
    }

    /// Exact linear flow.
    fn kinetic(&self, re: &mut [f64], im: &mut [f64], dt: f64) {
        let w = dt * self.inv_mu2;
        self.spectrum.apply_complex(re, im, |ev| {
            let (s, c) = (w * ev).sin_cos();
            (c, -s)
        });
    }

    /// Advances `s0` by `steps` steps of size `dt`. Every `every` steps (never
    /// if 0) and at the end, `observe` receives the step number and state.
    pub fn run(
        &self,
        s0: &ComplexLatticeState,
        dt: f64,
        steps: usize,
        every: usize,
        mut observe: impl FnMut(usize, &ComplexLatticeState) -> Result<()>,
    ) -> Result<ComplexLatticeState> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(BreatherError::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if (s0.dim(), s0.mesh(), s0.radius()) != self.geometry {
            return Err(BreatherError::InvalidArgument("state does not match the propagator box".into()));
        }
        let mut re = self.abox.gather(&s0.re);
        let mut im = self.abox.gather(&s0.im);
        let mut state = s0.clone();
        let fractions = self.splitting.fractions();
        for step in 1..=steps {
            let before = sum_sq(&re) + sum_sq(&im);
            for &f in &fractions {
                let h = f * dt;
                self.phase(&mut re, &mut im, 0.5 * h);
                self.kinetic(&mut re, &mut im, h);
                self.phase(&mut re, &mut im, 0.5 * h);
            }
            // every substep is unitary; rescaling removes the rounding bias of
            // the transform normalisation, which otherwise grows linearly in time
            let after = sum_sq(&re) + sum_sq(&im);
            if after > 0.0 {
                let f = (before / after).sqrt();
                re.iter_mut().chain(im.iter_mut()).for_each(|v| *v *= f);
            }
            if re.iter().chain(&im).any(|v| !v.is_finite()) {
                return Err(BreatherError::NonFinite(format!("state at step {step}")));
            }
            if step == steps || (every > 0 && step % every == 0) {
                state = ComplexLatticeState {
                    re: self.abox.scatter(&re)?,
                    im: self.abox.scatter(&im)?,
                    time: s0.time + step as f64 * dt,
                };
                observe(step, &state)?;
            }
        }
        Ok(state)
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Evolves to time `t` with steps no larger than `dt` (the step is shrunk so
/// that a whole number of steps lands on `t`).
pub fn evolve(s0: &ComplexLatticeState, p: f64, t: f64, dt: f64) -> Result<ComplexLatticeState> {
    if !(t > 0.0) || !t.is_finite() || !(dt > 0.0) || !dt.is_finite() {
        return Err(BreatherError::InvalidArgument(format!("need T > 0 and dt > 0, got T={t}, dt={dt}")));
    }
    let steps = (t / dt - 1e-9).ceil().max(1.0) as usize;
    let prop = Propagator::new(s0.dim(), s0.mesh(), s0.radius(), p)?;
    prop.run(s0, t / steps as f64, steps, 0, |_, _| Ok(()))
}

/// `(|N_d(end) - N_d(start)|, |H_d(end) - H_d(start)|)`.
pub fn conserved_drift(start: &ComplexLatticeState, end: &ComplexLatticeState, p: f64) -> Result<(f64, f64)> {
    start.re.check_compatible(&end.re)?;
    let dn = (end.norm_d() - start.norm_d()).abs();
    let dh = (end.hamiltonian_d(p)? - start.hamiltonian_d(p)?).abs();
    Ok((dn, dh))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodSummary {
    #[serde(rename = "T")]
    pub period: f64,
    pub dt: f64,
    #[serde(rename = "dN")]
    pub d_n: f64,
    #[serde(rename = "dH")]
    pub d_h: f64,
    pub return_defect: f64,
}

impl PeriodSummary {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// Evolves a converged breather over one period `2 pi / |lambda|` with
/// `steps` steps and compares against `e^(-i lambda T) psi`.
pub fn breather_period_check(res: &BreatherResult, steps: usize) -> Result<(PeriodSummary, ComplexLatticeState)> {
    breather_period_check_with(res, steps, Splitting::Strang)
}

pub fn breather_period_check_with(
    res: &BreatherResult,
    steps: usize,
    splitting: Splitting,
) -> Result<(PeriodSummary, ComplexLatticeState)> {
    if steps == 0 {
        return Err(BreatherError::InvalidArgument("need at least one step".into()));
    }
    let period = res.period();
    let dt = period / steps as f64;
    let s0 = ComplexLatticeState::from_real(&res.field);
    let prop = Propagator::new(s0.dim(), s0.mesh(), s0.radius(), res.p)?.with_splitting(splitting);
    let end = prop.run(&s0, dt, steps, 0, |_, _| Ok(()))?;
    let expected = s0.rotated(-res.lambda * period);
    let (d_n, d_h) = conserved_drift(&s0, &end, res.p)?;
    let summary = PeriodSummary { period, dt, d_n, d_h, return_defect: end.max_distance(&expected)? };
    Ok((summary, end))
}
