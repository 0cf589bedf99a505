use std::io::Write;

use dnls_breather::continuum::shoot_radial_ground_state;
use dnls_breather::solver::SolverOptions;
use dnls_breather::{
    auto_radius, coercivity_check, conserved_drift, convergence_study_with, solve_from_profile,
    unit_mass_ground_state, BreatherError, BreatherResult, ComplexLatticeState, ContinuumProfile,
    Dim, FemFunction, LatticeField, ModeSpec, PeriodSummary, Propagator,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{RadiusSetting, RunConfig};
use crate::{Artifacts, CliError};

/// Relative tolerance of the finite-element identities in `fem-check`.
const FEM_REL_TOL: f64 = 1e-12;

fn options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions { tol: cfg.tol, max_iter: cfg.max_iter, ..SolverOptions::default() }
}

fn radius(cfg: &RunConfig, prof: &ContinuumProfile, mu: f64) -> Result<usize, CliError> {
    Ok(match cfg.radius {
        RadiusSetting::Auto => auto_radius(prof, mu)?,
        RadiusSetting::Explicit(k) => k,
    })
}

pub fn ground_state(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let prof = match cfg.lambda {
        Some(l) => shoot_radial_ground_state(cfg.dimension(), cfg.p, l)?,
        None => unit_mass_ground_state(cfg.dimension(), cfg.p)?,
    };
    let mut w = art.create("profile.csv")?;
    prof.write_csv(&mut w)?;
    w.flush()?;
    art.json("profile.json", &prof.summary())
}

#[derive(Serialize)]
struct Failure {
    error: String,
    /// Residual before each Newton step, when the solver got that far.
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<Vec<f64>>,
}

/// Solves, or records `failure.json` and returns the error.
fn solve(cfg: &RunConfig, art: &mut Artifacts) -> Result<BreatherResult, CliError> {
    let prof = unit_mass_ground_state(cfg.dimension(), cfg.p)?;
    let mu = cfg.mu.expect("validated");
    let k = radius(cfg, &prof, mu)?;
    match solve_from_profile(&prof, &cfg.mode_spec(), mu, k, &options(cfg)) {
        Ok(res) => Ok(res),
        Err(e) => {
            let trace = match &e {
                BreatherError::MaxIterations { trace, .. } | BreatherError::BasinFailure { trace, .. } => {
                    Some(trace.clone())
                }
                _ => None,
            };
            art.json("failure.json", &Failure { error: e.to_string(), trace })?;
            Err(e.into())
        }
    }
}

pub fn breather(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let mut res = solve(cfg, art)?;
    if cfg.coercivity {
        res.coercivity_margin = Some(coercivity_check(&res)?);
    }
    let mut w = art.create("field.csv")?;
    res.field.write_csv(&mut w)?;
    w.flush()?;
    art.json("result.json", &res.summary())
}

pub fn convergence(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let prof = unit_mass_ground_state(cfg.dimension(), cfg.p)?;
    let mus = cfg.mus.as_deref().expect("validated");
    let rep = convergence_study_with(&prof, &cfg.mode_spec(), mus, &options(cfg))?;
    let mut w = art.create("convergence.csv")?;
    rep.write_csv(&mut w)?;
    w.flush()?;
    art.json("convergence.json", &rep)?;
    if rep.partial {
        let failed = rep.rows.iter().filter(|r| r.failure.is_some()).count();
        return Err(CliError::Solver(format!("{failed} of {} meshes failed; report is partial", rep.rows.len())));
    }
    Ok(())
}

#[derive(Serialize)]
struct TrialRow {
    trial: usize,
    mode: String,
    mu: f64,
    radius: usize,
    gradient_rel: f64,
    mass_rel: f64,
    /// `max|f|` over the sup bound `2 mu^(1/2 - n/2) ||f||_Q`.
    sup_ratio: f64,
    pass: bool,
}

#[derive(Serialize)]
struct FemCheckSummary {
    dim: usize,
    trials: usize,
    seed: u64,
    tolerance: f64,
    max_gradient_rel: f64,
    max_mass_rel: f64,
    max_sup_ratio: f64,
    failures: usize,
}

pub fn fem_check(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let dim = cfg.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let modes = ModeSpec::all(dim);
    let mut rows = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let mu = rng.gen_range(0.05..2.0);
        let k: usize = match dim {
            Dim::One => rng.gen_range(2..40),
            Dim::Two => rng.gen_range(2..12),
        };
        let mode = modes[rng.gen_range(0..modes.len())];
        let len = (2 * k + 1).pow(dim.n() as u32);
        let values = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let field = LatticeField::from_values(dim, mu, k, values)?;
        let (sup, bound) = dnls_breather::sup_bound_check(&field);
        let fem = FemFunction::new(field, mode)?;
        let g = fem.gradient_identity_report().rel_err;
        let m = fem.mass_identity_report().rel_err;
        rows.push(TrialRow {
            trial,
            mode: mode.label().to_string(),
            mu,
            radius: k,
            gradient_rel: g,
            mass_rel: m,
            sup_ratio: sup / bound,
            pass: g <= FEM_REL_TOL && m <= FEM_REL_TOL && sup <= bound,
        });
    }
    let mut w = art.create("fem_check.csv")?;
    writeln!(w, "trial,mode,mu,radius,gradient_rel,mass_rel,sup_ratio,pass")?;
    for r in &rows {
        writeln!(
            w,
            "{},{},{:.16e},{},{:.6e},{:.6e},{:.6e},{}",
            r.trial, r.mode, r.mu, r.radius, r.gradient_rel, r.mass_rel, r.sup_ratio, r.pass
        )?;
    }
    w.flush()?;
    let max = |f: fn(&TrialRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let summary = FemCheckSummary {
        dim: dim.n(),
        trials: cfg.trials,
        seed: cfg.seed,
        tolerance: FEM_REL_TOL,
        max_gradient_rel: max(|r| r.gradient_rel),
        max_mass_rel: max(|r| r.mass_rel),
        max_sup_ratio: max(|r| r.sup_ratio),
        failures: rows.iter().filter(|r| !r.pass).count(),
    };
    art.json("fem_check.json", &summary)?;
    if summary.failures > 0 {
        return Err(CliError::Check(format!("{} of {} trials failed", summary.failures, cfg.trials)));
    }
    Ok(())
}

#[derive(Serialize)]
struct EvolveSummary {
    #[serde(flatten)]
    period: PeriodSummary,
    periods: usize,
    steps_per_period: usize,
    lambda: f64,
}

pub fn evolve(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let res = solve(cfg, art)?;
    let s0 = ComplexLatticeState::from_real(&res.field);
    let period = res.period();
    let dt = period / cfg.steps as f64;
    let total = cfg.steps * cfg.periods;
    let prop = Propagator::new(s0.dim(), s0.mesh(), s0.radius(), res.p)?.with_splitting(cfg.splitting);
    let mut snapshot = |step: usize, st: &ComplexLatticeState| -> dnls_breather::Result<()> {
        if cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0 {
            let mut w = art.create(&format!("snapshots/step_{step:08}.csv")).map_err(io_error)?;
            st.write_csv(&mut w)?;
            w.flush()?;
        }
        Ok(())
    };
    snapshot(0, &s0)?;
    let end = prop.run(&s0, dt, total, cfg.snapshot_every, &mut snapshot)?;
    let mut w = art.create("final.csv")?;
    end.write_csv(&mut w)?;
    w.flush()?;
    let expected = s0.rotated(-res.lambda * period * cfg.periods as f64);
    let (d_n, d_h) = conserved_drift(&s0, &end, res.p)?;
    let summary = EvolveSummary {
        period: PeriodSummary { period, dt, d_n, d_h, return_defect: end.max_distance(&expected)? },
        periods: cfg.periods,
        steps_per_period: cfg.steps,
        lambda: res.lambda,
    };
    art.json("evolve.json", &summary)
}

fn io_error(e: CliError) -> BreatherError {
    BreatherError::Io(std::io::Error::other(e.to_string()))
}
