//! Matrix-free symmetric solvers: preconditioned MINRES for indefinite linear
//! systems and single-vector LOBPCG for the lowest eigenvalue.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{BreatherError, Result};
use crate::grid::{axpy, dot, norm2};

/// Solves `A x = b` for symmetric `A` with an SPD preconditioner `m_inv`.
/// Returns the iterate and the number of steps taken; the iterate after
/// `max_iter` steps is returned even if `rtol` is not met.
pub(crate) fn minres(
    mut apply_a: impl FnMut(&[f64], &mut [f64]),
    mut m_inv: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> (Vec<f64>, usize) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = vec![0.0; n];
    m_inv(b, &mut y);
    let beta1_sq = dot(b, &y);
    if beta1_sq <= 0.0 {
        return (x, 0);
    }
    let beta1 = beta1_sq.sqrt();
    let mut r2 = r1.clone();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0_f64, 0.0_f64);
    let mut itn = 0;
    while itn < max_iter {
        itn += 1;
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        apply_a(&v, &mut y);
        if itn >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        m_inv(&r2, &mut y);
        oldb = beta;
        let beta_sq = dot(&r2, &y);
        beta = beta_sq.max(0.0).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        }
        axpy(phi, &w, &mut x);
        if phibar / beta1 < rtol || beta == 0.0 {
            break;
        }
    }
    (x, itn)
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct LobpcgOptions {
    pub rtol: f64,
    /// Absolute floor added to `|theta|` in the stopping test.
    pub atol: f64,
    pub max_iter: usize,
}

/// Lowest eigenpair of a symmetric operator restricted to the range of the
/// orthogonal projector `project`, preconditioned by `precond`. Returns the
/// eigenvalue and a unit eigenvector.
pub(crate) fn lobpcg_lowest(
    mut apply_l: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    project: impl Fn(&mut [f64]),
    start: Vec<f64>,
    opts: LobpcgOptions,
) -> Result<(f64, Vec<f64>)> {
    let n = start.len();
    let mut x = start;
    project(&mut x);
    let nx = norm2(&x);
    if nx == 0.0 {
        return Err(BreatherError::InvalidArgument("start vector lies outside the subspace".into()));
    }
    x.iter_mut().for_each(|v| *v /= nx);
    let mut lx = vec![0.0; n];
    apply_l(&x, &mut lx);
    let mut theta = dot(&x, &lx);
    let mut p: Option<Vec<f64>> = None;
    let mut r = vec![0.0; n];
    let mut res = f64::INFINITY;

    for _ in 0..opts.max_iter {
        for i in 0..n {
            r[i] = lx[i] - theta * x[i];
        }
        project(&mut r);
        res = norm2(&r);
        if res <= opts.rtol * theta.abs() + opts.atol {
            return Ok((theta, x));
        }
        let mut wv = vec![0.0; n];
        precond(&r, &mut wv);
        project(&mut wv);

        let mut basis: Vec<Vec<f64>> = vec![x.clone()];
        for cand in std::iter::once(wv).chain(p.take()) {
            if let Some(q) = orthonormalize_against(cand, &basis) {
                basis.push(q);
            }
        }
        let k = basis.len();
        let lq: Vec<Vec<f64>> = basis
            .iter()
            .enumerate()
            .map(|(i, q)| {
                if i == 0 {
                    lx.clone()
                } else {
                    let mut out = vec![0.0; n];
                    apply_l(q, &mut out);
                    out
                }
            })
            .collect();
        let mut g = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = 0.5 * (dot(&basis[i], &lq[j]) + dot(&basis[j], &lq[i]));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(g);
        let imin = (0..k)
            .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
            .expect("non-empty basis");
        let c = eig.eigenvectors.column(imin);

        let mut xn = vec![0.0; n];
        let mut lxn = vec![0.0; n];
        let mut pn = vec![0.0; n];
        for i in 0..k {
            axpy(c[i], &basis[i], &mut xn);
            axpy(c[i], &lq[i], &mut lxn);
            if i > 0 {
                axpy(c[i], &basis[i], &mut pn);
            }
        }
        let nrm = norm2(&xn);
        xn.iter_mut().for_each(|v| *v /= nrm);
        lxn.iter_mut().for_each(|v| *v /= nrm);
        x = xn;
        lx = lxn;
        theta = dot(&x, &lx);
        p = (norm2(&pn) > 0.0).then_some(pn);
    }
    Err(BreatherError::EigenNotConverged { iterations: opts.max_iter, residual: res })
}

fn orthonormalize_against(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n0 = norm2(&v);
    if n0 == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, &v);
            axpy(-c, q, &mut v);
        }
    }
    let n1 = norm2(&v);
    if n1 <= 1e-10 * n0 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n1);
    Some(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, shift: f64) -> impl Fn(&[f64], &mut [f64]) {
        move |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut acc = (2.0 + shift) * x[i];
                if i > 0 {
                    acc -= x[i - 1];
                }
                if i + 1 < n {
                    acc -= x[i + 1];
                }
                y[i] = acc;
            }
        }
    }

    #[test]
    fn minres_solves_indefinite_system() {
        let n = 50;
        let a = tridiag(n, -0.5);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let (x, its) = minres(&a, |r, z| z.copy_from_slice(r), &b, 1e-13, 500);
        let mut ax = vec![0.0; n];
        a(&x, &mut ax);
        let err = ax.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "residual {err} after {its} its");
    }

    #[test]
    fn lobpcg_finds_lowest_dirichlet_mode() {
        let n = 40;
        let a = tridiag(n, 0.0);
        let start: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i as f64).cos()).collect();
        let opts = LobpcgOptions { rtol: 1e-10, atol: 0.0, max_iter: 500 };
        let (value, v) = lobpcg_lowest(&a, |r, z| z.copy_from_slice(r), |_| {}, start, opts).unwrap();
        let exact = 4.0 * (std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin().powi(2);
        assert!((value - exact).abs() < 1e-12, "{value} vs {exact}");
        let mut av = vec![0.0; n];
        a(&v, &mut av);
        let res = av.iter().zip(&v).map(|(p, q)| (p - value * q).abs()).fold(0.0, f64::max);
        assert!(res < 1e-9 && (norm2(&v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lobpcg_respects_projection() {
        let n = 40;
        let a = tridiag(n, 0.0);
        // restrict to vectors antisymmetric about the centre: lowest is the second mode
        let project = |v: &mut [f64]| {
            for i in 0..n / 2 {
                let j = n - 1 - i;
                let m = 0.5 * (v[i] - v[j]);
                v[i] = m;
                v[j] = -m;
            }
        };
        let start: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let opts = LobpcgOptions { rtol: 1e-10, atol: 0.0, max_iter: 500 };
        let (value, _) = lobpcg_lowest(&a, |r, z| z.copy_from_slice(r), project, start, opts).unwrap();
        let exact = 4.0 * (2.0 * std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin().powi(2);
        assert!((value - exact).abs() < 1e-12);
    }
}
