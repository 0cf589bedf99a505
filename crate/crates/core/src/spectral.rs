//! Spectral calculus of the Dirichlet lattice Laplacian on a box, via the
//! type-I discrete sine transform along each axis.

use std::sync::Arc;

use rayon::prelude::*;
use rustdct::{DctPlanner, Dst1};

use crate::grid::Shape;

/// `dst[c * rows + r] = src[r * cols + c]`.
fn transpose(src: &[f64], dst: &mut [f64], rows: usize, cols: usize) {
    dst.par_chunks_mut(rows).enumerate().for_each(|(c, out)| {
        for (r, o) in out.iter_mut().enumerate() {
            *o = src[r * cols + c];
        }
    });
}

pub(crate) struct DirichletSpectrum {
    shape: Shape,
    plans: Vec<Arc<dyn Dst1<f64>>>,
    /// Eigenvalues of the 1D `-Delta_1` along each axis.
    eig: [Vec<f64>; 2],
}

impl DirichletSpectrum {
    pub fn new(shape: Shape) -> Self {
        let mut planner = DctPlanner::new();
        let plans = (0..shape.dims).map(|a| planner.plan_dst1(shape.n[a])).collect();
        let axis_eig = |n: usize| -> Vec<f64> {
            (1..=n)
                .map(|k| {
                    let s = (std::f64::consts::PI * k as f64 / (2.0 * (n + 1) as f64)).sin();
                    4.0 * s * s
                })
                .collect()
        };
        let eig = [axis_eig(shape.n[0]), if shape.dims == 2 { axis_eig(shape.n[1]) } else { vec![0.0] }];
        Self { shape, plans, eig }
    }

    /// Unnormalised DST-I along every axis.
    fn transform(&self, v: &mut [f64]) {
        let [n0, n1] = self.shape.n;
        if self.shape.dims == 1 {
            self.plans[0].process_dst1(v);
            return;
        }
        self.rows(1, v, n1);
        let mut t = vec![0.0; v.len()];
        transpose(v, &mut t, n0, n1);
        self.rows(0, &mut t, n0);
        transpose(&t, v, n1, n0);
    }

    fn rows(&self, axis: usize, v: &mut [f64], len: usize) {
        let plan = &self.plans[axis];
        v.par_chunks_mut(len).for_each_init(
            || vec![0.0; plan.get_scratch_len()],
            |scratch, row| {
                // some DST-I sizes read the scratch before writing it
                scratch.fill(0.0);
                plan.process_dst1_with_scratch(row, scratch)
            },
        );
    }

    fn normalisation(&self) -> f64 {
        let [n0, n1] = self.shape.n;
        let mut c = 2.0 / (n0 + 1) as f64;
        if self.shape.dims == 2 {
            c *= 2.0 / (n1 + 1) as f64;
        }
        c
    }

    /// `v <- g(-Delta_1) v` for a real spectral multiplier `g`.
    pub fn apply(&self, v: &mut [f64], g: impl Fn(f64) -> f64) {
        self.transform(v);
        let c = self.normalisation();
        let n1 = self.shape.n[1];
        for (k, x) in v.iter_mut().enumerate() {
            let ev = self.eig[0][k / n1] + self.eig[1][k % n1];
            *x *= c * g(ev);
        }
        self.transform(v);
    }

    /// `(re + i im) <- g(-Delta_1) (re + i im)` for a complex multiplier `g`.
    pub fn apply_complex(&self, re: &mut [f64], im: &mut [f64], g: impl Fn(f64) -> (f64, f64)) {
        self.transform(re);
        self.transform(im);
        let c = self.normalisation();
        let n1 = self.shape.n[1];
        for k in 0..re.len() {
            let ev = self.eig[0][k / n1] + self.eig[1][k % n1];
            let (gr, gi) = g(ev);
            let (a, b) = (re[k], im[k]);
            re[k] = c * (gr * a - gi * b);
            im[k] = c * (gr * b + gi * a);
        }
        self.transform(re);
        self.transform(im);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_shifted_laplacian() {
        for shape in [Shape::new(1, 37, 1), Shape::new(2, 9, 14), Shape::new(1, 613, 1), Shape::new(2, 613, 612), Shape::new(2, 612, 613)] {
            let spec = DirichletSpectrum::new(shape);
            let x: Vec<f64> = (0..shape.len()).map(|k| ((k * 13 % 7) as f64 - 3.0) * 0.1).collect();
            let shift = 0.3;
            let mut y = vec![0.0; x.len()];
            shape.laplacian(&x, &mut y);
            for (yi, xi) in y.iter_mut().zip(&x) {
                *yi = -*yi + shift * xi;
            }
            spec.apply(&mut y, |ev| 1.0 / (ev + shift));
            let e = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(e < 1e-12, "{shape:?}: {e:e}");
        }
    }

    #[test]
    fn unitary_phase_preserves_norm() {
        let shape = Shape::new(2, 11, 6);
        let spec = DirichletSpectrum::new(shape);
        let mut re: Vec<f64> = (0..shape.len()).map(|k| (k as f64).sin()).collect();
        let mut im: Vec<f64> = (0..shape.len()).map(|k| (k as f64 * 0.3).cos()).collect();
        let n0: f64 = re.iter().chain(&im).map(|v| v * v).sum();
        spec.apply_complex(&mut re, &mut im, |ev| ((0.7 * ev).cos(), (0.7 * ev).sin()));
        let n1: f64 = re.iter().chain(&im).map(|v| v * v).sum();
        assert!((n0 - n1).abs() < 1e-12 * n0);
    }
}
