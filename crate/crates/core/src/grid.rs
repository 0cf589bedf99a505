//! Rectangular index boxes with zero (Dirichlet) exterior.
//!
//! Everything here works on row-major buffers; 1D boxes use `n[1] == 1` and
//! only couple along axis 0.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Shape {
    pub n: [usize; 2],
    pub dims: usize,
}

impl Shape {
    pub fn new(dims: usize, n0: usize, n1: usize) -> Self {
        debug_assert!(dims == 1 || dims == 2);
        let n1 = if dims == 1 { 1 } else { n1 };
        Self { n: [n0, n1], dims }
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    #[inline]
    pub fn flat(&self, a: usize, b: usize) -> usize {
        a * self.n[1] + b
    }

    /// Five-point (three-point in 1D) Laplacian, out-of-box neighbours read as 0.
    pub fn laplacian(&self, src: &[f64], dst: &mut [f64]) {
        let [n0, n1] = self.n;
        for a in 0..n0 {
            for b in 0..n1 {
                let k = self.flat(a, b);
                let c = src[k];
                let mut acc = -2.0 * c;
                if a > 0 {
                    acc += src[k - n1];
                }
                if a + 1 < n0 {
                    acc += src[k + n1];
                }
                if self.dims == 2 {
                    acc -= 2.0 * c;
                    if b > 0 {
                        acc += src[k - 1];
                    }
                    if b + 1 < n1 {
                        acc += src[k + 1];
                    }
                }
                dst[k] = acc;
            }
        }
    }

    /// Sum of squared differences over every nearest-neighbour bond, each bond
    /// counted once, including bonds to the zero exterior.
    pub fn bond_sum(&self, src: &[f64]) -> f64 {
        self.bond_sum_axis(src, 0) + if self.dims == 2 { self.bond_sum_axis(src, 1) } else { 0.0 }
    }

    pub fn bond_sum_axis(&self, src: &[f64], axis: usize) -> f64 {
        let [n0, n1] = self.n;
        let mut s = 0.0;
        if axis == 0 {
            for b in 0..n1 {
                let mut prev = 0.0;
                for a in 0..n0 {
                    let v = src[self.flat(a, b)];
                    s += (v - prev) * (v - prev);
                    prev = v;
                }
                s += prev * prev;
            }
        } else {
            for a in 0..n0 {
                let mut prev = 0.0;
                for b in 0..n1 {
                    let v = src[self.flat(a, b)];
                    s += (v - prev) * (v - prev);
                    prev = v;
                }
                s += prev * prev;
            }
        }
        s
    }

    /// Point reflection of the box onto itself (index reversal along every axis).
    #[inline]
    pub fn mirror(&self, k: usize) -> usize {
        let a = k / self.n[1];
        let b = k % self.n[1];
        self.flat(self.n[0] - 1 - a, self.n[1] - 1 - b)
    }

    /// In-place average with the point reflection.
    pub fn symmetrize(&self, v: &mut [f64]) {
        for k in 0..v.len() {
            let m = self.mirror(k);
            if m > k {
                let avg = 0.5 * (v[k] + v[m]);
                v[k] = avg;
                v[m] = avg;
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
