//! Dormand-Prince 5(4) integrator for small first-order systems.

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

// 5th-order weights (also the last stage row, FSAL)
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// difference between 5th- and 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

pub(crate) type State = [f64; 2];

#[derive(Clone, Copy, Debug)]
pub(crate) struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_substeps: usize,
}

impl Dopri5 {
    /// Advances `y` from `t0` to `t1` with adaptive substeps. Returns `None`
    /// if the step size collapses or the substep budget is exhausted.
    pub fn advance<F>(&self, f: &F, t0: f64, y: State, t1: f64) -> Option<State>
    where
        F: Fn(f64, &State) -> State,
    {
        let mut t = t0;
        let mut y = y;
        let mut h = t1 - t0;
        let mut k1 = f(t, &y);
        for _ in 0..self.max_substeps {
            if t >= t1 {
                return Some(y);
            }
            let last = t + h >= t1;
            let h_try = if last { t1 - t } else { h };
            let (y5, err, k7) = step(f, t, &y, &k1, h_try);
            let mut e = 0.0_f64;
            for i in 0..2 {
                let sc = self.atol + self.rtol * y[i].abs().max(y5[i].abs());
                e = e.max((err[i] / sc).abs());
            }
            if !e.is_finite() {
                h = 0.25 * h_try;
            } else if e <= 1.0 {
                t = if last { t1 } else { t + h_try };
                y = y5;
                k1 = k7;
                let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
                h = h_try * fac;
            } else {
                h = h_try * (0.9 * e.powf(-0.2)).clamp(0.1, 0.9);
            }
            if h.abs() < 1e-14 * (1.0 + t.abs()) {
                return None;
            }
        }
        (t >= t1).then_some(y)
    }
}

fn step<F>(f: &F, t: f64, y: &State, k1: &State, h: f64) -> (State, State, State)
where
    F: Fn(f64, &State) -> State,
{
    let comb = |coef: &[(f64, &State)]| -> State {
        let mut out = *y;
        for (c, k) in coef {
            out[0] += h * c * k[0];
            out[1] += h * c * k[1];
        }
        out
    };
    let k2 = f(t + C2 * h, &comb(&[(A21, k1)]));
    let k3 = f(t + C3 * h, &comb(&[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &comb(&[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(t + C5 * h, &comb(&[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(t + h, &comb(&[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y5 = comb(&[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y5);
    let mut err = [0.0; 2];
    for i in 0..2 {
        err[i] = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y5, err, k7)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let f = |_t: f64, y: &State| [y[1], -y[0]];
        let ode = Dopri5 { rtol: 1e-12, atol: 1e-14, max_substeps: 100_000 };
        let y = ode.advance(&f, 0.0, [1.0, 0.0], 2.0 * std::f64::consts::PI).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10);
        assert!(y[1].abs() < 1e-10);
    }
}
