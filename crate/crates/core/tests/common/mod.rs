//! Reference implementations shared by the integration tests. Nothing here
//! calls into the crate's kinetics, so agreement is a genuine cross-check.

#![allow(dead_code)]

/// Constant coefficients of the kinetics, written out by hand.
#[derive(Debug, Clone, Copy)]
pub struct Rates {
    pub r: [f64; 3],
    pub b: [f64; 3],
    pub c: [f64; 4],
    pub a: [f64; 3],
    pub k1: f64,
    pub k2: f64,
    pub alpha: f64,
    pub rho: f64,
    pub s: f64,
}

impl Rates {
    pub fn desk() -> Self {
        Self {
            r: [1.0; 3],
            b: [1.0; 3],
            c: [1.0; 4],
            a: [1.0; 3],
            k1: 0.2,
            k2: 1.0,
            alpha: 1.0,
            rho: 0.5,
            s: 0.1,
        }
    }

    pub fn rhs(&self, z: &[f64; 4]) -> [f64; 4] {
        let [n, t, i, u] = *z;
        let kill = 1.0 - (-u).exp();
        let [r1, r2, r3] = self.r;
        let [b1, b2, b3] = self.b;
        let [c1, c2, c3, c4] = self.c;
        let [a1, a2, a3] = self.a;
        [
            r1 * n * (1.0 - b1 * n) - c4 * t * n - a3 * kill * n,
            r2 * t * (1.0 - b2 * t) - c2 * i * t - c3 * t * n - a2 * kill * t,
            r3 * i * (1.0 - b3 * i) + self.s + self.rho * i * t / (self.alpha + t) - c1 * i * t - self.k1 * i - a1 * kill * i,
            -self.k2 * u,
        ]
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Dormand-Prince 5(4) with step-size control; returns the state at each
/// requested output time (which must be sorted and non-negative).
pub fn dopri<const D: usize>(
    f: impl Fn(f64, &[f64; D]) -> [f64; D],
    z0: [f64; D],
    outputs: &[f64],
    rtol: f64,
    atol: f64,
) -> Vec<[f64; D]> {
    let mut t: f64 = 0.0;
    let mut z = z0;
    let mut h: f64 = 1e-3;
    let mut out = Vec::with_capacity(outputs.len());
    for &target in outputs {
        while t < target {
            let h_try = h.min(target - t);
            let mut k = [[0.0; D]; 7];
            for stage in 0..7 {
                let mut y = z;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    for d in 0..D {
                        y[d] += h_try * A[stage][j] * kj[d];
                    }
                }
                k[stage] = f(t + C[stage] * h_try, &y);
            }
            let mut high = z;
            let mut err = 0.0f64;
            for d in 0..D {
                let mut s5 = 0.0;
                let mut s4 = 0.0;
                for st in 0..7 {
                    s5 += B5[st] * k[st][d];
                    s4 += B4[st] * k[st][d];
                }
                high[d] = z[d] + h_try * s5;
                let scale = atol + rtol * z[d].abs().max(high[d].abs());
                err = err.max((h_try * (s5 - s4)).abs() / scale);
            }
            if err <= 1.0 {
                t += h_try;
                z = high;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = h_try * factor;
        }
        out.push(z);
    }
    out
}

/// Central-difference Jacobian of `f` at `z`.
pub fn fd_jacobian(f: impl Fn(&[f64; 4]) -> [f64; 4], z: &[f64; 4], step: f64) -> [[f64; 4]; 4] {
    let mut jac = [[0.0; 4]; 4];
    for col in 0..4 {
        let mut plus = *z;
        let mut minus = *z;
        plus[col] += step;
        minus[col] -= step;
        let (fp, fm) = (f(&plus), f(&minus));
        for row in 0..4 {
            jac[row][col] = (fp[row] - fm[row]) / (2.0 * step);
        }
    }
    jac
}

/// Relative error that stays meaningful when the reference is near zero.
pub fn rel_err(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(1e-12)
}
