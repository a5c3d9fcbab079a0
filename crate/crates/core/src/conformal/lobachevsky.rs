//! Lobachevsky function `Л(x) = -∫₀ˣ log|2 sin t| dt`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::scalar::Real;

const TERMS: usize = 30;

/// Coefficients `ζ(2k) / (k (2k+1) (2π)^{2k})` of the Clausen series.
fn coefficients() -> &'static [f64; TERMS] {
    static C: OnceLock<[f64; TERMS]> = OnceLock::new();
    C.get_or_init(|| {
        let closed = [PI.powi(2) / 6.0, PI.powi(4) / 90.0, PI.powi(6) / 945.0, PI.powi(8) / 9450.0, PI.powi(10) / 93555.0];
        let mut c = [0.0; TERMS];
        let two_pi = 2.0 * PI;
        for (i, ck) in c.iter_mut().enumerate() {
            let k = i + 1;
            let zeta = if k <= closed.len() {
                closed[k - 1]
            } else {
                (1..=40).map(|n| (n as f64).powi(-2 * k as i32)).sum()
            };
            let kf = k as f64;
            *ck = zeta / (kf * (2.0 * kf + 1.0) * two_pi.powi(2 * k as i32));
        }
        c
    })
}

/// Clausen function `Cl₂(θ) = -∫₀^θ log|2 sin(t/2)| dt`.
pub fn clausen2<T: Real>(theta: T) -> T {
    let two_pi = T::c(2.0 * PI);
    let mut th = theta % two_pi;
    if th < T::zero() {
        th += two_pi;
    }
    if th > T::PI() {
        return -clausen2_principal(two_pi - th);
    }
    clausen2_principal(th)
}

/// Series valid on `[0, π]`, where the ratio of consecutive terms is at most 1/4.
fn clausen2_principal<T: Real>(th: T) -> T {
    if th == T::zero() {
        return T::zero();
    }
    let sq = th * th;
    let mut pow = th * sq;
    let mut sum = th - th * th.ln();
    for &c in coefficients() {
        let term = T::c(c) * pow;
        sum += term;
        if term.abs() <= T::epsilon() * sum.abs() * T::c(1e-2) {
            break;
        }
        pow *= sq;
    }
    sum
}

pub fn lobachevsky<T: Real>(x: T) -> T {
    T::c(0.5) * clausen2(x + x)
}
