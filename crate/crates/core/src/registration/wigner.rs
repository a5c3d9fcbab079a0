//! Wigner small-d matrices `d^l_{mm'}(β) = ⟨l m| e^{−iβJ_y} |l m'⟩`.
//!
//! Each `(m, m')` column is seeded at `l₀ = max(|m|, |m'|)`, where the
//! explicit sum has a single term, and carried up in `l` by the three-term
//! recurrence.

/// `d^l_{mm'}(β)` for all `l < b` and `|m|, |m'| ≤ l` at one angle.
#[derive(Debug, Clone)]
pub struct WignerTable {
    b: usize,
    data: Vec<f64>,
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for k in 1..=n {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
}

/// Explicit (Wigner) sum; used for seeds and as a test oracle.
pub fn wigner_d_explicit(l: usize, m: i64, mp: i64, beta: f64) -> f64 {
    let li = l as i64;
    if m.abs() > li || mp.abs() > li {
        return 0.0;
    }
    let lf = ln_factorials(2 * l + 1);
    let f = |k: i64| lf[k as usize];
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let pre = 0.5 * (f(li + m) + f(li - m) + f(li + mp) + f(li - mp));
    let mut sum = 0.0;
    for k in 0.max(mp - m)..=(li + mp).min(li - m) {
        let sign = if (m - mp + k) % 2 == 0 { 1.0 } else { -1.0 };
        let cp = (2 * li + mp - m - 2 * k) as i32;
        let sp = (m - mp + 2 * k) as i32;
        let den = f(li + mp - k) + f(k) + f(m - mp + k) + f(li - m - k);
        sum += sign * (pre - den).exp() * c.powi(cp) * s.powi(sp);
    }
    sum
}

impl WignerTable {
    pub fn new(b: usize, beta: f64) -> Self {
        let w = 2 * b - 1;
        let mut data = vec![0.0; w * w * b];
        let cb = beta.cos();
        let bi = b as i64;
        for m in -(bi - 1)..bi {
            for mp in -(bi - 1)..bi {
                let base = ((m + bi - 1) as usize * w + (mp + bi - 1) as usize) * b;
                let l0 = m.abs().max(mp.abs()) as usize;
                let mut prev = 0.0;
                let mut cur = wigner_d_explicit(l0, m, mp, beta);
                data[base + l0] = cur;
                for l in l0..(b - 1) {
                    let lf = l as f64;
                    let (mf, mpf) = (m as f64, mp as f64);
                    let l1 = lf + 1.0;
                    let scale = l1 * (2.0 * lf + 1.0) / ((l1 * l1 - mf * mf) * (l1 * l1 - mpf * mpf)).sqrt();
                    let shift = if l == 0 { 0.0 } else { mf * mpf / (lf * l1) };
                    let back = if l == 0 {
                        0.0
                    } else {
                        ((lf * lf - mf * mf) * (lf * lf - mpf * mpf)).sqrt() / (lf * (2.0 * lf + 1.0))
                    };
                    let next = scale * ((cb - shift) * cur - back * prev);
                    data[base + l + 1] = next;
                    prev = cur;
                    cur = next;
                }
            }
        }
        WignerTable { b, data }
    }

    pub fn get(&self, l: usize, m: i64, mp: i64) -> f64 {
        let bi = self.b as i64;
        let w = 2 * self.b - 1;
        self.data[((m + bi - 1) as usize * w + (mp + bi - 1) as usize) * self.b + l]
    }

    /// Values for `l = 0..b` of column `(m, m')`; entries below
    /// `max(|m|, |m'|)` are zero.
    pub fn column(&self, m: i64, mp: i64) -> &[f64] {
        let bi = self.b as i64;
        let w = 2 * self.b - 1;
        let base = ((m + bi - 1) as usize * w + (mp + bi - 1) as usize) * self.b;
        &self.data[base..base + self.b]
    }
}
