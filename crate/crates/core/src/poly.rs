//! Low-degree polynomials in a local variable, as used by piecewise cores
//! and Hermite dense output.

use serde::{Deserialize, Serialize};

/// `c0 + c1 u + c2 u^2 + c3 u^3` in a local coordinate `u`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cubic(pub [f64; 4]);

impl Cubic {
    pub const ZERO: Cubic = Cubic([0.0; 4]);

    pub fn constant(c: f64) -> Self {
        Cubic([c, 0.0, 0.0, 0.0])
    }

    /// Hermite interpolant on `[0, h]` with the given endpoint values and slopes.
    pub fn hermite(h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> Self {
        let slope = (y1 - y0) / h;
        let c2 = (3.0 * slope - 2.0 * d0 - d1) / h;
        let c3 = (d0 + d1 - 2.0 * slope) / (h * h);
        Cubic([y0, d0, c2, c3])
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let [c0, c1, c2, c3] = self.0;
        ((c3 * u + c2) * u + c1) * u + c0
    }

    pub fn derivative(&self) -> Cubic {
        let [_, c1, c2, c3] = self.0;
        Cubic([c1, 2.0 * c2, 3.0 * c3, 0.0])
    }

    #[inline]
    pub fn eval_derivative(&self, u: f64) -> f64 {
        let [_, c1, c2, c3] = self.0;
        (3.0 * c3 * u + 2.0 * c2) * u + c1
    }

    /// `q(u) = p(u + d)`.
    pub fn shifted(&self, d: f64) -> Cubic {
        let [c0, c1, c2, c3] = self.0;
        Cubic([
            c0 + d * (c1 + d * (c2 + d * c3)),
            c1 + d * (2.0 * c2 + 3.0 * c3 * d),
            c2 + 3.0 * c3 * d,
            c3,
        ])
    }

    pub fn scaled(&self, s: f64) -> Cubic {
        Cubic(self.0.map(|c| s * c))
    }

    pub fn add(&self, other: &Cubic) -> Cubic {
        let mut out = self.0;
        for (o, c) in out.iter_mut().zip(other.0) {
            *o += c;
        }
        Cubic(out)
    }

    /// Roots of `p'` inside the open interval `(lo, hi)`.
    pub fn critical_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        let d = self.derivative();
        real_roots_in(&d.0[..3], lo, hi)
            .into_iter()
            .filter(|&u| u > lo && u < hi)
            .collect()
    }

    /// Exact `max |p(u)|` over `[lo, hi]`, from endpoints and interior critical points.
    pub fn max_abs_on(&self, lo: f64, hi: f64) -> f64 {
        let mut best = self.eval(lo).abs().max(self.eval(hi).abs());
        for u in self.critical_points(lo, hi) {
            best = best.max(self.eval(u).abs());
        }
        best
    }
}

/// Evaluate a polynomial given by ascending coefficients.
pub fn eval_poly(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
}

fn trimmed(coeffs: &[f64]) -> &[f64] {
    let mut n = coeffs.len();
    while n > 0 && coeffs[n - 1] == 0.0 {
        n -= 1;
    }
    &coeffs[..n]
}

/// All real roots of a polynomial (ascending coefficients) in `[lo, hi]`.
///
/// The interval is cut into monotone pieces at the roots of the derivative
/// and each sign change is refined by bisection, so no root of odd
/// multiplicity is missed. Double roots are found as critical points.
pub fn real_roots_in(coeffs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let c = trimmed(coeffs);
    if c.len() <= 1 || !(lo <= hi) {
        return Vec::new();
    }
    if c.len() == 2 {
        let r = -c[0] / c[1];
        return if r >= lo && r <= hi { vec![r] } else { Vec::new() };
    }
    let deriv: Vec<f64> = c
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &ci)| i as f64 * ci)
        .collect();
    let mut cuts = vec![lo];
    cuts.extend(real_roots_in(&deriv, lo, hi));
    cuts.push(hi);

    let mut roots: Vec<f64> = Vec::new();
    let push = |roots: &mut Vec<f64>, r: f64| {
        if roots.last().is_none_or(|&last| r > last) {
            roots.push(r);
        }
    };
    for w in cuts.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (mut fa, fb) = (eval_poly(c, a), eval_poly(c, b));
        if fa == 0.0 {
            push(&mut roots, a);
            continue;
        }
        if fb == 0.0 {
            push(&mut roots, b);
            continue;
        }
        if fa.signum() == fb.signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = eval_poly(c, m);
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        push(&mut roots, 0.5 * (a + b));
    }
    roots
}
