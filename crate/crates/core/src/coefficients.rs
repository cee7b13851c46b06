//! Delay and coefficient data, the index functions `n(k)` and `m(k)`, and
//! certified bounds on weighted coefficient tails.
//!
//! Every family has a closed form beyond some finite prefix, which is what
//! makes the tail sums `sum_{i>=n} |b_i| w(-tau_i)` boundable from above.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest index a truncation search will consider.
pub const MAX_TRUNCATION_INDEX: usize = 1 << 40;

/// Weights `g` on `(-inf, 0]`: continuous, `g >= 1`, non-increasing in `theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightFunction {
    /// `g(theta) = value`.
    Constant { value: f64 },
    /// `g(theta) = base^(-theta)`.
    Exponential { base: f64 },
    /// `g(theta) = scale * (1 - theta)^power`.
    Polynomial { scale: f64, power: f64 },
}

impl WeightFunction {
    pub const UNIT: WeightFunction = WeightFunction::Constant { value: 1.0 };

    pub fn exponential(base: f64) -> Self {
        WeightFunction::Exponential { base }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            WeightFunction::Constant { value } => value.is_finite() && value >= 1.0,
            WeightFunction::Exponential { base } => base.is_finite() && base >= 1.0,
            WeightFunction::Polynomial { scale, power } => {
                scale.is_finite() && scale >= 1.0 && power.is_finite() && power >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidWeight(format!(
                "{self:?} is not >= 1 and non-increasing on (-inf, 0]"
            )))
        }
    }

    pub fn evaluate(&self, theta: f64) -> f64 {
        match *self {
            WeightFunction::Constant { value } => value,
            WeightFunction::Exponential { base } => base.powf(-theta),
            WeightFunction::Polynomial { scale, power } => scale * (1.0 - theta).powf(power),
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            WeightFunction::Constant { .. } => true,
            WeightFunction::Exponential { base } => base == 1.0,
            WeightFunction::Polynomial { power, .. } => power == 0.0,
        }
    }

    /// Smallest known `K` with `self(theta) <= K * other(theta)` for all `theta <= 0`,
    /// or `None` when `self` grows faster than `other`.
    pub fn dominated_by(&self, other: &WeightFunction) -> Option<f64> {
        use WeightFunction::*;
        let at_zero = self.evaluate(0.0);
        if self.is_constant() {
            // other(theta) >= other(0) on (-inf, 0]
            return Some(at_zero / other.evaluate(0.0));
        }
        match (*self, *other) {
            (_, o) if o.is_constant() => None,
            (Exponential { base: q1 }, Exponential { base: q2 }) => (q1 <= q2).then_some(1.0),
            (Polynomial { scale: c1, power: s1 }, Polynomial { scale: c2, power: s2 }) => {
                (s1 <= s2).then_some(c1 / c2)
            }
            (Polynomial { scale, power }, Exponential { base }) => {
                // sup_{u >= 1} u^s q^(1-u), attained at u = s / ln q when that exceeds 1
                let lq = base.ln();
                let u = (power / lq).max(1.0);
                Some(scale * u.powf(power) * base.powf(1.0 - u))
            }
            (Exponential { .. }, Polynomial { .. }) => None,
            _ => None,
        }
    }
}

/// Delays `tau_1 < tau_2 < ...` with `tau_i -> inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Delays {
    /// `tau_i = c + i * delta`.
    Affine { c: f64, delta: f64 },
    /// Explicit prefix `tau_1..tau_p`, continued by `tau_{p+j} = tau_p + j * delta`.
    Explicit { list: Vec<f64>, delta: f64 },
}

impl Delays {
    pub fn unit() -> Self {
        Delays::Affine { c: 0.0, delta: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Delays::Affine { c, delta } => {
                if !(delta.is_finite() && *delta > 0.0 && c.is_finite() && c + delta > 0.0) {
                    return Err(Error::InvalidFamily(format!(
                        "affine delays need delta > 0 and tau_1 = c + delta > 0 (c = {c}, delta = {delta})"
                    )));
                }
            }
            Delays::Explicit { list, delta } => {
                if list.is_empty() {
                    return Err(Error::InvalidFamily("explicit delay list is empty".into()));
                }
                if !(delta.is_finite() && *delta > 0.0) {
                    return Err(Error::InvalidFamily(format!("delta must be > 0, got {delta}")));
                }
                if !(list[0].is_finite() && list[0] > 0.0) {
                    return Err(Error::InvalidFamily(format!("tau_1 must be > 0, got {}", list[0])));
                }
                if let Some(w) = list.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
                    return Err(Error::InvalidFamily(format!(
                        "delays must be strictly increasing ({} then {})",
                        w[0], w[1]
                    )));
                }
            }
        }
        Ok(())
    }

    /// `tau_i` for `i >= 1`.
    pub fn tau(&self, i: usize) -> f64 {
        debug_assert!(i >= 1);
        match self {
            Delays::Affine { c, delta } => c + i as f64 * delta,
            Delays::Explicit { list, delta } => {
                let p = list.len();
                if i <= p {
                    list[i - 1]
                } else {
                    list[p - 1] + (i - p) as f64 * delta
                }
            }
        }
    }

    /// `(P, c', delta)` with `tau_i = c' + i * delta` for every `i > P`.
    pub fn affine_beyond(&self) -> (usize, f64, f64) {
        match self {
            Delays::Affine { c, delta } => (0, *c, *delta),
            Delays::Explicit { list, delta } => {
                let p = list.len();
                (p, list[p - 1] - p as f64 * delta, *delta)
            }
        }
    }

    /// Least `n >= 1` with `tau_n >= x`.
    pub fn first_index_at_least(&self, x: f64) -> usize {
        let (p, c, delta) = self.affine_beyond();
        for i in 1..=p {
            if self.tau(i) >= x {
                return i;
            }
        }
        let guess = ((x - c) / delta).ceil();
        let mut n = if guess.is_finite() && guess > (p + 1) as f64 {
            guess.min(MAX_TRUNCATION_INDEX as f64) as usize
        } else {
            p + 1
        };
        while n > p + 1 && self.tau(n - 1) >= x {
            n -= 1;
        }
        while self.tau(n) < x {
            n += 1;
        }
        n
    }
}

/// Coefficient sequences `b_i`, `i >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Coefficients {
    /// `b_i = b[i-1]`, zero beyond the list.
    FiniteSupport { b: Vec<f64> },
    /// `b_i = beta * rho^i`.
    Geometric { beta: f64, rho: f64 },
    /// `b_i = beta * i^(-p)`.
    PowerLaw { beta: f64, p: f64 },
    /// Known `b_1..b_L`; beyond the list only `sum_{i>L} |b_i| <= tail_bound` is known.
    /// Unknown coefficients evaluate as zero and are accounted for by the certificate.
    ExplicitList { b: Vec<f64>, tail_bound: f64 },
}

/// Result of a tail certificate query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailBound {
    Finite(f64),
    Divergent,
}

impl TailBound {
    pub fn finite(self) -> Option<f64> {
        match self {
            TailBound::Finite(v) => Some(v),
            TailBound::Divergent => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct FamilyDecl {
    #[serde(flatten)]
    coefficients: Coefficients,
    tau: Delays,
}

/// The delay structure `{tau_i}` together with the coefficients `{b_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyDecl", into = "FamilyDecl")]
pub struct CoefficientFamily {
    coefficients: Coefficients,
    delays: Delays,
}

impl TryFrom<FamilyDecl> for CoefficientFamily {
    type Error = Error;
    fn try_from(d: FamilyDecl) -> Result<Self> {
        CoefficientFamily::new(d.coefficients, d.tau)
    }
}

impl From<CoefficientFamily> for FamilyDecl {
    fn from(f: CoefficientFamily) -> Self {
        FamilyDecl { coefficients: f.coefficients, tau: f.delays }
    }
}

/// `m(k)` together with whether its defining index set was empty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MIndex {
    pub value: usize,
    /// `n(k) = 1`: the minimum ranges over nothing and `value` is the convention 1.
    pub vacuous: bool,
}

impl CoefficientFamily {
    pub fn new(coefficients: Coefficients, delays: Delays) -> Result<Self> {
        delays.validate()?;
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match &coefficients {
            Coefficients::FiniteSupport { b } if !finite(b) => {
                return Err(Error::InvalidFamily("non-finite coefficient".into()))
            }
            Coefficients::Geometric { beta, rho } if !(beta.is_finite() && rho.is_finite()) => {
                return Err(Error::InvalidFamily("geometric beta and rho must be finite".into()))
            }
            Coefficients::PowerLaw { beta, p } if !(beta.is_finite() && p.is_finite() && *p > 0.0) => {
                return Err(Error::InvalidFamily("power-law needs finite beta and p > 0".into()))
            }
            Coefficients::ExplicitList { b, tail_bound }
                if !finite(b) || !(tail_bound.is_finite() && *tail_bound >= 0.0) =>
            {
                return Err(Error::InvalidFamily(
                    "explicit list needs finite coefficients and tail_bound >= 0".into(),
                ))
            }
            _ => {}
        }
        Ok(CoefficientFamily { coefficients, delays })
    }

    pub fn finite_support(b: Vec<f64>, delays: Delays) -> Result<Self> {
        Self::new(Coefficients::FiniteSupport { b }, delays)
    }

    pub fn geometric(beta: f64, rho: f64, delays: Delays) -> Result<Self> {
        Self::new(Coefficients::Geometric { beta, rho }, delays)
    }

    pub fn power_law(beta: f64, p: f64, delays: Delays) -> Result<Self> {
        Self::new(Coefficients::PowerLaw { beta, p }, delays)
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    pub fn delays(&self) -> &Delays {
        &self.delays
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.delays.tau(i)
    }

    pub fn tau1(&self) -> f64 {
        self.delays.tau(1)
    }

    pub fn b(&self, i: usize) -> f64 {
        debug_assert!(i >= 1);
        match &self.coefficients {
            Coefficients::FiniteSupport { b } | Coefficients::ExplicitList { b, .. } => {
                b.get(i - 1).copied().unwrap_or(0.0)
            }
            Coefficients::Geometric { beta, rho } => beta * rho.powf(i as f64),
            Coefficients::PowerLaw { beta, p } => beta * (i as f64).powf(-p),
        }
    }

    /// Index of the last nonzero coefficient for finite-support families.
    pub fn support_len(&self) -> Option<usize> {
        match &self.coefficients {
            Coefficients::FiniteSupport { b } => {
                Some(b.iter().rposition(|&x| x != 0.0).map_or(0, |i| i + 1))
            }
            Coefficients::Geometric { beta, .. } | Coefficients::PowerLaw { beta, .. } if *beta == 0.0 => {
                Some(0)
            }
            Coefficients::ExplicitList { b, tail_bound } if *tail_bound == 0.0 => {
                Some(b.iter().rposition(|&x| x != 0.0).map_or(0, |i| i + 1))
            }
            _ => None,
        }
    }

    /// `n(k)`: least `n` with `tau_i >= k tau_1` for all `i >= n`.
    pub fn n_index(&self, k: usize) -> usize {
        assert!(k >= 1, "n(k) is defined for k >= 1");
        if k == 1 {
            return 1;
        }
        self.delays.first_index_at_least(k as f64 * self.tau1())
    }

    /// `m(k)`: least positive `m` with `-m < min{(k-1) tau_1 - tau_i : i < n(k)}`.
    pub fn m_index(&self, k: usize) -> Result<MIndex> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("m(k) needs k >= 2, got {k}")));
        }
        let n = self.n_index(k);
        if n == 1 {
            return Ok(MIndex { value: 1, vacuous: true });
        }
        let base = (k - 1) as f64 * self.tau1();
        let min = (1..n).map(|i| base - self.tau(i)).fold(f64::INFINITY, f64::min);
        // -m < min  <=>  m > -min
        let m = ((-min).floor() + 1.0).max(1.0);
        Ok(MIndex { value: m as usize, vacuous: false })
    }

    /// `sum_{i=from}^{to} |b_i| w(-tau_i)`.
    pub fn weighted_partial_sum(&self, w: &WeightFunction, from: usize, to: usize) -> f64 {
        (from.max(1)..=to)
            .map(|i| self.b(i).abs() * w.evaluate(-self.tau(i)))
            .sum()
    }

    /// Certified upper bound on `sum_{i>=n} |b_i| w(-tau_i)`.
    ///
    /// `Divergent` is only returned when the series provably diverges.
    pub fn tail_sum_bound(&self, w: &WeightFunction, n: usize) -> Result<TailBound> {
        w.validate()?;
        let n = n.max(1);
        let (p, c, delta) = self.delays.affine_beyond();
        match &self.coefficients {
            Coefficients::FiniteSupport { b } => {
                Ok(TailBound::Finite(self.weighted_partial_sum(w, n, b.len())))
            }
            Coefficients::ExplicitList { b, tail_bound } => {
                let known = self.weighted_partial_sum(w, n, b.len());
                if *tail_bound == 0.0 {
                    Ok(TailBound::Finite(known))
                } else if w.is_constant() {
                    Ok(TailBound::Finite(known + w.evaluate(0.0) * tail_bound))
                } else {
                    Err(Error::UnknownTail(format!(
                        "coefficients beyond index {} are only certified against constant weights",
                        b.len()
                    )))
                }
            }
            Coefficients::Geometric { beta, .. } | Coefficients::PowerLaw { beta, .. } if *beta == 0.0 => {
                Ok(TailBound::Finite(0.0))
            }
            Coefficients::Geometric { beta, rho } => {
                let prefix = self.weighted_partial_sum(w, n, p);
                let n0 = n.max(p + 1);
                Ok(match geometric_tail(beta.abs(), rho.abs(), w, c, delta, n0) {
                    Some(t) => TailBound::Finite(prefix + t),
                    None => TailBound::Divergent,
                })
            }
            Coefficients::PowerLaw { beta, p: decay } => {
                let prefix = self.weighted_partial_sum(w, n, p);
                let n0 = n.max(p + 1);
                Ok(match power_law_tail(beta.abs(), *decay, w, c, delta, n0) {
                    Some(t) => TailBound::Finite(prefix + t),
                    None => TailBound::Divergent,
                })
            }
        }
    }

    /// Least `N` with `tail_sum_bound(w, N + 1) <= eps`.
    ///
    /// Finite-support families always return their support length, where the
    /// tail is exactly zero.
    pub fn truncation_index(&self, w: &WeightFunction, eps: f64) -> Result<usize> {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be > 0, got {eps}")));
        }
        if let Some(len) = self.support_len() {
            return Ok(len.max(1));
        }
        let tail = |n: usize| -> Result<f64> {
            match self.tail_sum_bound(w, n)? {
                TailBound::Finite(v) => Ok(v),
                TailBound::Divergent => Err(Error::Divergent),
            }
        };
        tail(1)?;
        if let Coefficients::ExplicitList { b, tail_bound } = &self.coefficients {
            let floor = w.evaluate(0.0) * tail_bound;
            if floor > eps {
                return Err(Error::UnknownTail(format!(
                    "certified remainder {floor:e} beyond index {} exceeds eps = {eps:e}",
                    b.len()
                )));
            }
        }
        if tail(2)? <= eps {
            return Ok(1);
        }
        let (mut lo, mut hi) = (1usize, 2usize);
        while tail(hi + 1)? > eps {
            if hi >= MAX_TRUNCATION_INDEX {
                return Err(Error::UnknownTail(format!(
                    "no truncation index below {MAX_TRUNCATION_INDEX} reaches eps = {eps:e}"
                )));
            }
            lo = hi;
            hi *= 2;
        }
        // tail(lo + 1) > eps >= tail(hi + 1)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if tail(mid + 1)? <= eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// `sum_{i>=n0} beta rho^i w(-(c + i delta))`, with `beta, rho >= 0`.
fn geometric_tail(beta: f64, rho: f64, w: &WeightFunction, c: f64, delta: f64, n0: usize) -> Option<f64> {
    if rho == 0.0 {
        return Some(0.0);
    }
    let nf = n0 as f64;
    match *w {
        WeightFunction::Constant { value } => {
            (rho < 1.0).then(|| value * beta * rho.powf(nf) / (1.0 - rho))
        }
        WeightFunction::Exponential { base } => {
            let r = rho * base.powf(delta);
            (r < 1.0).then(|| beta * base.powf(c) * r.powf(nf) / (1.0 - r))
        }
        WeightFunction::Polynomial { scale, power } => {
            if rho >= 1.0 {
                return None;
            }
            // term ratio for i >= n is at most rho (1 + delta / (1 + c + n delta))^power
            let term = |i: usize| beta * rho.powf(i as f64) * scale * (1.0 + c + i as f64 * delta).powf(power);
            let ratio = |i: usize| rho * (1.0 + delta / (1.0 + c + i as f64 * delta)).powf(power);
            let mut sum = 0.0;
            let mut i = n0;
            while ratio(i) >= 1.0 {
                sum += term(i);
                i += 1;
            }
            Some(sum + term(i) / (1.0 - ratio(i)))
        }
    }
}

/// `sum_{i>=n0} beta i^(-p) w(-(c + i delta))`, with `beta >= 0`.
fn power_law_tail(beta: f64, p: f64, w: &WeightFunction, c: f64, delta: f64, n0: usize) -> Option<f64> {
    // integral test: sum_{i>=n} i^(-q) <= n^(-q) + n^(1-q) / (q - 1) for q > 1
    let integral_bound = |q: f64| {
        let nf = n0 as f64;
        (q > 1.0).then(|| nf.powf(-q) + nf.powf(1.0 - q) / (q - 1.0))
    };
    if w.is_constant() {
        return integral_bound(p).map(|s| w.evaluate(0.0) * beta * s);
    }
    match *w {
        WeightFunction::Polynomial { scale, power } => {
            // 1 + c + i delta <= i (1 + max(c, 0) + delta) for i >= 1
            let k = 1.0 + c.max(0.0) + delta;
            integral_bound(p - power).map(|s| scale * beta * k.powf(power) * s)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shifted(c: f64) -> Delays {
        Delays::Affine { c, delta: 1.0 }
    }

    #[test]
    fn n_index_examples() {
        let unit = CoefficientFamily::geometric(1.0, 0.5, Delays::unit()).unwrap();
        assert_eq!(unit.n_index(3), 3);
        assert_eq!(unit.n_index(1), 1);
        let half = CoefficientFamily::geometric(1.0, 0.5, shifted(0.5)).unwrap();
        assert_eq!(half.n_index(2), 3);
    }

    #[test]
    fn m_index_examples() {
        let unit = CoefficientFamily::geometric(1.0, 0.5, Delays::unit()).unwrap();
        assert_eq!(unit.m_index(2).unwrap(), MIndex { value: 1, vacuous: false });
        assert_eq!(unit.m_index(3).unwrap().value, 1);
        let half = CoefficientFamily::geometric(1.0, 0.5, shifted(0.5)).unwrap();
        assert_eq!(half.m_index(2).unwrap().value, 2);
        assert!(unit.m_index(1).is_err());
    }

    #[test]
    fn m_index_with_explicit_delays() {
        // n(2) = 3 (tau_3 = 2.5 >= 1); min{0.5 - 0.5, 0.5 - 0.9} = -0.4 -> m = 1
        let fam = CoefficientFamily::finite_support(
            vec![1.0],
            Delays::Explicit { list: vec![0.5, 0.9, 2.5], delta: 1.0 },
        )
        .unwrap();
        assert_eq!(fam.n_index(2), 3);
        let m = fam.m_index(2).unwrap();
        assert_eq!(m, MIndex { value: 1, vacuous: false });
        // n(6) = 4 (tau_4 = 3.5 >= 3); min{2.5 - 2.5, ...} = 0 -> m = 1
        assert_eq!(fam.n_index(6), 4);
        assert_eq!(fam.m_index(6).unwrap().value, 1);
        // tau_1 = 1, tau_2 = 4.5: n(3) = 2, min{2 - 1} = 1 -> m = 1
        let wide = CoefficientFamily::finite_support(
            vec![1.0],
            Delays::Explicit { list: vec![1.0, 4.5], delta: 0.5 },
        )
        .unwrap();
        assert_eq!(wide.n_index(3), 2);
        assert_eq!(wide.m_index(3).unwrap().value, 1);
    }

    #[test]
    fn tail_examples() {
        let g = CoefficientFamily::geometric(1.0, 0.5, Delays::unit()).unwrap();
        assert_eq!(g.tail_sum_bound(&WeightFunction::UNIT, 3).unwrap(), TailBound::Finite(0.25));
        let h = CoefficientFamily::power_law(1.0, 1.0, Delays::unit()).unwrap();
        assert_eq!(h.tail_sum_bound(&WeightFunction::UNIT, 1).unwrap(), TailBound::Divergent);
        let q = CoefficientFamily::geometric(1.0, 0.25, Delays::unit()).unwrap();
        let v = q.tail_sum_bound(&WeightFunction::exponential(2.0), 1).unwrap().finite().unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn truncation_examples() {
        let g = CoefficientFamily::geometric(1.0, 0.5, Delays::unit()).unwrap();
        assert_eq!(g.truncation_index(&WeightFunction::UNIT, 0.1).unwrap(), 4);
        let f = CoefficientFamily::finite_support(vec![0.3, -0.7], Delays::unit()).unwrap();
        assert_eq!(f.truncation_index(&WeightFunction::exponential(3.0), 1e-9).unwrap(), 2);
        assert_eq!(f.truncation_index(&WeightFunction::UNIT, 10.0).unwrap(), 2);
        let q = CoefficientFamily::geometric(1.0, 0.25, Delays::unit()).unwrap();
        assert_eq!(q.truncation_index(&WeightFunction::exponential(2.0), 0.05).unwrap(), 5);
        let h = CoefficientFamily::power_law(1.0, 1.0, Delays::unit()).unwrap();
        assert_eq!(h.truncation_index(&WeightFunction::UNIT, 0.1), Err(Error::Divergent));
    }

    #[test]
    fn explicit_list_unknown_tail() {
        let fam = CoefficientFamily::new(
            Coefficients::ExplicitList { b: vec![0.5, 0.25], tail_bound: 0.01 },
            Delays::unit(),
        )
        .unwrap();
        let v = fam.tail_sum_bound(&WeightFunction::UNIT, 1).unwrap().finite().unwrap();
        assert!((v - 0.76).abs() < 1e-15);
        assert!(matches!(
            fam.tail_sum_bound(&WeightFunction::exponential(2.0), 1),
            Err(Error::UnknownTail(_))
        ));
        assert!(matches!(
            fam.truncation_index(&WeightFunction::UNIT, 1e-3),
            Err(Error::UnknownTail(_))
        ));
        assert_eq!(fam.truncation_index(&WeightFunction::UNIT, 0.1).unwrap(), 2);
    }

    #[test]
    fn explicit_delays_extend_arithmetically() {
        let d = Delays::Explicit { list: vec![0.5, 0.7, 2.0], delta: 0.5 };
        assert_eq!(d.tau(3), 2.0);
        assert_eq!(d.tau(5), 3.0);
        let (p, c, delta) = d.affine_beyond();
        assert_eq!(c + 5.0 * delta, d.tau(5));
        assert_eq!(p, 3);
        assert_eq!(d.first_index_at_least(0.6), 2);
        assert_eq!(d.first_index_at_least(2.9), 5);
    }

    #[test]
    fn rejects_bad_delays() {
        assert!(CoefficientFamily::finite_support(vec![1.0], Delays::Affine { c: -1.0, delta: 1.0 }).is_err());
        assert!(CoefficientFamily::finite_support(
            vec![1.0],
            Delays::Explicit { list: vec![1.0, 1.0], delta: 1.0 }
        )
        .is_err());
    }

    #[test]
    fn weight_dominance() {
        let c = WeightFunction::Constant { value: 3.0 };
        let e2 = WeightFunction::exponential(2.0);
        let e3 = WeightFunction::exponential(3.0);
        let p = WeightFunction::Polynomial { scale: 1.0, power: 2.0 };
        assert_eq!(c.dominated_by(&e2), Some(3.0));
        assert_eq!(e2.dominated_by(&e3), Some(1.0));
        assert_eq!(e3.dominated_by(&e2), None);
        let k = p.dominated_by(&e2).unwrap();
        for theta in [0.0, -1.0, -2.885, -10.0, -50.0] {
            assert!(p.evaluate(theta) <= k * e2.evaluate(theta) * (1.0 + 1e-12));
        }
    }
}
