//! Closed-form tails of history functions beyond their piecewise core, and
//! the envelopes that bound them.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::coefficients::WeightFunction;
use crate::error::{Error, Result};

/// Number of samples used when a multi-term formula has no exact supremum.
const SUP_SAMPLES: usize = 257;

/// One analytic term of a tail formula.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TailTerm {
    Constant {
        value: f64,
    },
    /// `amp * cos(freq * theta + phase)`.
    Cos {
        amp: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amp * exp(rate * theta)`; `rate < 0` grows as `theta -> -inf`.
    Exp { amp: f64, rate: f64 },
}

impl TailTerm {
    pub fn eval(&self, theta: f64) -> f64 {
        match *self {
            TailTerm::Constant { value } => value,
            TailTerm::Cos { amp, freq, phase } => amp * (freq * theta + phase).cos(),
            TailTerm::Exp { amp, rate } => amp * (rate * theta).exp(),
        }
    }

    fn derivative(&self) -> TailTerm {
        match *self {
            TailTerm::Constant { .. } => TailTerm::Constant { value: 0.0 },
            TailTerm::Cos { amp, freq, phase } => TailTerm::Cos {
                amp: amp * freq,
                freq,
                phase: phase + FRAC_PI_2,
            },
            TailTerm::Exp { amp, rate } => TailTerm::Exp { amp: amp * rate, rate },
        }
    }

    fn shifted(&self, t: f64) -> TailTerm {
        match *self {
            TailTerm::Constant { value } => TailTerm::Constant { value },
            TailTerm::Cos { amp, freq, phase } => TailTerm::Cos { amp, freq, phase: phase + freq * t },
            TailTerm::Exp { amp, rate } => TailTerm::Exp { amp: amp * (rate * t).exp(), rate },
        }
    }

    fn scaled(&self, s: f64) -> TailTerm {
        match *self {
            TailTerm::Constant { value } => TailTerm::Constant { value: s * value },
            TailTerm::Cos { amp, freq, phase } => TailTerm::Cos { amp: s * amp, freq, phase },
            TailTerm::Exp { amp, rate } => TailTerm::Exp { amp: s * amp, rate },
        }
    }

    fn amplitude(&self) -> f64 {
        match *self {
            TailTerm::Constant { value } => value.abs(),
            TailTerm::Cos { amp, .. } | TailTerm::Exp { amp, .. } => amp.abs(),
        }
    }

    /// Exact `sup |term|` on `[lo, hi]`.
    fn max_abs_on(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            TailTerm::Constant { value } => value.abs(),
            TailTerm::Exp { .. } => self.eval(lo).abs().max(self.eval(hi).abs()),
            TailTerm::Cos { amp, freq, phase } => {
                if freq == 0.0 {
                    return self.eval(lo).abs();
                }
                if (hi - lo) * freq.abs() >= TAU {
                    return amp.abs();
                }
                let (a, b) = {
                    let (x, y) = (freq * lo + phase, freq * hi + phase);
                    (x.min(y), x.max(y))
                };
                // |cos| = 1 at multiples of pi
                if (a / PI).ceil() * PI <= b {
                    amp.abs()
                } else {
                    self.eval(lo).abs().max(self.eval(hi).abs())
                }
            }
        }
    }

    /// Upper bound on `|term'|` over `[lo, hi]`.
    fn lipschitz_on(&self, lo: f64, hi: f64) -> f64 {
        self.derivative().max_abs_on(lo, hi)
    }

    /// Upper bound on the fourth derivative over `[lo, hi]`.
    fn fourth_derivative_bound(&self, lo: f64, hi: f64) -> f64 {
        self.derivative().derivative().derivative().derivative().max_abs_on(lo, hi)
    }

    /// Envelope valid on all of `(-inf, 0]`.
    fn natural_envelope(&self) -> Envelope {
        match *self {
            TailTerm::Exp { amp, rate } if rate < 0.0 => Envelope {
                scale: amp.abs(),
                weight: WeightFunction::exponential((-rate).exp()),
            },
            _ => Envelope::bounded(self.amplitude()),
        }
    }
}

/// `|f(theta)| <= scale * weight(theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Envelope {
    pub scale: f64,
    pub weight: WeightFunction,
}

impl Envelope {
    pub fn bounded(scale: f64) -> Self {
        Envelope { scale, weight: WeightFunction::UNIT }
    }

    pub fn at(&self, theta: f64) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.scale * self.weight.evaluate(theta)
        }
    }

    /// An envelope for `f + g` given envelopes for `f` and `g`.
    pub fn sum(&self, other: &Envelope) -> Envelope {
        if self.scale == 0.0 {
            return *other;
        }
        if other.scale == 0.0 {
            return *self;
        }
        if let Some(k) = other.weight.dominated_by(&self.weight) {
            Envelope { scale: self.scale + k * other.scale, weight: self.weight }
        } else if let Some(k) = self.weight.dominated_by(&other.weight) {
            Envelope { scale: other.scale + k * self.scale, weight: other.weight }
        } else {
            // every supported pair is comparable; fall back to the faster-growing weight
            let w = if matches!(self.weight, WeightFunction::Exponential { .. }) { self.weight } else { other.weight };
            Envelope { scale: self.scale + other.scale, weight: w }
        }
    }
}

/// Finite sum of analytic terms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TailFormula {
    pub terms: Vec<TailTerm>,
}

/// Supremum estimate: the true supremum lies in `[value, value + slack]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SupEstimate {
    pub value: f64,
    pub slack: f64,
}

impl SupEstimate {
    pub fn exact(value: f64) -> Self {
        SupEstimate { value, slack: 0.0 }
    }

    pub fn upper(&self) -> f64 {
        self.value + self.slack
    }

    pub fn max(self, other: SupEstimate) -> SupEstimate {
        let value = self.value.max(other.value);
        let upper = self.upper().max(other.upper());
        SupEstimate { value, slack: upper - value }
    }
}

/// `sup |f(theta)| / g(theta)` over a tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RatioSup {
    /// `exact = false` when `value` is only an upper bound.
    Finite { value: f64, exact: bool },
    Infinite,
}

impl TailFormula {
    pub fn new(terms: Vec<TailTerm>) -> Self {
        TailFormula { terms }.normalized()
    }

    pub fn constant(value: f64) -> Self {
        TailFormula::new(vec![TailTerm::Constant { value }])
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(theta)).sum()
    }

    pub fn derivative(&self) -> TailFormula {
        TailFormula::new(self.terms.iter().map(TailTerm::derivative).collect())
    }

    pub fn eval_derivative(&self, theta: f64) -> f64 {
        self.terms.iter().map(|t| t.derivative().eval(theta)).sum()
    }

    /// `theta -> f(theta + t)`.
    pub fn shifted(&self, t: f64) -> TailFormula {
        TailFormula::new(self.terms.iter().map(|term| term.shifted(t)).collect())
    }

    pub fn scaled(&self, s: f64) -> TailFormula {
        TailFormula::new(self.terms.iter().map(|t| t.scaled(s)).collect())
    }

    pub fn combine(alpha: f64, f: &TailFormula, beta: f64, g: &TailFormula) -> TailFormula {
        let mut terms: Vec<TailTerm> = f.terms.iter().map(|t| t.scaled(alpha)).collect();
        terms.extend(g.terms.iter().map(|t| t.scaled(beta)));
        TailFormula::new(terms)
    }

    /// Merge constants, equal-rate exponentials and equal-frequency cosines;
    /// drop zero terms.
    pub fn normalized(self) -> TailFormula {
        let mut constant = 0.0;
        let mut exps: Vec<(f64, f64)> = Vec::new();
        let mut cosines: Vec<(f64, f64, f64)> = Vec::new(); // (freq, re, im)
        for term in self.terms {
            match term {
                TailTerm::Constant { value } => constant += value,
                TailTerm::Exp { amp, rate: 0.0 } => constant += amp,
                TailTerm::Exp { amp, rate } => match exps.iter_mut().find(|(r, _)| *r == rate) {
                    Some((_, a)) => *a += amp,
                    None => exps.push((rate, amp)),
                },
                TailTerm::Cos { amp, freq: 0.0, phase } => constant += amp * phase.cos(),
                TailTerm::Cos { amp, freq, phase } => {
                    let (re, im) = (amp * phase.cos(), amp * phase.sin());
                    match cosines.iter_mut().find(|(f, _, _)| *f == freq) {
                        Some((_, r, i)) => {
                            *r += re;
                            *i += im;
                        }
                        None => cosines.push((freq, re, im)),
                    }
                }
            }
        }
        let mut terms = Vec::new();
        if constant != 0.0 {
            terms.push(TailTerm::Constant { value: constant });
        }
        for (rate, amp) in exps {
            if amp != 0.0 {
                terms.push(TailTerm::Exp { amp, rate });
            }
        }
        for (freq, re, im) in cosines {
            let amp = re.hypot(im);
            if amp != 0.0 {
                terms.push(TailTerm::Cos { amp, freq, phase: im.atan2(re) });
            }
        }
        TailFormula { terms }
    }

    /// `sup |f|` on `[lo, hi]`: exact for a single term, otherwise sampled
    /// with a Lipschitz slack.
    pub fn max_abs_on(&self, lo: f64, hi: f64) -> SupEstimate {
        match self.terms.as_slice() {
            [] => SupEstimate::exact(0.0),
            [term] => SupEstimate::exact(term.max_abs_on(lo, hi)),
            _ if hi <= lo => SupEstimate::exact(self.eval(lo).abs()),
            terms => {
                let step = (hi - lo) / (SUP_SAMPLES - 1) as f64;
                let value = (0..SUP_SAMPLES)
                    .map(|j| self.eval(lo + j as f64 * step).abs())
                    .fold(0.0, f64::max);
                let lipschitz: f64 = terms.iter().map(|t| t.lipschitz_on(lo, hi)).sum();
                SupEstimate { value, slack: 0.5 * lipschitz * step }
            }
        }
    }

    pub fn fourth_derivative_bound(&self, lo: f64, hi: f64) -> f64 {
        self.terms.iter().map(|t| t.fourth_derivative_bound(lo, hi)).sum()
    }

    /// Envelope derived from the formula itself, valid on `(-inf, 0]`.
    pub fn natural_envelope(&self) -> Envelope {
        self.terms
            .iter()
            .map(TailTerm::natural_envelope)
            .fold(Envelope::bounded(0.0), |acc, e| acc.sum(&e))
    }

    /// `ell * w(theta) <= |f(theta)|` on the whole tail, when such a bound
    /// with `ell > 0` is evident from the closed form.
    pub fn lower_envelope(&self) -> Option<Envelope> {
        match self.terms.as_slice() {
            [TailTerm::Constant { value }] if *value != 0.0 => Some(Envelope::bounded(value.abs())),
            [TailTerm::Exp { amp, rate }] if *rate < 0.0 && *amp != 0.0 => Some(Envelope {
                scale: amp.abs(),
                weight: WeightFunction::exponential((-rate).exp()),
            }),
            _ => None,
        }
    }

    /// `sup_{theta <= edge} |f(theta)| / g(theta)`.
    pub fn sup_ratio_left_of(&self, edge: f64, g: &WeightFunction) -> RatioSup {
        let mut total = 0.0;
        let mut exact = self.terms.len() <= 1;
        let g_edge = g.evaluate(edge);
        let constant_g = g.is_constant();
        for term in &self.terms {
            match *term {
                TailTerm::Constant { value } => total += value.abs() / g_edge,
                TailTerm::Cos { amp, .. } => {
                    // |cos| reaches 1 arbitrarily far left; g is largest there unless constant
                    total += amp.abs() / g_edge;
                    exact &= constant_g;
                }
                TailTerm::Exp { amp, rate } => {
                    let growth = match *g {
                        _ if constant_g => 0.0,
                        WeightFunction::Exponential { base } => base.ln(),
                        // polynomial weights lose to any exponential growth
                        _ => 0.0,
                    };
                    if rate + growth < 0.0 {
                        return RatioSup::Infinite;
                    }
                    if rate < 0.0 && !matches!(g, WeightFunction::Exponential { .. }) && !constant_g {
                        return RatioSup::Infinite;
                    }
                    // ratio non-increasing to the left: attained at the edge
                    total += amp.abs() * (rate * edge).exp() / g_edge;
                }
            }
        }
        RatioSup::Finite { value: total, exact }
    }
}

/// Behaviour of a history function to the left of its core.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TailModel {
    /// Constant extension by the core's left endpoint value.
    Constant,
    /// `phi = formula` with `|phi| <= bound`.
    Bounded { formula: TailFormula, bound: f64 },
    /// `phi = formula` with `|phi| <= scale * weight`.
    GEnvelope {
        formula: TailFormula,
        scale: f64,
        weight: WeightFunction,
    },
}

impl TailModel {
    /// Formula tail carrying its natural envelope.
    pub fn natural(formula: TailFormula) -> TailModel {
        let env = formula.natural_envelope();
        if env.weight.is_constant() {
            TailModel::Bounded { bound: env.scale * env.weight.evaluate(0.0), formula }
        } else {
            TailModel::GEnvelope { formula, scale: env.scale, weight: env.weight }
        }
    }

    pub fn formula(&self) -> Option<&TailFormula> {
        match self {
            TailModel::Constant => None,
            TailModel::Bounded { formula, .. } | TailModel::GEnvelope { formula, .. } => Some(formula),
        }
    }

    /// Declared envelope of a formula tail.
    pub fn envelope(&self) -> Option<Envelope> {
        match *self {
            TailModel::Constant => None,
            TailModel::Bounded { bound, .. } => Some(Envelope::bounded(bound)),
            TailModel::GEnvelope { scale, weight, .. } => Some(Envelope { scale, weight }),
        }
    }

    /// Tail of `theta -> phi(theta + t)`; envelopes stay valid because weights
    /// are non-increasing.
    pub fn shifted(&self, t: f64) -> TailModel {
        match self {
            TailModel::Constant => TailModel::Constant,
            TailModel::Bounded { formula, bound } => TailModel::Bounded { formula: formula.shifted(t), bound: *bound },
            TailModel::GEnvelope { formula, scale, weight } => TailModel::GEnvelope {
                formula: formula.shifted(t),
                scale: *scale,
                weight: *weight,
            },
        }
    }

    /// Check the declared envelope against the formula on samples left of `edge`.
    pub fn validate(&self, edge: f64) -> Result<()> {
        match self {
            TailModel::Constant => Ok(()),
            TailModel::Bounded { bound, .. } if !(bound.is_finite() && *bound >= 0.0) => {
                Err(Error::InvalidHistory(format!("tail bound must be finite and >= 0, got {bound}")))
            }
            TailModel::GEnvelope { scale, weight, .. } if !(scale.is_finite() && *scale >= 0.0) || weight.validate().is_err() => {
                Err(Error::InvalidHistory(format!("invalid g-envelope (scale {scale}, weight {weight:?})")))
            }
            _ => {
                let (formula, env) = (self.formula().unwrap(), self.envelope().unwrap());
                for theta in envelope_samples(edge) {
                    let v = formula.eval(theta).abs();
                    let e = env.at(theta);
                    if v.is_finite() && v > e * (1.0 + 1e-12) + 1e-300 {
                        return Err(Error::InvalidHistory(format!(
                            "tail envelope violated at theta = {theta}: |phi| = {v:e} > {e:e}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Sample points `theta <= edge`: dense near the edge, spreading out to `edge - 500`.
pub fn envelope_samples(edge: f64) -> impl Iterator<Item = f64> {
    (0..1000).map(move |j| edge - if j == 0 { 0.0 } else { 10f64.powf(-3.0 + 5.7 * j as f64 / 999.0) })
}
