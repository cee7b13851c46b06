//! Initial functions on `(-inf, 0]`: a piecewise-cubic core on `[-M, 0]`
//! followed by a closed-form tail, with the phase-space seminorms.

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientFamily, TailBound, WeightFunction};
use crate::error::{Error, Result};
use crate::poly::{real_roots_in, Cubic};
use crate::tail::{Envelope, RatioSup, SupEstimate, TailFormula, TailModel, TailTerm};

/// Continuity tolerance at breakpoints, relative to the local magnitude.
pub const CONTINUITY_TOL: f64 = 1e-12;

/// Default spacing when sampling analytic presets onto the core.
pub const DEFAULT_RESOLUTION: f64 = 1.0 / 128.0;

/// Largest number of explicit terms a seminorm or functional will sum.
pub const MAX_EXPLICIT_TERMS: usize = 4_000_000;

/// `phi` on `(-inf, 0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HistoryDecl", into = "HistoryDecl")]
pub struct HistoryFunction {
    /// `-M = x_0 < x_1 < ... < x_J = 0`.
    breakpoints: Vec<f64>,
    /// Piece `j` in the local variable `theta - x_j`.
    pieces: Vec<Cubic>,
    tail: TailModel,
}

/// Piecewise core as written in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreDecl {
    pub breakpoints: Vec<f64>,
    /// Ascending local coefficients per piece.
    pub coeffs: Vec<[f64; 4]>,
}

/// Named analytic histories sampled onto the core.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Preset {
    Constant {
        value: f64,
    },
    /// `amp * cos(freq * theta + phase)`.
    Cos {
        #[serde(default = "one")]
        amp: f64,
        #[serde(default = "one")]
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amp * exp(rate * theta)`.
    ExpDecay {
        #[serde(default = "one")]
        amp: f64,
        #[serde(default = "one")]
        rate: f64,
    },
    /// `scale * g(theta)` for a constant or exponential weight `g`.
    GWeight {
        weight: WeightFunction,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum HistoryDecl {
    Explicit {
        core: CoreDecl,
        tail: TailModel,
    },
    Preset {
        #[serde(flatten)]
        preset: Preset,
        #[serde(default = "one")]
        core_length: f64,
        #[serde(default = "default_resolution")]
        resolution: f64,
    },
}

fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION
}

impl TryFrom<HistoryDecl> for HistoryFunction {
    type Error = Error;
    fn try_from(d: HistoryDecl) -> Result<Self> {
        match d {
            HistoryDecl::Explicit { core, tail } => HistoryFunction::new(
                core.breakpoints,
                core.coeffs.into_iter().map(Cubic).collect(),
                tail,
            ),
            HistoryDecl::Preset { preset, core_length, resolution } => {
                HistoryFunction::from_preset(&preset, core_length, resolution)
            }
        }
    }
}

impl From<HistoryFunction> for HistoryDecl {
    fn from(h: HistoryFunction) -> Self {
        HistoryDecl::Explicit {
            core: CoreDecl {
                breakpoints: h.breakpoints,
                coeffs: h.pieces.into_iter().map(|c| c.0).collect(),
            },
            tail: h.tail,
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONTINUITY_TOL * a.abs().max(b.abs()).max(1.0)
}

impl HistoryFunction {
    /// Validated construction from a core and a tail model.
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Cubic>, tail: TailModel) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidHistory(msg));
        if breakpoints.len() < 2 {
            return bad("core needs at least two breakpoints".into());
        }
        if pieces.len() != breakpoints.len() - 1 {
            return bad(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                pieces.len()
            ));
        }
        if *breakpoints.last().unwrap() != 0.0 {
            return bad("core must end at theta = 0".into());
        }
        if breakpoints.iter().any(|x| !x.is_finite()) || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return bad("breakpoints must be finite and strictly increasing".into());
        }
        if pieces.iter().any(|p| p.0.iter().any(|c| !c.is_finite())) {
            return bad("core coefficients must be finite".into());
        }
        for j in 1..pieces.len() {
            let left = pieces[j - 1].eval(breakpoints[j] - breakpoints[j - 1]);
            let right = pieces[j].eval(0.0);
            if !close(left, right) {
                return bad(format!(
                    "core is discontinuous at theta = {}: {left} vs {right}",
                    breakpoints[j]
                ));
            }
        }
        let h = HistoryFunction { breakpoints, pieces, tail };
        h.tail.validate(h.left_edge())?;
        if let Some(f) = h.tail.formula() {
            let (edge, core) = (h.left_edge(), h.pieces[0].eval(0.0));
            if !close(f.eval(edge), core) {
                return bad(format!(
                    "tail formula {} does not meet the core value {core} at theta = {edge}",
                    f.eval(edge)
                ));
            }
        }
        Ok(h)
    }

    /// Construction without validation, for internally generated functions
    /// that are continuous by construction.
    pub(crate) fn from_parts(breakpoints: Vec<f64>, pieces: Vec<Cubic>, tail: TailModel) -> Self {
        debug_assert_eq!(pieces.len() + 1, breakpoints.len());
        HistoryFunction { breakpoints, pieces, tail }
    }

    /// `phi == value` everywhere.
    pub fn constant(value: f64) -> Self {
        HistoryFunction::from_parts(vec![-1.0, 0.0], vec![Cubic::constant(value)], TailModel::Constant)
    }

    /// `phi == formula`, Hermite-sampled on `[-core_length, 0]` with the
    /// formula's natural envelope as tail model.
    pub fn analytic(formula: TailFormula, core_length: f64, resolution: f64) -> Result<Self> {
        if !(core_length > 0.0 && core_length.is_finite() && resolution > 0.0) {
            return Err(Error::InvalidHistory(format!(
                "need core_length > 0 and resolution > 0 (got {core_length}, {resolution})"
            )));
        }
        let (breakpoints, pieces) = hermite_sample(&formula, -core_length, 0.0, resolution);
        Ok(HistoryFunction::from_parts(breakpoints, pieces, TailModel::natural(formula)))
    }

    pub fn from_preset(preset: &Preset, core_length: f64, resolution: f64) -> Result<Self> {
        let formula = match *preset {
            Preset::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidHistory(format!("constant preset value {value}")));
                }
                let mut h = HistoryFunction::constant(value);
                h.breakpoints[0] = -core_length.max(f64::MIN_POSITIVE);
                return Ok(h);
            }
            Preset::Cos { amp, freq, phase } => TailFormula::new(vec![TailTerm::Cos { amp, freq, phase }]),
            Preset::ExpDecay { amp, rate } => TailFormula::new(vec![TailTerm::Exp { amp, rate }]),
            Preset::GWeight { weight, scale } => {
                weight.validate()?;
                match weight {
                    WeightFunction::Constant { value } => TailFormula::constant(scale * value),
                    WeightFunction::Exponential { base } => {
                        TailFormula::new(vec![TailTerm::Exp { amp: scale, rate: -base.ln() }])
                    }
                    WeightFunction::Polynomial { .. } => {
                        return Err(Error::InvalidHistory(
                            "g-weight preset supports constant and exponential weights".into(),
                        ))
                    }
                }
            }
        };
        HistoryFunction::analytic(formula, core_length, resolution)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Cubic] {
        &self.pieces
    }

    pub fn tail(&self) -> &TailModel {
        &self.tail
    }

    /// `-M`.
    pub fn left_edge(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn core_length(&self) -> f64 {
        -self.breakpoints[0]
    }

    /// Index of the piece containing `theta` (clamped to the core).
    pub(crate) fn locate(&self, theta: f64) -> usize {
        let j = self.breakpoints.partition_point(|&x| x <= theta);
        j.saturating_sub(1).min(self.pieces.len() - 1)
    }

    /// `phi(theta)`; rejects `theta > 0`.
    pub fn evaluate(&self, theta: f64) -> Result<f64> {
        if theta > 0.0 || theta.is_nan() {
            return Err(Error::PositiveArgument { theta });
        }
        Ok(self.value(theta))
    }

    /// `phi(theta)` for `theta <= 0` without the domain check.
    pub(crate) fn value(&self, theta: f64) -> f64 {
        if theta < self.left_edge() {
            match self.tail.formula() {
                Some(f) => f.eval(theta),
                None => self.pieces[0].eval(0.0),
            }
        } else {
            let j = self.locate(theta);
            self.pieces[j].eval(theta - self.breakpoints[j])
        }
    }

    /// `phi'(theta)`, right-continuous at interior breakpoints and one-sided at 0.
    pub fn derivative_at(&self, theta: f64) -> f64 {
        if theta < self.left_edge() {
            match self.tail.formula() {
                Some(f) => f.eval_derivative(theta),
                None => 0.0,
            }
        } else {
            let j = self.locate(theta);
            self.pieces[j].eval_derivative(theta - self.breakpoints[j])
        }
    }

    /// `sup |phi|` on `[lo, hi]`: exact on the core, exact or slack-bounded on the tail.
    pub fn sup_abs_on(&self, lo: f64, hi: f64) -> SupEstimate {
        let hi = hi.min(0.0);
        let left = self.left_edge();
        let mut est = SupEstimate::exact(0.0);
        if hi >= left {
            let a = lo.max(left);
            let mut j = self.locate(a);
            loop {
                let (x0, x1) = (self.breakpoints[j], self.breakpoints[j + 1]);
                let u0 = a.max(x0) - x0;
                let u1 = hi.min(x1) - x0;
                est = est.max(SupEstimate::exact(self.pieces[j].max_abs_on(u0, u1.max(u0))));
                j += 1;
                if x1 >= hi || j == self.pieces.len() {
                    break;
                }
            }
        }
        if lo < left {
            let b = hi.min(left);
            est = est.max(match self.tail.formula() {
                Some(f) => f.max_abs_on(lo, b),
                None => SupEstimate::exact(self.pieces[0].eval(0.0).abs()),
            });
        }
        est
    }

    /// `||phi||_k = sup_{[-k, 0]} |phi|`.
    pub fn sup_norm_k(&self, k: usize) -> f64 {
        self.sup_abs_on(-(k as f64), 0.0).upper()
    }

    /// `sup |phi|` over the core.
    pub fn core_sup(&self) -> f64 {
        self.sup_abs_on(self.left_edge(), 0.0).value
    }

    /// `|phi(theta)| <= scale * weight(theta)` on all of `(-inf, 0]`.
    pub fn upper_envelope(&self) -> Envelope {
        let core = self.core_sup();
        match self.tail.envelope() {
            None => Envelope::bounded(core),
            Some(e) => {
                let at_zero = e.weight.evaluate(0.0);
                Envelope { scale: (core / at_zero).max(e.scale), weight: e.weight }
            }
        }
    }

    /// `ell * w(theta) <= |phi(theta)|` for `theta <= -M`, when the tail makes it evident.
    pub fn lower_tail_envelope(&self) -> Option<Envelope> {
        match self.tail.formula() {
            None => {
                let v = self.pieces[0].eval(0.0).abs();
                (v > 0.0).then(|| Envelope::bounded(v))
            }
            Some(f) => f.lower_envelope(),
        }
    }
}

/// Hermite interpolation of `f` on `[lo, hi]` with pieces no longer than `h`.
fn hermite_sample(f: &TailFormula, lo: f64, hi: f64, h: f64) -> (Vec<f64>, Vec<Cubic>) {
    let n = ((hi - lo) / h).ceil().max(1.0) as usize;
    let mut breakpoints: Vec<f64> = (0..n).map(|j| lo + (hi - lo) * j as f64 / n as f64).collect();
    breakpoints.push(hi);
    let pieces = breakpoints
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            Cubic::hermite(d, f.eval(w[0]), f.eval_derivative(w[0]), f.eval(w[1]), f.eval_derivative(w[1]))
        })
        .collect();
    (breakpoints, pieces)
}

/// Status of a computed seminorm.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SeminormVerdict {
    Finite,
    Divergent,
    Inconclusive { reason: String },
}

/// `p_k(phi)` with its truncation certificate. When finite, the true value
/// lies in `[value, value + truncation_bound]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeminormValue {
    pub k: usize,
    pub value: f64,
    pub truncation_bound: f64,
    /// Explicitly summed indices `first_index..=last_index`.
    pub first_index: usize,
    pub last_index: usize,
    pub verdict: SeminormVerdict,
}

impl SeminormValue {
    pub fn is_finite(&self) -> bool {
        self.verdict == SeminormVerdict::Finite
    }

    pub fn is_divergent(&self) -> bool {
        self.verdict == SeminormVerdict::Divergent
    }

    pub fn upper(&self) -> f64 {
        self.value + self.truncation_bound
    }

    fn unresolved(k: usize, first_index: usize, verdict: SeminormVerdict) -> Self {
        let value = if verdict == SeminormVerdict::Divergent { f64::INFINITY } else { f64::NAN };
        SeminormValue { k, value, truncation_bound: f64::INFINITY, first_index, last_index: first_index - 1, verdict }
    }
}

/// Overall verdict of a finite membership check.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Membership {
    /// Every `p_k`, `k <= k_max`, is certified finite.
    FiniteUpTo { k_max: usize },
    Divergent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MembershipReport {
    pub per_k: Vec<SeminormValue>,
    pub verdict: Membership,
}

/// `sup |phi| / g` over `(-inf, 0]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CgNorm {
    /// `exact = false` when `value` is an upper bound only.
    Finite { value: f64, exact: bool },
    Infinite,
}

impl CgNorm {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            CgNorm::Finite { value, .. } => Some(value),
            CgNorm::Infinite => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum EmbeddingVerdict {
    Holds,
    Violated,
    NotApplicable { reason: String },
}

/// Both sides of `p_k(phi) <= ||phi||_g * sum_{i >= n(k)} |b_i| g(-tau_i)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CgEmbeddingReport {
    pub k: usize,
    pub lhs: Option<f64>,
    pub cg_norm: Option<f64>,
    pub weighted_tail: Option<f64>,
    pub rhs: Option<f64>,
    pub verdict: EmbeddingVerdict,
}

/// `L phi` with a bound on the omitted part of the series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LValue {
    pub value: f64,
    pub error_bound: f64,
    pub terms: usize,
}

/// Tolerance on the embedding inequality.
pub const EMBEDDING_TOL: f64 = 1e-8;

/// Last index to sum explicitly so that the weighted remainder beyond it is
/// at most `eps`, never below `first - 1` and capped at `MAX_EXPLICIT_TERMS`.
pub(crate) fn explicit_last_index(fam: &CoefficientFamily, env: &Envelope, eps: f64, first: usize) -> Result<usize> {
    let floor = first - 1;
    if env.scale == 0.0 {
        return Ok(floor);
    }
    let n = match fam.truncation_index(&env.weight, eps / env.scale) {
        Ok(n) => n,
        Err(Error::UnknownTail(_)) => match fam.coefficients() {
            crate::coefficients::Coefficients::ExplicitList { b, .. } => b.len(),
            _ => floor + MAX_EXPLICIT_TERMS,
        },
        Err(e) => return Err(e),
    };
    Ok(n.max(floor).min(floor + MAX_EXPLICIT_TERMS))
}

impl HistoryFunction {
    /// `p_k(phi) = sum_{i >= n(k)} |b_i| sup_{s in [0, k tau_1]} |phi(s - tau_i)|`.
    pub fn p_seminorm(&self, fam: &CoefficientFamily, k: usize, eps: f64) -> SeminormValue {
        let first = fam.n_index(k);
        let window = k as f64 * fam.tau1();
        let env = self.upper_envelope();
        let inconclusive = |reason: String| SeminormValue::unresolved(k, first, SeminormVerdict::Inconclusive { reason });
        match fam.tail_sum_bound(&env.weight, first) {
            Err(e) => return inconclusive(e.to_string()),
            Ok(TailBound::Divergent) => {
                let certified = self
                    .lower_tail_envelope()
                    .map(|low| matches!(fam.tail_sum_bound(&low.weight, first), Ok(TailBound::Divergent)))
                    .unwrap_or(false);
                return if certified {
                    SeminormValue::unresolved(k, first, SeminormVerdict::Divergent)
                } else {
                    inconclusive("the envelope series diverges but no lower bound certifies divergence".into())
                };
            }
            Ok(TailBound::Finite(_)) => {}
        }
        let last = match explicit_last_index(fam, &env, eps, first) {
            Ok(n) => n,
            Err(e) => return inconclusive(e.to_string()),
        };
        let (mut value, mut slack) = (0.0, 0.0);
        // with a constant extension, every window left of the core has the same sup
        let beyond_core = window - self.left_edge();
        let constant_tail = self.tail.formula().is_none();
        let mut far_weight = 0.0;
        for i in first..=last {
            let b = fam.b(i).abs();
            if b == 0.0 {
                continue;
            }
            let tau = fam.tau(i);
            if constant_tail && tau > beyond_core {
                far_weight += b;
                continue;
            }
            let s = self.sup_abs_on(-tau, window - tau);
            value += b * s.value;
            slack += b * s.slack;
        }
        value += far_weight * self.pieces[0].eval(0.0).abs();
        let remainder = if env.scale == 0.0 {
            0.0
        } else {
            match fam.tail_sum_bound(&env.weight, last + 1) {
                Ok(TailBound::Finite(t)) => env.scale * t,
                Ok(TailBound::Divergent) => return inconclusive("remainder certificate diverged".into()),
                Err(e) => return inconclusive(e.to_string()),
            }
        };
        SeminormValue {
            k,
            value,
            truncation_bound: remainder + slack,
            first_index: first,
            last_index: last,
            verdict: SeminormVerdict::Finite,
        }
    }

    /// `p_1, ..., p_{k_max}`; membership in the phase space can only be
    /// confirmed up to `k_max`.
    pub fn membership_in_f(&self, fam: &CoefficientFamily, k_max: usize, eps: f64) -> MembershipReport {
        let per_k: Vec<SeminormValue> = (1..=k_max).map(|k| self.p_seminorm(fam, k, eps)).collect();
        let verdict = if per_k.iter().any(SeminormValue::is_divergent) {
            Membership::Divergent
        } else if per_k.iter().all(SeminormValue::is_finite) {
            Membership::FiniteUpTo { k_max }
        } else {
            Membership::Inconclusive
        };
        MembershipReport { per_k, verdict }
    }

    /// `||phi||_g = sup_{theta <= 0} |phi(theta)| / g(theta)`.
    pub fn cg_norm(&self, g: &WeightFunction) -> Result<CgNorm> {
        g.validate()?;
        let mut core: f64 = 0.0;
        for (j, p) in self.pieces.iter().enumerate() {
            let (x0, x1) = (self.breakpoints[j], self.breakpoints[j + 1]);
            let h = x1 - x0;
            let [c0, c1, c2, c3] = p.0;
            // zeros of d/du (p(u) / g(x0 + u)), up to a positive factor
            let numerator: Vec<f64> = match *g {
                WeightFunction::Constant { .. } => p.derivative().0.to_vec(),
                WeightFunction::Exponential { base } => {
                    let l = base.ln();
                    vec![c1 + l * c0, 2.0 * c2 + l * c1, 3.0 * c3 + l * c2, l * c3]
                }
                WeightFunction::Polynomial { power: s, .. } => {
                    let a = 1.0 - x0;
                    vec![a * c1 + s * c0, 2.0 * a * c2 + (s - 1.0) * c1, 3.0 * a * c3 + (s - 2.0) * c2, (s - 3.0) * c3]
                }
            };
            let ratio = |u: f64| p.eval(u).abs() / g.evaluate(x0 + u);
            let mut best = ratio(0.0).max(ratio(h));
            for u in real_roots_in(&numerator, 0.0, h) {
                best = best.max(ratio(u));
            }
            core = core.max(best);
        }
        let edge = self.left_edge();
        let tail = match self.tail.formula() {
            None => RatioSup::Finite { value: self.pieces[0].eval(0.0).abs() / g.evaluate(edge), exact: true },
            Some(f) => f.sup_ratio_left_of(edge, g),
        };
        Ok(match tail {
            RatioSup::Infinite => CgNorm::Infinite,
            RatioSup::Finite { value, exact } => CgNorm::Finite {
                value: core.max(value),
                exact: exact || value <= core,
            },
        })
    }

    /// Checks the weighted-space embedding inequality at level `k`.
    pub fn check_cg_embedding(&self, fam: &CoefficientFamily, g: &WeightFunction, k: usize, eps: f64) -> CgEmbeddingReport {
        let mut report = CgEmbeddingReport { k, lhs: None, cg_norm: None, weighted_tail: None, rhs: None, verdict: EmbeddingVerdict::Holds };
        let not_applicable = |mut r: CgEmbeddingReport, reason: String| {
            r.verdict = EmbeddingVerdict::NotApplicable { reason };
            r
        };
        match fam.tail_sum_bound(g, 1) {
            Ok(TailBound::Finite(_)) => {}
            Ok(TailBound::Divergent) => return not_applicable(report, "sum |b_i| g(-tau_i) diverges".into()),
            Err(e) => return not_applicable(report, e.to_string()),
        }
        let norm = match self.cg_norm(g) {
            Ok(CgNorm::Finite { value, .. }) => value,
            Ok(CgNorm::Infinite) => return not_applicable(report, "phi is not in C_g".into()),
            Err(e) => return not_applicable(report, e.to_string()),
        };
        report.cg_norm = Some(norm);
        let weighted = match fam.tail_sum_bound(g, fam.n_index(k)) {
            Ok(TailBound::Finite(t)) => t,
            _ => return not_applicable(report, "weighted tail not certified".into()),
        };
        report.weighted_tail = Some(weighted);
        report.rhs = Some(norm * weighted);
        let p = self.p_seminorm(fam, k, eps);
        if !p.is_finite() {
            return not_applicable(report, format!("p_{k} not certified finite"));
        }
        report.lhs = Some(p.value);
        report.verdict = if p.value <= norm * weighted + EMBEDDING_TOL {
            EmbeddingVerdict::Holds
        } else {
            EmbeddingVerdict::Violated
        };
        report
    }

    /// `L phi = a phi(0) + sum_i b_i phi(-tau_i)`.
    pub fn l_functional(&self, fam: &CoefficientFamily, a: f64, eps: f64) -> Result<LValue> {
        let env = self.upper_envelope();
        match fam.tail_sum_bound(&env.weight, 1)? {
            TailBound::Divergent => return Err(Error::Divergent),
            TailBound::Finite(_) => {}
        }
        let last = explicit_last_index(fam, &env, eps, 1)?;
        let mut value = a * self.value(0.0);
        for i in 1..=last {
            let b = fam.b(i);
            if b != 0.0 {
                value += b * self.value(-fam.tau(i));
            }
        }
        let error_bound = if env.scale == 0.0 {
            0.0
        } else {
            match fam.tail_sum_bound(&env.weight, last + 1)? {
                TailBound::Finite(t) => env.scale * t,
                TailBound::Divergent => return Err(Error::Divergent),
            }
        };
        Ok(LValue { value, error_bound, terms: last })
    }
}

/// Hermite spacing that keeps the interpolation error of `f` on `[lo, hi]`
/// near `1e-12` relative.
fn resample_step(f: &TailFormula, lo: f64, hi: f64) -> f64 {
    let d4 = f.fourth_derivative_bound(lo, hi);
    let scale = f.max_abs_on(lo, hi).upper().max(1.0);
    if d4 > 0.0 {
        (384.0 * 1e-12 * scale / d4).powf(0.25).max(1e-3).min(hi - lo)
    } else {
        hi - lo
    }
}

impl HistoryFunction {
    /// The same function with its core extended to `[-m, 0]`.
    pub fn extended_to(&self, m: f64) -> HistoryFunction {
        let edge = self.left_edge();
        let target = -m;
        if !(target < edge) {
            return self.clone();
        }
        let (mut breakpoints, mut pieces) = match self.tail.formula() {
            None => (vec![target], vec![Cubic::constant(self.pieces[0].eval(0.0))]),
            Some(f) if edge - target < 1e-9 => {
                let (y0, y1) = (f.eval(target), self.pieces[0].eval(0.0));
                (vec![target], vec![Cubic([y0, (y1 - y0) / (edge - target), 0.0, 0.0])])
            }
            Some(f) => {
                let (mut b, p) = hermite_sample(f, target, edge, resample_step(f, target, edge));
                b.pop();
                (b, p)
            }
        };
        breakpoints.extend_from_slice(&self.breakpoints);
        pieces.extend_from_slice(&self.pieces);
        HistoryFunction::from_parts(breakpoints, pieces, self.tail.clone())
    }

    /// `alpha * phi + beta * psi` on the union of both cores' breakpoints.
    pub fn linear_combination(alpha: f64, phi: &HistoryFunction, beta: f64, psi: &HistoryFunction) -> HistoryFunction {
        let m = phi.core_length().max(psi.core_length());
        let (a, b) = (phi.extended_to(m), psi.extended_to(m));
        let mut breakpoints: Vec<f64> = a.breakpoints.iter().chain(&b.breakpoints).copied().collect();
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        let pieces = breakpoints
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let local = |h: &HistoryFunction, c: f64| {
                    let j = h.locate(mid);
                    h.pieces[j].shifted(w[0] - h.breakpoints[j]).scaled(c)
                };
                local(&a, alpha).add(&local(&b, beta))
            })
            .collect();
        let tail = match (a.tail.formula(), b.tail.formula()) {
            (None, None) => TailModel::Constant,
            (fa, fb) => {
                let or_const = |f: Option<&TailFormula>, h: &HistoryFunction| {
                    f.cloned().unwrap_or_else(|| TailFormula::constant(h.pieces[0].eval(0.0)))
                };
                TailModel::natural(TailFormula::combine(alpha, &or_const(fa, &a), beta, &or_const(fb, &b)))
            }
        };
        HistoryFunction::from_parts(breakpoints, pieces, tail)
    }

    /// `phi - psi`.
    pub fn difference(&self, other: &HistoryFunction) -> HistoryFunction {
        HistoryFunction::linear_combination(1.0, self, -1.0, other)
    }

    pub fn scaled(&self, alpha: f64) -> HistoryFunction {
        let tail = match self.tail.formula() {
            None => TailModel::Constant,
            Some(f) => TailModel::natural(f.scaled(alpha)),
        };
        HistoryFunction::from_parts(
            self.breakpoints.clone(),
            self.pieces.iter().map(|p| p.scaled(alpha)).collect(),
            tail,
        )
    }

    /// `phi'` as a history function; fails unless the representation is C^1.
    pub fn derivative_history(&self) -> Result<HistoryFunction> {
        let tol = |a: f64, b: f64| (a - b).abs() <= 1e-8 * a.abs().max(b.abs()).max(1.0);
        for j in 1..self.pieces.len() {
            let left = self.pieces[j - 1].eval_derivative(self.breakpoints[j] - self.breakpoints[j - 1]);
            let right = self.pieces[j].eval_derivative(0.0);
            if !tol(left, right) {
                return Err(Error::NotApplicable(format!(
                    "phi' jumps at theta = {} ({left} vs {right})",
                    self.breakpoints[j]
                )));
            }
        }
        let edge_slope = self.pieces[0].eval_derivative(0.0);
        let tail = match self.tail.formula() {
            None if tol(edge_slope, 0.0) => TailModel::Constant,
            None => {
                return Err(Error::NotApplicable(format!(
                    "phi' jumps from 0 to {edge_slope} where the constant extension starts"
                )))
            }
            Some(f) => {
                let d = f.derivative();
                if !tol(d.eval(self.left_edge()), edge_slope) {
                    return Err(Error::NotApplicable("phi' jumps where the tail formula starts".into()));
                }
                TailModel::natural(d)
            }
        };
        let pieces = self.pieces.iter().map(Cubic::derivative).collect();
        Ok(HistoryFunction::from_parts(self.breakpoints.clone(), pieces, tail))
    }

    /// `phi` on `[-r, 0]`, extended to the left by the constant `phi(-r)`.
    pub fn truncated(&self, r: f64) -> HistoryFunction {
        let base = if -r < self.left_edge() { self.extended_to(r) } else { self.clone() };
        let j = base.locate(-r);
        let mut breakpoints = vec![-r];
        breakpoints.extend_from_slice(&base.breakpoints[j + 1..]);
        let mut pieces = vec![base.pieces[j].shifted(-r - base.breakpoints[j])];
        pieces.extend_from_slice(&base.pieces[j + 1..]);
        HistoryFunction::from_parts(breakpoints, pieces, TailModel::Constant)
    }
}
