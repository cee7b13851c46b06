//! Method-of-steps solver: interval by interval on `[k tau_1, (k+1) tau_1]`,
//! each sub-step advanced by the variation-of-constants formula with the
//! delayed forcing integrated by a fixed quadrature rule.

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientFamily, TailBound};
use crate::error::{Error, Result};
use crate::history::{explicit_last_index, HistoryFunction};
use crate::poly::Cubic;
use crate::quadrature::QuadratureRule;
use crate::tail::TailTerm;

/// Default sub-steps per `tau_1`.
pub const DEFAULT_STEPS_PER_TAU1: f64 = 128.0;

/// Default tail tolerance for seminorm reports.
pub const DEFAULT_EPS_SEMINORM: f64 = 1e-10;

/// Tolerance on `observed <= bound` for estimate certificates.
pub const ESTIMATE_TOL: f64 = 1e-9;

/// Delays whose pairwise sums are added as knots.
const PAIRWISE_KNOT_DELAYS: usize = 200;

/// Cores with more pieces than this do not contribute shifted breakpoints as knots.
const MAX_SHIFTED_CORE_PIECES: usize = 4096;

/// `x'(t) = a x(t) + sum_i b_i x(t - tau_i)`, `x = phi` on `(-inf, 0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub a: f64,
    pub family: CoefficientFamily,
    pub history: HistoryFunction,
}

impl ProblemSpec {
    pub fn new(a: f64, family: CoefficientFamily, history: HistoryFunction) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidArgument(format!("a must be finite, got {a}")));
        }
        Ok(ProblemSpec { a, family, history })
    }

    pub fn tau1(&self) -> f64 {
        self.family.tau1()
    }
}

/// Solver settings; unset fields take problem-dependent defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Largest sub-step, `0 < h <= tau_1`; default `tau_1 / 128`.
    pub h: Option<f64>,
    pub quad: QuadratureRule,
    /// Tolerance on the omitted forcing tail; default `1e-10 max(1, ||phi||_1)`.
    pub eps_forcing: Option<f64>,
    /// Tolerance on seminorm truncation; default `1e-10`.
    pub eps_tail_seminorm: Option<f64>,
}

impl SolverConfig {
    pub fn with_step(h: f64) -> Self {
        SolverConfig { h: Some(h), ..SolverConfig::default() }
    }

    pub fn step_for(&self, spec: &ProblemSpec) -> Result<f64> {
        let tau1 = spec.tau1();
        let h = self.h.unwrap_or(tau1 / DEFAULT_STEPS_PER_TAU1);
        if !(h > 0.0 && h <= tau1) {
            return Err(Error::InvalidArgument(format!("sub-step h = {h} must lie in (0, tau_1 = {tau1}]")));
        }
        Ok(h)
    }

    pub fn eps_forcing_for(&self, spec: &ProblemSpec) -> f64 {
        self.eps_forcing.unwrap_or_else(|| 1e-10 * spec.history.sup_norm_k(1).max(1.0))
    }

    pub fn eps_seminorm(&self) -> f64 {
        self.eps_tail_seminorm.unwrap_or(DEFAULT_EPS_SEMINORM)
    }
}

/// `(e^z - 1) / z`, with a series branch near zero.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z * (0.5 + z / 6.0)
    } else {
        z.exp_m1() / z
    }
}

/// `sum b_i phi(t - tau_i)` over delays whose argument always falls in the
/// tail of `phi`, folded into per-term moments so that evaluation does not
/// depend on how many delays there are.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
struct FarSum {
    /// `sum b_i` against the constant extension.
    constant: f64,
    /// `(amp, rate, sum b_i e^(-rate tau_i))`.
    exp: Vec<(f64, f64, f64)>,
    /// `(amp, freq, phase, sum b_i cos(freq tau_i), sum b_i sin(freq tau_i))`.
    cos: Vec<(f64, f64, f64, f64, f64)>,
}

impl FarSum {
    fn new(phi: &HistoryFunction, terms: &[(f64, f64)]) -> Self {
        let mut far = FarSum::default();
        let Some(formula) = phi.tail().formula() else {
            far.constant = phi.pieces()[0].eval(0.0) * terms.iter().map(|t| t.0).sum::<f64>();
            return far;
        };
        for term in &formula.terms {
            match *term {
                TailTerm::Constant { value } => far.constant += value * terms.iter().map(|t| t.0).sum::<f64>(),
                TailTerm::Exp { amp, rate } => {
                    // through logs: e^(-rate tau) alone can overflow where b_i e^(-rate tau) does not
                    let m = terms.iter().map(|&(b, tau)| b.signum() * (b.abs().ln() - rate * tau).exp()).sum();
                    far.exp.push((amp, rate, m));
                }
                TailTerm::Cos { amp, freq, phase } => {
                    let c = terms.iter().map(|&(b, tau)| b * (freq * tau).cos()).sum();
                    let s = terms.iter().map(|&(b, tau)| b * (freq * tau).sin()).sum();
                    far.cos.push((amp, freq, phase, c, s));
                }
            }
        }
        far
    }

    fn eval(&self, t: f64) -> f64 {
        let mut v = self.constant;
        for &(amp, rate, m) in &self.exp {
            v += amp * (rate * t).exp() * m;
        }
        for &(amp, freq, phase, c, s) in &self.cos {
            let arg = freq * t + phase;
            v += amp * (arg.cos() * c + arg.sin() * s);
        }
        v
    }
}

/// Explicit delayed terms and the certified bound on what is left out.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForcingPlan {
    /// `(b_i, tau_i)` with `b_i != 0` for delays that can reach the core of
    /// `phi` or the trajectory.
    terms: Vec<(f64, f64)>,
    /// The remaining delays up to `N`, which only ever see the tail of `phi`.
    far: FarSum,
    t_max: f64,
    pub last_index: usize,
    /// Bound on `|sum_{i > N} b_i x(t - tau_i)|` for every `t` in range.
    pub tail_bound: f64,
}

impl ForcingPlan {
    /// Plan valid for all `t` in `[0, t_max]`.
    pub fn new(spec: &ProblemSpec, t_max: f64, eps: f64) -> Result<Self> {
        let fam = &spec.family;
        let env = spec.history.upper_envelope();
        let not_in_f = |why: String| Error::NotInF(format!("delayed forcing series is not certified: {why}"));
        match fam.tail_sum_bound(&env.weight, 1) {
            Ok(TailBound::Finite(_)) => {}
            Ok(TailBound::Divergent) => return Err(not_in_f("sum |b_i| |phi(-tau_i)| diverges".into())),
            Err(e) => return Err(not_in_f(e.to_string())),
        }
        // every delay reaching into the computed trajectory is summed explicitly
        let reach = fam.delays().first_index_at_least(t_max).saturating_sub(1);
        let last = explicit_last_index(fam, &env, eps, 1).map_err(|e| not_in_f(e.to_string()))?.max(reach);
        // beyond N, t - tau_i <= 0 and |phi(t - tau_i)| <= E w(-tau_i)
        let tail_bound = if env.scale == 0.0 {
            0.0
        } else {
            match fam.tail_sum_bound(&env.weight, last + 1) {
                Ok(TailBound::Finite(t)) => env.scale * t,
                Ok(TailBound::Divergent) => return Err(not_in_f("remainder diverges".into())),
                Err(e) => return Err(not_in_f(e.to_string())),
            }
        };
        // t - tau_i < left edge for every t <= t_max once tau_i > t_max - edge
        let reach_core = t_max - spec.history.left_edge();
        let (mut terms, mut far_terms) = (Vec::new(), Vec::new());
        for i in 1..=last {
            let (b, tau) = (fam.b(i), fam.tau(i));
            if b == 0.0 {
                continue;
            }
            if tau > reach_core {
                far_terms.push((b, tau));
            } else {
                terms.push((b, tau));
            }
        }
        let far = FarSum::new(&spec.history, &far_terms);
        Ok(ForcingPlan { terms, far, t_max, last_index: last, tail_bound })
    }

    /// `sum_{i <= N} b_i x(t - tau_i)` for `0 <= t <= t_max`, where `x`
    /// extends the history of the plan's problem.
    pub(crate) fn evaluate(&self, t: f64, x: impl Fn(f64) -> f64) -> f64 {
        debug_assert!(t <= self.t_max * (1.0 + 1e-12) + 1e-12);
        self.terms.iter().map(|&(b, tau)| b * x(t - tau)).sum::<f64>() + self.far.eval(t)
    }
}

/// The solution on `(-inf, T]`: `phi` for `t <= 0`, cubic Hermite between knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub problem: ProblemSpec,
    pub horizon: f64,
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    /// `x'` at each knot; the right derivative at `t = 0`.
    pub derivs: Vec<f64>,
}

/// `sum_i b_i x(t - tau_i)` with its truncation bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ForcingValue {
    pub value: f64,
    pub tail_bound: f64,
}

impl Trajectory {
    /// Last knot constructed so far.
    pub fn frontier(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn is_complete(&self) -> bool {
        self.frontier() >= self.horizon
    }

    /// Hermite piece on `[knots[j], knots[j + 1]]` in the local variable.
    pub fn piece(&self, j: usize) -> Cubic {
        let h = self.knots[j + 1] - self.knots[j];
        Cubic::hermite(h, self.values[j], self.derivs[j], self.values[j + 1], self.derivs[j + 1])
    }

    fn piece_index(&self, t: f64) -> usize {
        let j = self.knots.partition_point(|&x| x <= t);
        j.saturating_sub(1).min(self.knots.len() - 2)
    }

    /// `x(t)` for `t` up to the frontier; arguments past it are clamped.
    pub(crate) fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.problem.history.value(t);
        }
        if self.knots.len() == 1 {
            return self.values[0];
        }
        let t = t.min(self.frontier());
        let j = self.piece_index(t);
        self.piece(j).eval(t - self.knots[j])
    }

    /// `x(t)` for `t <= T`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let slack = 1e-12 * self.horizon.max(1.0);
        if t.is_nan() || t > self.frontier() + slack {
            return Err(Error::BeyondHorizon { t, horizon: self.frontier() });
        }
        Ok(self.value(t))
    }

    /// `x'(t)` from the dense output for `0 < t <= T`, or `phi'` for `t <= 0`.
    pub fn eval_derivative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.problem.history.derivative_at(t);
        }
        let t = t.min(self.frontier());
        let j = self.piece_index(t);
        self.piece(j).eval_derivative(t - self.knots[j])
    }

    /// Exact `sup |x|` over `[lo, hi]` within `[0, T]`.
    pub fn sup_abs_on(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = (lo.max(0.0), hi.min(self.frontier()));
        if self.knots.len() == 1 || hi < lo {
            return self.values[0].abs();
        }
        let mut best: f64 = 0.0;
        let mut j = self.piece_index(lo);
        while j + 1 < self.knots.len() && self.knots[j] <= hi {
            let (x0, x1) = (self.knots[j], self.knots[j + 1]);
            let (u0, u1) = (lo.max(x0) - x0, hi.min(x1) - x0);
            if u1 >= u0 {
                best = best.max(self.piece(j).max_abs_on(u0, u1));
            }
            j += 1;
        }
        best
    }

    /// `sum_i b_i x(t - tau_i)` for `0 <= t <= frontier + tau_1`.
    pub fn forcing(&self, t: f64, eps: f64) -> Result<ForcingValue> {
        if t < 0.0 || t > self.frontier() + self.problem.tau1() * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "forcing at t = {t} needs the trajectory beyond its frontier {}",
                self.frontier()
            )));
        }
        let plan = ForcingPlan::new(&self.problem, t, eps)?;
        Ok(ForcingValue { value: plan.evaluate(t, |s| self.value(s)), tail_bound: plan.tail_bound })
    }
}

/// Knots on `[0, T]`: multiples of `tau_1`, every `tau_i <= T`, pairwise
/// sums of leading delays, core breakpoints shifted by each delay, then
/// every gap refined to at most `h`.
fn build_knots(spec: &ProblemSpec, horizon: f64, h: f64) -> Vec<f64> {
    let fam = &spec.family;
    let tau1 = fam.tau1();
    let mut points = vec![0.0, horizon];
    let mut k = 1usize;
    while (k as f64) * tau1 < horizon {
        points.push(k as f64 * tau1);
        k += 1;
    }
    let mut delays = Vec::new();
    let mut i = 1usize;
    while fam.tau(i) < horizon && i <= 100_000 {
        delays.push(fam.tau(i));
        i += 1;
    }
    points.extend(&delays);
    let lead = &delays[..delays.len().min(PAIRWISE_KNOT_DELAYS)];
    for (p, &x) in lead.iter().enumerate() {
        for &y in &lead[p..] {
            if x + y < horizon {
                points.push(x + y);
            }
        }
    }
    let core = spec.history.breakpoints();
    if core.len() <= MAX_SHIFTED_CORE_PIECES {
        for &tau in lead {
            points.extend(core.iter().map(|&b| b + tau).filter(|&t| t > 0.0 && t < horizon));
        }
    }
    points.sort_by(f64::total_cmp);
    let tol = 1e-12 * horizon.max(1.0);
    let mut unique: Vec<f64> = Vec::with_capacity(points.len());
    for p in points {
        if unique.last().is_none_or(|&q| p - q > tol) {
            unique.push(p);
        }
    }
    *unique.last_mut().unwrap() = horizon;
    let mut knots = vec![0.0];
    for w in unique.windows(2) {
        let n = ((w[1] - w[0]) / h).ceil().max(1.0) as usize;
        for j in 1..n {
            knots.push(w[0] + (w[1] - w[0]) * j as f64 / n as f64);
        }
        knots.push(w[1]);
    }
    knots
}

/// Sequential construction of a trajectory.
pub struct Solver {
    spec: ProblemSpec,
    horizon: f64,
    quad: QuadratureRule,
    plan: ForcingPlan,
    knots: Vec<f64>,
    /// Knot index of `k tau_1` (and of `T` last).
    interval_ends: Vec<usize>,
}

impl Solver {
    pub fn new(spec: &ProblemSpec, horizon: f64, cfg: &SolverConfig) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be finite and > 0, got {horizon}")));
        }
        let h = cfg.step_for(spec)?;
        let plan = ForcingPlan::new(spec, horizon, cfg.eps_forcing_for(spec))?;
        let knots = build_knots(spec, horizon, h);
        let tau1 = spec.tau1();
        let intervals = (horizon / tau1 - 1e-12).ceil().max(1.0) as usize;
        let mut interval_ends: Vec<usize> = (0..intervals)
            .map(|k| {
                let target = k as f64 * tau1;
                let j = knots.partition_point(|&x| x < target);
                if j > 0 && (j == knots.len() || target - knots[j - 1] < knots[j] - target) {
                    j - 1
                } else {
                    j
                }
            })
            .collect();
        interval_ends.push(knots.len() - 1);
        Ok(Solver { spec: spec.clone(), horizon, quad: cfg.quad, plan, knots, interval_ends })
    }

    pub fn plan(&self) -> &ForcingPlan {
        &self.plan
    }

    /// Number of intervals `[k tau_1, (k+1) tau_1]` covering `[0, T]`.
    pub fn interval_count(&self) -> usize {
        self.interval_ends.len() - 1
    }

    /// Trajectory holding only `t = 0`.
    pub fn start(&self) -> Trajectory {
        let x0 = self.spec.history.value(0.0);
        // every delayed argument at t = 0 lies in the history
        let f0 = self.plan.evaluate(0.0, |s| self.spec.history.value(s));
        Trajectory {
            problem: self.spec.clone(),
            horizon: self.horizon,
            knots: vec![0.0],
            values: vec![x0],
            derivs: vec![self.spec.a * x0 + f0],
        }
    }

    /// Extend `traj` from `k tau_1` through `(k+1) tau_1` (or `T`).
    pub fn step_interval(&self, traj: &mut Trajectory, k: usize) -> Result<()> {
        if k >= self.interval_count() {
            return Err(Error::BeyondHorizon { t: (k + 1) as f64 * self.spec.tau1(), horizon: self.horizon });
        }
        let (from, to) = (self.interval_ends[k], self.interval_ends[k + 1]);
        if traj.knots.len() != from + 1 {
            return Err(Error::InvalidArgument(format!(
                "interval {k} starts at knot {from}, but the trajectory ends at knot {}",
                traj.knots.len() - 1
            )));
        }
        let a = self.spec.a;
        for j in from..to {
            let (t0, t1) = (self.knots[j], self.knots[j + 1]);
            let integral = self.quad.integrate(t0, t1, |s| {
                (a * (t1 - s)).exp() * self.plan.evaluate(s, |u| traj.value(u))
            });
            let x1 = traj.values[j] * (a * (t1 - t0)).exp() + integral;
            let f1 = self.plan.evaluate(t1, |u| traj.value(u));
            traj.knots.push(t1);
            traj.values.push(x1);
            traj.derivs.push(a * x1 + f1);
        }
        Ok(())
    }
}

/// Solve through `T`.
pub fn solve(spec: &ProblemSpec, horizon: f64, cfg: &SolverConfig) -> Result<Trajectory> {
    let solver = Solver::new(spec, horizon, cfg)?;
    let mut traj = solver.start();
    for k in 0..solver.interval_count() {
        solver.step_interval(&mut traj, k)?;
    }
    Ok(traj)
}

/// One seminorm in the a-priori bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeminormEntry {
    /// `"sup_m"` for `||.||_m`, `"p_m"` for `p_m`.
    pub name: String,
    pub value: f64,
}

/// `sup_{[0, k tau_1]} |x| <= C_k max{q(phi) : q in Lambda}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateCertificate {
    pub k: usize,
    /// `sup_{s in [0, tau_1]} e^{a s}` and `sup_{s in [0, tau_1]} (e^{a s} - 1) / a`.
    pub base_constants: (f64, f64),
    pub constant: f64,
    pub seminorm_set: Vec<SeminormEntry>,
    /// `C_k * max over Lambda`.
    pub bound: f64,
    /// The recursion evaluated with the actual seminorm values; never larger than `bound`.
    pub recursive_bound: f64,
    pub observed: f64,
    pub valid: bool,
}

/// A-priori bound at level `k` from the interval-by-interval recursion.
///
/// The delayed terms with `i < n(j+1)` are bounded by the sup of `x` over
/// all of `[0, j tau_1]`, which covers every argument they can reach.
pub fn estimate_certificate(traj: &Trajectory, k: usize, eps: f64) -> Result<EstimateCertificate> {
    let spec = &traj.problem;
    let (fam, phi, a) = (&spec.family, &spec.history, spec.a);
    let tau1 = fam.tau1();
    if k == 0 || (k as f64) * tau1 > traj.frontier() * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "estimate level k = {k} needs the trajectory through {}",
            k as f64 * tau1
        )));
    }
    let p_upper = |j: usize| -> Result<f64> {
        let p = phi.p_seminorm(fam, j, eps);
        if p.is_finite() {
            Ok(p.upper())
        } else {
            Err(Error::NotInF(format!("p_{j}(phi) is not certified finite: {:?}", p.verdict)))
        }
    };
    // sup over [0, j tau_1] of e^{a s} and of (e^{a s} - 1) / a, both attained at the right end
    let growth = |j: usize| (a * j as f64 * tau1).exp().max(1.0);
    let integral = |j: usize| j as f64 * tau1 * phi1(a * j as f64 * tau1);

    let norm1 = phi.sup_norm_k(1);
    let p1 = p_upper(1)?;
    let mut entries = vec![
        SeminormEntry { name: "sup_1".into(), value: norm1 },
        SeminormEntry { name: "p_1".into(), value: p1 },
    ];
    let mut x_bound = growth(1) * norm1 + integral(1) * p1;
    let mut c = growth(1) + integral(1);
    for j in 1..k {
        let n_next = fam.n_index(j + 1);
        let m_next = fam.m_index(j + 1)?.value;
        let partial: f64 = (1..n_next).map(|i| fam.b(i).abs()).sum();
        let norm_m = phi.sup_norm_k(m_next);
        let p_next = p_upper(j + 1)?;
        entries.push(SeminormEntry { name: format!("sup_{m_next}"), value: norm_m });
        entries.push(SeminormEntry { name: format!("p_{}", j + 1), value: p_next });
        let step = |prev: f64, hist: f64, p: f64| {
            growth(j) * prev + integral(j + 1) * (partial * hist.max(prev) + p)
        };
        x_bound = x_bound.max(step(x_bound, norm_m, p_next));
        c = c.max(step(c, 1.0, 1.0));
    }
    let lambda = entries.iter().map(|e| e.value).fold(0.0, f64::max);
    let bound = c * lambda;
    let observed = traj.sup_abs_on(0.0, k as f64 * tau1);
    Ok(EstimateCertificate {
        k,
        base_constants: (growth(1), integral(1)),
        constant: c,
        seminorm_set: entries,
        bound,
        recursive_bound: x_bound,
        observed,
        valid: observed <= bound + ESTIMATE_TOL,
    })
}
