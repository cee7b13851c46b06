//! The solution operators `S_t phi = x_t` built on solved trajectories, and
//! numerical checks of the semigroup structure.

use serde::Serialize;

use crate::coefficients::CoefficientFamily;
use crate::error::{Error, Result};
use crate::history::{HistoryFunction, SeminormValue};
use crate::quadrature::QuadratureRule;
use crate::stepper::{solve, ForcingPlan, ProblemSpec, SolverConfig, Trajectory};

/// Default tolerance for the semigroup law.
pub const SEMIGROUP_TOL: f64 = 1e-6;

/// Default tolerance for mild-solution residuals.
pub const MILD_TOL: f64 = 1e-6;

/// Allowed increase between successive strong-continuity distances.
pub const MONOTONE_NOISE: f64 = 1e-10;

/// `t -> S_t phi` on `[0, T]`.
#[derive(Clone, Debug)]
pub struct SemigroupOrbit {
    traj: Trajectory,
    plan: ForcingPlan,
}

impl SemigroupOrbit {
    pub fn new(spec: &ProblemSpec, horizon: f64, cfg: &SolverConfig) -> Result<Self> {
        let traj = solve(spec, horizon, cfg)?;
        SemigroupOrbit::from_trajectory(traj, cfg)
    }

    pub fn from_trajectory(traj: Trajectory, cfg: &SolverConfig) -> Result<Self> {
        let plan = ForcingPlan::new(&traj.problem, traj.horizon, cfg.eps_forcing_for(&traj.problem))?;
        Ok(SemigroupOrbit { traj, plan })
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn horizon(&self) -> f64 {
        self.traj.frontier()
    }

    /// `[S_t phi](theta) = x(t + theta)`: the trajectory on `[0, t]` spliced
    /// onto `phi`'s core, with `phi`'s tail shifted by `t`.
    pub fn apply(&self, t: f64) -> Result<HistoryFunction> {
        let phi = &self.traj.problem.history;
        let horizon = self.horizon();
        if t.is_nan() || t < 0.0 || t > horizon * (1.0 + 1e-12) {
            return Err(Error::BeyondHorizon { t, horizon });
        }
        if t == 0.0 {
            return Ok(phi.clone());
        }
        let t = t.min(horizon);
        let knots = &self.traj.knots;
        let mut breakpoints: Vec<f64> = phi.breakpoints().iter().map(|&x| x - t).collect();
        let mut pieces = phi.pieces().to_vec();
        // pieces of the trajectory starting strictly before t
        let count = knots.partition_point(|&x| x < t).min(knots.len() - 1);
        for (j, &knot) in knots.iter().enumerate().take(count) {
            if j > 0 {
                breakpoints.push(knot - t);
            }
            pieces.push(self.traj.piece(j));
        }
        breakpoints.push(0.0);
        Ok(HistoryFunction::from_parts(breakpoints, pieces, phi.tail().shifted(t)))
    }

    /// `L(S_s phi) = a x(s) + sum_i b_i x(s - tau_i)`.
    pub fn l_at(&self, s: f64) -> f64 {
        self.traj.problem.a * self.traj.value(s) + self.plan.evaluate(s, |u| self.traj.value(u))
    }

    /// `int_0^u L(S_s phi) ds` for every knot `u`, by the given rule per knot interval.
    fn cumulative_l(&self, quad: QuadratureRule) -> Vec<f64> {
        let knots = &self.traj.knots;
        let mut acc = vec![0.0];
        for w in knots.windows(2) {
            let last = *acc.last().unwrap();
            acc.push(last + quad.integrate(w[0], w[1], |s| self.l_at(s)));
        }
        acc
    }
}

/// Distances between two histories at one level `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelDistance {
    pub k: usize,
    pub sup_distance: f64,
    pub p_distance: SeminormValue,
}

fn level_distances(d: &HistoryFunction, fam: &CoefficientFamily, ks: &[usize], eps: f64) -> Vec<LevelDistance> {
    ks.iter()
        .map(|&k| LevelDistance { k, sup_distance: d.sup_norm_k(k), p_distance: d.p_seminorm(fam, k, eps) })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemigroupLawReport {
    pub t: f64,
    pub s: f64,
    pub per_k: Vec<LevelDistance>,
    /// Largest `||S_{t+s} phi - S_t S_s phi||_k` over the tested levels.
    pub max_discrepancy: f64,
    pub max_p_discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compare `S_{t+s} phi` with `S_t (S_s phi)`, where the outer operator
/// comes from a fresh solve started at the history `S_s phi`.
pub fn check_semigroup_law(spec: &ProblemSpec, t: f64, s: f64, ks: &[usize], cfg: &SolverConfig, tolerance: f64) -> Result<SemigroupLawReport> {
    if !(t >= 0.0 && s >= 0.0 && t + s > 0.0) {
        return Err(Error::InvalidArgument(format!("need t, s >= 0 with t + s > 0 (t = {t}, s = {s})")));
    }
    let direct = SemigroupOrbit::new(spec, t + s, cfg)?;
    let whole = direct.apply(t + s)?;
    let mid = direct.apply(s)?;
    let composed = if t == 0.0 {
        mid
    } else {
        let restarted = ProblemSpec::new(spec.a, spec.family.clone(), mid)?;
        SemigroupOrbit::new(&restarted, t, cfg)?.apply(t)?
    };
    let diff = whole.difference(&composed);
    let per_k = level_distances(&diff, &spec.family, ks, cfg.eps_seminorm());
    let max_discrepancy = per_k.iter().map(|d| d.sup_distance).fold(0.0, f64::max);
    let max_p_discrepancy = per_k.iter().map(|d| d.p_distance.upper()).fold(0.0, f64::max);
    Ok(SemigroupLawReport {
        t,
        s,
        per_k,
        max_discrepancy,
        max_p_discrepancy,
        tolerance,
        pass: max_discrepancy <= tolerance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuitySample {
    pub t: f64,
    pub sup_distance: f64,
    pub p_distance: SeminormValue,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrongContinuityReport {
    pub k: usize,
    pub samples: Vec<ContinuitySample>,
    /// Largest slope of the orbit over `[-k - t_max, t_max]`.
    pub lipschitz: f64,
    pub threshold: f64,
    pub monotone: bool,
    pub pass: bool,
}

/// `||S_t phi - phi||_k` and `p_k(S_t phi - phi)` along `t_sequence`.
pub fn check_strong_continuity(spec: &ProblemSpec, k: usize, t_sequence: &[f64], cfg: &SolverConfig) -> Result<StrongContinuityReport> {
    let t_max = t_sequence.iter().copied().fold(0.0, f64::max);
    if t_sequence.is_empty() || !(t_max > 0.0) || t_sequence.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument("t_sequence needs positive times".into()));
    }
    let orbit = SemigroupOrbit::new(spec, t_max, cfg)?;
    let phi = &spec.history;
    let eps = cfg.eps_seminorm();
    let mut samples = Vec::with_capacity(t_sequence.len());
    for &t in t_sequence {
        let d = orbit.apply(t)?.difference(phi);
        samples.push(ContinuitySample { t, sup_distance: d.sup_norm_k(k), p_distance: d.p_seminorm(&spec.family, k, eps) });
    }
    let lipschitz = orbit_lipschitz(&orbit, k as f64 + t_max, t_max);
    let threshold = 1e-2 * (1.0 + lipschitz);
    let monotone = samples.windows(2).all(|w| w[1].sup_distance <= w[0].sup_distance + MONOTONE_NOISE);
    let last = samples.last().unwrap().sup_distance;
    Ok(StrongContinuityReport { k, samples, lipschitz, threshold, monotone, pass: monotone && last <= threshold })
}

/// `sup |x'|` over `[-back, forward]`, exact per cubic piece.
fn orbit_lipschitz(orbit: &SemigroupOrbit, back: f64, forward: f64) -> f64 {
    let traj = orbit.trajectory();
    let mut best: f64 = 0.0;
    for j in 0..traj.knots.len().saturating_sub(1) {
        if traj.knots[j] >= forward {
            break;
        }
        let h = traj.knots[j + 1] - traj.knots[j];
        best = best.max(traj.piece(j).derivative().max_abs_on(0.0, h));
    }
    let phi = &traj.problem.history;
    let (bps, pieces) = (phi.breakpoints(), phi.pieces());
    for j in 0..pieces.len() {
        if bps[j + 1] <= -back {
            continue;
        }
        best = best.max(pieces[j].derivative().max_abs_on(0.0, bps[j + 1] - bps[j]));
    }
    if -back < phi.left_edge() {
        if let Some(f) = phi.tail().formula() {
            best = best.max(f.derivative().max_abs_on(-back, phi.left_edge()).upper());
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MildSolutionReport {
    pub points: usize,
    /// Largest `|x(t + theta) - phi(0) - int_0^{t+theta} L(S_s phi) ds|`.
    pub max_residual: f64,
    /// Largest `|[S_t phi](theta) - phi(t + theta)|` where `t + theta <= 0`.
    pub max_history_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// The integrated form of the equation on a `(t, theta)` grid.
pub fn check_mild_solution(spec: &ProblemSpec, t_grid: &[f64], theta_grid: &[f64], cfg: &SolverConfig, tolerance: f64) -> Result<MildSolutionReport> {
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    if t_grid.is_empty() || theta_grid.is_empty() || !(t_max > 0.0) {
        return Err(Error::InvalidArgument("mild-solution grids must be non-empty with max t > 0".into()));
    }
    if theta_grid.iter().any(|&th| th > 0.0) || t_grid.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidArgument("need t >= 0 and theta <= 0".into()));
    }
    let orbit = SemigroupOrbit::new(spec, t_max, cfg)?;
    let cumulative = orbit.cumulative_l(cfg.quad);
    let traj = orbit.trajectory();
    let phi = &spec.history;
    let phi0 = phi.value(0.0);
    let (mut max_residual, mut max_history_residual, mut points) = (0.0f64, 0.0f64, 0);
    for &t in t_grid {
        let view = orbit.apply(t)?;
        for &theta in theta_grid {
            points += 1;
            let u = t + theta;
            if u <= 0.0 {
                max_history_residual = max_history_residual.max((view.value(theta) - phi.value(u)).abs());
                continue;
            }
            let j = traj.knots.partition_point(|&x| x <= u).saturating_sub(1).min(traj.knots.len() - 1);
            let integral = cumulative[j] + cfg.quad.integrate(traj.knots[j], u, |s| orbit.l_at(s));
            max_residual = max_residual.max((view.value(theta) - phi0 - integral).abs());
        }
    }
    Ok(MildSolutionReport {
        points,
        max_residual,
        max_history_residual,
        tolerance,
        pass: max_residual <= tolerance && max_history_residual <= tolerance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum DomainVerdict {
    InDomain,
    NotInDomain,
    NotApplicable { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneratorDomainReport {
    pub phi_prime_at_zero: Option<f64>,
    pub l_value: Option<f64>,
    pub l_error_bound: Option<f64>,
    /// `|phi'(0) - L phi|`.
    pub violation: Option<f64>,
    pub tolerance: f64,
    /// `p_k(phi')` for `k = 1..=k_max`.
    pub derivative_seminorms: Vec<SeminormValue>,
    pub verdict: DomainVerdict,
}

/// Tests `phi' in F` (up to `k_max`) and `phi'(0) = L phi`.
pub fn check_generator_domain(phi: &HistoryFunction, fam: &CoefficientFamily, a: f64, tol: f64, k_max: usize, eps: f64) -> GeneratorDomainReport {
    let mut report = GeneratorDomainReport {
        phi_prime_at_zero: None,
        l_value: None,
        l_error_bound: None,
        violation: None,
        tolerance: tol,
        derivative_seminorms: Vec::new(),
        verdict: DomainVerdict::InDomain,
    };
    let not_applicable = |mut r: GeneratorDomainReport, reason: String| {
        r.verdict = DomainVerdict::NotApplicable { reason };
        r
    };
    let derivative = match phi.derivative_history() {
        Ok(d) => d,
        Err(e) => return not_applicable(report, e.to_string()),
    };
    let slope = phi.derivative_at(0.0);
    report.phi_prime_at_zero = Some(slope);
    let l = match phi.l_functional(fam, a, eps) {
        Ok(l) => l,
        Err(e) => return not_applicable(report, e.to_string()),
    };
    report.l_value = Some(l.value);
    report.l_error_bound = Some(l.error_bound);
    let violation = (slope - l.value).abs();
    report.violation = Some(violation);
    report.derivative_seminorms = (1..=k_max).map(|k| derivative.p_seminorm(fam, k, eps)).collect();
    let derivative_in_f = report.derivative_seminorms.iter().all(SeminormValue::is_finite);
    report.verdict = if violation <= tol + l.error_bound && derivative_in_f {
        DomainVerdict::InDomain
    } else {
        DomainVerdict::NotInDomain
    };
    report
}
