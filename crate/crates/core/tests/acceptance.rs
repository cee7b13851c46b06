//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Reference values are computed here independently of the library: the
//! classic single-delay problem is integrated by hand on each unit interval,
//! and geometric tail sums use their closed form.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use infidelay::history::HistoryFunction;
use infidelay::oracle::compare_trajectories;
use infidelay::scenario::random_history;
use infidelay::semigroup::{check_mild_solution, check_semigroup_law, check_strong_continuity};
use infidelay::stepper::{estimate_certificate, solve};
use infidelay::tail::{TailFormula, TailTerm};
use infidelay::{oracle_solve, CoefficientFamily, Delays, OracleConfig, ProblemSpec, SolverConfig, WeightFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn unit() -> Delays {
    Delays::unit()
}

fn finite(b: Vec<f64>, tau: Delays) -> CoefficientFamily {
    CoefficientFamily::finite_support(b, tau).unwrap()
}

fn geometric(beta: f64, rho: f64, tau: Delays) -> CoefficientFamily {
    CoefficientFamily::geometric(beta, rho, tau).unwrap()
}

fn cos_history(amp: f64, freq: f64, phase: f64, core: f64, resolution: f64) -> HistoryFunction {
    HistoryFunction::analytic(TailFormula::new(vec![TailTerm::Cos { amp, freq, phase }]), core, resolution).unwrap()
}

fn exp_history(amp: f64, rate: f64, core: f64) -> HistoryFunction {
    HistoryFunction::analytic(TailFormula::new(vec![TailTerm::Exp { amp, rate }]), core, 1.0 / 128.0).unwrap()
}

fn spec(a: f64, fam: CoefficientFamily, phi: HistoryFunction) -> ProblemSpec {
    ProblemSpec::new(a, fam, phi).unwrap()
}

/// Classic problem `x' = -x(t - 1)`, `phi = 1`, by exact polynomial steps:
/// on `[j, j+1]`, `x(t) = x(j) - int_j^t x(s - 1) ds`.
fn classic_reference(t: f64) -> f64 {
    // polynomial coefficients in t, ascending
    let mut prev: Vec<f64> = vec![1.0];
    let mut start_value = 1.0;
    let mut j = 0.0;
    loop {
        // q(s) = prev(s - 1); antiderivative evaluated from j to t
        let shifted = shift_poly(&prev, -1.0);
        let anti = integrate_poly(&shifted);
        let cur: Vec<f64> = {
            let mut c: Vec<f64> = anti.iter().map(|v| -v).collect();
            c[0] += start_value + eval_poly(&anti, j);
            c
        };
        if t <= j + 1.0 {
            return eval_poly(&cur, t);
        }
        start_value = eval_poly(&cur, j + 1.0);
        prev = cur;
        j += 1.0;
    }
}

fn eval_poly(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * t + v)
}

/// Coefficients of `p(t + d)`.
fn shift_poly(c: &[f64], d: f64) -> Vec<f64> {
    let mut out = vec![0.0; c.len()];
    for (n, &cn) in c.iter().enumerate() {
        let mut binom = 1.0;
        for (k, slot) in out.iter_mut().enumerate().take(n + 1) {
            *slot += cn * binom * d.powi((n - k) as i32);
            binom = binom * (n - k) as f64 / (k + 1) as f64;
        }
    }
    out
}

fn integrate_poly(c: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    out.extend(c.iter().enumerate().map(|(n, &v)| v / (n + 1) as f64));
    out
}

/// `sum_{i >= n} beta rho^i w^i` in closed form.
fn geometric_tail(beta: f64, rho: f64, w: f64, n: usize) -> f64 {
    let q = rho * w;
    beta.abs() * q.powi(n as i32) / (1.0 - q)
}

fn oracle_equivalence() -> Verdict {
    let shifted = Delays::Affine { c: 0.25, delta: 0.5 };
    let listed = Delays::Explicit { list: vec![0.4, 0.9, 1.7], delta: 1.0 };
    let cases = vec![
        spec(0.0, finite(vec![-1.0], unit()), HistoryFunction::constant(1.0)),
        spec(-1.0, finite(vec![-0.5, 0.3], unit()), cos_history(1.0, 1.0, 0.0, 2.0, 1.0 / 128.0)),
        spec(-0.5, finite(vec![0.4, -0.8, 0.2], shifted.clone()), exp_history(1.0, 0.5, 3.0)),
        spec(-2.0, finite(vec![1.0, 0.5], listed.clone()), cos_history(0.5, 2.0, 0.3, 2.0, 1.0 / 256.0)),
        spec(0.0, finite(vec![-0.3, -0.3, -0.3], listed), HistoryFunction::constant(-2.0)),
        spec(-1.0, geometric(1.0, 0.5, unit()), HistoryFunction::constant(1.0)),
        spec(-1.0, geometric(-0.8, 0.5, unit()), cos_history(1.0, 1.0, 0.0, 1.0, 1.0 / 128.0)),
        spec(-0.5, geometric(0.6, 0.3, shifted.clone()), exp_history(2.0, 0.25, 2.0)),
        spec(-1.5, geometric(1.2, 0.6, unit()), cos_history(1.0, 0.5, 1.0, 3.0, 1.0 / 128.0)),
        spec(0.0, geometric(-0.5, 0.4, shifted), HistoryFunction::constant(1.0)),
    ];
    let mut worst: f64 = 0.0;
    for s in &cases {
        let horizon = 10.0 * s.tau1();
        let traj = solve(s, horizon, &SolverConfig::default()).unwrap();
        let oracle = oracle_solve(s, horizon, &OracleConfig::default()).unwrap();
        worst = worst.max(compare_trajectories(&traj, &oracle.trajectory, 0.0, horizon, 4000).unwrap());
    }
    verdict(worst <= 1e-6, format!("max sup-difference {worst:.3e} over {} scenarios (limit 1e-6)", cases.len()))
}

fn analytic_pin() -> Verdict {
    let s = spec(0.0, finite(vec![-1.0], unit()), HistoryFunction::constant(1.0));
    let traj = solve(&s, 2.0, &SolverConfig::default()).unwrap();
    let (r1, r2) = (classic_reference(1.0), classic_reference(2.0));
    let (x1, x2) = (traj.eval(1.0).unwrap(), traj.eval(2.0).unwrap());
    let err = (x1 - r1).abs().max((x2 - r2).abs());
    verdict(err <= 1e-8, format!("x(1) = {x1:.3e} (ref {r1}), x(2) = {x2:.12} (ref {r2}), error {err:.3e} (limit 1e-8)"))
}

/// Scenarios shared by the semigroup-law and strong-continuity criteria.
fn orbit_scenarios() -> Vec<ProblemSpec> {
    vec![
        spec(0.0, finite(vec![-1.0], unit()), HistoryFunction::constant(1.0)),
        spec(1.0, geometric(1.0, 0.5, unit()), HistoryFunction::constant(1.0)),
        spec(-0.5, geometric(1.0, 0.5, unit()), cos_history(1.0, 1.0, 0.0, 2.0, 1.0 / 128.0)),
        spec(-1.0, finite(vec![0.5, -0.7], Delays::Affine { c: 0.25, delta: 0.5 }), exp_history(1.0, 0.5, 2.0)),
        spec(0.3, CoefficientFamily::power_law(0.5, 2.0, unit()).unwrap(), HistoryFunction::constant(1.0)),
    ]
}

fn semigroup_law() -> Verdict {
    let pairs = [(0.5, 0.5), (1.0, 1.0), (0.3, 1.7)];
    let mut worst: f64 = 0.0;
    let mut all = true;
    for s in orbit_scenarios() {
        for &(t, u) in &pairs {
            let r = check_semigroup_law(&s, t, u, &[1, 2, 3], &SolverConfig::default(), 1e-6).unwrap();
            worst = worst.max(r.max_discrepancy);
            all &= r.pass && r.max_discrepancy <= 1e-6;
        }
    }
    verdict(all, format!("max ||S_(t+s) phi - S_t S_s phi||_k {worst:.3e} over 5 scenarios x 3 pairs, k = 1..3 (limit 1e-6)"))
}

fn strong_continuity() -> Verdict {
    let ts = [0.1, 0.01, 0.001];
    let mut all = true;
    let mut worst_ratio: f64 = 0.0;
    for s in orbit_scenarios() {
        let r = check_strong_continuity(&s, 1, &ts, &SolverConfig::default()).unwrap();
        let last = r.samples.last().unwrap().sup_distance;
        worst_ratio = worst_ratio.max(last / r.threshold);
        all &= r.monotone && last <= 1e-2 * (1.0 + r.lipschitz);
    }
    // classic problem: S_t phi - phi = -t on [-1, 0] shifted window, so the distance is t
    let classic = &orbit_scenarios()[0];
    let r = check_strong_continuity(classic, 1, &ts, &SolverConfig::default()).unwrap();
    let analytic = r.samples.iter().map(|s| (s.sup_distance - s.t).abs()).fold(0.0, f64::max);
    all &= analytic <= 1e-9;
    verdict(
        all,
        format!("non-increasing on 5 scenarios, final/threshold <= {worst_ratio:.3e}; classic case |d(t) - t| <= {analytic:.3e} (limit 1e-9)"),
    )
}

fn random_solvable(rng: &mut ChaCha8Rng) -> ProblemSpec {
    let a = rng.gen_range(-2.0..1.0);
    let fam = if rng.gen_bool(0.5) {
        geometric(rng.gen_range(-1.5..1.5), rng.gen_range(0.05..0.6), unit())
    } else {
        let n = rng.gen_range(1..=4);
        finite((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), Delays::Affine { c: 0.0, delta: rng.gen_range(0.5..1.5) })
    };
    spec(a, fam, random_history(rng))
}

fn a_priori_estimates() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut checked = 0;
    let mut invalid = 0;
    let mut tightest = f64::INFINITY;
    for _ in 0..20 {
        let s = random_solvable(&mut rng);
        let k_max = 5;
        let traj = solve(&s, k_max as f64 * s.tau1(), &SolverConfig::default()).unwrap();
        for k in 1..=k_max {
            let c = estimate_certificate(&traj, k, 1e-10).unwrap();
            checked += 1;
            if !(c.valid && c.observed <= c.bound + 1e-9) {
                invalid += 1;
            }
            tightest = tightest.min(c.bound + 1e-9 - c.observed);
        }
    }
    verdict(invalid == 0, format!("{checked} certificates on 20 scenarios, {invalid} invalid, smallest margin {tightest:.3e}"))
}

fn mild_solution() -> Verdict {
    let grid = |lo: f64, hi: f64| (0..20).map(|j| lo + (hi - lo) * j as f64 / 19.0).collect::<Vec<_>>();
    let cases = vec![
        spec(0.0, finite(vec![-1.0], unit()), HistoryFunction::constant(1.0)),
        spec(1.0, geometric(1.0, 0.5, unit()), HistoryFunction::constant(1.0)),
        spec(-0.5, geometric(1.0, 0.5, unit()), cos_history(1.0, 1.0, 0.0, 2.0, 1.0 / 128.0)),
        spec(-1.0, finite(vec![0.5, -0.7], Delays::Affine { c: 0.25, delta: 0.5 }), exp_history(1.0, 0.5, 2.0)),
        spec(0.5, geometric(-0.8, 0.4, unit()), exp_history(1.0, -0.3, 2.0)),
    ];
    let mut worst: f64 = 0.0;
    let mut all = true;
    for s in &cases {
        let r = check_mild_solution(s, &grid(0.0, 3.0), &grid(-2.0, 0.0), &SolverConfig::default(), 1e-6).unwrap();
        worst = worst.max(r.max_residual);
        all &= r.pass && r.max_residual <= 1e-6;
    }
    verdict(all, format!("max residual {worst:.3e} over 5 scenarios on a 20x20 grid (limit 1e-6)"))
}

fn membership() -> Verdict {
    let eps = 1e-10;
    let phi = HistoryFunction::constant(1.0);
    let harmonic = CoefficientFamily::power_law(1.0, 1.0, unit()).unwrap();
    let h = phi.membership_in_f(&harmonic, 5, eps);
    let divergent = h.per_k.len() == 5 && h.per_k.iter().all(|v| v.is_divergent());
    let halving = geometric(1.0, 0.5, unit());
    let mut worst: f64 = 0.0;
    let mut bracketed = true;
    for k in 1..=5 {
        let p = phi.p_seminorm(&halving, k, eps);
        let exact = geometric_tail(1.0, 0.5, 1.0, k);
        bracketed &= p.is_finite() && p.value <= exact + 1e-15 && exact <= p.value + p.truncation_bound.max(eps) && p.truncation_bound <= eps;
        worst = worst.max((p.value - exact).abs());
    }
    verdict(
        divergent && bracketed,
        format!("harmonic family divergent at k = 1..5: {divergent}; halving family brackets 2^(1-k) for k = 1..5, max gap {worst:.3e} (eps {eps:e})"),
    )
}

fn cg_embedding() -> Verdict {
    let g = WeightFunction::exponential(2.0);
    let fam = geometric(1.0, 0.25, unit());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x5eed);
    let mut phis: Vec<HistoryFunction> = (0..3).map(|_| random_history(&mut rng)).collect();
    phis.push(exp_history(rng.gen_range(0.5..2.0), -rng.gen_range(0.1..0.6), 2.0));
    phis.push(cos_history(rng.gen_range(0.5..2.0), rng.gen_range(0.2..2.0), 0.0, 1.0, 1.0 / 128.0));
    let mut all = true;
    let mut slack = f64::INFINITY;
    for phi in &phis {
        let norm = phi.cg_norm(&g).unwrap().finite().expect("finite weighted norm");
        for k in 1..=3 {
            let lhs = phi.p_seminorm(&fam, k, 1e-12);
            let rhs = norm * geometric_tail(1.0, 0.25, 2.0, fam.n_index(k)) + 1e-8;
            all &= lhs.is_finite() && lhs.value <= rhs;
            slack = slack.min(rhs - lhs.value);
        }
    }
    verdict(all, format!("5 histories, k = 1..3, smallest margin {slack:.3e}"))
}

fn convergence_order() -> Verdict {
    let s = spec(-0.5, finite(vec![-1.0, 0.5], unit()), cos_history(1.0, 1.0, 0.0, 1.0, 1.0 / 1024.0));
    let horizon = 10.0;
    let reference = solve(&s, horizon, &SolverConfig::with_step(1.0 / 512.0)).unwrap();
    let errors: Vec<f64> = [4.0, 8.0, 16.0, 32.0]
        .iter()
        .map(|&n| {
            let traj = solve(&s, horizon, &SolverConfig::with_step(1.0 / n)).unwrap();
            compare_trajectories(&traj, &reference, 0.0, horizon, 20_000).unwrap()
        })
        .collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|&r| r >= 8.0);
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
    verdict(ok, format!("error ratios per halving [{}] for h = 1/4..1/32 (limit >= 8)", shown.join(", ")))
}

fn seminorm_axioms() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0xa110);
    let eps = 1e-10;
    let (mut worst_h, mut worst_t): (f64, f64) = (0.0, f64::NEG_INFINITY);
    let mut all = true;
    for _ in 0..100 {
        let fam = if rng.gen_bool(0.5) {
            geometric(rng.gen_range(-1.5..1.5), rng.gen_range(0.05..0.7), unit())
        } else {
            CoefficientFamily::power_law(rng.gen_range(-1.0..1.0), rng.gen_range(2.0..4.0), unit()).unwrap()
        };
        let (phi, psi) = (random_history(&mut rng), random_history(&mut rng));
        let alpha = rng.gen_range(-5.0..5.0);
        let k = rng.gen_range(1..=3);
        // homogeneity is compared with the truncation remainder far below the relative threshold
        let fine = 1e-13 * phi.p_seminorm(&fam, k, eps).value.max(1e-3);
        let base = phi.p_seminorm(&fam, k, fine).value;
        let scaled = phi.scaled(alpha).p_seminorm(&fam, k, fine).value;
        let rel = if base == 0.0 { scaled } else { (scaled - alpha.abs() * base).abs() / (alpha.abs() * base) };
        let sum = HistoryFunction::linear_combination(1.0, &phi, 1.0, &psi).p_seminorm(&fam, k, eps).value;
        let excess = sum - phi.p_seminorm(&fam, k, eps).value - psi.p_seminorm(&fam, k, eps).value;
        worst_h = worst_h.max(rel);
        worst_t = worst_t.max(excess);
        all &= rel <= 1e-10 && excess <= 2.0 * eps;
    }
    verdict(all, format!("100 pairs: homogeneity max rel error {worst_h:.3e} (limit 1e-10), triangle max excess {worst_t:.3e} (limit 2e-10)"))
}

fn completeness() -> Verdict {
    let phi = cos_history(1.0, 0.8, 0.4, 1.0, 1.0 / 128.0);
    let fam = geometric(1.0, 0.5, unit());
    let radii = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
    let mut all = true;
    let mut finals = Vec::new();
    for k in 1..=3 {
        let d: Vec<f64> = radii.iter().map(|&r| phi.truncated(r).difference(&phi).p_seminorm(&fam, k, 1e-14).upper()).collect();
        all &= d.windows(2).all(|w| w[1] <= w[0]) && d[0] > 0.0 && *d.last().unwrap() <= 1e-12;
        finals.push(format!("{:.2e}", d.last().unwrap()));
    }
    verdict(all, format!("p_k(phi_j - phi) non-increasing for R = 2..64, final values [{}] for k = 1..3", finals.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("oracle equivalence", oracle_equivalence),
        ("analytic pin", analytic_pin),
        ("semigroup law", semigroup_law),
        ("strong continuity", strong_continuity),
        ("a-priori estimates", a_priori_estimates),
        ("mild-solution identity", mild_solution),
        ("phase-space membership", membership),
        ("weighted-space embedding", cg_embedding),
        ("convergence order", convergence_order),
        ("seminorm axioms", seminorm_axioms),
        ("completeness surrogate", completeness),
    ];
    let mut failures = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !v.pass {
            failures += 1;
        }
        let secs = started.elapsed().as_secs_f64();
        println!("{} {:>2} {name}: {} [{secs:.1}s]", if v.pass { "PASS" } else { "FAIL" }, n + 1, v.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
