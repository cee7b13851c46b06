//! Scenario files: one JSON document per problem with the checks to run on
//! it, the check catalog, and report/trajectory output.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::coefficients::WeightFunction;
use crate::error::Error;
use crate::history::{HistoryFunction, Membership};
use crate::oracle::{compare_trajectories, oracle_solve, OracleConfig};
use crate::poly::Cubic;
use crate::semigroup::{check_mild_solution, check_semigroup_law, check_strong_continuity, MILD_TOL, SEMIGROUP_TOL};
use crate::stepper::{estimate_certificate, solve, EstimateCertificate, ProblemSpec, SolverConfig, Trajectory};
use crate::tail::TailModel;

/// One problem and the checks to run on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub problem: ProblemSpec,
    pub horizon: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    pub checks: Vec<Check>,
}

/// Points given either explicitly or as `n` uniform points on `[from, to]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Uniform { from: f64, to: f64, n: usize },
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Uniform { from, to, n } => match n {
                0 => Vec::new(),
                1 => vec![*from],
                _ => (0..*n).map(|j| from + (to - from) * j as f64 / (*n - 1) as f64).collect(),
            },
        }
    }
}

/// Expected value of the solution at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointExpectation {
    pub t: f64,
    pub x: f64,
    #[serde(default = "default_point_tol")]
    pub tol: f64,
}

fn default_point_tol() -> f64 {
    1e-6
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpectedMembership {
    #[default]
    Finite,
    Divergent,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpectedEmbedding {
    #[default]
    Holds,
    NotApplicable,
}

fn default_k_list() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_semigroup_tol() -> f64 {
    SEMIGROUP_TOL
}

fn default_mild_tol() -> f64 {
    MILD_TOL
}

fn default_oracle_tol() -> f64 {
    1e-6
}

fn default_samples() -> usize {
    10_000
}

fn default_t_sequence() -> Vec<f64> {
    vec![0.1, 0.01, 0.001]
}

/// A single check; the `check` field selects the kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Check {
    /// Solve through the horizon, optionally pinning values.
    Solve {
        #[serde(default)]
        expect: Vec<PointExpectation>,
    },
    /// `||phi||_k` and `p_k(phi)` for `k <= k_max`, with optional randomized
    /// homogeneity and triangle-inequality probes.
    Seminorms {
        k_max: usize,
        #[serde(default)]
        axiom_probes: usize,
    },
    Membership {
        k_max: usize,
        #[serde(default)]
        expect: ExpectedMembership,
    },
    SemigroupLaw {
        t: f64,
        s: f64,
        #[serde(default = "default_k_list")]
        k_list: Vec<usize>,
        #[serde(default = "default_semigroup_tol")]
        tol: f64,
    },
    StrongContinuity {
        k: usize,
        #[serde(default = "default_t_sequence")]
        t_sequence: Vec<f64>,
    },
    MildSolution {
        t_grid: Grid,
        theta_grid: Grid,
        #[serde(default = "default_mild_tol")]
        tol: f64,
    },
    /// A-priori estimate certificates for `k = 1..=k`.
    Estimates { k: usize },
    CgEmbedding {
        g: WeightFunction,
        k: usize,
        #[serde(default)]
        expect: ExpectedEmbedding,
    },
    OracleCompare {
        #[serde(default)]
        n_trunc: Option<usize>,
        #[serde(default)]
        h_fine: Option<f64>,
        #[serde(default = "default_oracle_tol")]
        tol: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Check::Solve { .. } => "solve",
            Check::Seminorms { .. } => "seminorms",
            Check::Membership { .. } => "membership",
            Check::SemigroupLaw { .. } => "semigroup-law",
            Check::StrongContinuity { .. } => "strong-continuity",
            Check::MildSolution { .. } => "mild-solution",
            Check::Estimates { .. } => "estimates",
            Check::CgEmbedding { .. } => "cg-embedding",
            Check::OracleCompare { .. } => "oracle-compare",
        }
    }
}

/// Catalog entry for one check kind.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckInfo {
    pub name: &'static str,
    pub summary: &'static str,
    /// `(parameter, type, default)`; an empty default means required.
    pub params: Vec<(&'static str, &'static str, &'static str)>,
}

/// Every implemented check with its parameters.
pub fn list_checks() -> Vec<CheckInfo> {
    vec![
        CheckInfo {
            name: "solve",
            summary: "solve through the horizon and compare pinned values",
            params: vec![("expect", "[{t, x, tol}]", "[]")],
        },
        CheckInfo {
            name: "seminorms",
            summary: "sup-seminorms and delayed-tail seminorms of the history up to k_max",
            params: vec![("k_max", "integer >= 1", ""), ("axiom_probes", "integer", "0")],
        },
        CheckInfo {
            name: "membership",
            summary: "phase-space membership verdict up to k_max against an expectation",
            params: vec![("k_max", "integer >= 1", ""), ("expect", "\"finite\" | \"divergent\"", "\"finite\"")],
        },
        CheckInfo {
            name: "semigroup-law",
            summary: "distance between S_{t+s} phi and S_t S_s phi with S_s phi re-solved",
            params: vec![("t", "real >= 0", ""), ("s", "real >= 0", ""), ("k_list", "[integer]", "[1, 2, 3]"), ("tol", "real", "1e-6")],
        },
        CheckInfo {
            name: "strong-continuity",
            summary: "distances ||S_t phi - phi||_k along a sequence t -> 0",
            params: vec![("k", "integer >= 1", ""), ("t_sequence", "[real > 0]", "[0.1, 0.01, 0.001]")],
        },
        CheckInfo {
            name: "mild-solution",
            summary: "residual of the integrated equation on a (t, theta) grid",
            params: vec![("t_grid", "[real] | {from, to, n}", ""), ("theta_grid", "[real] | {from, to, n}", ""), ("tol", "real", "1e-6")],
        },
        CheckInfo {
            name: "estimates",
            summary: "a-priori bound certificates for levels 1..k",
            params: vec![("k", "integer >= 1", "")],
        },
        CheckInfo {
            name: "cg-embedding",
            summary: "weighted-space embedding inequality at level k",
            params: vec![("g", "weight", ""), ("k", "integer >= 1", ""), ("expect", "\"holds\" | \"not-applicable\"", "\"holds\"")],
        },
        CheckInfo {
            name: "oracle-compare",
            summary: "sup-difference between the solver and the Runge-Kutta reference",
            params: vec![("n_trunc", "integer", "certified"), ("h_fine", "real", "tau_1 / 200"), ("tol", "real", "1e-6"), ("samples", "integer", "10000")],
        },
    ]
}

/// Failure to obtain a scenario from disk.
#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Schema { path: PathBuf, line: usize, column: usize, message: String },
}

pub fn parse_scenario(text: &str, path: &Path) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Schema {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: {
            let full = e.to_string();
            full.rsplit_once(" at line ").map_or(full.clone(), |(m, _)| m.to_string())
        },
    })?;
    let semantic = |message: String| ScenarioError::Schema { path: path.to_path_buf(), line: 1, column: 1, message };
    if !(scenario.horizon > 0.0 && scenario.horizon.is_finite()) {
        return Err(semantic(format!("horizon must be finite and > 0, got {}", scenario.horizon)));
    }
    if scenario.name.is_empty() || scenario.name.contains(['/', '\\']) || scenario.name.starts_with('.') {
        return Err(semantic(format!("name {:?} cannot be used as a directory name", scenario.name)));
    }
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    parse_scenario(&text, path)
}

/// A random history with a cubic core on `[-2, 0]` and constant extension.
pub fn random_history(rng: &mut ChaCha8Rng) -> HistoryFunction {
    let pieces = rng.gen_range(1..=4usize);
    let h = 2.0 / pieces as f64;
    let mut breakpoints = vec![-2.0];
    let mut out = Vec::with_capacity(pieces);
    let (mut y, mut d) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    for j in 0..pieces {
        let (y1, d1) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        out.push(Cubic::hermite(h, y, d, y1, d1));
        breakpoints.push(if j + 1 == pieces { 0.0 } else { -2.0 + h * (j + 1) as f64 });
        (y, d) = (y1, d1);
    }
    HistoryFunction::new(breakpoints, out, TailModel::Constant).expect("Hermite cores are continuous")
}

/// Tolerance reduction, relative to `p_k(phi)`, used when probing homogeneity.
pub const HOMOGENEITY_EPS_FACTOR: f64 = 1e-4;

/// Knobs that apply to a whole run rather than to one scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Multiplies every tolerance given in a check.
    pub tolerance_scale: f64,
    /// Seed for randomized probes.
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { tolerance_scale: 1.0, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: String,
    pub inputs: Value,
    pub result: Value,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioReport {
    /// The scenario exactly as run; feeding it back reproduces the report.
    pub scenario: Scenario,
    pub seed: u64,
    pub tolerance_scale: f64,
    pub checks: Vec<CheckOutcome>,
    pub pass: bool,
}

/// Everything a run produces before it is written to disk.
#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub trajectory: Option<Trajectory>,
    pub estimates: Vec<EstimateCertificate>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

struct Context<'a> {
    scenario: &'a Scenario,
    opts: RunOptions,
    trajectory: Result<&'a Trajectory, &'a Error>,
    estimates: &'a mut Vec<EstimateCertificate>,
}

type CheckResult = std::result::Result<(Value, bool), Error>;

impl Context<'_> {
    fn traj(&self) -> std::result::Result<&Trajectory, Error> {
        self.trajectory.map_err(Error::clone)
    }

    fn run(&mut self, check: &Check) -> CheckResult {
        let scale = self.opts.tolerance_scale;
        let spec = &self.scenario.problem;
        let cfg = &self.scenario.solver;
        let eps = cfg.eps_seminorm();
        match check {
            Check::Solve { expect } => {
                let traj = self.traj()?;
                let mut pass = true;
                let mut points = Vec::new();
                for e in expect {
                    let x = traj.eval(e.t)?;
                    let ok = (x - e.x).abs() <= e.tol * scale;
                    pass &= ok;
                    points.push(json!({ "t": e.t, "x": x, "expected": e.x, "error": (x - e.x).abs(), "pass": ok }));
                }
                let result = json!({
                    "knots": traj.knots.len(),
                    "x_at_horizon": traj.eval(traj.horizon)?,
                    "sup_abs": traj.sup_abs_on(0.0, traj.horizon),
                    "points": points,
                });
                Ok((result, pass))
            }
            Check::Seminorms { k_max, axiom_probes } => {
                let phi = &spec.history;
                let fam = &spec.family;
                let levels: Vec<Value> = (1..=*k_max)
                    .map(|k| json!({ "k": k, "sup_norm": phi.sup_norm_k(k), "p": to_value(&phi.p_seminorm(fam, k, eps)) }))
                    .collect();
                let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(self.opts.seed);
                let mut worst_homogeneity: f64 = 0.0;
                let mut worst_triangle = f64::NEG_INFINITY;
                let mut pass = true;
                for _ in 0..*axiom_probes {
                    let psi = random_history(&mut rng);
                    let alpha: f64 = rng.gen_range(-3.0..3.0);
                    let k = rng.gen_range(1..=(*k_max).max(1));
                    let p_phi = phi.p_seminorm(fam, k, eps);
                    let p_psi = psi.p_seminorm(fam, k, eps);
                    let p_sum = HistoryFunction::linear_combination(1.0, phi, 1.0, &psi).p_seminorm(fam, k, eps);
                    // scaling moves the truncation point, so homogeneity is measured
                    // where the truncated remainder is far below the relative threshold
                    let eps_fine = eps * HOMOGENEITY_EPS_FACTOR * p_phi.value.clamp(1e-3, 1.0);
                    let fine = phi.p_seminorm(fam, k, eps_fine);
                    let p_scaled = phi.scaled(alpha).p_seminorm(fam, k, eps_fine);
                    if !(p_phi.is_finite() && p_psi.is_finite() && p_scaled.is_finite() && p_sum.is_finite()) {
                        continue;
                    }
                    let expected = alpha.abs() * fine.value;
                    let rel = if expected == 0.0 { p_scaled.value } else { (p_scaled.value - expected).abs() / expected };
                    let excess = p_sum.value - p_phi.upper() - p_psi.upper();
                    worst_homogeneity = worst_homogeneity.max(rel);
                    worst_triangle = worst_triangle.max(excess);
                    pass &= rel <= 1e-10 * scale && excess <= 2.0 * eps * scale;
                }
                let result = json!({
                    "levels": levels,
                    "axiom_probes": axiom_probes,
                    "max_homogeneity_rel_error": worst_homogeneity,
                    "max_triangle_excess": if worst_triangle.is_finite() { Some(worst_triangle) } else { None },
                });
                Ok((result, pass))
            }
            Check::Membership { k_max, expect } => {
                let report = spec.history.membership_in_f(&spec.family, *k_max, eps);
                let pass = matches!(
                    (&report.verdict, expect),
                    (Membership::FiniteUpTo { .. }, ExpectedMembership::Finite) | (Membership::Divergent, ExpectedMembership::Divergent)
                );
                Ok((to_value(&report), pass))
            }
            Check::SemigroupLaw { t, s, k_list, tol } => {
                let r = check_semigroup_law(spec, *t, *s, k_list, cfg, tol * scale)?;
                let pass = r.pass;
                Ok((to_value(&r), pass))
            }
            Check::StrongContinuity { k, t_sequence } => {
                let r = check_strong_continuity(spec, *k, t_sequence, cfg)?;
                let pass = r.pass;
                Ok((to_value(&r), pass))
            }
            Check::MildSolution { t_grid, theta_grid, tol } => {
                let r = check_mild_solution(spec, &t_grid.points(), &theta_grid.points(), cfg, tol * scale)?;
                let pass = r.pass;
                Ok((to_value(&r), pass))
            }
            Check::Estimates { k } => {
                let traj = self.traj()?;
                let certs = (1..=*k).map(|j| estimate_certificate(traj, j, eps)).collect::<crate::error::Result<Vec<_>>>()?;
                let pass = certs.iter().all(|c| c.valid);
                let result = to_value(&certs);
                self.estimates.extend(certs);
                Ok((result, pass))
            }
            Check::CgEmbedding { g, k, expect } => {
                let r = spec.history.check_cg_embedding(&spec.family, g, *k, eps);
                let pass = matches!(
                    (&r.verdict, expect),
                    (crate::history::EmbeddingVerdict::Holds, ExpectedEmbedding::Holds)
                        | (crate::history::EmbeddingVerdict::NotApplicable { .. }, ExpectedEmbedding::NotApplicable)
                );
                Ok((to_value(&r), pass))
            }
            Check::OracleCompare { n_trunc, h_fine, tol, samples } => {
                let traj = self.traj()?;
                let sol = oracle_solve(spec, traj.horizon, &OracleConfig { h_fine: *h_fine, n_trunc: *n_trunc })?;
                let diff = compare_trajectories(traj, &sol.trajectory, 0.0, traj.horizon, *samples)?;
                let allowed = tol * scale;
                let result = json!({
                    "sup_difference": diff,
                    "tolerance": allowed,
                    "n_trunc": sol.n_trunc,
                    "h_fine": sol.h_fine,
                    "model_error_bound": sol.model_error_bound,
                });
                Ok((result, diff <= allowed))
            }
        }
    }
}

/// Run every check of `scenario`. Deterministic for fixed options.
pub fn run_scenario(scenario: &Scenario, opts: RunOptions) -> ScenarioRun {
    let solved = solve(&scenario.problem, scenario.horizon, &scenario.solver);
    let mut estimates = Vec::new();
    let mut ctx = Context { scenario, opts, trajectory: solved.as_ref(), estimates: &mut estimates };
    let checks: Vec<CheckOutcome> = scenario
        .checks
        .iter()
        .map(|check| {
            let inputs = to_value(check);
            match ctx.run(check) {
                Ok((result, pass)) => CheckOutcome { check: check.name().into(), inputs, result, pass, error: None },
                Err(e) => CheckOutcome { check: check.name().into(), inputs, result: Value::Null, pass: false, error: Some(e.to_string()) },
            }
        })
        .collect();
    let pass = checks.iter().all(|c| c.pass);
    ScenarioRun {
        report: ScenarioReport { scenario: scenario.clone(), seed: opts.seed, tolerance_scale: opts.tolerance_scale, checks, pass },
        trajectory: solved.ok(),
        estimates,
    }
}

/// `t,x,xprime` rows at every knot, 12 significant digits.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,x,xprime\n");
    for ((t, x), d) in traj.knots.iter().zip(&traj.values).zip(&traj.derivs) {
        // adding zero folds -0 into 0
        out.push_str(&format!("{:.11e},{:.11e},{:.11e}\n", t + 0.0, x + 0.0, d + 0.0));
    }
    out
}

/// Write `report.json`, and `x.csv` plus `trajectory.json` when a trajectory
/// exists, into `root/<name>`. Files are staged in a sibling directory and
/// moved into place with one rename, so readers never see a partial set.
pub fn write_artifacts(run: &ScenarioRun, root: &Path) -> io::Result<PathBuf> {
    fs::create_dir_all(root)?;
    let name = &run.report.scenario.name;
    let target = root.join(name);
    let staging = root.join(format!(".{name}.partial-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir(&staging)?;
    let report = serde_json::to_string_pretty(&run.report).map_err(io::Error::other)?;
    fs::write(staging.join("report.json"), report + "\n")?;
    if let Some(traj) = &run.trajectory {
        fs::write(staging.join("x.csv"), trajectory_csv(traj))?;
        let doc = json!({
            "horizon": traj.horizon,
            "knots": traj.knots,
            "values": traj.values,
            "derivs": traj.derivs,
            "estimates": run.estimates,
        });
        fs::write(staging.join("trajectory.json"), serde_json::to_string(&doc).map_err(io::Error::other)? + "\n")?;
    }
    if target.exists() {
        fs::remove_dir_all(&target)?;
    }
    fs::rename(&staging, &target)?;
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    const CLASSIC: &str = r#"{
        "name": "classic",
        "problem": {"a": 0.0, "family": {"kind": "finite-support", "b": [-1.0], "tau": {"c": 0.0, "delta": 1.0}}, "history": {"preset": "constant", "value": 1.0}},
        "horizon": 2.0,
        "checks": [{"check": "solve", "expect": [{"t": 1.0, "x": 0.0, "tol": 1e-8}, {"t": 2.0, "x": -0.5, "tol": 1e-8}]}]
    }"#;

    #[test]
    fn catalog_has_every_check() {
        let names: Vec<_> = list_checks().iter().map(|c| c.name).collect();
        assert_eq!(names.len(), 9);
        assert!(names.contains(&"semigroup-law") && names.contains(&"mild-solution"));
    }

    #[test]
    fn grid_points() {
        assert_eq!(Grid::Uniform { from: 0.0, to: 1.0, n: 3 }.points(), vec![0.0, 0.5, 1.0]);
        assert_eq!(Grid::List(vec![2.0]).points(), vec![2.0]);
    }

    #[test]
    fn schema_errors_carry_position() {
        let err = parse_scenario("{\n  \"name\": 3\n}", Path::new("x.json")).unwrap_err();
        match err {
            ScenarioError::Schema { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn classic_scenario_passes() {
        let sc = parse_scenario(CLASSIC, Path::new("classic.json")).unwrap();
        let run = run_scenario(&sc, RunOptions::default());
        assert!(run.report.pass, "{:?}", run.report.checks);
        assert!(trajectory_csv(run.trajectory.as_ref().unwrap()).starts_with("t,x,xprime\n0.00000000000e0,"));
    }

    #[test]
    fn random_histories_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let h = random_history(&mut rng);
            assert_eq!(h.left_edge(), -2.0);
        }
    }
}
