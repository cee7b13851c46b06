//! Reference solver for truncated families: classical RK4 on a fine grid
//! with its own cubic Hermite lookup for delayed values.
//!
//! Shares nothing with the main stepper beyond the problem description, so
//! agreement between the two is evidence for both.

use serde::{Deserialize, Serialize};

use crate::coefficients::TailBound;
use crate::error::{Error, Result};
use crate::stepper::{ProblemSpec, Trajectory};

/// Default truncation tolerance for infinite families.
pub const ORACLE_TRUNCATION_EPS: f64 = 1e-10;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Grid spacing; default `tau_1 / 200`.
    pub h_fine: Option<f64>,
    /// Terms `b_1..b_N` kept; default from the truncation index at `1e-10`.
    pub n_trunc: Option<usize>,
}

/// Oracle trajectory and the truncation it was computed with.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleSolution {
    pub trajectory: Trajectory,
    pub n_trunc: usize,
    pub h_fine: f64,
    /// Bound on the forcing dropped by truncation, when certified.
    pub model_error_bound: Option<f64>,
}

struct Grid {
    t: Vec<f64>,
    x: Vec<f64>,
    dx: Vec<f64>,
}

impl Grid {
    /// Cubic Hermite lookup at `s` inside the computed range.
    fn lookup(&self, s: f64) -> f64 {
        let n = self.t.len();
        if n == 1 {
            return self.x[0];
        }
        let j = match self.t.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(j) => return self.x[j],
            Err(j) => j.clamp(1, n - 1) - 1,
        };
        let h = self.t[j + 1] - self.t[j];
        let u = ((s - self.t[j]) / h).clamp(0.0, 1.0);
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        h00 * self.x[j] + h * h10 * self.dx[j] + h01 * self.x[j + 1] + h * h11 * self.dx[j + 1]
    }
}

/// Solve the family truncated at `N` through `T` by RK4.
pub fn oracle_solve(spec: &ProblemSpec, horizon: f64, cfg: &OracleConfig) -> Result<OracleSolution> {
    let fam = &spec.family;
    let phi = &spec.history;
    let tau1 = fam.tau1();
    let h = cfg.h_fine.unwrap_or(tau1 / 200.0);
    if !(h > 0.0 && h <= tau1) {
        return Err(Error::InvalidArgument(format!("h_fine = {h} must lie in (0, tau_1 = {tau1}]")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be finite and > 0, got {horizon}")));
    }
    let env = phi.upper_envelope();
    let reach = fam.delays().first_index_at_least(horizon).saturating_sub(1);
    let n_trunc = match cfg.n_trunc {
        Some(n) => n,
        None => {
            let eps = ORACLE_TRUNCATION_EPS / env.scale.max(f64::MIN_POSITIVE);
            fam.truncation_index(&env.weight, eps)?.max(reach)
        }
    };
    let model_error_bound = if n_trunc < reach {
        None
    } else {
        match fam.tail_sum_bound(&env.weight, n_trunc + 1) {
            Ok(TailBound::Finite(v)) => Some(env.scale * v),
            _ => None,
        }
    };
    let terms: Vec<(f64, f64)> = (1..=n_trunc).map(|i| (fam.b(i), fam.tau(i))).filter(|p| p.0 != 0.0).collect();

    // grid: kinks at delays and pairwise delay sums, multiples of tau_1, then uniform refinement
    let mut marks = vec![0.0, horizon];
    let mut k = 1.0;
    while k * tau1 < horizon {
        marks.push(k * tau1);
        k += 1.0;
    }
    let delays: Vec<f64> = terms.iter().map(|p| p.1).filter(|&d| d < horizon).collect();
    for (p, &d) in delays.iter().enumerate().take(200) {
        marks.push(d);
        for &e in delays.iter().skip(p).take(200 - p) {
            if d + e < horizon {
                marks.push(d + e);
            }
        }
    }
    marks.sort_by(f64::total_cmp);
    marks.dedup_by(|b, a| *b - *a <= 1e-12 * horizon.max(1.0));
    let mut times = vec![0.0];
    for w in marks.windows(2) {
        let n = ((w[1] - w[0]) / h).ceil().max(1.0) as usize;
        times.extend((1..=n).map(|j| if j == n { w[1] } else { w[0] + (w[1] - w[0]) * j as f64 / n as f64 }));
    }
    *times.last_mut().unwrap() = horizon;

    let a = spec.a;
    let mut grid = Grid { t: vec![0.0], x: vec![phi.value(0.0)], dx: vec![] };
    let past = |g: &Grid, s: f64| if s <= 0.0 { phi.value(s) } else { g.lookup(s) };
    let rhs = |g: &Grid, t: f64, x: f64| a * x + terms.iter().map(|&(b, tau)| b * past(g, t - tau)).sum::<f64>();
    let d0 = rhs(&grid, 0.0, grid.x[0]);
    grid.dx.push(d0);
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let dt = t1 - t0;
        let x0 = *grid.x.last().unwrap();
        let k1 = *grid.dx.last().unwrap();
        let k2 = rhs(&grid, t0 + 0.5 * dt, x0 + 0.5 * dt * k1);
        let k3 = rhs(&grid, t0 + 0.5 * dt, x0 + 0.5 * dt * k2);
        let k4 = rhs(&grid, t1, x0 + dt * k3);
        let x1 = x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let d1 = rhs(&grid, t1, x1);
        grid.t.push(t1);
        grid.x.push(x1);
        grid.dx.push(d1);
    }
    Ok(OracleSolution {
        trajectory: Trajectory { problem: spec.clone(), horizon, knots: grid.t, values: grid.x, derivs: grid.dx },
        n_trunc,
        h_fine: h,
        model_error_bound,
    })
}

/// `max |x_1 - x_2|` over `n_samples` uniform points of `[lo, hi]` and every
/// knot of either trajectory inside it.
pub fn compare_trajectories(first: &Trajectory, second: &Trajectory, lo: f64, hi: f64, n_samples: usize) -> Result<f64> {
    if !(lo <= hi) {
        return Err(Error::InvalidArgument(format!("empty comparison interval [{lo}, {hi}]")));
    }
    let mut points: Vec<f64> = (0..n_samples.max(2))
        .map(|j| lo + (hi - lo) * j as f64 / (n_samples.max(2) - 1) as f64)
        .collect();
    points.extend(first.knots.iter().chain(&second.knots).copied().filter(|&t| t >= lo && t <= hi));
    let mut worst: f64 = 0.0;
    for t in points {
        worst = worst.max((first.eval(t)? - second.eval(t)?).abs());
    }
    Ok(worst)
}
