//! Fixed-order quadrature on sub-steps.

use serde::{Deserialize, Serialize};

const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_86),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_86),
];

const SIMPSON: [(f64, f64); 3] = [(-1.0, 1.0 / 3.0), (0.0, 4.0 / 3.0), (1.0, 1.0 / 3.0)];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    /// Four-point Gauss-Legendre, exact for degree 7.
    #[default]
    GaussLegendre4,
    Simpson,
}

impl QuadratureRule {
    /// Nodes and weights on the reference interval `[-1, 1]`.
    pub fn reference(&self) -> &'static [(f64, f64)] {
        match self {
            QuadratureRule::GaussLegendre4 => &GL4,
            QuadratureRule::Simpson => &SIMPSON,
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .reference()
            .iter()
            .map(|&(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }

    /// Composite rule over consecutive breakpoints.
    pub fn integrate_composite<F: FnMut(f64) -> f64>(&self, breakpoints: &[f64], mut f: F) -> f64 {
        breakpoints
            .windows(2)
            .map(|w| self.integrate(w[0], w[1], &mut f))
            .sum()
    }

    /// Order of the local truncation error in the step size.
    pub fn degree_of_exactness(&self) -> usize {
        match self {
            QuadratureRule::GaussLegendre4 => 7,
            QuadratureRule::Simpson => 3,
        }
    }
}
